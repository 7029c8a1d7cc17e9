#pragma once

#include "thinkbrake/toolcall.hpp"
#include "thinkbrake/trace.hpp"

#include <string>
#include <vector>

namespace thinkbrake {

/// One benchmark item: a rendered prompt (chat template already applied,
/// ending at the assistant turn), the tool schemas it offers, and the
/// ground truth its answer is scored against.
struct Trial {
  std::string id;
  Category category = Category::simple;
  Split split = Split::non_live;
  std::string prompt;
  std::vector<json> tool_schemas;
  GroundTruthSpec ground_truth;
};

}  // namespace thinkbrake
