#pragma once

// Run-configuration file (JSON) loading and flag-override merging.
// Flags win over the file; the merge is deterministic.

#include "thinkbrake/harness.hpp"

#include <optional>
#include <string>

namespace thinkbrake {

struct CliOverrides {
  std::optional<std::string> method;
  std::optional<double> tau;
  std::optional<std::string> endpoint;
  std::optional<std::string> model;
  std::optional<std::string> dataset;
  std::optional<std::string> trace_path;
  std::optional<std::string> output_dir;
  std::optional<std::string> base_records;
  std::optional<bool> record_traces;
  std::optional<int> concurrency;
};

RunConfig load_run_config(const std::string& path);
void apply_overrides(RunConfig& cfg, const CliOverrides& overrides);

/// Grid string "0,0.1,0.25,inf" -> values ("inf" allowed).
std::vector<double> parse_tau_grid(const std::string& grid);

}  // namespace thinkbrake
