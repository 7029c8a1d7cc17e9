#pragma once

// BFCL-compatible dataset ingestion: question + possible-answer JSONL files
// listed by a manifest, rendered into prompts by verbatim template
// substitution ({{tools}}, {{question}}).

#include "thinkbrake/trial.hpp"

#include <map>
#include <string>
#include <vector>

namespace thinkbrake {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Qwen3-style tool prompt: system block with <tools> schemas and the
/// <tool_call> answer format, one user turn, ending at the assistant turn.
const std::string& default_prompt_template();

std::string render_prompt(const std::string& prompt_template,
                          const std::vector<json>& tool_schemas,
                          const std::string& question);

GroundTruthSpec parse_ground_truth(const json& ground_truth,
                                   const std::string& where);

/// Manifest: {"sets":[{"category":..., "split":..., "questions": <path>,
/// "answers": <path>}, ...]}, paths relative to the manifest file.
std::vector<Trial> load_dataset(const std::string& manifest_path,
                                const std::string& prompt_template,
                                std::vector<std::string>* warnings = nullptr);

/// Possible-answer JSONL ({"id":..., "ground_truth":[...]}) keyed by id.
std::map<std::string, GroundTruthSpec> load_ground_truth_file(
    const std::string& path);

}  // namespace thinkbrake
