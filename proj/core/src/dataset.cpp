#include "thinkbrake/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <map>

namespace thinkbrake {

namespace fs = std::filesystem;

const std::string& default_prompt_template() {
  static const std::string tmpl =
      "<|im_start|>system\n"
      "# Tools\n\n"
      "You may call one or more functions to assist with the user query.\n\n"
      "You are provided with function signatures within <tools></tools> XML "
      "tags:\n"
      "<tools>\n"
      "{{tools}}\n"
      "</tools>\n\n"
      "For each function call, return a json object with function name and "
      "arguments within <tool_call></tool_call> XML tags:\n"
      "<tool_call>\n"
      "{\"name\": <function-name>, \"arguments\": <args-json-object>}\n"
      "</tool_call><|im_end|>\n"
      "<|im_start|>user\n"
      "{{question}}<|im_end|>\n"
      "<|im_start|>assistant\n";
  return tmpl;
}

namespace {

void replace_all(std::string& text, const std::string& from,
                 const std::string& to) {
  size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
}

std::string question_text(const json& q, const std::string& where) {
  // Accepts a bare string, a list of turns, or BFCL's list-of-turn-lists.
  if (q.is_string()) return q.get<std::string>();
  const json* turns = &q;
  if (q.is_array() && !q.empty() && q[0].is_array()) turns = &q[0];
  if (turns->is_array()) {
    std::string last_user;
    for (const auto& turn : *turns) {
      if (turn.is_object() && turn.value("role", "") == "user" &&
          turn.contains("content"))
        last_user = turn["content"].get<std::string>();
    }
    if (!last_user.empty()) return last_user;
  }
  throw ConfigError(where + ": cannot extract a user question");
}

}  // namespace

std::string render_prompt(const std::string& prompt_template,
                          const std::vector<json>& tool_schemas,
                          const std::string& question) {
  std::string tools;
  for (size_t i = 0; i < tool_schemas.size(); ++i) {
    if (i) tools += "\n";
    tools += tool_schemas[i].dump();
  }
  std::string out = prompt_template;
  replace_all(out, "{{tools}}", tools);
  replace_all(out, "{{question}}", question);
  return out;
}

GroundTruthSpec parse_ground_truth(const json& ground_truth,
                                   const std::string& where) {
  if (!ground_truth.is_array() || ground_truth.empty())
    throw ConfigError(where + ": ground_truth must be a non-empty array");
  GroundTruthSpec spec;
  for (const auto& option : ground_truth) {
    if (!option.is_object() || option.size() != 1)
      throw ConfigError(where +
                        ": each ground-truth option must be a single-key "
                        "object {name: {param: [values]}}");
    GroundTruthCall call;
    auto it = option.begin();
    call.name = it.key();
    const json& params = it.value();
    if (!params.is_object())
      throw ConfigError(where + ": parameters of " + call.name +
                        " must be an object");
    for (auto p = params.begin(); p != params.end(); ++p) {
      if (!p.value().is_array() || p.value().empty())
        throw ConfigError(where + ": allowed values for " + call.name + "." +
                          p.key() + " must be a non-empty array");
      bool optional = false;
      std::vector<json> allowed;
      for (const auto& v : p.value()) {
        // BFCL marks optional parameters with an empty-string sentinel.
        if (v.is_string() && v.get<std::string>().empty()) optional = true;
        allowed.push_back(v);
      }
      call.params[p.key()] = std::move(allowed);
      if (!optional) call.required.insert(p.key());
    }
    spec.options.push_back(std::move(call));
  }
  return spec;
}

namespace {

std::map<std::string, json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset file: " + path.string());
  std::map<std::string, json> by_id;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) throw ConfigError(where + ": invalid JSON");
    if (!j.contains("id") || !j["id"].is_string())
      throw ConfigError(where + ": missing string field 'id'");
    if (!by_id.emplace(j["id"].get<std::string>(), std::move(j)).second)
      throw ConfigError(where + ": duplicate id");
  }
  return by_id;
}

}  // namespace

std::vector<Trial> load_dataset(const std::string& manifest_path,
                                const std::string& prompt_template,
                                std::vector<std::string>* warnings) {
  std::ifstream in(manifest_path);
  if (!in) throw ConfigError("cannot open dataset manifest: " + manifest_path);
  json manifest = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (manifest.is_discarded())
    throw ConfigError(manifest_path + ": invalid JSON");
  if (!manifest.contains("sets") || !manifest["sets"].is_array())
    throw ConfigError(manifest_path + ": missing 'sets' array");

  const fs::path root = fs::path(manifest_path).parent_path();
  const std::string& tmpl =
      prompt_template.empty() ? default_prompt_template() : prompt_template;

  std::vector<Trial> trials;
  for (const auto& set : manifest["sets"]) {
    const std::string cat_name = set.value("category", "");
    auto category = category_from_string(cat_name);
    if (!category)
      throw ConfigError(manifest_path + ": unknown category '" + cat_name +
                        "' (supported: simple, multiple, parallel, "
                        "multi-parallel)");
    auto split = split_from_string(set.value("split", "non-live"));
    if (!split)
      throw ConfigError(manifest_path + ": unknown split '" +
                        set.value("split", "") + "'");

    const fs::path qpath = root / set.at("questions").get<std::string>();
    const fs::path apath = root / set.at("answers").get<std::string>();
    auto questions = read_jsonl(qpath);
    auto answers = read_jsonl(apath);
    if (questions.empty() && warnings)
      warnings->push_back("dataset file is empty: " + qpath.string());

    for (auto& [id, q] : questions) {
      const std::string where = qpath.string() + " id=" + id;
      auto a = answers.find(id);
      if (a == answers.end())
        throw ConfigError(where + ": no possible-answer entry");
      Trial t;
      t.id = id;
      t.category = *category;
      t.split = *split;
      if (!q.contains("function") || !q["function"].is_array())
        throw ConfigError(where + ": missing 'function' schema list");
      t.tool_schemas = q["function"].get<std::vector<json>>();
      t.prompt = render_prompt(tmpl, t.tool_schemas,
                               question_text(q.at("question"), where));
      if (t.prompt.empty()) throw ConfigError(where + ": empty prompt");
      t.ground_truth = parse_ground_truth(a->second.at("ground_truth"),
                                          apath.string() + " id=" + id);
      trials.push_back(std::move(t));
    }
  }
  return trials;
}

std::map<std::string, GroundTruthSpec> load_ground_truth_file(
    const std::string& path) {
  std::map<std::string, GroundTruthSpec> out;
  for (auto& [id, j] : read_jsonl(path))
    out[id] =
        parse_ground_truth(j.at("ground_truth"), path + " id=" + id);
  return out;
}

}  // namespace thinkbrake
