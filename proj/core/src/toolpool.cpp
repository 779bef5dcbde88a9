#include "cotools/toolpool.hpp"

#include <set>
#include <sstream>

#include "json.hpp"

namespace cotools {

using nlohmann::json;

std::string_view param_kind_name(ParamKind k) {
  switch (k) {
    case ParamKind::Number: return "number";
    case ParamKind::String: return "string";
    case ParamKind::Entity: return "entity";
  }
  return "number";
}

ParamKind parse_param_kind(std::string_view s) {
  if (s == "number") return ParamKind::Number;
  if (s == "string") return ParamKind::String;
  if (s == "entity") return ParamKind::Entity;
  throw Error(Errc::InvalidSpec, "unknown parameter kind " + std::string(s));
}

void validate_tool_spec(const ToolSpec& spec) {
  if (spec.tool_id.empty()) throw Error(Errc::InvalidSpec, "tool_id is empty");
  if (spec.name.empty()) throw Error(Errc::InvalidSpec, spec.tool_id + ": name is empty");
  if (spec.description.empty()) throw Error(Errc::InvalidSpec, spec.tool_id + ": description is empty");
  std::set<std::string> seen;
  for (const auto& p : spec.params) {
    if (p.name.empty()) throw Error(Errc::InvalidSpec, spec.tool_id + ": empty parameter name");
    if (!seen.insert(p.name).second) {
      throw Error(Errc::InvalidSpec, spec.tool_id + ": duplicate parameter " + p.name);
    }
  }
}

const ToolSpec* ToolPool::find(std::string_view tool_id) const {
  auto it = by_id_.find(tool_id);
  return it == by_id_.end() ? nullptr : &tools_[it->second];
}

const ToolSpec& ToolPool::get(std::string_view tool_id) const {
  const ToolSpec* t = find(tool_id);
  if (!t) throw Error(Errc::UnknownTool, "no tool " + std::string(tool_id));
  return *t;
}

void ToolPool::add(ToolSpec spec) {
  validate_tool_spec(spec);
  if (!spec.executor.empty()) {
    bool known = false;
    for (const auto& e : builtin_executors()) known = known || e == spec.executor;
    if (!known) throw Error(Errc::InvalidSpec, spec.tool_id + ": unknown executor " + spec.executor);
  }
  if (by_id_.count(spec.tool_id)) throw Error(Errc::DuplicateTool, spec.tool_id);
  by_id_.emplace(spec.tool_id, tools_.size());
  tools_.push_back(std::move(spec));
  ++generation_;
}

std::string ToolPool::fingerprint() const { return sha256_hex(tool_pool_to_json(*this)); }

ToolPool register_tool(const ToolPool& pool, ToolSpec spec) {
  ToolPool next = pool;
  next.add(std::move(spec));
  return next;
}

ToolPool subset_pool(const ToolPool& pool, const std::vector<std::string>& ids) {
  ToolPool out;
  for (const auto& id : ids) out.add(pool.get(id));
  return out;
}

std::string render_tool_prompt(const ToolSpec& spec) {
  return "tool name: " + spec.name + ", tool description: " + spec.description;
}

ToolIndex build_tool_index_from_hidden(const ToolPool& pool, const std::map<std::string, Vec>& hidden,
                                       const Retriever& r, const std::string& lm_hash) {
  ToolIndex index;
  index.entries.reserve(pool.size());
  for (const auto& spec : pool.tools()) {
    auto it = hidden.find(spec.tool_id);
    if (it == hidden.end()) throw Error(Errc::UnknownTool, "no hidden state for tool " + spec.tool_id);
    index.entries.emplace_back(spec.tool_id, encode_tool(it->second, r));
  }
  index.provenance = {retriever_hash(r), lm_hash, std::string(kToolPromptVersion), pool.fingerprint()};
  return index;
}

ToolIndex build_tool_index(const ToolPool& pool, const Retriever& r, const LanguageModel& lm) {
  std::map<std::string, Vec> hidden;
  for (const auto& spec : pool.tools()) hidden.emplace(spec.tool_id, lm.end_hidden(render_tool_prompt(spec)));
  return build_tool_index_from_hidden(pool, hidden, r, lm.content_hash());
}

void check_index_provenance(const ToolIndex& index, const ToolPool& pool, const Retriever& r,
                            const std::string& lm_hash) {
  const IndexProvenance want{retriever_hash(r), lm_hash, std::string(kToolPromptVersion), pool.fingerprint()};
  const auto& have = index.provenance;
  if (have.encoder_hash != want.encoder_hash) throw Error(Errc::ProvenanceMismatch, "index built with other encoders");
  if (have.lm_hash != want.lm_hash) throw Error(Errc::ProvenanceMismatch, "index built with another LM");
  if (have.template_version != want.template_version) {
    throw Error(Errc::ProvenanceMismatch, "index built with tool prompt " + have.template_version);
  }
  if (have.pool_fingerprint != want.pool_fingerprint) {
    throw Error(Errc::ProvenanceMismatch, "index built for a different tool pool");
  }
}

static json spec_to_json(const ToolSpec& s) {
  json params = json::array();
  for (const auto& p : s.params) params.push_back({{"name", p.name}, {"kind", param_kind_name(p.kind)}});
  json j = {{"tool_id", s.tool_id}, {"name", s.name},          {"description", s.description},
            {"params", params},     {"executor", s.executor}, {"seen", s.seen}};
  if (!s.table.empty()) j["table"] = s.table;
  return j;
}

static ToolSpec spec_from_json(const json& j) {
  static const std::set<std::string> allowed = {"tool_id", "name", "description", "params",
                                                "executor", "seen", "table"};
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw Error(Errc::InvalidSpec, "unknown tool field " + k);
  }
  ToolSpec s;
  s.tool_id = j.at("tool_id").get<std::string>();
  s.name = j.at("name").get<std::string>();
  s.description = j.at("description").get<std::string>();
  for (const auto& p : j.at("params")) {
    s.params.push_back({p.at("name").get<std::string>(), parse_param_kind(p.at("kind").get<std::string>())});
  }
  s.executor = j.value("executor", std::string());
  s.seen = j.value("seen", true);
  if (j.contains("table")) s.table = j.at("table").get<std::map<std::string, std::string>>();
  return s;
}

std::string tool_pool_to_json(const ToolPool& pool) {
  json arr = json::array();
  for (const auto& s : pool.tools()) arr.push_back(spec_to_json(s));
  return arr.dump(1);
}

ToolPool tool_pool_from_json(std::string_view text) {
  json arr;
  try {
    arr = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedRecord, std::string("tool pool: ") + e.what());
  }
  if (!arr.is_array()) throw Error(Errc::MalformedRecord, "tool pool must be a JSON array");
  ToolPool pool;
  for (const auto& j : arr) {
    try {
      pool.add(spec_from_json(j));
    } catch (const json::exception& e) {
      throw Error(Errc::InvalidSpec, std::string("tool record: ") + e.what());
    }
  }
  return pool;
}

void save_tool_pool(const std::filesystem::path& path, const ToolPool& pool) {
  write_file(path, tool_pool_to_json(pool) + "\n");
}

ToolPool load_tool_pool(const std::filesystem::path& path) { return tool_pool_from_json(read_file(path)); }

std::string hidden_trace_to_jsonl(const HiddenTrace& trace) {
  std::string out;
  for (const auto& r : trace.records) {
    json j;
    j["text"] = r.text;
    j["role"] = r.role == TraceRole::QueryPrompt ? "query_prompt" : "tool_prompt";
    if (r.gold_tool_id) j["gold_tool_id"] = *r.gold_tool_id;
    j["hidden"] = r.hidden.values();
    out += j.dump();
    out += '\n';
  }
  return out;
}

HiddenTrace parse_hidden_trace(std::string_view jsonl) {
  HiddenTrace trace;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = "trace line " + std::to_string(lineno);
    TraceRecord r;
    try {
      const json j = json::parse(line);
      r.text = j.at("text").get<std::string>();
      const std::string role = j.at("role").get<std::string>();
      if (role == "query_prompt") {
        r.role = TraceRole::QueryPrompt;
      } else if (role == "tool_prompt") {
        r.role = TraceRole::ToolPrompt;
      } else {
        throw Error(Errc::MalformedRecord, where + ": unknown role " + role);
      }
      if (j.contains("gold_tool_id") && !j.at("gold_tool_id").is_null()) {
        r.gold_tool_id = j.at("gold_tool_id").get<std::string>();
      }
      r.hidden = Vec(j.at("hidden").get<std::vector<double>>());
    } catch (const json::exception& e) {
      throw Error(Errc::MalformedRecord, where + ": " + e.what());
    }
    if (r.hidden.empty()) throw Error(Errc::MalformedRecord, where + ": empty hidden state");
    require_finite(r.hidden, where);
    if (r.role == TraceRole::ToolPrompt && !r.gold_tool_id) {
      throw Error(Errc::MalformedRecord, where + ": tool_prompt record needs gold_tool_id");
    }
    if (trace.records.empty()) {
      trace.dim = r.hidden.size();
    } else if (r.hidden.size() != trace.dim) {
      throw Error(Errc::DimMismatch, where + ": hidden size " + std::to_string(r.hidden.size()) + " vs " +
                                         std::to_string(trace.dim));
    }
    trace.records.push_back(std::move(r));
  }
  return trace;
}

void export_hidden_trace(const std::filesystem::path& path, const HiddenTrace& trace) {
  write_file(path, hidden_trace_to_jsonl(trace));
}

HiddenTrace import_hidden_trace(const std::filesystem::path& path) { return parse_hidden_trace(read_file(path)); }

}  // namespace cotools
