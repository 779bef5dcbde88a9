#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cotools/adapters.hpp"
#include "cotools/lm.hpp"

namespace cotools {

enum class ParamKind { Number, String, Entity };

std::string_view param_kind_name(ParamKind k);
ParamKind parse_param_kind(std::string_view s);

struct ParamSpec {
  std::string name;
  ParamKind kind = ParamKind::Number;
};

struct ToolSpec {
  std::string tool_id;
  std::string name;
  std::string description;
  std::vector<ParamSpec> params;
  std::string executor;                       // registered executor name
  std::map<std::string, std::string> table;   // inline lookup table for KB tools
  bool seen = true;
};

void validate_tool_spec(const ToolSpec& spec);

// Registration yields a new snapshot; existing snapshots stay valid.
class ToolPool {
 public:
  std::size_t size() const noexcept { return tools_.size(); }
  bool empty() const noexcept { return tools_.empty(); }
  const ToolSpec& at(std::size_t i) const { return tools_.at(i); }
  const ToolSpec* find(std::string_view tool_id) const;
  const ToolSpec& get(std::string_view tool_id) const;
  const std::vector<ToolSpec>& tools() const noexcept { return tools_; }
  // Changes whenever the membership changes; indexes record it.
  std::uint64_t generation() const noexcept { return generation_; }
  std::string fingerprint() const;

  void add(ToolSpec spec);

 private:
  std::vector<ToolSpec> tools_;
  std::map<std::string, std::size_t, std::less<>> by_id_;
  std::uint64_t generation_ = 0;
};

ToolPool register_tool(const ToolPool& pool, ToolSpec spec);
// Keeps the tools whose ids are listed, in list order.
ToolPool subset_pool(const ToolPool& pool, const std::vector<std::string>& ids);

std::string render_tool_prompt(const ToolSpec& spec);

inline constexpr std::string_view kToolPromptVersion = "toolprompt.v1";

struct IndexProvenance {
  std::string encoder_hash;
  std::string lm_hash;
  std::string template_version;
  std::string pool_fingerprint;
  friend bool operator==(const IndexProvenance&, const IndexProvenance&) = default;
};

struct ToolIndex {
  std::vector<std::pair<std::string, Vec>> entries;
  IndexProvenance provenance;
  std::size_t size() const noexcept { return entries.size(); }
};

// One vector per tool: encode_tool(end_hidden(render_tool_prompt(spec))).
ToolIndex build_tool_index(const ToolPool& pool, const Retriever& r, const LanguageModel& lm);
// Same, from hidden states that were computed elsewhere (e.g. an imported trace).
ToolIndex build_tool_index_from_hidden(const ToolPool& pool, const std::map<std::string, Vec>& hidden,
                                       const Retriever& r, const std::string& lm_hash);
// ProvenanceMismatch unless the index was built from exactly these inputs.
void check_index_provenance(const ToolIndex& index, const ToolPool& pool, const Retriever& r,
                            const std::string& lm_hash);

struct ToolResult {
  bool ok = false;
  std::string text;   // rendered result, or "[TOOL_ERROR]"
  std::string error;  // diagnostic when !ok
};

inline constexpr std::string_view kToolErrorSentinel = "[TOOL_ERROR]";

// Shortest decimal that round-trips the double ("2", "0.30000000000000004").
// Fixed notation for magnitudes in [1e-6, 1e21), scientific otherwise.
std::string format_number(double x);
// Strict parse of a decimal number; no trailing garbage.
std::optional<double> parse_number(std::string_view s);

// Throws ArityMismatch, CoercionFailure, DomainError, UnknownTool.
std::string execute_tool_strict(const ToolSpec& spec, const std::vector<std::string>& args);
// Same, but errors become a structured result carrying the sentinel.
ToolResult execute_tool(const ToolSpec& spec, const std::vector<std::string>& args);

std::vector<std::string> builtin_executors();
std::vector<ToolSpec> arith4_tools();
std::vector<ToolSpec> func13_tools();

std::string tool_pool_to_json(const ToolPool& pool);
ToolPool tool_pool_from_json(std::string_view text);
void save_tool_pool(const std::filesystem::path& path, const ToolPool& pool);
ToolPool load_tool_pool(const std::filesystem::path& path);

enum class TraceRole { QueryPrompt, ToolPrompt };

struct TraceRecord {
  std::string text;
  TraceRole role = TraceRole::QueryPrompt;
  std::optional<std::string> gold_tool_id;  // for tool prompts: the tool's own id
  Vec hidden;
};

struct HiddenTrace {
  std::size_t dim = 0;
  std::vector<TraceRecord> records;
};

void export_hidden_trace(const std::filesystem::path& path, const HiddenTrace& trace);
HiddenTrace import_hidden_trace(const std::filesystem::path& path);
HiddenTrace parse_hidden_trace(std::string_view jsonl);
std::string hidden_trace_to_jsonl(const HiddenTrace& trace);

}  // namespace cotools
