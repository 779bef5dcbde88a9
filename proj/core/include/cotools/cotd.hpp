#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cotools/adapters.hpp"
#include "cotools/lm.hpp"
#include "cotools/toolpool.hpp"

namespace cotools {

// Placeholders: {query}, {fragment}, {tool_name}, {tool_signature}.
struct PromptTemplates {
  std::string version;
  std::string cot_template;        // {query}
  std::string retrieval_template;  // {query} {fragment}
  std::string calling_template;    // {query} {fragment} {tool_name} {tool_signature} + demonstrations
  std::string call_stop = ")";     // parameter generation stops once this appears
};

void validate_templates(const PromptTemplates& t);
// Known ids: "arith4", "func13", "kbsim".
PromptTemplates templates_for(std::string_view bench);
std::vector<std::string> template_ids();

// Substitutes {key} for each entry; every key must occur in the template.
std::string fill_template(std::string_view tpl, const std::map<std::string, std::string>& values);

std::string tool_signature(const ToolSpec& spec);
std::string build_generation_prompt(std::string_view query, const PromptTemplates& t);
std::string build_retrieval_prompt(std::string_view query, std::string_view fragment, const PromptTemplates& t);
std::string build_calling_prompt(std::string_view query, std::string_view fragment, const ToolSpec& spec,
                                 const PromptTemplates& t);

// Leftmost `name(p1="v1", p2="v2")` for this tool; args in schema order.
// Throws ParamParseFailure.
std::vector<std::string> parse_call(std::string_view text, const ToolSpec& spec);
std::string call_regex_pattern(const ToolSpec& spec);

struct FilledCall {
  std::string generated;
  std::vector<std::string> args;
};

// Greedy-decodes from the calling prompt until call_stop, END or the token
// limit, then applies parse_call.
FilledCall fill_parameters(std::string_view query, std::string_view fragment, const ToolSpec& spec,
                           const LanguageModel& lm, const PromptTemplates& t, std::size_t max_tokens = 64);

std::string splice_result(std::string_view fragment, std::string_view result);

enum class EventKind { TokenEmitted, CallSite, Retrieved, Called, Spliced };

struct TraceEvent {
  EventKind kind = EventKind::TokenEmitted;
  int token_id = -1;            // TokenEmitted
  std::string text;             // TokenEmitted token text, Spliced text
  double judge_score = 0.0;     // TokenEmitted, CallSite
  std::size_t position = 0;     // CallSite: answer length at the call
  std::vector<ScoredTool> ranked;  // Retrieved (top entries)
  std::string tool_id;          // Called
  std::vector<std::string> args;
  std::string result;           // Called: result text or sentinel
  bool ok = true;               // Called
  std::string error;            // Called
};

struct DecodeTrace {
  std::vector<TraceEvent> events;
  std::string final_answer;
  bool truncated = false;
  std::size_t tool_calls = 0;
  std::size_t tokens = 0;
  std::string stop_reason;  // "end", "max_tokens", "context"
};

struct DecodeLimits {
  std::size_t max_tokens = 128;
  std::size_t max_tool_calls = 4;
  double theta = kDefaultTheta;
  std::size_t max_call_tokens = 64;
  std::size_t ranked_in_trace = 5;
};

struct CotoolsComponents {
  const LanguageModel* lm = nullptr;
  const JudgeHead* judge = nullptr;  // null: never call
  const Retriever* retriever = nullptr;
  const ToolIndex* index = nullptr;
  const ToolPool* pool = nullptr;
  const PromptTemplates* templates = nullptr;
};

DecodeTrace generate_with_tools(std::string_view query, const CotoolsComponents& c, const DecodeLimits& limits);
// Plain greedy continuation of `prompt` (no judge).
std::string greedy_decode(const LanguageModel& lm, std::string_view prompt, std::size_t max_tokens);

// Concatenation of emitted tokens (END excluded) and spliced text.
std::string replay(const DecodeTrace& trace);
std::string trace_to_jsonl(const DecodeTrace& trace);
std::string render_trace(const DecodeTrace& trace);

}  // namespace cotools
