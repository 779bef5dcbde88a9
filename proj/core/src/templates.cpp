#include <regex>

#include "cotools/cotd.hpp"

namespace cotools {

namespace {

// One worked problem per bench. The generation demo shows the chain of
// thought; the calling demo shows the call grammar at a call site.
constexpr std::string_view kArithQ =
    "Ann has 2468 coins. Then gets 136 more. Then splits them into 7 equal parts and keeps one. "
    "How many coins are left?";
constexpr std::string_view kArithA = "2468+136=2604. 2604/7=372. The answer is 372.";

constexpr std::string_view kFuncQ = "Let r1 be the greatest common divisor of 84 and 36. What is r1?";
constexpr std::string_view kFuncA = "gcd(84,36)=12. The answer is 12.";

constexpr std::string_view kKbQ = "What home river does Dovaki have?";
constexpr std::string_view kKbA = "Selune.";

PromptTemplates arith4() {
  PromptTemplates t;
  t.version = "arith4.v1";
  t.cot_template = "Q: " + std::string(kArithQ) + "\nA: Let's think step by step. " + std::string(kArithA) +
                   "\n\nQ: {query}\nA: Let's think step by step. ";
  t.retrieval_template = "{query} Let's think step by step.{fragment}";
  t.calling_template = "Q: " + std::string(kArithQ) +
                       "\nA: 2468+136=\nTool: add(a, b)\nCall: add(a=\"2468\", b=\"136\")"
                       "\n\nQ: {query}\nA: {fragment}\nTool: {tool_signature}\nCall: ";
  return t;
}

PromptTemplates func13() {
  PromptTemplates t;
  t.version = "func13.v1";
  t.cot_template = "Q: " + std::string(kFuncQ) + "\nA: " + std::string(kFuncA) + "\n\nQ: {query}\nA: ";
  t.retrieval_template = "Q: {query}\nA: {fragment}";
  t.calling_template = "Q: " + std::string(kFuncQ) +
                       "\nA: gcd(84,36)=\nTool: gcd(a, b)\nCall: gcd(a=\"84\", b=\"36\")"
                       "\n\nQ: {query}\nA: {fragment}\nTool: {tool_signature}\nCall: ";
  return t;
}

PromptTemplates kbsim() {
  PromptTemplates t;
  t.version = "kbsim.v1";
  t.cot_template = "Question: " + std::string(kKbQ) + "\nAnswer: The answer is " + std::string(kKbA) +
                   "\n\nQuestion: {query}\nAnswer: The answer is ";
  t.retrieval_template = "Question: {query}\nAnswer: The answer is{fragment}";
  t.calling_template = "Question: " + std::string(kKbQ) +
                       "\nAnswer: The answer is \nTool: home_river(subject)\nCall: home_river(subject=\"Dovaki\")"
                       "\n\nQuestion: {query}\nAnswer: The answer is {fragment}\nTool: {tool_signature}\nCall: ";
  return t;
}

bool has(std::string_view tpl, std::string_view key) {
  return tpl.find("{" + std::string(key) + "}") != std::string_view::npos;
}

void need(std::string_view tpl, std::string_view key, const std::string& which) {
  if (!has(tpl, key)) throw Error(Errc::MissingPlaceholder, which + " lacks {" + std::string(key) + "}");
}

std::string escape_regex(std::string_view s) {
  static const std::string special = R"(\^$.|?*+()[]{}-/)";
  std::string out;
  for (char c : s) {
    if (special.find(c) != std::string::npos) out += '\\';
    out += c;
  }
  return out;
}

// Any well-formed call, used to check that the calling template carries a
// demonstration outside its placeholders.
const std::regex& any_call() {
  static const std::regex re(R"([A-Za-z_][A-Za-z0-9_]*\(\s*[A-Za-z_][A-Za-z0-9_]*="[^"]*")");
  return re;
}

}  // namespace

void validate_templates(const PromptTemplates& t) {
  if (t.version.empty()) throw Error(Errc::InvalidArgument, "template version is empty");
  need(t.cot_template, "query", "cot template");
  need(t.retrieval_template, "query", "retrieval template");
  need(t.retrieval_template, "fragment", "retrieval template");
  need(t.calling_template, "query", "calling template");
  need(t.calling_template, "fragment", "calling template");
  if (!has(t.calling_template, "tool_signature") && !has(t.calling_template, "tool_name")) {
    throw Error(Errc::MissingPlaceholder, "calling template names no tool");
  }
  if (t.call_stop.empty()) throw Error(Errc::InvalidArgument, "call stop string is empty");
  if (!std::regex_search(t.calling_template, any_call())) {
    throw Error(Errc::InvalidArgument, "calling template has no call demonstration");
  }
}

PromptTemplates templates_for(std::string_view bench) {
  PromptTemplates t;
  if (bench == "arith4") {
    t = arith4();
  } else if (bench == "func13") {
    t = func13();
  } else if (bench == "kbsim") {
    t = kbsim();
  } else {
    throw Error(Errc::InvalidArgument, "no templates for " + std::string(bench));
  }
  validate_templates(t);
  return t;
}

std::vector<std::string> template_ids() { return {"arith4", "func13", "kbsim"}; }

std::string fill_template(std::string_view tpl, const std::map<std::string, std::string>& values) {
  std::map<std::string, bool> used;
  for (const auto& [k, v] : values) used[k] = false;
  std::string out;
  out.reserve(tpl.size() + 64);
  std::size_t i = 0;
  // Single left-to-right pass, so substituted text is never rescanned.
  while (i < tpl.size()) {
    if (tpl[i] == '{') {
      const auto close = tpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        const std::string key(tpl.substr(i + 1, close - i - 1));
        auto it = values.find(key);
        if (it != values.end()) {
          out += it->second;
          used[key] = true;
          i = close + 1;
          continue;
        }
      }
    }
    out += tpl[i++];
  }
  for (const auto& [k, u] : used) {
    if (!u) throw Error(Errc::MissingPlaceholder, "template has no {" + k + "}");
  }
  return out;
}

std::string tool_signature(const ToolSpec& spec) {
  std::string s = spec.name + "(";
  for (std::size_t i = 0; i < spec.params.size(); ++i) {
    if (i) s += ", ";
    s += spec.params[i].name;
  }
  return s + ")";
}

std::string build_generation_prompt(std::string_view query, const PromptTemplates& t) {
  return fill_template(t.cot_template, {{"query", std::string(query)}});
}

std::string build_retrieval_prompt(std::string_view query, std::string_view fragment, const PromptTemplates& t) {
  return fill_template(t.retrieval_template, {{"query", std::string(query)}, {"fragment", std::string(fragment)}});
}

std::string build_calling_prompt(std::string_view query, std::string_view fragment, const ToolSpec& spec,
                                 const PromptTemplates& t) {
  std::map<std::string, std::string> v = {{"query", std::string(query)}, {"fragment", std::string(fragment)}};
  if (has(t.calling_template, "tool_signature")) v["tool_signature"] = tool_signature(spec);
  if (has(t.calling_template, "tool_name")) v["tool_name"] = spec.name;
  return fill_template(t.calling_template, v);
}

std::string call_regex_pattern(const ToolSpec& spec) {
  std::string p = escape_regex(spec.name) + R"(\(\s*)";
  for (std::size_t i = 0; i < spec.params.size(); ++i) {
    if (i) p += R"(\s*,\s*)";
    p += escape_regex(spec.params[i].name) + R"re(\s*=\s*"([^"]*)")re";
  }
  return p + R"(\s*\))";
}

std::vector<std::string> parse_call(std::string_view text, const ToolSpec& spec) {
  const std::regex re(call_regex_pattern(spec));
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(text.begin(), text.end(), m, re)) {
    throw Error(Errc::ParamParseFailure, "no call to " + spec.name + " in \"" + std::string(text) + "\"");
  }
  std::vector<std::string> args;
  for (std::size_t i = 1; i < m.size(); ++i) args.push_back(m[i].str());
  return args;
}

std::string splice_result(std::string_view fragment, std::string_view result) {
  std::string out(fragment);
  out += result;
  return out;
}

}  // namespace cotools
