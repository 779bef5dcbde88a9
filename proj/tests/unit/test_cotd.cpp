#include <gtest/gtest.h>

#include "../support/scripted.hpp"
#include "cotools/cotd.hpp"
#include "json.hpp"

using namespace cotools;
using cotools::testing::Scripter;
using cotools::testing::ScriptedCase;

namespace {

std::size_t count(const DecodeTrace& t, EventKind k) {
  return static_cast<std::size_t>(
      std::count_if(t.events.begin(), t.events.end(), [k](const TraceEvent& e) { return e.kind == k; }));
}

Scripter scripted_all() {
  Scripter s(cotools::testing::func13_pool(), templates_for("arith4"));
  for (const auto& c : cotools::testing::scripted_suite()) s.add(c);
  return s;
}

DecodeLimits wide() {
  DecodeLimits l;
  l.max_tokens = 256;
  return l;
}

}  // namespace

TEST(Templates, KbRetrievalPrompt) {
  EXPECT_EQ(build_retrieval_prompt("Q", "", templates_for("kbsim")), "Question: Q\nAnswer: The answer is");
}

TEST(Templates, ArithRetrievalPrompt) {
  EXPECT_EQ(templates_for("arith4").retrieval_template, "{query} Let's think step by step.{fragment}");
  EXPECT_EQ(build_retrieval_prompt("q", " 1+2=", templates_for("arith4")), "q Let's think step by step. 1+2=");
}

TEST(Templates, FragmentKeptByteExact) {
  EXPECT_EQ(build_retrieval_prompt("q", "a\n", templates_for("func13")), "Q: q\nA: a\n");
}

TEST(Templates, AllValidate) {
  for (const auto& id : template_ids()) EXPECT_NO_THROW(validate_templates(templates_for(id)));
  PromptTemplates t = templates_for("arith4");
  t.retrieval_template = "{query} only";
  EXPECT_THROW(validate_templates(t), Error);
  EXPECT_THROW(templates_for("nope"), Error);
}

TEST(Templates, FillRequiresEveryKey) {
  EXPECT_EQ(fill_template("a{x}b", {{"x", "1"}}), "a1b");
  try {
    fill_template("a{x}b", {{"x", "1"}, {"y", "2"}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MissingPlaceholder);
  }
  // Substituted text is not rescanned.
  EXPECT_EQ(fill_template("{x}", {{"x", "{x}"}}), "{x}");
}

TEST(ParseCall, Grammar) {
  const ToolPool pool = cotools::testing::func13_pool();
  const ToolSpec& add = pool.get("add");
  EXPECT_EQ(parse_call(R"(add(a="3", b="4"))", add), (std::vector<std::string>{"3", "4"}));
  EXPECT_EQ(parse_call(R"(sure: add( a = "1" ,b="2" ) then add(a="9", b="9"))", add),
            (std::vector<std::string>{"1", "2"}));
  try {
    parse_call(R"(add(a=3, b=4))", add);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ParamParseFailure);
  }
  EXPECT_THROW(parse_call(R"(subtract(a="3", b="4"))", add), Error);
}

TEST(Splice, Concatenates) {
  EXPECT_EQ(splice_result("3+4=", "7"), "3+4=7");
  EXPECT_EQ(splice_result("0.1+0.2=", format_number(0.1 + 0.2)), "0.1+0.2=0.30000000000000004");
}

TEST(FillParameters, ScriptedCallRoundTrips) {
  Scripter s(cotools::testing::func13_pool(), templates_for("arith4"));
  ScriptedCase c{"m", "What is 6 times 7?", "6*7=42. The answer is 42.", {{4, "multiply", {"6", "7"}, "42", {}}}};
  s.add(c);
  const auto comp = s.components();
  const ToolSpec& spec = comp.pool->get("multiply");
  const FilledCall fc = fill_parameters(c.query, "6*7=", spec, s.lm(), s.templates());
  EXPECT_EQ(fc.generated, R"(multiply(a="6", b="7"))");
  EXPECT_EQ(fc.args, (std::vector<std::string>{"6", "7"}));
  EXPECT_EQ(execute_tool_strict(spec, fc.args), "42");
}

TEST(Decode, SingleScriptedCall) {
  const Scripter s = scripted_all();
  const auto t = generate_with_tools("What is 3 plus 4?", s.components(), wide());
  EXPECT_EQ(t.final_answer, "3+4=7. The answer is 7.");
  EXPECT_EQ(count(t, EventKind::CallSite), 1u);
  EXPECT_EQ(count(t, EventKind::Called), 1u);
  const auto called = std::find_if(t.events.begin(), t.events.end(),
                                   [](const TraceEvent& e) { return e.kind == EventKind::Called; });
  EXPECT_EQ(called->tool_id, "add");
  EXPECT_EQ(called->args, (std::vector<std::string>{"3", "4"}));
  EXPECT_EQ(called->result, "7");
  EXPECT_EQ(t.stop_reason, "end");
  EXPECT_FALSE(t.truncated);
}

TEST(Decode, JudgeBelowThresholdIsPlainGreedy) {
  const Scripter s = scripted_all();
  DecodeLimits l = wide();
  l.theta = 1.0;
  const std::string q = "Ann has 2468 coins and gets 136 more, then splits them 7 ways.";
  const auto t = generate_with_tools(q, s.components(), l);
  EXPECT_EQ(count(t, EventKind::CallSite), 0u);
  EXPECT_EQ(t.final_answer, greedy_decode(s.lm(), build_generation_prompt(q, s.templates()), 256));

  DecodeLimits none = wide();
  none.max_tool_calls = 0;
  const auto u = generate_with_tools(q, s.components(), none);
  EXPECT_EQ(trace_to_jsonl(u), trace_to_jsonl(t));
}

TEST(Decode, NoJudgeNeverCalls) {
  const Scripter s = scripted_all();
  CotoolsComponents c = s.components();
  c.judge = nullptr;
  const auto t = generate_with_tools("What is 3 plus 4?", c, wide());
  EXPECT_EQ(t.tool_calls, 0u);
}

TEST(Decode, ScriptedSuiteByteExact) {
  const Scripter s = scripted_all();
  for (const auto& c : cotools::testing::scripted_suite()) {
    const auto t = generate_with_tools(c.query, s.components(), wide());
    EXPECT_EQ(t.final_answer, c.answer) << c.name;
    EXPECT_EQ(t.tool_calls, c.calls.size()) << c.name;
    EXPECT_EQ(replay(t), t.final_answer) << c.name;
  }
}

TEST(Decode, ToolErrorsSpliceSentinel) {
  const Scripter s = scripted_all();
  for (const char* q : {"What is 1 over 0?", "What is 6 plus 6?"}) {
    const auto t = generate_with_tools(q, s.components(), wide());
    const auto called = std::find_if(t.events.begin(), t.events.end(),
                                     [](const TraceEvent& e) { return e.kind == EventKind::Called; });
    ASSERT_NE(called, t.events.end());
    EXPECT_FALSE(called->ok);
    EXPECT_EQ(called->result, "[TOOL_ERROR]");
    EXPECT_NE(t.final_answer.find("[TOOL_ERROR]"), std::string::npos);
  }
}

TEST(Decode, MaxTokensTruncates) {
  const Scripter s = scripted_all();
  DecodeLimits l = wide();
  l.max_tokens = 3;
  const auto t = generate_with_tools("What is 3 plus 4?", s.components(), l);
  EXPECT_TRUE(t.truncated);
  EXPECT_EQ(t.stop_reason, "max_tokens");
  EXPECT_EQ(t.final_answer, "3+4");
}

TEST(Decode, TraceJsonlSummary) {
  const Scripter s = scripted_all();
  const auto t = generate_with_tools("What is 3 plus 4?", s.components(), wide());
  const std::string jsonl = trace_to_jsonl(t);
  std::vector<nlohmann::json> lines;
  std::size_t start = 0;
  while (start < jsonl.size()) {
    const auto end = jsonl.find('\n', start);
    lines.push_back(nlohmann::json::parse(jsonl.substr(start, end - start)));
    start = end + 1;
  }
  ASSERT_EQ(lines.size(), t.events.size() + 1);
  EXPECT_EQ(lines.back()["final_answer"], t.final_answer);
  EXPECT_EQ(lines.back()["counts"]["tool_calls"], 1);
  EXPECT_EQ(lines[0]["event"], "token");
  EXPECT_FALSE(render_trace(t).empty());
}

TEST(Decode, MismatchedJudgeWidth) {
  const Scripter s = scripted_all();
  CotoolsComponents c = s.components();
  JudgeHead wrong{Mat(3, 1), Mat(3, 1), Mat(1, 1)};
  c.judge = &wrong;
  try {
    generate_with_tools("What is 3 plus 4?", c, wide());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DimMismatch);
  }
}
