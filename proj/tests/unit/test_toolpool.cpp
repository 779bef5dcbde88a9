#include <gtest/gtest.h>

#include <set>

#include "../support/gradcheck.hpp"
#include "cotools/bench.hpp"
#include "cotools/pipeline.hpp"
#include "cotools/toolpool.hpp"

using namespace cotools;
using cotools::testing::random_vec;

namespace {

ToolSpec kb_tool(const std::string& id, const std::string& desc) {
  ToolSpec s;
  s.tool_id = id;
  s.name = id;
  s.description = desc;
  s.params = {{"subject", ParamKind::Entity}};
  s.executor = "kb_lookup";
  s.table = {{"Dovaki", "Selune"}};
  return s;
}

template <class F>
Errc code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::IoError;
}

const ToolSpec& tool(const std::string& id) {
  static const ToolPool pool = [] {
    ToolPool p;
    for (auto& t : func13_tools()) p.add(std::move(t));
    return p;
  }();
  return pool.get(id);
}

Retriever identity_retriever(std::size_t d) {
  return {EncoderHead{Mat(d, 2), Mat(d, 2), Mat(2, d)}, EncoderHead{Mat(d, 2), Mat(d, 2), Mat(2, d)},
          make_dim_weight(d)};
}

}  // namespace

TEST(ToolPool, Registration) {
  const ToolPool empty;
  const ToolPool one = register_tool(empty, kb_tool("home_river", "returns the home river of the subject"));
  EXPECT_EQ(empty.size(), 0u);
  EXPECT_EQ(one.size(), 1u);
  EXPECT_NE(one.generation(), empty.generation());
  EXPECT_EQ(code_of([&] { register_tool(one, kb_tool("home_river", "again")); }), Errc::DuplicateTool);
  EXPECT_EQ(code_of([&] { register_tool(one, kb_tool("x", "")); }), Errc::InvalidSpec);
}

TEST(ToolPool, ManyTools) {
  ToolPool pool;
  for (int i = 0; i < 1836; ++i) pool.add(kb_tool("tool_" + std::to_string(i), "returns fact " + std::to_string(i)));
  EXPECT_EQ(pool.size(), 1836u);
  EXPECT_EQ(pool.get("tool_1835").description, "returns fact 1835");
}

TEST(ToolPool, SubsetKeepsOrder) {
  ToolPool pool;
  for (const char* id : {"a", "b", "c"}) pool.add(kb_tool(id, std::string("tool ") + id));
  const ToolPool sub = subset_pool(pool, {"c", "a"});
  ASSERT_EQ(sub.size(), 2u);
  EXPECT_EQ(sub.at(0).tool_id, "c");
  EXPECT_EQ(code_of([&] { subset_pool(pool, {"zz"}); }), Errc::UnknownTool);
}

TEST(ToolPrompt, Rendering) {
  ToolSpec s = kb_tool("add", "adds two numbers");
  EXPECT_EQ(render_tool_prompt(s), "tool name: add, tool description: adds two numbers");
}

TEST(ToolPrompt, Injective) {
  Rng rng(3);
  std::set<std::pair<std::string, std::string>> specs;
  std::set<std::string> rendered;
  const std::string alphabet = "ab ,:";
  for (int i = 0; i < 2000; ++i) {
    std::string name = "n", desc = "d";
    for (std::uint64_t k = rng.below(4); k > 0; --k) name += alphabet[rng.below(2)];
    for (std::uint64_t k = rng.below(6); k > 0; --k) desc += alphabet[rng.below(alphabet.size())];
    ToolSpec s = kb_tool(name, desc);
    if (specs.insert({name, desc}).second) rendered.insert(render_tool_prompt(s));
  }
  EXPECT_EQ(rendered.size(), specs.size());
}

TEST(ToolIndex, SingleToolIsUnitVector) {
  ToolPool pool;
  pool.add(kb_tool("a", "tool a"));
  const auto idx = build_tool_index_from_hidden(pool, {{"a", Vec{3, 4}}}, identity_retriever(2), "lm");
  ASSERT_EQ(idx.size(), 1u);
  EXPECT_NEAR(l2_norm(idx.entries[0].second), 1.0, 1e-15);
}

TEST(ToolIndex, RebuildIsBitIdentical) {
  LmConfig c;
  c.d = 8;
  c.layers = 1;
  c.heads = 2;
  c.ffn = 8;
  const TransformerLm lm(init_lm(c, 4));
  Rng rng(1);
  const Retriever r = init_retriever(8, 16, rng);
  ToolPool pool;
  for (auto& t : func13_tools()) pool.add(std::move(t));
  const auto a = build_tool_index(pool, r, lm);
  const auto b = build_tool_index(pool, r, lm);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.entries[i].second, b.entries[i].second);
  EXPECT_EQ(a.provenance, b.provenance);
  check_index_provenance(a, pool, r, lm.content_hash());
  EXPECT_EQ(code_of([&] { check_index_provenance(a, pool, r, "other"); }), Errc::ProvenanceMismatch);
  const ToolPool bigger = register_tool(pool, kb_tool("extra", "an extra tool"));
  EXPECT_EQ(code_of([&] { check_index_provenance(a, bigger, r, lm.content_hash()); }), Errc::ProvenanceMismatch);
}

TEST(ToolIndex, UnseenToolAddedAfterTraining) {
  Rng rng(2);
  const Retriever r = init_retriever(6, 8, rng);
  ToolPool pool;
  std::map<std::string, Vec> hidden;
  for (int i = 0; i < 5; ++i) {
    const std::string id = "t" + std::to_string(i);
    pool.add(kb_tool(id, "tool " + id));
    hidden[id] = random_vec(6, rng);
  }
  const ToolPool grown = register_tool(pool, kb_tool("new", "a brand new tool"));
  hidden["new"] = random_vec(6, rng);
  const auto index = build_tool_index_from_hidden(grown, hidden, r, "lm");
  const Vec q = encode_query(hidden["new"], r);
  const auto ranked = score_and_rank(q, index.entries);
  std::vector<std::pair<double, std::string>> brute;
  for (const auto& [id, h] : hidden) brute.emplace_back(-dot(q, encode_tool(h, r)), id);
  std::sort(brute.begin(), brute.end());
  for (std::size_t i = 0; i < ranked.size(); ++i) EXPECT_EQ(ranked[i].tool_id, brute[i].second);
  EXPECT_TRUE(std::any_of(ranked.begin(), ranked.end(), [](const auto& s) { return s.tool_id == "new"; }));
}

TEST(Executors, Arithmetic) {
  EXPECT_EQ(execute_tool_strict(tool("divide"), {"6", "3"}), "2");
  EXPECT_EQ(execute_tool_strict(tool("add"), {"0.1", "0.2"}), "0.30000000000000004");
  EXPECT_EQ(execute_tool_strict(tool("gcd"), {"84", "36"}), "12");
  EXPECT_EQ(execute_tool_strict(tool("lcm"), {"4", "6"}), "12");
  EXPECT_EQ(execute_tool_strict(tool("choose"), {"5", "2"}), "10");
  EXPECT_EQ(execute_tool_strict(tool("permutate"), {"5", "2"}), "20");
  EXPECT_EQ(execute_tool_strict(tool("remainder"), {"17", "5"}), "2");
  EXPECT_EQ(execute_tool_strict(tool("sqrt"), {"144"}), "12");
  EXPECT_EQ(execute_tool_strict(tool("power"), {"2", "10"}), "1024");
}

TEST(Executors, Errors) {
  EXPECT_EQ(code_of([] { execute_tool_strict(tool("divide"), {"1", "0"}); }), Errc::DomainError);
  EXPECT_EQ(code_of([] { execute_tool_strict(tool("divide"), {"1"}); }), Errc::ArityMismatch);
  EXPECT_EQ(code_of([] { execute_tool_strict(tool("add"), {"x", "1"}); }), Errc::CoercionFailure);
  EXPECT_EQ(code_of([] { execute_tool_strict(tool("sqrt"), {"-1"}); }), Errc::DomainError);
  EXPECT_EQ(code_of([] { execute_tool_strict(tool("choose"), {"2", "5"}); }), Errc::DomainError);
  const ToolResult r = execute_tool(tool("divide"), {"1", "0"});
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.text, "[TOOL_ERROR]");
  EXPECT_FALSE(r.error.empty());
}

TEST(Executors, KbLookupReadsGeneratedTable) {
  KbOptions o;
  o.n_tools = 10;
  o.n_unseen = 2;
  o.n_train = 20;
  o.n_test = 5;
  o.n_test_unseen = 2;
  const BenchSet set = gen_kbsim(o, 7);
  const ToolSpec& spec = set.pool.at(3);
  ASSERT_FALSE(spec.table.empty());
  const auto& [entity, value] = *spec.table.begin();
  EXPECT_EQ(execute_tool_strict(spec, {entity}), value);
  EXPECT_EQ(code_of([&] { execute_tool_strict(spec, {"Nobody at all"}); }), Errc::DomainError);
}

TEST(Formatting, ShortestRoundTrip) {
  EXPECT_EQ(format_number(2.0), "2");
  EXPECT_EQ(format_number(0.1 + 0.2), "0.30000000000000004");
  EXPECT_EQ(format_number(-0.0), "0");
  EXPECT_EQ(format_number(1e-7), "1e-07");
  EXPECT_EQ(parse_number("1.5x"), std::nullopt);
  EXPECT_EQ(parse_number("-2.5"), -2.5);
}

TEST(HiddenTrace, RoundTrip) {
  Rng rng(4);
  HiddenTrace t;
  t.dim = 4;
  t.records.push_back({"tool name: a, tool description: b", TraceRole::ToolPrompt, "a", random_vec(4, rng)});
  t.records.push_back({"Q: x\nA: ", TraceRole::QueryPrompt, "a", random_vec(4, rng)});
  t.records.push_back({"Q: y", TraceRole::QueryPrompt, std::nullopt, random_vec(4, rng)});
  const HiddenTrace back = parse_hidden_trace(hidden_trace_to_jsonl(t));
  ASSERT_EQ(back.records.size(), 3u);
  EXPECT_EQ(back.dim, 4u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.records[i].text, t.records[i].text);
    EXPECT_EQ(back.records[i].role, t.records[i].role);
    EXPECT_EQ(back.records[i].gold_tool_id, t.records[i].gold_tool_id);
    EXPECT_EQ(back.records[i].hidden, t.records[i].hidden);
  }
}

TEST(HiddenTrace, MixedDimensionsRejected) {
  HiddenTrace t;
  t.records.push_back({"a", TraceRole::ToolPrompt, "a", Vec(64, 0.5)});
  t.records.push_back({"b", TraceRole::QueryPrompt, "a", Vec(128, 0.5)});
  EXPECT_EQ(code_of([&] { parse_hidden_trace(hidden_trace_to_jsonl(t)); }), Errc::DimMismatch);
  EXPECT_EQ(code_of([] { parse_hidden_trace("{not json}\n"); }), Errc::MalformedRecord);
}

TEST(HiddenTrace, TraceTrainingMatchesLiveTraining) {
  LmConfig c;
  c.d = 16;
  c.layers = 1;
  c.heads = 2;
  c.ffn = 16;
  const TransformerLm lm(init_lm(c, 5));
  KbOptions o;
  o.n_tools = 64;
  o.n_unseen = 0;
  o.n_train = 256;
  o.n_test = 64;
  o.n_test_unseen = 0;
  const BenchSet set = gen_kbsim(o, 3);
  const auto t = templates_for("kbsim");
  const auto items = make_retrieval_items(set.train, t);
  const RetrieverFeatures live = retriever_features(items, set.pool, lm);

  // Export the same states, read them back, rebuild features from the trace.
  HiddenTrace trace;
  trace.dim = lm.dim();
  for (const auto& spec : set.pool.tools()) {
    trace.records.push_back({render_tool_prompt(spec), TraceRole::ToolPrompt, spec.tool_id,
                             lm.end_hidden(render_tool_prompt(spec))});
  }
  for (const auto& it : items) {
    trace.records.push_back({it.prompt, TraceRole::QueryPrompt, it.gold_tool_id, lm.end_hidden(it.prompt)});
  }
  const HiddenTrace back = parse_hidden_trace(hidden_trace_to_jsonl(trace));
  RetrieverFeatures imported;
  for (const auto& r : back.records) {
    if (r.role == TraceRole::ToolPrompt) {
      imported.tool_hidden[*r.gold_tool_id] = r.hidden;
    } else {
      imported.query_hidden.push_back(r.hidden);
      imported.gold.push_back(*r.gold_tool_id);
    }
  }

  TrainConfig cfg = retriever_defaults();
  cfg.epochs = 2;
  cfg.accumulation_steps = 1;
  auto a = start_retriever_training(initial_retriever(lm.dim(), cfg), cfg);
  auto b = start_retriever_training(initial_retriever(lm.dim(), cfg), cfg);
  run_retriever_training(a, live, cfg);
  run_retriever_training(b, imported, cfg);
  const RetrieverFeatures test = retriever_features(make_retrieval_items(set.test, t), set.pool, lm);
  const double ta = evaluate_retrieval(a.retriever, test, set.pool, {1}).topk[0];
  const double tb = evaluate_retrieval(b.retriever, test, set.pool, {1}).topk[0];
  EXPECT_NEAR(ta, tb, 1e-9);
  EXPECT_EQ(retriever_hash(a.retriever), retriever_hash(b.retriever));
}
