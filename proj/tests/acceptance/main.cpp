// Acceptance run: one PASS/FAIL line per criterion.
//
//   cotools_acceptance [AC1 AC5 ...]
//
// COTOOLS_LM overrides the LM checkpoint. Otherwise the pretrained arith LM
// is taken from COTOOLS_LM_CACHE (or the build-time default), and trained and
// cached there when missing.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <sys/wait.h>

#include "../support/gradcheck.hpp"
#include "../support/scripted.hpp"
#include "cotools/pipeline.hpp"
#include "json.hpp"

using namespace cotools;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double x, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, x);
  return buf;
}

std::string sci(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", x);
  return buf;
}

struct Outcome {
  bool pass;
  std::string detail;
};

fs::path out_dir() {
  const char* env = std::getenv("COTOOLS_ACCEPTANCE_OUT");
  fs::path p = env ? fs::path(env) : fs::current_path() / "acceptance_out";
  fs::create_directories(p);
  return p;
}

// ---- shared artifacts -----------------------------------------------------

std::string lm_path() {
  if (const char* env = std::getenv("COTOOLS_LM")) return env;
  const char* cache_env = std::getenv("COTOOLS_LM_CACHE");
  const fs::path cache = cache_env ? fs::path(cache_env) : fs::path(COTOOLS_LM_CACHE_DEFAULT);
  const ArithLmOptions opts;
  const std::string key = sha256_hex(arith_lm_options_json(opts)).substr(0, 16);
  const fs::path path = cache / ("lm_" + key + ".cotw");
  if (!fs::exists(path)) {
    std::cerr << "pretraining the arith LM into " << path << " (" << opts.pretrain.steps << " steps)\n";
    fs::create_directories(cache);
    const auto t0 = Clock::now();
    const LmWeights w = pretrain_arith4_lm(opts, [&](const PretrainRecord& r, const LmWeights&) {
      if ((r.step + 1) % 250 == 0) {
        std::cerr << "  step " << r.step + 1 << " loss " << fmt(r.loss) << " " << fmt(seconds_since(t0), 0) << "s\n";
      }
    });
    save_lm(path, w, Dtype::F64, json{{"options", json::parse(arith_lm_options_json(opts))}}.dump());
  }
  return path.string();
}

const TransformerLm& lm() {
  static const std::unique_ptr<TransformerLm> m = load_language_model(lm_path());
  return *m;
}

constexpr std::uint64_t kSeed = 7;

const BenchSet& kb_clean() {
  static const BenchSet s = gen_kbsim(KbOptions{}, kSeed);
  return s;
}

// Judge updates are batch 8 x accumulation 16, so the train split sets how
// many the 3 default epochs get: 6000 problems give 141.
const BenchSet& arith() {
  static const BenchSet s = gen_arith4(6000, 200, 200, kSeed);
  return s;
}

Retriever train_retriever(const BenchSet& set, const PromptTemplates& t, TrainConfig cfg) {
  const auto feats = retriever_features(make_retrieval_items(set.train, t), set.pool, lm());
  RetrieverTrainState st = start_retriever_training(initial_retriever(lm().dim(), cfg), cfg);
  TrainHooks hooks;
  hooks.frozen = &lm();
  run_retriever_training(st, feats, cfg, hooks);
  return st.retriever;
}

TrainConfig kb_retriever_cfg(double wdim_lr = 0.01) {
  TrainConfig c = retriever_defaults();
  c.seed = kSeed;
  c.wdim_lr = wdim_lr;
  return c;
}

const Retriever& kb_retriever() {
  static const Retriever r = train_retriever(kb_clean(), templates_for("kbsim"), kb_retriever_cfg());
  return r;
}

RetrieverFeatures kb_test_features(bool unseen) {
  const BenchSet& set = kb_clean();
  std::vector<RetrievalItem> items;
  for (auto& it : make_retrieval_items(set.test, templates_for("kbsim"))) {
    if (set.is_unseen(it.gold_tool_id) == unseen) items.push_back(std::move(it));
  }
  return retriever_features(items, set.pool, lm());
}

const RetrieverFeatures& kb_seen_test() {
  static const RetrieverFeatures f = kb_test_features(false);
  return f;
}

const JudgeRun& arith_judge() {
  static const JudgeRun run = [] {
    TrainConfig cfg = judge_defaults();
    cfg.seed = kSeed;
    TrainHooks hooks;
    hooks.frozen = &lm();
    return train_judge_on(arith().train, arith().test, lm(), templates_for("arith4"), cfg, hooks);
  }();
  return run;
}

// ---- criteria -------------------------------------------------------------

Outcome ac1() {
  const auto t0 = Clock::now();
  double worst_j = 0, worst_r = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    worst_j = std::max(worst_j, cotools::testing::judge_grad_case(s).rel_error);
    worst_r = std::max(worst_r, cotools::testing::retriever_grad_case(1000 + s).rel_error);
  }
  const double secs = seconds_since(t0);
  return {worst_j <= 1e-4 && worst_r <= 1e-4 && secs < 120,
          "max rel error judge " + sci(worst_j) + ", retriever " + sci(worst_r) +
              " over 100 configs each, " + fmt(secs, 1) + "s"};
}

Outcome ac2() {
  const auto t0 = Clock::now();
  const Retriever& r = kb_retriever();
  const auto seen = evaluate_retrieval(r, kb_seen_test(), kb_clean().pool, {1, 5});
  const auto unseen = evaluate_retrieval(r, kb_test_features(true), kb_clean().pool, {1, 5});
  const double chance = 1.0 / static_cast<double>(kb_clean().pool.size());
  const double secs = seconds_since(t0);
  const bool pass = seen.topk[0] >= 0.95 && seen.topk[1] >= 0.99 && unseen.topk[0] >= 5 * chance && secs < 1800;
  return {pass, "seen top1 " + fmt(seen.topk[0]) + " top5 " + fmt(seen.topk[1]) + ", unseen top1 " +
                    fmt(unseen.topk[0]) + " (5x chance " + fmt(5 * chance) + "), " + fmt(secs, 0) + "s"};
}

Outcome ac3() {
  KbOptions o;
  o.noise = 0.5;
  const BenchSet noisy = gen_kbsim(o, kSeed);
  for (std::size_t i = 0; i < noisy.pool.size(); ++i) {
    if (noisy.pool.at(i).tool_id != kb_clean().pool.at(i).tool_id) return {false, "tool pools differ"};
  }
  const Retriever rn = train_retriever(noisy, templates_for("kbsim"), kb_retriever_cfg());
  const double clean = evaluate_retrieval(kb_retriever(), kb_seen_test(), kb_clean().pool, {1}).topk[0];
  const double noise = evaluate_retrieval(rn, kb_seen_test(), kb_clean().pool, {1}).topk[0];
  return {noise < clean, "seen top1 noise=0 " + fmt(clean) + ", noise=0.5 " + fmt(noise) + ", gap " +
                             fmt(clean - noise)};
}

Outcome ac4() {
  const JudgeRun& run = arith_judge();
  return {run.dev.f1 >= 0.90, "held-out F1 " + fmt(run.dev.f1) + " (P " + fmt(run.dev.precision) + ", R " +
                                  fmt(run.dev.recall) + "), positive weight " + fmt(run.positive_weight, 2)};
}

Outcome ac5() {
  cotools::testing::Scripter s(cotools::testing::func13_pool(), templates_for("arith4"));
  const auto suite = cotools::testing::scripted_suite();
  for (const auto& c : suite) s.add(c);
  DecodeLimits l;
  l.max_tokens = 256;
  std::size_t exact = 0, sentinel_cases = 0;
  std::string first_bad;
  for (const auto& c : suite) {
    const auto t = generate_with_tools(c.query, s.components(), l);
    if (t.final_answer == c.answer) {
      ++exact;
      if (c.answer.find("[TOOL_ERROR]") != std::string::npos) ++sentinel_cases;
    } else if (first_bad.empty()) {
      first_bad = c.name;
    }
  }
  const bool pass = suite.size() == 20 && exact == suite.size() && sentinel_cases >= 1;
  return {pass, std::to_string(exact) + "/" + std::to_string(suite.size()) + " byte-exact, " +
                    std::to_string(sentinel_cases) + " with the tool-error sentinel" +
                    (first_bad.empty() ? "" : ", first mismatch " + first_bad)};
}

Outcome ac6() {
  const BenchSet& set = arith();
  const auto& t = templates_for("arith4");
  TrainConfig rc = retriever_defaults();
  rc.seed = kSeed;
  const Retriever r = train_retriever(set, t, rc);
  const ToolIndex index = build_tool_index(set.pool, r, lm());
  DecodeLimits l;
  l.max_tokens = 160;
  const CotoolsComponents with{&lm(), &arith_judge().state.judge, &r, &index, &set.pool, &t};
  const CotoolsComponents without{&lm(), nullptr, nullptr, nullptr, &set.pool, &t};
  const auto a = evaluate_pipeline(set.test, with, l);
  const auto b = evaluate_pipeline(set.test, without, l);
  double calls = 0;
  for (const auto& c : a.cases) calls += static_cast<double>(c.tool_calls);
  {
    std::ofstream out(out_dir() / "ac6_traces.jsonl");
    for (std::size_t i = 0; i < std::min<std::size_t>(20, a.traces.size()); ++i) out << trace_to_jsonl(a.traces[i]);
  }
  return {a.round_acc >= 0.60 && b.round_acc <= 0.10,
          "round acc with tools " + fmt(a.round_acc) + " (mean calls " + fmt(calls / a.cases.size(), 2) +
              "), without " + fmt(b.round_acc) + ", n " + std::to_string(set.test.size())};
}

Outcome ac7() {
  const auto& pool = kb_clean().pool;
  const ProbeReport p = probe_wdim(kb_retriever(), kb_seen_test(), pool);
  json curves = json::object();
  curves["0.01"] = p.sorted_desc;
  for (const auto& [label, lr] : {std::pair{"0.001", 0.001}, std::pair{"0.1", 0.1}}) {
    const Retriever r = train_retriever(kb_clean(), templates_for("kbsim"), kb_retriever_cfg(lr));
    curves[label] = probe_wdim(r, kb_seen_test(), pool).sorted_desc;
  }
  std::ofstream(out_dir() / "ac7_wdim_curves.json") << curves.dump(1) << "\n";
  const double gap1 = p.full_top1 - p.masked_top1, gap5 = std::fabs(p.full_top5 - p.masked_top5);
  const bool pass = !p.degenerate && gap1 <= 0.02 && gap5 <= 0.01;
  return {pass, std::to_string(p.key_dims.size()) + "/" + std::to_string(p.raw.size()) +
                    " key dims, top1 full " + fmt(p.full_top1) + " masked " + fmt(p.masked_top1) + ", top5 full " +
                    fmt(p.full_top5) + " masked " + fmt(p.masked_top5) + (p.degenerate ? ", degenerate" : "")};
}

Outcome ac8() {
  KbOptions o;
  o.n_tools = 1024;
  o.n_unseen = 0;
  o.n_test_unseen = 0;
  o.n_train = 2048;
  o.n_test = 400;
  const BenchSet set = gen_kbsim(o, kSeed);
  const auto& t = templates_for("kbsim");
  const Retriever r = train_retriever(set, t, kb_retriever_cfg());
  const auto f = retriever_features(make_retrieval_items(set.test, t), set.pool, lm());
  const ToolIndex index = build_tool_index_from_hidden(set.pool, f.tool_hidden, r, lm().content_hash());
  std::vector<Vec> qs;
  for (const auto& h : f.query_hidden) qs.push_back(encode_query(h, r));
  const auto pts = sweep_pool_size(qs, f.gold, index, {1, 16, 64, 256, 1024}, kSeed);
  bool pass = pts[0].top1 == 1.0;
  std::string detail = "top1";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    detail += " @" + std::to_string(pts[i].size) + "=" + fmt(pts[i].top1);
    if (i > 0 && pts[i].top1 > pts[i - 1].top1 + 0.02) pass = false;
  }
  return {pass, detail};
}

// Runs gen -> train -> eval through the CLI twice with identical configs and
// compares every artifact byte for byte.
Outcome ac9() {
  const fs::path root = out_dir() / "determinism";
  const fs::path work = root / "run", first = root / "first";
  fs::remove_all(root);
  const std::string lm_file = lm_path();
  const std::string before = file_sha256(lm_file);
  auto sh = [](const std::string& args) {
    const std::string cmd = std::string(COTOOLS_CLI_EXE) + " " + args + " >/dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  };
  auto pipeline = [&]() -> int {
    fs::create_directories(work);
    const std::string d = (work / "data").string(), w = work.string();
    if (int rc = sh("gen --bench arith4 --out " + d + " --n-train 300 --n-dev 30 --n-test 30 --seed 3")) return rc;
    if (int rc = sh("train --module judge --data " + d + " --lm " + lm_file + " --out " + w + "/judge.cotw --epochs 1"))
      return rc;
    if (int rc = sh("train --module retriever --data " + d + " --lm " + lm_file + " --out " + w +
                    "/retriever.cotw --epochs 2"))
      return rc;
    return sh("eval --mode pipeline --data " + d + " --lm " + lm_file + " --judge " + w + "/judge.cotw --retriever " +
              w + "/retriever.cotw --limit 10 --out " + w + "/eval.json --traces " + w + "/traces.jsonl");
  };
  if (int rc = pipeline()) return {false, "first run exited " + std::to_string(rc)};
  fs::rename(work, first);
  if (int rc = pipeline()) return {false, "second run exited " + std::to_string(rc)};

  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(first)) {
    if (!e.is_regular_file()) continue;
    const fs::path other = work / fs::relative(e.path(), first);
    if (!fs::exists(other) || file_sha256(e.path()) != file_sha256(other)) {
      return {false, "differs: " + fs::relative(e.path(), first).string()};
    }
    ++files;
  }
  bool frozen = file_sha256(lm_file) == before;
  for (const char* m : {"judge.cotw.metrics.jsonl", "retriever.cotw.metrics.jsonl"}) {
    std::ifstream in(work / m);
    std::string line, last;
    while (std::getline(in, line)) last = line;
    const json footer = json::parse(last);
    frozen = frozen && footer["frozen_lm_hash_before"] == footer["frozen_lm_hash_after"];
  }
  return {frozen, std::to_string(files) + " artifacts byte-identical across runs, frozen LM hash " +
                      (frozen ? "unchanged" : "CHANGED")};
}

struct MetricCase {
  const char* text;
  double gold;
  bool round_ok;
  bool approx_ok;
};

// Expected flags come from a decimal-arithmetic reference (half-up on the
// shortest decimal form; relative 0.1% tolerance, 1e-8 absolute at gold 0).
const MetricCase kMetricCases[] = {
    {"The answer is 42.", 42.0, true, true},
    {"The answer is 42", 42.0, true, true},
    {"The answer is 41.", 42.0, false, false},
    {"The answer is 3.14159.", 3.14, true, true},
    {"The answer is 3.145.", 3.14, false, false},
    {"The answer is 3.135", 3.14, true, false},
    {"The answer is 3.144", 3.14, true, false},
    {"The answer is 0.125", 0.13, true, false},
    {"The answer is 0.125", 0.12, false, false},
    {"The answer is -0.125", -0.13, true, false},
    {"The answer is -1.005", -1.01, true, false},
    {"The answer is 2.675", 2.68, true, false},
    {"The answer is 1.005", 1.0, false, false},
    {"The answer is 9.995", 10.0, true, true},
    {"The answer is 9.994", 9.99, true, true},
    {"The answer is 0.004", 0.0, true, false},
    {"The answer is 0.005", 0.0, false, false},
    {"The answer is -0.004", 0.0, true, false},
    {"The answer is 0", 0.0, true, true},
    {"The answer is 0.000000001", 0.0, true, true},
    {"The answer is 0.0000001", 0.0, true, false},
    {"The answer is 1000.9", 1000.0, false, true},
    {"The answer is 1002", 1000.0, false, false},
    {"The answer is 999.1", 1000.0, false, true},
    {"The answer is 998.9", 1000.0, false, false},
    {"The answer is 1001", 1000.0, false, true},
    {"The answer is -1000.9", -1000.0, false, true},
    {"The answer is 1e3", 1000.0, true, true},
    {"The answer is 1.2345e2", 123.45, true, true},
    {"The answer is 5E-3", 0.01, true, false},
    {"no answer here", 5.0, false, false},
    {"The answer is x", 5.0, false, false},
    {"The answer is .5", 0.5, false, false},
    {"The answer is", 0.0, false, false},
    {"The answer is 7. Wait, the answer is 8.", 8.0, false, false},
    {"The answer is 7. The answer is 8.", 7.0, false, false},
    {"The answer is 123456789.125", 123456789.13, true, true},
    {"The answer is 2.5", 2.5, true, true},
    {"The answer is 2.499", 2.5, true, true},
    {"The answer is 0.1", 0.1, true, true},
    {"The answer is 0.30000000000000004", 0.3, true, true},
    {"The answer is 33.333333", 33.33, true, true},
    {"The answer is 66.666666", 66.67, true, true},
    {"The answer is -7", 7.0, false, false},
    {"The answer is 7", -7.0, false, false},
    {"The answer is 100.1", 100.0, false, true},
    {"The answer is 100.09", 100.0, false, true},
    {"The answer is 12 apples", 12.0, true, true},
    {"The answer is 0.0049999", 0.01, false, false},
    {"The answer is 1.015", 1.02, true, false},
};

Outcome ac10() {
  std::size_t ok = 0, n = 0;
  std::string first_bad;
  std::vector<std::optional<double>> preds;
  std::vector<double> golds;
  double want_round = 0, want_approx = 0;
  for (const auto& c : kMetricCases) {
    ++n;
    const auto p = parse_final_answer(c.text);
    preds.push_back(p);
    golds.push_back(c.gold);
    want_round += c.round_ok;
    want_approx += c.approx_ok;
    const bool good = eval_round_acc({p}, {c.gold}) == (c.round_ok ? 1.0 : 0.0) &&
                      eval_approx_acc({p}, {c.gold}) == (c.approx_ok ? 1.0 : 0.0);
    if (good) {
      ++ok;
    } else if (first_bad.empty()) {
      first_bad = c.text;
    }
  }
  const bool totals = eval_round_acc(preds, golds) == want_round / static_cast<double>(n) &&
                      eval_approx_acc(preds, golds) == want_approx / static_cast<double>(n);
  return {ok == n && n == 50 && totals, std::to_string(ok) + "/" + std::to_string(n) + " cases" +
                                            (first_bad.empty() ? "" : ", first failure: " + first_bad)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> all = {
      {"AC1", ac1}, {"AC2", ac2}, {"AC3", ac3}, {"AC4", ac4}, {"AC5", ac5},
      {"AC6", ac6}, {"AC7", ac7}, {"AC8", ac8}, {"AC9", ac9}, {"AC10", ac10}};
  std::set<std::string> wanted(argv + 1, argv + argc);
  int failures = 0;
  for (const auto& [id, fn] : all) {
    if (!wanted.empty() && !wanted.count(id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << id << " " << (o.pass ? "PASS" : "FAIL") << " " << o.detail << " [" << fmt(seconds_since(t0), 1)
              << "s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
