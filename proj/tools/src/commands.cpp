#include "commands.hpp"

#include <filesystem>
#include <iostream>

#include "cotools/bench.hpp"
#include "cotools/checkpoint.hpp"
#include "cotools/pipeline.hpp"

namespace cotools::cli {

namespace fs = std::filesystem;

namespace {

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  write_file(p, text);
}

struct Data {
  BenchSet set;
  std::string hash;  // of manifest.json
  PromptTemplates templates;
};

Data load_data(const std::string& dir) {
  Data d{load_bench(dir), file_sha256(fs::path(dir) / "manifest.json"), {}};
  d.templates = templates_for(d.set.name);
  return d;
}

json adapter_meta(const RunConfig& c, const LanguageModel& lm, const Data& d) {
  json m = c.provenance();
  m["lm_hash"] = lm.content_hash();
  m["data_hash"] = d.hash;
  m["template_version"] = d.templates.version;
  return m;
}

// Adapters only make sense on the LM and prompt format they were trained on.
void check_provenance(const json& meta, const LanguageModel& lm, const PromptTemplates& t, const std::string& what) {
  const std::string lm_hash = meta.value("lm_hash", "");
  if (lm_hash != lm.content_hash()) {
    throw Error(Errc::ProvenanceMismatch, what + " was trained on LM " + lm_hash.substr(0, 16) +
                                              " but the loaded LM is " + lm.content_hash().substr(0, 16));
  }
  const std::string tv = meta.value("template_version", "");
  if (tv != t.version) {
    throw Error(Errc::ProvenanceMismatch, what + " was trained with templates '" + tv + "', data uses '" +
                                              t.version + "'");
  }
}

struct LoadedJudge {
  JudgeHead head;
  std::string hash;
};

LoadedJudge load_judge_for(const std::string& path, const LanguageModel& lm, const PromptTemplates& t) {
  const Checkpoint ck = load_checkpoint(path);
  LoadedJudge j{judge_from_checkpoint(ck), ck.hash};
  check_provenance(json::parse(ck.meta_json), lm, t, "judge " + path);
  if (j.head.gate.rows() != lm.dim()) throw Error(Errc::DimMismatch, "judge does not match the LM width");
  return j;
}

struct LoadedRetriever {
  Retriever r;
  std::string hash;
};

LoadedRetriever load_retriever_for(const std::string& path, const LanguageModel& lm, const PromptTemplates& t) {
  const Checkpoint ck = load_checkpoint(path);
  LoadedRetriever r{retriever_from_checkpoint(ck), ck.hash};
  check_provenance(json::parse(ck.meta_json), lm, t, "retriever " + path);
  if (r.r.query.gate.rows() != lm.dim()) throw Error(Errc::DimMismatch, "retriever does not match the LM width");
  return r;
}

std::vector<RetrievalItem> subset_items(const Data& d, const std::string& split, const std::string& subset) {
  if (subset != "all" && subset != "seen" && subset != "unseen") {
    throw Error(Errc::ConfigError, "subset must be all, seen or unseen");
  }
  std::vector<RetrievalItem> out;
  for (auto& it : make_retrieval_items(bench_split(d.set, split), d.templates)) {
    const bool unseen = d.set.is_unseen(it.gold_tool_id);
    if (subset == "all" || (subset == "unseen") == unseen) out.push_back(std::move(it));
  }
  return out;
}

TrainConfig train_config(const RunConfig& c, TrainConfig base) {
  if (c.has("epochs")) base.epochs = c.size("epochs");
  if (c.has("lr")) base.lr = c.num("lr");
  if (c.has("batch_size")) base.batch_size = c.size("batch_size");
  if (c.has("accumulation_steps")) base.accumulation_steps = c.size("accumulation_steps");
  base.wdim_lr = c.num("wdim_lr");
  base.tensor_weighting = c.flag("tensor_weighting");
  base.seed = c.size("seed");
  base.theta = c.num("theta");
  base.pos_weight_cap = c.num("pos_weight_cap");
  base.intermediate = c.size("intermediate");
  const std::string opt = c.str("optimizer");
  if (opt == "adam") {
    base.optimizer = OptimizerKind::Adam;
  } else if (opt == "sgd") {
    base.optimizer = OptimizerKind::Sgd;
  } else {
    throw Error(Errc::ConfigError, "optimizer must be adam or sgd");
  }
  validate_train_config(base);
  return base;
}

json metrics_json(const BinaryMetrics& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
          {"tp", m.tp}, {"fp", m.fp}, {"fn", m.fn}, {"tn", m.tn}};
}

// ---- gen ------------------------------------------------------------------

int cmd_gen(const RunConfig& c) {
  const std::string bench = c.str("bench");
  const std::uint64_t seed = c.size("seed");
  auto pick = [&](const char* key, std::size_t def) { return c.has(key) ? c.size(key) : def; };
  BenchSet set;
  if (bench == "arith4") {
    set = gen_arith4(pick("n_train", 2000), pick("n_dev", 200), pick("n_test", 200), seed);
  } else if (bench == "func13") {
    set = gen_func13(pick("n_train", 1000), pick("n_dev", 100), pick("n_test", 100), c.size("hops"), seed);
  } else if (bench == "kbsim") {
    KbOptions o;
    o.n_tools = c.size("n_tools");
    o.n_unseen = c.size("n_unseen");
    o.n_train = pick("n_train", o.n_train);
    o.n_dev = pick("n_dev", o.n_dev);
    o.n_test = pick("n_test", o.n_test);
    o.n_test_unseen = c.size("n_test_unseen");
    o.noise = c.num("noise");
    validate_kb_options(o);
    set = gen_kbsim(o, seed);
  } else {
    throw Error(Errc::ConfigError, "bench must be arith4, func13 or kbsim");
  }
  const fs::path out = c.str("out");
  fs::create_directories(out);
  save_bench(out, set);
  // The manifest carries the run config next to the file hashes.
  json m = json::parse(read_file(out / "manifest.json"));
  m["generated_by"] = c.provenance();
  write_file(out / "manifest.json", m.dump(1) + "\n");
  std::cout << "wrote " << set.train.size() << "/" << set.dev.size() << "/" << set.test.size() << " "
            << set.name << " items and " << set.pool.size() << " tools to " << out.string() << "\n";
  return 0;
}

// ---- train ----------------------------------------------------------------

std::string default_path(const RunConfig& c, const char* key, const std::string& suffix) {
  return c.has(key) ? c.str(key) : c.str("out") + suffix;
}

int train_lm(const RunConfig& c) {
  ArithLmOptions o;
  o.seed = c.size("seed");
  o.pretrain.steps = c.size("steps");
  o.pretrain.batch = c.size("lm_batch");
  o.pretrain.lr = c.num("lm_lr");
  o.n_problems = c.size("n_problems");
  o.lm.hidden_scale = c.num("hidden_scale");
  std::string lines;
  const LmWeights w = pretrain_arith4_lm(o, [&](const PretrainRecord& r, const LmWeights&) {
    lines += json{{"step", r.step}, {"loss", r.loss}}.dump() + "\n";
  });
  json meta = c.provenance();
  meta["options"] = json::parse(arith_lm_options_json(o));
  save_lm(c.str("out"), w, Dtype::F64, meta.dump());
  json footer = c.provenance();
  footer["footer"] = true;
  footer["lm_hash"] = lm_hash(w);
  write_output(default_path(c, "metrics", ".metrics.jsonl"), lines + footer.dump() + "\n");
  std::cout << "lm " << lm_hash(w).substr(0, 16) << " -> " << c.str("out") << "\n";
  return 0;
}

template <class State>
void finish_train(const RunConfig& c, const State& st, Checkpoint& ck, json footer) {
  save_checkpoint(c.str("out"), ck);
  std::string lines;
  for (const auto& r : st.records) lines += loss_record_json(r) + "\n";
  footer["footer"] = true;
  footer["checkpoint_hash"] = ck.hash;
  footer["epochs_done"] = st.epochs_done;
  footer["epoch_loss"] = st.epoch_loss;
  write_output(default_path(c, "metrics", ".metrics.jsonl"), lines + footer.dump() + "\n");
}

int train_judge(const RunConfig& c) {
  const auto lm = load_language_model(c.str("lm"));
  const Data d = load_data(c.str("data"));
  const TrainConfig tc = train_config(c, judge_defaults());
  const std::string before = lm_hash(lm->weights());
  const JudgeFeatures feats = judge_features(make_judge_examples(d.set.train, *lm, d.templates), *lm);

  JudgeTrainState st = c.has("resume") ? load_judge_state(c.str("resume"), tc)
                                       : start_judge_training(initial_judge(lm->dim(), tc), tc);
  TrainHooks hooks;
  hooks.frozen = lm.get();
  if (c.has("stop_after_epochs")) hooks.stop_after_epochs = c.size("stop_after_epochs");
  run_judge_training(st, feats, tc, hooks);
  save_judge_state(default_path(c, "state", ".state"), st, tc);

  json footer = adapter_meta(c, *lm, d);
  footer["positive_weight"] = judge_positive_weight(feats, tc.pos_weight_cap);
  const auto& eval = bench_split(d.set, c.str("eval_split"));
  if (!eval.empty()) {
    const JudgeFeatures ef = judge_features(make_judge_examples(eval, *lm, d.templates), *lm);
    footer["eval"] = metrics_json(judge_metrics(st.judge, ef, tc.theta));
  }
  footer["frozen_lm_hash_before"] = before;
  footer["frozen_lm_hash_after"] = lm_hash(lm->weights());
  Checkpoint ck = judge_checkpoint(st.judge, tc.seed, adapter_meta(c, *lm, d).dump());
  finish_train(c, st, ck, footer);
  std::cout << "judge " << ck.hash.substr(0, 16) << " after " << st.epochs_done << " epochs";
  if (footer.contains("eval")) std::cout << ", " << c.str("eval_split") << " F1 " << footer["eval"]["f1"];
  std::cout << "\n";
  return 0;
}

int train_retriever(const RunConfig& c) {
  const auto lm = load_language_model(c.str("lm"));
  const Data d = load_data(c.str("data"));
  const TrainConfig tc = train_config(c, retriever_defaults(c.str("variant")));
  const std::string before = lm_hash(lm->weights());
  const RetrieverFeatures feats =
      retriever_features(make_retrieval_items(d.set.train, d.templates), d.set.pool, *lm);

  RetrieverTrainState st = c.has("resume") ? load_retriever_state(c.str("resume"), tc)
                                           : start_retriever_training(initial_retriever(lm->dim(), tc), tc);
  TrainHooks hooks;
  hooks.frozen = lm.get();
  if (c.has("stop_after_epochs")) hooks.stop_after_epochs = c.size("stop_after_epochs");
  run_retriever_training(st, feats, tc, hooks);
  save_retriever_state(default_path(c, "state", ".state"), st, tc);

  json footer = adapter_meta(c, *lm, d);
  const auto items = make_retrieval_items(bench_split(d.set, c.str("eval_split")), d.templates);
  if (!items.empty()) {
    const auto ev = evaluate_retrieval(st.retriever, retriever_features(items, d.set.pool, *lm), d.set.pool, {1, 5});
    footer["eval"] = {{"top1", ev.topk[0]}, {"top5", ev.topk[1]}, {"n", items.size()}};
  }
  footer["wdim"] = st.retriever.wdim->w.values();
  footer["frozen_lm_hash_before"] = before;
  footer["frozen_lm_hash_after"] = lm_hash(lm->weights());
  Checkpoint ck = retriever_checkpoint(st.retriever, tc.seed, adapter_meta(c, *lm, d).dump());
  finish_train(c, st, ck, footer);
  std::cout << "retriever " << ck.hash.substr(0, 16) << " after " << st.epochs_done << " epochs";
  if (footer.contains("eval")) std::cout << ", " << c.str("eval_split") << " top-1 " << footer["eval"]["top1"];
  std::cout << "\n";
  return 0;
}

int cmd_train(const RunConfig& c) {
  const std::string module = c.str("module");
  if (module == "lm") return train_lm(c);
  if (module == "judge") return train_judge(c);
  if (module == "retriever") return train_retriever(c);
  throw Error(Errc::ConfigError, "module must be lm, judge or retriever");
}

// ---- eval -----------------------------------------------------------------

DecodeLimits limits_from(const RunConfig& c) {
  DecodeLimits l;
  l.theta = c.num("theta");
  l.max_tokens = c.size("max_tokens");
  l.max_tool_calls = c.size("max_tool_calls");
  return l;
}

int cmd_eval(const RunConfig& c) {
  const auto lm = load_language_model(c.str("lm"));
  const Data d = load_data(c.str("data"));
  const std::string mode = c.str("mode");
  EvalReport rep;
  rep.fingerprint = {{"config", c.fingerprint()}, {"lm", lm->content_hash()}, {"data", d.hash}};

  if (mode == "retrieval" || mode == "sweep") {
    const auto r = load_retriever_for(c.str("retriever"), *lm, d.templates);
    rep.fingerprint["retriever"] = r.hash;
    const auto items = subset_items(d, c.str("split"), c.str("subset"));
    if (items.empty()) throw Error(Errc::EmptyTestSet, "no " + c.str("subset") + " items in " + c.str("split"));
    const RetrieverFeatures f = retriever_features(items, d.set.pool, *lm);
    if (mode == "retrieval") {
      const auto ev = evaluate_retrieval(r.r, f, d.set.pool, c.sizes("ks"));
      rep.metric = "top_k";
      rep.ks = c.sizes("ks");
      rep.accuracies = ev.topk;
      rep.histogram = error_histogram(ev.ranked, ev.golds);
      std::vector<std::string> train_golds;
      for (const auto& it : make_retrieval_items(d.set.train, d.templates)) train_golds.push_back(it.gold_tool_id);
      const auto freq = frequency_ranking(train_golds, d.set.pool);
      rep.extra["frequency_baseline_top1"] =
          eval_topk(std::vector<std::vector<std::string>>(ev.golds.size(), freq), ev.golds, {1})[0];
    } else {
      const ToolIndex index = build_tool_index_from_hidden(d.set.pool, f.tool_hidden, r.r, lm->content_hash());
      std::vector<Vec> qs;
      for (const auto& h : f.query_hidden) qs.push_back(encode_query(h, r.r));
      rep.metric = "sweep_top1";
      rep.ks = c.sizes("sizes");
      for (const auto& p : sweep_pool_size(qs, f.gold, index, rep.ks, c.size("seed"))) {
        rep.accuracies.push_back(p.top1);
        rep.extra["top5@" + std::to_string(p.size)] = p.top5;
      }
    }
    rep.extra["n"] = static_cast<double>(items.size());
  } else if (mode == "judge") {
    const auto j = load_judge_for(c.str("judge"), *lm, d.templates);
    rep.fingerprint["judge"] = j.hash;
    const auto& items = bench_split(d.set, c.str("split"));
    if (items.empty()) throw Error(Errc::EmptyTestSet, "no items in " + c.str("split"));
    const auto m = judge_metrics(j.head, judge_features(make_judge_examples(items, *lm, d.templates), *lm),
                                 c.num("theta"));
    rep.metric = "f1";
    rep.accuracies = {m.f1};
    rep.extra = {{"precision", m.precision}, {"recall", m.recall}, {"n", static_cast<double>(items.size())}};
  } else if (mode == "pipeline") {
    std::vector<AnnotatedAnswer> items = bench_split(d.set, c.str("split"));
    if (c.size("limit") > 0 && items.size() > c.size("limit")) items.resize(c.size("limit"));
    CotoolsComponents comp{lm.get(), nullptr, nullptr, nullptr, &d.set.pool, &d.templates};
    std::optional<LoadedJudge> j;
    std::optional<LoadedRetriever> r;
    ToolIndex index;
    if (c.has("judge")) {
      if (!c.has("retriever")) throw Error(Errc::ConfigError, "pipeline eval with a judge needs a retriever");
      j = load_judge_for(c.str("judge"), *lm, d.templates);
      r = load_retriever_for(c.str("retriever"), *lm, d.templates);
      index = build_tool_index(d.set.pool, r->r, *lm);
      comp.judge = &j->head;
      comp.retriever = &r->r;
      comp.index = &index;
      rep.fingerprint["judge"] = j->hash;
      rep.fingerprint["retriever"] = r->hash;
    }
    const PipelineEval ev = evaluate_pipeline(items, comp, limits_from(c));
    rep.metric = "round_acc";
    rep.accuracies = {ev.round_acc};
    double calls = 0, truncated = 0;
    for (const auto& pc : ev.cases) {
      calls += static_cast<double>(pc.tool_calls);
      truncated += pc.truncated ? 1.0 : 0.0;
    }
    const double n = static_cast<double>(ev.cases.size());
    rep.extra = {{"approx_acc", ev.approx_acc}, {"mean_tool_calls", calls / n}, {"truncated_rate", truncated / n},
                 {"n", n}};
    if (c.has("traces")) {
      std::string lines;
      for (const auto& t : ev.traces) lines += trace_to_jsonl(t);
      lines += json{{"provenance", c.provenance()}}.dump() + "\n";
      write_output(c.str("traces"), lines);
    }
  } else {
    throw Error(Errc::ConfigError, "mode must be retrieval, sweep, judge or pipeline");
  }
  write_output(c.has("out") ? c.str("out") : "", eval_report_json(rep));
  return 0;
}

// ---- probe ----------------------------------------------------------------

int cmd_probe(const RunConfig& c) {
  const auto paths = c.strs("retrievers");
  auto labels = c.strs("labels");
  if (paths.empty()) throw Error(Errc::ConfigError, "probe needs at least one retriever");
  if (labels.empty()) labels = paths;
  if (labels.size() != paths.size()) throw Error(Errc::ConfigError, "labels and retrievers differ in length");
  const auto lm = load_language_model(c.str("lm"));
  const Data d = load_data(c.str("data"));
  const auto items = subset_items(d, c.str("split"), c.str("subset"));
  if (items.empty()) throw Error(Errc::EmptyTestSet, "no probe items");
  const RetrieverFeatures f = retriever_features(items, d.set.pool, *lm);
  std::vector<std::pair<std::string, ProbeReport>> reports;
  json fp = {{"config", c.fingerprint()}, {"lm", lm->content_hash()}, {"data", d.hash}};
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const auto r = load_retriever_for(paths[i], *lm, d.templates);
    fp["retriever:" + labels[i]] = r.hash;
    reports.emplace_back(labels[i], probe_wdim(r.r, f, d.set.pool));
  }
  json out = json::parse(probe_report_json(reports));
  out["fingerprint"] = fp;
  write_output(c.has("out") ? c.str("out") : "", out.dump(1) + "\n");
  return 0;
}

// ---- run ------------------------------------------------------------------

int cmd_run(const RunConfig& c) {
  const auto lm = load_language_model(c.str("lm"));
  const Data d = load_data(c.str("data"));
  CotoolsComponents comp{lm.get(), nullptr, nullptr, nullptr, &d.set.pool, &d.templates};
  std::optional<LoadedJudge> j;
  std::optional<LoadedRetriever> r;
  ToolIndex index;
  if (c.has("judge")) {
    if (!c.has("retriever")) throw Error(Errc::ConfigError, "run with a judge needs a retriever");
    j = load_judge_for(c.str("judge"), *lm, d.templates);
    r = load_retriever_for(c.str("retriever"), *lm, d.templates);
    index = build_tool_index(d.set.pool, r->r, *lm);
    comp.judge = &j->head;
    comp.retriever = &r->r;
    comp.index = &index;
  }
  const DecodeTrace t = generate_with_tools(c.str("query"), comp, limits_from(c));
  std::cout << render_trace(t);
  if (c.has("trace")) {
    write_output(c.str("trace"), trace_to_jsonl(t) + json{{"provenance", c.provenance()}}.dump() + "\n");
  }
  return 0;
}

// ---- hidden traces --------------------------------------------------------

int cmd_export_trace(const RunConfig& c) {
  const auto lm = load_language_model(c.str("lm"));
  const Data d = load_data(c.str("data"));
  HiddenTrace trace;
  trace.dim = lm->dim();
  for (const auto& t : d.set.pool.tools()) {
    const std::string text = render_tool_prompt(t);
    trace.records.push_back({text, TraceRole::ToolPrompt, t.tool_id, lm->end_hidden(text)});
  }
  for (const auto& it : make_retrieval_items(bench_split(d.set, c.str("split")), d.templates)) {
    trace.records.push_back({it.prompt, TraceRole::QueryPrompt, it.gold_tool_id, lm->end_hidden(it.prompt)});
  }
  const std::string out = c.str("out");
  write_output(out, hidden_trace_to_jsonl(trace));
  json meta = c.provenance();
  meta["lm_hash"] = lm->content_hash();
  meta["data_hash"] = d.hash;
  meta["records"] = trace.records.size();
  write_output(out + ".meta.json", meta.dump(1) + "\n");
  std::cout << trace.records.size() << " records -> " << out << "\n";
  return 0;
}

// Scores the query records of a trace against an index built from its tool
// records, so hidden states from any LM of the right width can be evaluated.
int cmd_import_trace(const RunConfig& c) {
  const HiddenTrace trace = import_hidden_trace(c.str("trace"));
  const ToolPool pool = load_bench(c.str("data")).pool;
  const Checkpoint ck = load_checkpoint(c.str("retriever"));
  const Retriever r = retriever_from_checkpoint(ck);
  if (r.query.gate.rows() != trace.dim) throw Error(Errc::DimMismatch, "retriever does not match the trace width");
  RetrieverFeatures f;
  for (const auto& rec : trace.records) {
    if (rec.role == TraceRole::ToolPrompt) {
      f.tool_hidden[*rec.gold_tool_id] = rec.hidden;
    } else if (rec.gold_tool_id) {
      f.query_hidden.push_back(rec.hidden);
      f.gold.push_back(*rec.gold_tool_id);
    }
  }
  if (f.gold.empty()) throw Error(Errc::EmptyTestSet, "trace has no labelled query records");
  const auto ev = evaluate_retrieval(r, f, pool, c.sizes("ks"));
  EvalReport rep;
  rep.metric = "top_k";
  rep.ks = c.sizes("ks");
  rep.accuracies = ev.topk;
  rep.histogram = error_histogram(ev.ranked, ev.golds);
  rep.extra["n"] = static_cast<double>(f.gold.size());
  rep.fingerprint = {{"config", c.fingerprint()}, {"trace", file_sha256(c.str("trace"))}, {"retriever", ck.hash}};
  write_output(c.has("out") ? c.str("out") : "", eval_report_json(rep));
  return 0;
}

Key str(const char* name, const char* help, json def = nullptr) { return {name, Kind::Str, std::move(def), help}; }
Key integer(const char* name, const char* help, json def = nullptr) { return {name, Kind::Int, std::move(def), help}; }
Key num(const char* name, const char* help, json def = nullptr) { return {name, Kind::Num, std::move(def), help}; }
Key boolean(const char* name, const char* help, bool def) { return {name, Kind::Bool, def, help}; }
Key ints(const char* name, const char* help, json def) { return {name, Kind::IntList, std::move(def), help}; }
Key strs(const char* name, const char* help) { return {name, Kind::StrList, json::array(), help}; }

Key seed_key() { return integer("seed", "top-level seed; COTOOLS_SEED overrides the config file", 0); }
Key theta_key() { return num("theta", "judge threshold", kDefaultTheta); }

std::vector<Command> make_commands() {
  std::vector<Command> cmds;
  cmds.push_back({{"gen",
                   {str("bench", "arith4, func13 or kbsim"), str("out", "output directory"), seed_key(),
                    integer("n_train", "training items"), integer("n_dev", "dev items"),
                    integer("n_test", "test items (kbsim: seen-tool test items)"),
                    integer("hops", "func13 calls per problem", 2), integer("n_tools", "kbsim tools", 84),
                    integer("n_unseen", "kbsim tools held out of training", 20),
                    integer("n_test_unseen", "kbsim test items on unseen tools", 100),
                    num("noise", "kbsim share of training questions with a corrupted surface form", 0.0)}},
                  "generate a benchmark dataset",
                  cmd_gen});
  cmds.push_back({{"train",
                   {str("module", "lm, judge or retriever"), str("data", "dataset directory"),
                    str("lm", "LM checkpoint or random:<seed>"), str("out", "checkpoint path"),
                    str("metrics", "metrics JSONL (default: <out>.metrics.jsonl)"),
                    str("state", "resumable state (default: <out>.state)"), str("resume", "state to resume from"),
                    seed_key(), integer("epochs", "epochs (module default when unset)"),
                    num("lr", "learning rate (module default when unset)"),
                    integer("batch_size", "micro-batch size (module default when unset)"),
                    integer("accumulation_steps", "micro-batches per update (module default when unset)"),
                    num("wdim_lr", "W_dim learning rate", 0.01),
                    boolean("tensor_weighting", "optimize W_dim", true), theta_key(),
                    num("pos_weight_cap", "cap on the judge positive-class weight", 10.0),
                    integer("intermediate", "adapter intermediate width", 256),
                    str("optimizer", "adam or sgd", "adam"),
                    str("variant", "retriever defaults row: default, gsm8k-xl or funcqa", "default"),
                    integer("stop_after_epochs", "stop early, resumably"),
                    str("eval_split", "split scored after training", "dev"),
                    integer("steps", "LM pretraining steps", 3000), integer("lm_batch", "LM sequences per step", 16),
                    num("lm_lr", "LM learning rate", 3e-3), integer("n_problems", "LM corpus problems", 20000),
                    num("hidden_scale", "gain on the LM's exposed hidden state", 24.0)}},
                  "train the LM, the judge or the retriever",
                  cmd_train});
  cmds.push_back({{"eval",
                   {str("mode", "retrieval, sweep, judge or pipeline", "retrieval"), str("data", "dataset directory"),
                    str("lm", "LM checkpoint or random:<seed>"), str("judge", "judge checkpoint"),
                    str("retriever", "retriever checkpoint"), str("split", "train, dev or test", "test"),
                    str("subset", "all, seen or unseen tools", "all"), ints("ks", "top-k cutoffs", {1, 5}),
                    theta_key(), integer("max_tokens", "decode budget", 128),
                    integer("max_tool_calls", "calls per answer", 4),
                    ints("sizes", "pool sizes for the sweep", {1, 16, 64, 256, 1024}), seed_key(),
                    integer("limit", "score only the first n items (0: all)", 0), str("out", "report path"),
                    str("traces", "pipeline decode traces JSONL")}},
                  "score retrieval, the judge or the full pipeline",
                  cmd_eval});
  cmds.push_back({{"probe",
                   {str("data", "dataset directory"), str("lm", "LM checkpoint or random:<seed>"),
                    strs("retrievers", "retriever checkpoints"), strs("labels", "one label per retriever"),
                    str("split", "train, dev or test", "test"), str("subset", "all, seen or unseen tools", "seen"),
                    str("out", "report path")}},
                  "compare W_dim across retrievers",
                  cmd_probe});
  cmds.push_back({{"run",
                   {str("query", "question"), str("data", "dataset directory (pool and templates)"),
                    str("lm", "LM checkpoint or random:<seed>"), str("judge", "judge checkpoint"),
                    str("retriever", "retriever checkpoint"), theta_key(),
                    integer("max_tokens", "decode budget", 128), integer("max_tool_calls", "calls per answer", 4),
                    str("trace", "trace JSONL path")}},
                  "answer one query with tools",
                  cmd_run});
  cmds.push_back({{"export-trace",
                   {str("data", "dataset directory"), str("lm", "LM checkpoint or random:<seed>"),
                    str("split", "train, dev or test", "test"), str("out", "trace JSONL path")}},
                  "write hidden states of tool and query prompts",
                  cmd_export_trace});
  cmds.push_back({{"import-trace",
                   {str("trace", "trace JSONL"), str("data", "dataset directory (pool)"),
                    str("retriever", "retriever checkpoint"), ints("ks", "top-k cutoffs", {1, 5}),
                    str("out", "report path")}},
                  "score retrieval on an imported hidden-state trace",
                  cmd_import_trace});
  return cmds;
}

}  // namespace

const std::vector<Command>& commands() {
  static const std::vector<Command> cmds = make_commands();
  return cmds;
}

}  // namespace cotools::cli
