#include "cotools/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cotools/cotd.hpp"
#include "cotools/toolpool.hpp"
#include "json.hpp"

namespace cotools {

using nlohmann::json;

void validate_annotated(const AnnotatedAnswer& a) {
  std::size_t prev = 0;
  for (std::size_t i = 0; i < a.markers.size(); ++i) {
    const auto& m = a.markers[i];
    if (i > 0 && m.position <= prev) throw Error(Errc::MarkerAlignment, a.id + ": markers out of order");
    if (m.position > a.answer.size()) throw Error(Errc::MarkerAlignment, a.id + ": marker past the answer");
    if (a.answer.compare(m.position, m.result.size(), m.result) != 0) {
      throw Error(Errc::MarkerAlignment, a.id + ": answer does not hold the result at the marker");
    }
    if (m.tool_id.empty()) throw Error(Errc::MarkerAlignment, a.id + ": marker without a tool");
    prev = m.position;
  }
}

JudgeExample make_judge_example(const AnnotatedAnswer& a, const LanguageModel& lm,
                                const PromptTemplates& templates) {
  validate_annotated(a);
  const std::string prompt = build_generation_prompt(a.query, templates);
  const auto prompt_ids = lm.tokenize(prompt);
  const auto answer_ids = lm.tokenize(a.answer);
  if (prompt_ids.empty()) throw Error(Errc::EmptyInput, "empty generation prompt");
  JudgeExample ex;
  ex.tokens = prompt_ids;
  ex.tokens.insert(ex.tokens.end(), answer_ids.begin(), answer_ids.end());
  if (lm.tokenize(prompt + a.answer).size() != ex.tokens.size()) {
    throw Error(Errc::MarkerAlignment, a.id + ": prompt and answer do not tokenize independently");
  }
  ex.labels.assign(ex.tokens.size(), 0);
  ex.loss_begin = prompt_ids.size() - 1;
  for (const auto& m : a.markers) {
    const std::string_view head(a.answer.data(), m.position);
    const std::string_view tail(a.answer.data() + m.position, a.answer.size() - m.position);
    const std::size_t n_head = lm.tokenize(head).size();
    if (n_head + lm.tokenize(tail).size() != answer_ids.size()) {
      throw Error(Errc::MarkerAlignment, a.id + ": marker splits a token");
    }
    ex.labels[prompt_ids.size() + n_head - 1] = 1;
  }
  return ex;
}

std::vector<JudgeExample> make_judge_examples(const std::vector<AnnotatedAnswer>& data, const LanguageModel& lm,
                                              const PromptTemplates& templates) {
  std::vector<JudgeExample> out;
  out.reserve(data.size());
  for (const auto& a : data) out.push_back(make_judge_example(a, lm, templates));
  return out;
}

std::size_t JudgeFeatures::positives() const {
  std::size_t n = 0;
  for (const auto& l : labels) n += static_cast<std::size_t>(std::count(l.begin(), l.end(), 1));
  return n;
}

std::size_t JudgeFeatures::positions() const {
  std::size_t n = 0;
  for (const auto& l : labels) n += l.size();
  return n;
}

JudgeFeatures judge_features(const std::vector<JudgeExample>& examples, const LanguageModel& lm) {
  JudgeFeatures f;
  for (const auto& ex : examples) {
    const Mat all = lm.hidden_states(ex.tokens);
    const std::size_t n = ex.tokens.size() - ex.loss_begin;
    Mat h(n, all.cols());
    for (std::size_t t = 0; t < n; ++t) std::copy(all.row(ex.loss_begin + t), all.row(ex.loss_begin + t) + all.cols(), h.row(t));
    f.hidden.push_back(std::move(h));
    f.labels.emplace_back(ex.labels.begin() + static_cast<std::ptrdiff_t>(ex.loss_begin), ex.labels.end());
  }
  return f;
}

std::vector<RetrievalItem> make_retrieval_items(const std::vector<AnnotatedAnswer>& data,
                                                const PromptTemplates& templates) {
  std::vector<RetrievalItem> items;
  for (const auto& a : data) {
    validate_annotated(a);
    for (const auto& m : a.markers) {
      items.push_back({build_retrieval_prompt(a.query, std::string_view(a.answer).substr(0, m.position), templates),
                       m.tool_id});
    }
  }
  return items;
}

std::vector<RetrievalBatch> make_retrieval_batches(const std::vector<std::string>& gold_ids, std::size_t batch_size,
                                                   Rng& rng) {
  if (batch_size == 0) throw Error(Errc::InvalidArgument, "batch size 0");
  std::vector<std::size_t> order(gold_ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  std::vector<RetrievalBatch> out;
  for (std::size_t b = 0; b < order.size(); b += batch_size) {
    RetrievalBatch batch;
    for (std::size_t i = b; i < std::min(order.size(), b + batch_size); ++i) {
      const std::string& id = gold_ids[order[i]];
      auto it = std::find(batch.tools.begin(), batch.tools.end(), id);
      batch.gold_index.push_back(static_cast<std::size_t>(it - batch.tools.begin()));
      if (it == batch.tools.end()) batch.tools.push_back(id);
      batch.items.push_back(order[i]);
    }
    out.push_back(std::move(batch));
  }
  return out;
}

RetrieverFeatures retriever_features(const std::vector<RetrievalItem>& items, const ToolPool& pool,
                                     const LanguageModel& lm) {
  RetrieverFeatures f;
  for (const auto& it : items) {
    if (!pool.find(it.gold_tool_id)) throw Error(Errc::UnknownTool, "gold tool " + it.gold_tool_id + " not in pool");
    f.query_hidden.push_back(lm.end_hidden(it.prompt));
    f.gold.push_back(it.gold_tool_id);
  }
  for (const auto& spec : pool.tools()) f.tool_hidden.emplace(spec.tool_id, lm.end_hidden(render_tool_prompt(spec)));
  return f;
}

void validate_train_config(const TrainConfig& c) {
  auto bad = [](const std::string& what) { throw Error(Errc::ConfigError, what); };
  if (!(c.lr > 0) || !std::isfinite(c.lr)) bad("learning rate must be positive");
  if (c.batch_size == 0) bad("batch size must be positive");
  if (c.accumulation_steps == 0) bad("accumulation steps must be positive");
  if (!(c.wdim_lr >= 0) || !std::isfinite(c.wdim_lr)) bad("W_dim learning rate must be non-negative");
  if (!(c.theta > 0 && c.theta < 1)) bad("theta must lie in (0, 1)");
  if (!(c.pos_weight_cap > 0)) bad("positive weight cap must be positive");
  if (c.intermediate == 0) bad("intermediate size must be positive");
}

TrainConfig judge_defaults() {
  TrainConfig c;
  c.epochs = 3;
  c.lr = 1e-5;
  c.batch_size = 8;
  c.accumulation_steps = 16;
  return c;
}

TrainConfig retriever_defaults(std::string_view variant) {
  TrainConfig c;
  c.epochs = 10;
  c.lr = 1e-4;
  if (variant.empty() || variant == "default") {
    c.batch_size = 16;
    c.accumulation_steps = 12;
  } else if (variant == "gsm8k-xl") {
    c.batch_size = 12;
    c.accumulation_steps = 16;
  } else if (variant == "funcqa") {
    c.batch_size = 8;
    c.accumulation_steps = 6;
  } else {
    throw Error(Errc::ConfigError, "unknown retriever variant " + std::string(variant));
  }
  return c;
}

namespace {

void scale_all(const std::vector<Mat*>& gs, double s) {
  for (Mat* g : gs) {
    for (double& x : g->storage()) x *= s;
  }
}

void apply_update(Adam& opt, OptimizerKind kind, const std::vector<Mat*>& params, const std::vector<Mat*>& grads,
                  const std::vector<double>& lrs) {
  std::vector<const Mat*> cg(grads.begin(), grads.end());
  if (kind == OptimizerKind::Adam) {
    opt.step(params, cg, lrs);
  } else {
    sgd_step(params, cg, lrs);
  }
}

void check_frozen(const TrainHooks& hooks, const std::string& before) {
  if (hooks.frozen && hooks.frozen->content_hash() != before) {
    throw Error(Errc::FrozenViolation, "the frozen LM changed during training");
  }
}

// Runs the shared epoch loop. `micro` computes one micro-batch loss and adds
// its gradient; `update` applies the accumulated gradient divided by k.
template <class Micro, class Update>
void epoch_loop(std::size_t n_items, const TrainConfig& cfg, const TrainHooks& hooks, Rng& rng,
                std::size_t& epochs_done, std::vector<LossRecord>& records, std::vector<double>& epoch_loss,
                double record_lr, Micro micro, Update update) {
  while (epochs_done < cfg.epochs && epochs_done < hooks.stop_after_epochs) {
    std::vector<std::size_t> order(n_items);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    double epoch_sum = 0.0, pending_sum = 0.0;
    std::size_t n_micro = 0, pending = 0;
    auto flush = [&] {
      update(pending);
      LossRecord r{records.size() + 1, epochs_done, pending_sum / static_cast<double>(pending), record_lr};
      records.push_back(r);
      if (hooks.on_record) hooks.on_record(r);
      pending = 0;
      pending_sum = 0.0;
    };
    for (std::size_t b = 0; b < n_items; b += cfg.batch_size) {
      const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(b),
                                           order.begin() + static_cast<std::ptrdiff_t>(std::min(n_items, b + cfg.batch_size)));
      const double loss = micro(batch);
      if (!std::isfinite(loss)) {
        throw Error(Errc::Divergence, "non-finite loss in epoch " + std::to_string(epochs_done) + " after " +
                                          std::to_string(records.size()) + " updates");
      }
      epoch_sum += loss;
      pending_sum += loss;
      ++n_micro;
      if (++pending == cfg.accumulation_steps) flush();
    }
    if (pending > 0) flush();
    epoch_loss.push_back(n_micro ? epoch_sum / static_cast<double>(n_micro) : 0.0);
    ++epochs_done;
  }
}

json config_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"lr", c.lr},
          {"batch_size", c.batch_size},
          {"accumulation_steps", c.accumulation_steps},
          {"wdim_lr", c.wdim_lr},
          {"tensor_weighting", c.tensor_weighting},
          {"seed", c.seed},
          {"theta", c.theta},
          {"pos_weight_cap", c.pos_weight_cap},
          {"intermediate", c.intermediate},
          {"optimizer", c.optimizer == OptimizerKind::Adam ? "adam" : "sgd"}};
}

// Everything except the epoch budget must match for a resume.
void check_resume_config(const json& saved, const TrainConfig& cfg) {
  json want = config_json(cfg);
  json have = saved;
  want.erase("epochs");
  have.erase("epochs");
  if (want != have) throw Error(Errc::ConfigError, "resume config differs from the saved run: " + have.dump());
}

json records_json(const std::vector<LossRecord>& rs) {
  json a = json::array();
  for (const auto& r : rs) a.push_back({r.step, r.epoch, r.loss, r.lr});
  return a;
}

std::vector<LossRecord> records_from_json(const json& a) {
  std::vector<LossRecord> rs;
  for (const auto& r : a) {
    rs.push_back({r.at(0).get<std::size_t>(), r.at(1).get<std::size_t>(), r.at(2).get<double>(), r.at(3).get<double>()});
  }
  return rs;
}

void add_moments(Checkpoint& ck, const Adam& opt) {
  for (std::size_t i = 0; i < opt.first_moments().size(); ++i) {
    ck.tensors.push_back({"adam.m" + std::to_string(i), opt.first_moments()[i]});
    ck.tensors.push_back({"adam.v" + std::to_string(i), opt.second_moments()[i]});
  }
}

void load_moments(const Checkpoint& ck, Adam& opt) {
  for (std::size_t i = 0; i < opt.first_moments().size(); ++i) {
    const Mat& m = find_tensor(ck, "adam.m" + std::to_string(i)).value;
    const Mat& v = find_tensor(ck, "adam.v" + std::to_string(i)).value;
    require_same_shape(m, opt.first_moments()[i], "adam moment");
    require_same_shape(v, opt.second_moments()[i], "adam moment");
    opt.first_moments()[i] = m;
    opt.second_moments()[i] = v;
  }
}

json state_meta(const TrainConfig& cfg, const Adam& opt, const Rng& rng, std::size_t epochs_done,
                const std::vector<LossRecord>& records, const std::vector<double>& epoch_loss) {
  return {{"config", config_json(cfg)},         {"adam_t", opt.t()},
          {"rng_seed", rng.seed()},             {"rng_draws", rng.draws()},
          {"epochs_done", epochs_done},         {"records", records_json(records)},
          {"epoch_loss", epoch_loss}};
}

template <class State>
void restore_common(State& st, const json& meta, const TrainConfig& cfg) {
  check_resume_config(meta.at("config"), cfg);
  st.opt.set_t(meta.at("adam_t").get<std::uint64_t>());
  st.rng.restore(meta.at("rng_seed").get<std::uint64_t>(), meta.at("rng_draws").get<std::uint64_t>());
  st.epochs_done = meta.at("epochs_done").get<std::size_t>();
  st.records = records_from_json(meta.at("records"));
  st.epoch_loss = meta.at("epoch_loss").get<std::vector<double>>();
}

json parse_meta(const Checkpoint& ck) {
  try {
    return json::parse(ck.meta_json);
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptCheckpoint, std::string("training state meta: ") + e.what());
  }
}

}  // namespace

double judge_positive_weight(const JudgeFeatures& data, double cap) {
  const std::size_t pos = data.positives(), all = data.positions();
  if (pos == 0) return 1.0;
  return std::min(cap, static_cast<double>(all - pos) / static_cast<double>(pos));
}

JudgeTrainState start_judge_training(JudgeHead init, const TrainConfig& cfg) {
  validate_train_config(cfg);
  validate_judge(init);
  JudgeTrainState st{std::move(init), Adam(), Rng(derive_seed(cfg.seed, "judge.shuffle")), 0, {}, {}};
  st.opt = Adam({&st.judge.gate, &st.judge.up, &st.judge.down});
  return st;
}

void run_judge_training(JudgeTrainState& st, const JudgeFeatures& data, const TrainConfig& cfg,
                        const TrainHooks& hooks) {
  validate_train_config(cfg);
  if (data.hidden.empty()) throw Error(Errc::EmptyInput, "no judge training examples");
  const std::string frozen_before = hooks.frozen ? hooks.frozen->content_hash() : "";
  const double w_pos = judge_positive_weight(data, cfg.pos_weight_cap);
  JudgeGrad g(st.judge);
  const std::vector<Mat*> params = {&st.judge.gate, &st.judge.up, &st.judge.down};
  const std::vector<Mat*> grads = {&g.gate, &g.up, &g.down};
  const std::vector<double> lrs(3, cfg.lr);

  // Micro-batch loss: mean over examples of each example's mean weighted BCE.
  auto micro = [&](const std::vector<std::size_t>& batch) {
    double loss = 0.0;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (std::size_t e : batch) {
      const Mat& h = data.hidden[e];
      const auto& y = data.labels[e];
      const double s = inv_b / static_cast<double>(y.size());
      for (std::size_t t = 0; t < y.size(); ++t) {
        const double w = y[t] ? w_pos : 1.0;
        loss += s * judge_backward(h.row_vec(t), y[t], w, st.judge, g, s);
      }
    }
    return loss;
  };
  auto update = [&](std::size_t k) {
    scale_all(grads, 1.0 / static_cast<double>(k));
    apply_update(st.opt, cfg.optimizer, params, grads, lrs);
    g.zero();
  };
  epoch_loop(data.hidden.size(), cfg, hooks, st.rng, st.epochs_done, st.records, st.epoch_loss, cfg.lr, micro,
             update);
  check_frozen(hooks, frozen_before);
}

RetrieverTrainState start_retriever_training(Retriever init, const TrainConfig& cfg) {
  validate_train_config(cfg);
  validate_encoder(init.query);
  validate_encoder(init.tool);
  if (!init.wdim) throw Error(Errc::InvalidArgument, "retriever has no W_dim");
  RetrieverTrainState st{std::move(init), Adam(), Rng(derive_seed(cfg.seed, "retriever.shuffle")), 0, {}, {}};
  const Mat wshape(1, st.retriever.wdim->w.size());
  st.opt = Adam({&st.retriever.query.gate, &st.retriever.query.up, &st.retriever.query.down, &st.retriever.tool.gate,
                 &st.retriever.tool.up, &st.retriever.tool.down, &wshape});
  return st;
}

void run_retriever_training(RetrieverTrainState& st, const RetrieverFeatures& data, const TrainConfig& cfg,
                            const TrainHooks& hooks) {
  validate_train_config(cfg);
  if (data.query_hidden.empty()) throw Error(Errc::EmptyInput, "no retrieval training items");
  if (data.gold.size() != data.query_hidden.size()) throw Error(Errc::ShapeMismatch, "gold list length");
  const std::string frozen_before = hooks.frozen ? hooks.frozen->content_hash() : "";
  Retriever& r = st.retriever;
  RetrieverGrad g(r);
  const std::size_t d = r.wdim->w.size();
  Mat wmat(1, d), wgrad(1, d);
  const std::vector<Mat*> params = {&r.query.gate, &r.query.up, &r.query.down, &r.tool.gate,
                                    &r.tool.up,    &r.tool.down, &wmat};
  const std::vector<Mat*> grads = {&g.q_gate, &g.q_up, &g.q_down, &g.t_gate, &g.t_up, &g.t_down, &wgrad};
  std::vector<double> lrs(7, cfg.lr);
  lrs[6] = cfg.tensor_weighting ? cfg.wdim_lr : 0.0;

  auto micro = [&](const std::vector<std::size_t>& batch) {
    std::vector<Vec> qh, th;
    std::vector<std::string> tools;
    std::vector<std::size_t> gold;
    for (std::size_t i : batch) {
      const std::string& id = data.gold[i];
      auto it = std::find(tools.begin(), tools.end(), id);
      gold.push_back(static_cast<std::size_t>(it - tools.begin()));
      if (it == tools.end()) {
        auto h = data.tool_hidden.find(id);
        if (h == data.tool_hidden.end()) throw Error(Errc::UnknownTool, "no hidden state for tool " + id);
        tools.push_back(id);
        th.push_back(h->second);
      }
      qh.push_back(data.query_hidden[i]);
    }
    return retriever_backward(qh, th, gold, r, g);
  };
  auto update = [&](std::size_t k) {
    for (std::size_t i = 0; i < d; ++i) {
      wmat(0, i) = r.wdim->w[i];
      wgrad(0, i) = g.wdim[i];
    }
    scale_all(grads, 1.0 / static_cast<double>(k));
    apply_update(st.opt, cfg.optimizer, params, grads, lrs);
    for (std::size_t i = 0; i < d; ++i) r.wdim->w[i] = wmat(0, i);
    g.zero();
  };
  epoch_loop(data.query_hidden.size(), cfg, hooks, st.rng, st.epochs_done, st.records, st.epoch_loss, cfg.lr, micro,
             update);
  check_frozen(hooks, frozen_before);
}

void save_judge_state(const std::filesystem::path& path, const JudgeTrainState& st, const TrainConfig& cfg) {
  Checkpoint ck = judge_checkpoint(st.judge, cfg.seed);
  ck.kind = "judge_state";
  add_moments(ck, st.opt);
  ck.meta_json = state_meta(cfg, st.opt, st.rng, st.epochs_done, st.records, st.epoch_loss).dump();
  save_checkpoint(path, ck);
}

JudgeTrainState load_judge_state(const std::filesystem::path& path, const TrainConfig& cfg) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.kind != "judge_state") throw Error(Errc::CorruptCheckpoint, "expected a judge training state");
  const json meta = parse_meta(ck);
  ck.kind = "judge";
  JudgeTrainState st = start_judge_training(judge_from_checkpoint(ck), cfg);
  load_moments(ck, st.opt);
  restore_common(st, meta, cfg);
  return st;
}

void save_retriever_state(const std::filesystem::path& path, const RetrieverTrainState& st,
                          const TrainConfig& cfg) {
  Checkpoint ck = retriever_checkpoint(st.retriever, cfg.seed);
  ck.kind = "retriever_state";
  add_moments(ck, st.opt);
  ck.meta_json = state_meta(cfg, st.opt, st.rng, st.epochs_done, st.records, st.epoch_loss).dump();
  save_checkpoint(path, ck);
}

RetrieverTrainState load_retriever_state(const std::filesystem::path& path, const TrainConfig& cfg) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.kind != "retriever_state") throw Error(Errc::CorruptCheckpoint, "expected a retriever training state");
  const json meta = parse_meta(ck);
  ck.kind = "retriever";
  RetrieverTrainState st = start_retriever_training(retriever_from_checkpoint(ck), cfg);
  load_moments(ck, st.opt);
  restore_common(st, meta, cfg);
  return st;
}

BinaryMetrics judge_metrics(const JudgeHead& judge, const JudgeFeatures& data, double theta) {
  BinaryMetrics m;
  for (std::size_t e = 0; e < data.hidden.size(); ++e) {
    for (std::size_t t = 0; t < data.labels[e].size(); ++t) {
      const bool pred = judge_score(data.hidden[e].row_vec(t), judge) > theta;
      const bool gold = data.labels[e][t] != 0;
      if (pred && gold) ++m.tp;
      if (pred && !gold) ++m.fp;
      if (!pred && gold) ++m.fn;
      if (!pred && !gold) ++m.tn;
    }
  }
  m.precision = m.tp + m.fp ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) : 0.0;
  m.recall = m.tp + m.fn ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn) : 0.0;
  m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

std::string loss_record_json(const LossRecord& r) {
  return json{{"step", r.step}, {"epoch", r.epoch}, {"loss", r.loss}, {"lr", r.lr}}.dump();
}

}  // namespace cotools
