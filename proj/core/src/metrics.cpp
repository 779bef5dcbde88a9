#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <regex>

#include "cotools/bench.hpp"
#include "json.hpp"

namespace cotools {

using nlohmann::json;

std::optional<double> parse_final_answer(std::string_view text) {
  static constexpr std::string_view kCue = "The answer is ";
  const auto at = text.rfind(kCue);
  if (at == std::string_view::npos) return std::nullopt;
  std::string_view rest = text.substr(at + kCue.size());
  static const std::regex num(R"(^-?[0-9]+(\.[0-9]+)?([eE][-+]?[0-9]+)?)");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(rest.begin(), rest.end(), m, num)) return std::nullopt;
  return parse_number(m.str(0));
}

double round_decimal(double x, int places) {
  require_finite(x, "round_decimal");
  if (places < 0) throw Error(Errc::InvalidArgument, "negative decimal places");
  char buf[512];
  const auto res = std::to_chars(buf, buf + sizeof buf, std::fabs(x), std::chars_format::fixed);
  if (res.ec != std::errc()) throw Error(Errc::InvalidArgument, "round_decimal overflow");
  std::string s(buf, res.ptr);
  const auto dot = s.find('.');
  if (dot == std::string::npos || s.size() - dot - 1 <= static_cast<std::size_t>(places)) return x;
  const bool up = s[dot + 1 + static_cast<std::size_t>(places)] >= '5';
  std::string kept = s.substr(0, dot) + s.substr(dot + 1, static_cast<std::size_t>(places));
  if (up) {
    // Decimal increment of the kept digits.
    std::size_t i = kept.size();
    while (i > 0 && kept[i - 1] == '9') kept[--i] = '0';
    if (i == 0) {
      kept.insert(kept.begin(), '1');
    } else {
      ++kept[i - 1];
    }
  }
  const std::size_t int_len = kept.size() - static_cast<std::size_t>(places);
  std::string out = kept.substr(0, int_len);
  if (places > 0) out += "." + kept.substr(int_len);
  const double v = *parse_number(out);
  return x < 0 ? -v : v;
}

bool round_match(std::optional<double> pred, double gold) {
  if (!pred || !std::isfinite(*pred)) return false;
  return round_decimal(*pred, 2) == round_decimal(gold, 2);
}

bool approx_match(std::optional<double> pred, double gold) {
  if (!pred || !std::isfinite(*pred)) return false;
  const double err = std::fabs(*pred - gold);
  return gold == 0.0 ? err <= 1e-8 : err <= 1e-3 * std::fabs(gold);
}

namespace {

template <class F>
double accuracy(const std::vector<std::optional<double>>& preds, const std::vector<double>& golds, F match) {
  if (preds.size() != golds.size()) throw Error(Errc::ShapeMismatch, "predictions and golds differ in length");
  if (golds.empty()) throw Error(Errc::EmptyTestSet, "no test items");
  std::size_t ok = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) ok += match(preds[i], golds[i]) ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(golds.size());
}

}  // namespace

double eval_round_acc(const std::vector<std::optional<double>>& preds, const std::vector<double>& golds) {
  return accuracy(preds, golds, round_match);
}

double eval_approx_acc(const std::vector<std::optional<double>>& preds, const std::vector<double>& golds) {
  return accuracy(preds, golds, approx_match);
}

std::vector<double> eval_topk(const std::vector<std::vector<std::string>>& ranked,
                              const std::vector<std::string>& golds, const std::vector<std::size_t>& ks) {
  if (ranked.size() != golds.size()) throw Error(Errc::ShapeMismatch, "ranked lists and golds differ in length");
  if (golds.empty()) throw Error(Errc::EmptyTestSet, "no test items");
  std::vector<double> acc(ks.size(), 0.0);
  for (std::size_t i = 0; i < golds.size(); ++i) {
    if (ranked[i].empty()) throw Error(Errc::EmptyPool, "empty ranked list");
    const auto pos = static_cast<std::size_t>(std::find(ranked[i].begin(), ranked[i].end(), golds[i]) - ranked[i].begin());
    for (std::size_t j = 0; j < ks.size(); ++j) {
      if (pos < std::min(ks[j], ranked[i].size())) acc[j] += 1.0;
    }
  }
  for (double& a : acc) a /= static_cast<double>(golds.size());
  return acc;
}

ErrorHistogram error_histogram(const std::vector<std::vector<std::string>>& ranked,
                               const std::vector<std::string>& golds) {
  if (ranked.size() != golds.size()) throw Error(Errc::ShapeMismatch, "ranked lists and golds differ in length");
  std::map<std::string, std::size_t> counts;
  ErrorHistogram h;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    if (ranked[i].empty()) throw Error(Errc::EmptyPool, "empty ranked list");
    if (ranked[i].front() == golds[i]) continue;
    ++counts[ranked[i].front()];
    ++h.errors;
  }
  h.counts.assign(counts.begin(), counts.end());
  std::stable_sort(h.counts.begin(), h.counts.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::size_t top = 0;
  for (std::size_t i = 0; i < std::min<std::size_t>(10, h.counts.size()); ++i) top += h.counts[i].second;
  h.concentration = h.errors ? static_cast<double>(top) / static_cast<double>(h.errors) : 0.0;
  return h;
}

std::vector<std::string> frequency_ranking(const std::vector<std::string>& train_golds, const ToolPool& pool) {
  std::map<std::string, std::size_t> freq;
  for (const auto& g : train_golds) ++freq[g];
  std::vector<std::string> ids;
  for (const auto& t : pool.tools()) ids.push_back(t.tool_id);
  std::sort(ids.begin(), ids.end());
  std::stable_sort(ids.begin(), ids.end(), [&](const auto& a, const auto& b) { return freq[a] > freq[b]; });
  return ids;
}

std::vector<std::vector<std::string>> rank_all(const std::vector<Vec>& query_vecs, const ToolIndex& index) {
  std::vector<std::vector<std::string>> out;
  out.reserve(query_vecs.size());
  for (const auto& q : query_vecs) {
    std::vector<std::string> ids;
    for (const auto& s : score_and_rank(q, index.entries)) ids.push_back(s.tool_id);
    out.push_back(std::move(ids));
  }
  return out;
}

std::vector<SweepPoint> sweep_pool_size(const std::vector<Vec>& query_vecs, const std::vector<std::string>& golds,
                                        const ToolIndex& index, const std::vector<std::size_t>& sizes,
                                        std::uint64_t seed) {
  if (query_vecs.size() != golds.size()) throw Error(Errc::ShapeMismatch, "queries and golds differ in length");
  if (golds.empty()) throw Error(Errc::EmptyTestSet, "no test items");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] == 0 || sizes[i] > index.size()) throw Error(Errc::OutOfRange, "pool size outside [1, index size]");
    if (i > 0 && sizes[i] <= sizes[i - 1]) throw Error(Errc::InvalidArgument, "pool sizes must ascend");
  }
  std::vector<std::size_t> perm(index.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  Rng rng(derive_seed(seed, "sweep.pool"));
  rng.shuffle(perm);

  std::vector<SweepPoint> out;
  for (std::size_t size : sizes) {
    std::vector<std::vector<std::string>> ranked;
    for (std::size_t q = 0; q < golds.size(); ++q) {
      std::vector<std::pair<std::string, Vec>> sub;
      for (const auto& e : index.entries) {
        if (e.first == golds[q]) sub.push_back(e);
      }
      if (sub.empty()) throw Error(Errc::UnknownTool, "gold tool " + golds[q] + " not in the index");
      for (std::size_t i = 0; i < perm.size() && sub.size() < size; ++i) {
        const auto& e = index.entries[perm[i]];
        if (e.first != golds[q]) sub.push_back(e);
      }
      std::vector<std::string> ids;
      for (const auto& s : score_and_rank(query_vecs[q], sub)) ids.push_back(s.tool_id);
      ranked.push_back(std::move(ids));
    }
    const auto acc = eval_topk(ranked, golds, {1, 5});
    out.push_back({size, acc[0], acc[1]});
  }
  return out;
}

std::string eval_report_json(const EvalReport& r) {
  json hist = json::array();
  for (const auto& [id, n] : r.histogram.counts) hist.push_back({{"tool_id", id}, {"count", n}});
  json j = {{"metric", r.metric},
            {"ks", r.ks},
            {"accuracies", r.accuracies},
            {"extra", r.extra},
            {"errors", {{"total", r.histogram.errors}, {"concentration_top10", r.histogram.concentration},
                        {"by_tool", hist}}},
            {"fingerprint", r.fingerprint}};
  return j.dump(1) + "\n";
}

}  // namespace cotools
