#include <algorithm>
#include <functional>

#include "cotools/bench.hpp"
#include "json.hpp"

namespace cotools {

using nlohmann::json;

DimWeight masked_dim_weight(const DimWeight& w, const std::vector<std::size_t>& keep) {
  DimWeight out{Vec(w.w.size())};
  for (std::size_t i : keep) {
    if (i >= w.w.size()) throw Error(Errc::OutOfRange, "dimension " + std::to_string(i) + " outside W_dim");
    out.w[i] = w.w[i];
  }
  return out;
}

std::vector<std::size_t> key_dimensions(const DimWeight& w) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < w.w.size(); ++i) {
    if (w.w[i] > 1.0) keep.push_back(i);
  }
  return keep;
}

namespace {

std::pair<double, double> top1_top5(const Retriever& r, const RetrieverFeatures& eval, const ToolPool& pool) {
  std::map<std::string, Vec> hidden;
  for (const auto& t : pool.tools()) {
    auto it = eval.tool_hidden.find(t.tool_id);
    if (it == eval.tool_hidden.end()) throw Error(Errc::UnknownTool, "no hidden state for tool " + t.tool_id);
    hidden.emplace(t.tool_id, it->second);
  }
  const ToolIndex index = build_tool_index_from_hidden(pool, hidden, r, "probe");
  std::vector<Vec> qs;
  for (const auto& h : eval.query_hidden) qs.push_back(encode_query(h, r));
  const auto acc = eval_topk(rank_all(qs, index), eval.gold, {1, 5});
  return {acc[0], acc[1]};
}

}  // namespace

ProbeReport probe_wdim(const Retriever& r, const RetrieverFeatures& eval, const ToolPool& pool) {
  ProbeReport p;
  p.raw = r.wdim->w.values();
  try {
    p.zscore = zscore_normalize(r.wdim->w).values();
    p.sorted_desc = p.zscore;
  } catch (const Error& e) {
    if (e.code() != Errc::ZeroVariance) throw;
    p.degenerate = true;
    p.sorted_desc = p.raw;
  }
  std::sort(p.sorted_desc.begin(), p.sorted_desc.end(), std::greater<>());
  p.key_dims = key_dimensions(*r.wdim);
  std::tie(p.full_top1, p.full_top5) = top1_top5(r, eval, pool);
  if (p.key_dims.empty()) {
    // Nothing survives the mask; every tool scores alike.
    p.degenerate = true;
    return p;
  }
  Retriever masked = r;
  masked.wdim = std::make_shared<DimWeight>(masked_dim_weight(*r.wdim, p.key_dims));
  std::tie(p.masked_top1, p.masked_top5) = top1_top5(masked, eval, pool);
  return p;
}

std::string probe_report_json(const std::vector<std::pair<std::string, ProbeReport>>& reports) {
  json arr = json::array();
  for (const auto& [label, p] : reports) {
    arr.push_back({{"label", label},
                   {"raw", p.raw},
                   {"zscore", p.zscore},
                   {"sorted_desc", p.sorted_desc},
                   {"key_dims", p.key_dims},
                   {"key_dim_count", p.key_dims.size()},
                   {"degenerate", p.degenerate},
                   {"full", {{"top1", p.full_top1}, {"top5", p.full_top5}}},
                   {"masked", {{"top1", p.masked_top1}, {"top5", p.masked_top5}}}});
  }
  return json{{"probes", arr}}.dump(1) + "\n";
}

}  // namespace cotools
