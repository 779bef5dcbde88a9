#include "cotools/cotd.hpp"

#include <cstdio>

#include "json.hpp"

namespace cotools {

using nlohmann::json;

FilledCall fill_parameters(std::string_view query, std::string_view fragment, const ToolSpec& spec,
                           const LanguageModel& lm, const PromptTemplates& t, std::size_t max_tokens) {
  const std::string prompt = build_calling_prompt(query, fragment, spec, t);
  auto session = lm.session();
  Vec h = session->feed(lm.tokenize(prompt));
  const Vocab& vocab = lm.vocab();
  FilledCall out;
  for (std::size_t i = 0; i < max_tokens; ++i) {
    const int id = lm.next_token(h);
    if (id == vocab.end_id()) break;
    out.generated += vocab.token_text(id);
    if (out.generated.size() >= t.call_stop.size() &&
        out.generated.compare(out.generated.size() - t.call_stop.size(), t.call_stop.size(), t.call_stop) == 0) {
      break;
    }
    h = session->feed_one(id);
  }
  out.args = parse_call(out.generated, spec);
  return out;
}

std::string greedy_decode(const LanguageModel& lm, std::string_view prompt, std::size_t max_tokens) {
  auto session = lm.session();
  Vec h = session->feed(lm.tokenize(prompt));
  std::string out;
  for (std::size_t i = 0; i < max_tokens; ++i) {
    const int id = lm.next_token(h);
    if (id == lm.vocab().end_id()) break;
    out += lm.vocab().token_text(id);
    try {
      h = session->feed_one(id);
    } catch (const Error& e) {
      if (e.code() != Errc::ContextOverflow) throw;
      break;
    }
  }
  return out;
}

namespace {

void check_components(const CotoolsComponents& c) {
  if (!c.lm || !c.templates) throw Error(Errc::InvalidArgument, "decoder needs an LM and templates");
  if (c.judge) {
    if (!c.retriever || !c.index || !c.pool) {
      throw Error(Errc::InvalidArgument, "tool calling needs a retriever, an index and a pool");
    }
    validate_judge(*c.judge);
    if (c.judge->gate.rows() != c.lm->dim()) throw Error(Errc::DimMismatch, "judge does not match the LM width");
    if (c.retriever->query.gate.rows() != c.lm->dim()) {
      throw Error(Errc::DimMismatch, "query encoder does not match the LM width");
    }
    if (c.index->entries.empty()) throw Error(Errc::EmptyPool, "tool index is empty");
  }
}

}  // namespace

DecodeTrace generate_with_tools(std::string_view query, const CotoolsComponents& c, const DecodeLimits& limits) {
  check_components(c);
  const LanguageModel& lm = *c.lm;
  const Vocab& vocab = lm.vocab();
  DecodeTrace trace;
  std::string answer;
  auto session = lm.session();
  Vec h = session->feed(lm.tokenize(build_generation_prompt(query, *c.templates)));

  auto finish = [&](std::string reason, bool truncated) {
    trace.stop_reason = std::move(reason);
    trace.truncated = truncated;
    trace.final_answer = answer;
    return trace;
  };

  for (;;) {
    if (trace.tokens >= limits.max_tokens) return finish("max_tokens", true);
    const double score = c.judge ? judge_score(h, *c.judge) : 0.0;

    if (c.judge && score > limits.theta && trace.tool_calls < limits.max_tool_calls) {
      TraceEvent site;
      site.kind = EventKind::CallSite;
      site.judge_score = score;
      site.position = answer.size();
      trace.events.push_back(site);

      const Vec vq = encode_query(lm.end_hidden(build_retrieval_prompt(query, answer, *c.templates)), *c.retriever);
      const auto ranked = score_and_rank(vq, c.index->entries);
      TraceEvent ret;
      ret.kind = EventKind::Retrieved;
      const std::size_t keep = std::min(limits.ranked_in_trace, ranked.size());
      ret.ranked.assign(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(std::max<std::size_t>(keep, 1)));
      trace.events.push_back(ret);

      const ToolSpec& spec = c.pool->get(ranked.front().tool_id);
      TraceEvent called;
      called.kind = EventKind::Called;
      called.tool_id = spec.tool_id;
      ToolResult res;
      try {
        FilledCall fc = fill_parameters(query, answer, spec, lm, *c.templates, limits.max_call_tokens);
        called.args = fc.args;
        res = execute_tool(spec, fc.args);
      } catch (const Error& e) {
        if (e.code() != Errc::ParamParseFailure && e.code() != Errc::ContextOverflow) throw;
        res = {false, std::string(kToolErrorSentinel), e.what()};
      }
      called.result = res.text;
      called.ok = res.ok;
      called.error = res.error;
      trace.events.push_back(called);

      TraceEvent spliced;
      spliced.kind = EventKind::Spliced;
      spliced.text = res.text;
      trace.events.push_back(spliced);
      answer = splice_result(answer, res.text);
      ++trace.tool_calls;

      const auto ids = lm.tokenize(res.text);
      if (!ids.empty()) {
        try {
          h = session->feed(ids);
        } catch (const Error& e) {
          if (e.code() != Errc::ContextOverflow) throw;
          return finish("context", true);
        }
      }
      continue;
    }

    const int id = lm.next_token(h);
    TraceEvent tok;
    tok.kind = EventKind::TokenEmitted;
    tok.token_id = id;
    tok.judge_score = score;
    if (id != vocab.end_id()) tok.text = vocab.token_text(id);
    trace.events.push_back(tok);
    ++trace.tokens;
    if (id == vocab.end_id()) return finish("end", false);
    answer += tok.text;
    try {
      h = session->feed_one(id);
    } catch (const Error& e) {
      if (e.code() != Errc::ContextOverflow) throw;
      return finish("context", true);
    }
  }
}

std::string replay(const DecodeTrace& trace) {
  std::string out;
  for (const auto& e : trace.events) {
    if (e.kind == EventKind::TokenEmitted || e.kind == EventKind::Spliced) out += e.text;
  }
  return out;
}

namespace {

std::string_view kind_name(EventKind k) {
  switch (k) {
    case EventKind::TokenEmitted: return "token";
    case EventKind::CallSite: return "call_site";
    case EventKind::Retrieved: return "retrieved";
    case EventKind::Called: return "called";
    case EventKind::Spliced: return "spliced";
  }
  return "token";
}

json event_json(const TraceEvent& e) {
  json j;
  j["event"] = kind_name(e.kind);
  switch (e.kind) {
    case EventKind::TokenEmitted:
      j["id"] = e.token_id;
      j["text"] = e.text;
      j["judge_score"] = e.judge_score;
      break;
    case EventKind::CallSite:
      j["position"] = e.position;
      j["judge_score"] = e.judge_score;
      break;
    case EventKind::Retrieved: {
      json r = json::array();
      for (const auto& s : e.ranked) r.push_back({{"tool_id", s.tool_id}, {"score", s.score}});
      j["ranked"] = r;
      break;
    }
    case EventKind::Called:
      j["tool_id"] = e.tool_id;
      j["args"] = e.args;
      j["result"] = e.result;
      j["ok"] = e.ok;
      if (!e.ok) j["error"] = e.error;
      break;
    case EventKind::Spliced:
      j["text"] = e.text;
      break;
  }
  return j;
}

}  // namespace

std::string trace_to_jsonl(const DecodeTrace& trace) {
  std::string out;
  for (const auto& e : trace.events) {
    out += event_json(e).dump();
    out += '\n';
  }
  json summary = {{"final_answer", trace.final_answer},
                  {"truncated", trace.truncated},
                  {"stop_reason", trace.stop_reason},
                  {"counts", {{"events", trace.events.size()}, {"tokens", trace.tokens},
                              {"tool_calls", trace.tool_calls}}}};
  out += summary.dump();
  out += '\n';
  return out;
}

std::string render_trace(const DecodeTrace& trace) {
  std::string out;
  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    const auto& e = trace.events[i];
    if (e.kind == EventKind::CallSite) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3f", e.judge_score);
      out += "\n  [call @" + std::to_string(e.position) + " judge=" + buf + "] ";
    } else if (e.kind == EventKind::Called) {
      out += e.tool_id + "(";
      for (std::size_t k = 0; k < e.args.size(); ++k) out += (k ? ", \"" : "\"") + e.args[k] + "\"";
      out += ") -> " + e.result;
      if (!e.ok) out += " (" + e.error + ")";
      out += "\n";
    } else if (e.kind == EventKind::Spliced || e.kind == EventKind::TokenEmitted) {
      out += e.text;
    }
  }
  out += "\n";
  if (trace.truncated) out += "[truncated: " + trace.stop_reason + "]\n";
  return out;
}

}  // namespace cotools
