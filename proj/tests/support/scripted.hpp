#pragma once

// Scripted decoding fixture shared by the unit tests and the acceptance run.
//
// Hidden vectors are [serial, call_flag, one-hot tool...]. The judge fires
// only on call_flag, the retriever is the identity encoder (zero heads, unit
// W_dim) so the one-hot tool slot picks the tool, and every prefix the
// decoder can visit gets a fresh serial so next_token is unambiguous.

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cotools/cotd.hpp"
#include "cotools/scripted_lm.hpp"

namespace cotools::testing {

struct ScriptedCall {
  std::size_t position = 0;  // offset of the result inside the answer
  std::string tool_id;
  std::vector<std::string> args;
  std::string result;                    // what the answer shows at position
  std::optional<std::string> call_text;  // raw parameter text; default is the well-formed call
};

struct ScriptedCase {
  std::string name;
  std::string query;
  std::string answer;  // hand-written gold, results included
  std::vector<ScriptedCall> calls;
};

inline std::string well_formed_call(const ToolSpec& spec, const std::vector<std::string>& args) {
  std::string s = spec.name + "(";
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i) s += ", ";
    s += spec.params.at(i).name + "=\"" + args[i] + "\"";
  }
  return s + ")";
}

class Scripter {
 public:
  Scripter(ToolPool pool, PromptTemplates templates)
      : pool_(std::move(pool)), templates_(std::move(templates)), lm_(2 + pool_.size()) {
    const std::size_t d = lm_.dim();
    judge_.gate = Mat(d, 1);
    judge_.up = Mat(d, 1);
    judge_.down = Mat(1, 1, 1.0);
    judge_.gate(1, 0) = 10.0;
    judge_.up(1, 0) = 1.0;
    retriever_.query = EncoderHead{Mat(d, 1), Mat(d, 1), Mat(1, d)};
    retriever_.tool = retriever_.query;
    retriever_.wdim = make_dim_weight(d);
    std::map<std::string, Vec> hidden;
    for (std::size_t k = 0; k < pool_.size(); ++k) {
      Vec h(d);
      h[2 + k] = 1.0;
      hidden.emplace(pool_.at(k).tool_id, h);
    }
    index_ = build_tool_index_from_hidden(pool_, hidden, retriever_, "scripted");
  }

  void add(const ScriptedCase& c) {
    const Vocab& v = lm_.vocab();
    const std::vector<int> prompt = v.tokenize(build_generation_prompt(c.query, templates_));
    const std::vector<int> answer = v.tokenize(c.answer);
    std::vector<bool> call_at(answer.size() + 1, false);
    for (const auto& call : c.calls) {
      if (c.answer.compare(call.position, call.result.size(), call.result) != 0) {
        throw std::logic_error(c.name + ": answer does not show the result at its position");
      }
      call_at.at(call.position) = true;
    }
    // Every answer prefix, so the same script also drives tool-free decoding.
    for (std::size_t p = 0; p <= answer.size(); ++p) {
      std::vector<int> prefix = prompt;
      prefix.insert(prefix.end(), answer.begin(), answer.begin() + static_cast<std::ptrdiff_t>(p));
      lm_.program(prefix, fresh(call_at[p] ? 1.0 : 0.0), p < answer.size() ? answer[p] : v.end_id());
    }
    for (const auto& call : c.calls) {
      const std::string fragment = c.answer.substr(0, call.position);
      std::vector<int> rp = v.tokenize(build_retrieval_prompt(c.query, fragment, templates_));
      rp.push_back(v.end_id());
      fill_missing(rp);
      lm_.program(rp, fresh(0.0, tool_slot(call.tool_id)), 0);

      const ToolSpec& spec = pool_.get(call.tool_id);
      const std::vector<int> cp = v.tokenize(build_calling_prompt(c.query, fragment, spec, templates_));
      const std::vector<int> text = v.tokenize(call.call_text ? *call.call_text : well_formed_call(spec, call.args));
      for (std::size_t i = 0; i < text.size(); ++i) {
        std::vector<int> prefix = cp;
        prefix.insert(prefix.end(), text.begin(), text.begin() + static_cast<std::ptrdiff_t>(i));
        lm_.program(prefix, fresh(0.0), text[i]);
      }
    }
  }

  CotoolsComponents components() const {
    return {&lm_, &judge_, &retriever_, &index_, &pool_, &templates_};
  }
  const ScriptedLm& lm() const { return lm_; }
  const PromptTemplates& templates() const { return templates_; }

 private:
  Vec fresh(double flag, std::optional<std::size_t> tool = std::nullopt) {
    Vec h(lm_.dim());
    h[0] = serial_++;
    h[1] = flag;
    if (tool) h[2 + *tool] = 1.0;
    return h;
  }

  std::size_t tool_slot(const std::string& id) const {
    for (std::size_t k = 0; k < pool_.size(); ++k) {
      if (pool_.at(k).tool_id == id) return k;
    }
    throw std::logic_error("unknown scripted tool " + id);
  }

  // Full-sequence hidden_states needs every strict prefix; values are free
  // but must not clobber prefixes the session path relies on.
  void fill_missing(const std::vector<int>& ids) {
    std::vector<int> prefix;
    for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
      prefix.push_back(ids[i]);
      try {
        lm_.lookup(prefix);
      } catch (const Error&) {
        lm_.program(prefix, fresh(0.0), 0);
      }
    }
  }

  ToolPool pool_;
  PromptTemplates templates_;
  ScriptedLm lm_;
  JudgeHead judge_;
  Retriever retriever_;
  ToolIndex index_;
  double serial_ = 1.0;
};

inline ToolPool func13_pool() {
  ToolPool pool;
  for (auto& t : func13_tools()) pool.add(std::move(t));
  return pool;
}

// Hand-computed answers; results are written out, never derived from the
// executors under test.
inline std::vector<ScriptedCase> scripted_suite() {
  auto call = [](std::size_t pos, std::string tool, std::vector<std::string> args, std::string result) {
    return ScriptedCall{pos, std::move(tool), std::move(args), std::move(result), std::nullopt};
  };
  std::vector<ScriptedCase> s;
  s.push_back({"add", "What is 3 plus 4?", "3+4=7. The answer is 7.", {call(4, "add", {"3", "4"}, "7")}});
  s.push_back({"subtract", "What is 1200 minus 345?", "1200-345=855. The answer is 855.",
               {call(9, "subtract", {"1200", "345"}, "855")}});
  s.push_back({"multiply", "What is 2468 times 37?", "2468*37=91316. The answer is 91316.",
               {call(8, "multiply", {"2468", "37"}, "91316")}});
  s.push_back({"divide", "What is 2604 over 7?", "2604/7=372. The answer is 372.",
               {call(7, "divide", {"2604", "7"}, "372")}});
  s.push_back({"divide_fraction", "What is 1 over 8?", "1/8=0.125. The answer is 0.125.",
               {call(4, "divide", {"1", "8"}, "0.125")}});
  s.push_back({"power", "What is 2 to the 10?", "2^10=1024. The answer is 1024.",
               {call(5, "power", {"2", "10"}, "1024")}});
  s.push_back({"sqrt", "What is the root of 144?", "sqrt(144)=12. The answer is 12.",
               {call(10, "sqrt", {"144"}, "12")}});
  s.push_back({"log10", "What is log10 of 1000?", "log10(1000)=3. The answer is 3.",
               {call(12, "log10", {"1000"}, "3")}});
  s.push_back({"gcd", "What is the gcd of 84 and 36?", "gcd(84,36)=12. The answer is 12.",
               {call(11, "gcd", {"84", "36"}, "12")}});
  s.push_back({"lcm", "What is the lcm of 4 and 6?", "lcm(4,6)=12. The answer is 12.",
               {call(9, "lcm", {"4", "6"}, "12")}});
  s.push_back({"remainder", "What is 17 mod 5?", "17%5=2. The answer is 2.",
               {call(5, "remainder", {"17", "5"}, "2")}});
  s.push_back({"choose", "How many ways to pick 2 of 5?", "C(5,2)=10. The answer is 10.",
               {call(7, "choose", {"5", "2"}, "10")}});
  s.push_back({"permutate", "How many orders of 2 of 5?", "P(5,2)=20. The answer is 20.",
               {call(7, "permutate", {"5", "2"}, "20")}});
  s.push_back({"two_calls", "Ann has 2468 coins and gets 136 more, then splits them 7 ways.",
               "2468+136=2604. 2604/7=372. The answer is 372.",
               {call(9, "add", {"2468", "136"}, "2604"), call(22, "divide", {"2604", "7"}, "372")}});
  s.push_back({"three_calls", "Start at 10, add 5, double it, take 7 away.",
               "10+5=15. 15*2=30. 30-7=23. The answer is 23.",
               {call(5, "add", {"10", "5"}, "15"), call(14, "multiply", {"15", "2"}, "30"),
                call(23, "subtract", {"30", "7"}, "23")}});
  s.push_back({"float_sum", "What is 0.1 plus 0.2?", "0.1+0.2=0.30000000000000004. The answer is 0.30000000000000004.",
               {call(8, "add", {"0.1", "0.2"}, "0.30000000000000004")}});
  s.push_back({"negative", "What is 5 minus 12?", "5-12=-7. The answer is -7.",
               {call(5, "subtract", {"5", "12"}, "-7")}});
  s.push_back({"no_call", "Say the answer 9.", "The answer is 9.", {}});
  s.push_back({"divide_by_zero", "What is 1 over 0?", "1/0=[TOOL_ERROR]. The answer is unknown.",
               {call(4, "divide", {"1", "0"}, "[TOOL_ERROR]")}});
  ScriptedCase garbled{"garbled_call", "What is 6 plus 6?", "6+6=[TOOL_ERROR]. The answer is unknown.",
                       {call(4, "add", {}, "[TOOL_ERROR]")}};
  garbled.calls[0].call_text = "add(a=6, b=6)";
  s.push_back(garbled);
  return s;
}

}  // namespace cotools::testing
