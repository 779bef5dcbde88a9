#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>

#include "cotools/bench.hpp"
#include "json.hpp"

namespace cotools {

using nlohmann::json;

bool BenchSet::is_unseen(std::string_view tool_id) const {
  return std::find(unseen_ids.begin(), unseen_ids.end(), tool_id) != unseen_ids.end();
}

namespace {

std::string str(double x) { return format_number(x); }

void split_into(BenchSet& set, std::vector<AnnotatedAnswer> all, std::size_t n_train, std::size_t n_dev) {
  const char* names[] = {"train", "dev", "test"};
  for (std::size_t i = 0; i < all.size(); ++i) {
    const int s = i < n_train ? 0 : (i < n_train + n_dev ? 1 : 2);
    all[i].id = set.name + "-" + names[s] + "-" + std::to_string(i);
    (s == 0 ? set.train : s == 1 ? set.dev : set.test).push_back(std::move(all[i]));
  }
}

// ---- arith4 ----

const std::vector<std::string> kNames = {"Tom", "Ann", "Raj", "Mia", "Leo", "Zoe", "Sam", "Ivy", "Ben", "Kim"};
const std::vector<std::string> kItems = {"apples", "coins", "books", "stamps", "cards", "shells", "beads", "pens"};

std::string op_tool(char op) {
  switch (op) {
    case '+': return "add";
    case '-': return "subtract";
    case '*': return "multiply";
    default: return "divide";
  }
}

AnnotatedAnswer arith_problem(Rng& rng) {
  const std::string& name = rng.pick(kNames);
  const std::string& item = rng.pick(kItems);
  std::int64_t cur = rng.range(100, 9999);
  std::string q = name + " has " + std::to_string(cur) + " " + item + ".";
  AnnotatedAnswer a;
  const auto n_steps = rng.range(1, 2);
  for (std::int64_t s = 0; s < n_steps; ++s) {
    std::vector<char> ops = {'+', '-', '*', '/'};
    rng.shuffle(ops);
    for (char op : ops) {
      std::int64_t b = 0, r = 0;
      std::string sent;
      if (op == '+') {
        b = rng.range(10, 999);
        r = cur + b;
        sent = "Then gets " + std::to_string(b) + " more.";
      } else if (op == '-') {
        if (cur < 20) continue;
        b = rng.range(10, std::min<std::int64_t>(999, cur - 1));
        r = cur - b;
        sent = "Then gives away " + std::to_string(b) + ".";
      } else if (op == '*') {
        if (cur > 99999) continue;
        b = rng.range(2, 12);
        r = cur * b;
        sent = "Then the pile grows " + std::to_string(b) + " times.";
      } else {
        std::vector<std::int64_t> divs;
        for (std::int64_t d = 2; d <= 12; ++d) {
          if (cur % d == 0) divs.push_back(d);
        }
        if (divs.empty()) continue;
        b = rng.pick(divs);
        r = cur / b;
        sent = "Then splits them into " + std::to_string(b) + " equal parts and keeps one.";
      }
      q += " " + sent;
      a.answer += std::to_string(cur) + op + std::to_string(b) + "=";
      a.markers.push_back({a.answer.size(), op_tool(op), {std::to_string(cur), std::to_string(b)}, std::to_string(r)});
      a.answer += std::to_string(r) + ". ";
      cur = r;
      break;
    }
  }
  q += " How many " + item + " are left?";
  a.query = q;
  a.answer += "The answer is " + std::to_string(cur) + ".";
  a.gold_answer = std::to_string(cur);
  return a;
}

ToolPool pool_of(const std::vector<ToolSpec>& tools) {
  ToolPool p;
  for (const auto& t : tools) p.add(t);
  return p;
}

// ---- func13 ----

struct FuncStep {
  std::string tool;
  std::vector<std::string> args;
  std::string phrase;  // with {a} standing for the first operand
  std::string expr;    // rendered left-hand side
};

std::string infix(const std::string& a, const char* op, const std::string& b) { return a + op + b; }

bool is_int(double x) { return x == std::floor(x) && std::fabs(x) < 1e15; }

// Picks a tool applicable to `x` (or any tool when x is empty) and its extra operand.
FuncStep func_step(Rng& rng, const std::optional<double>& x) {
  std::vector<std::string> ok;
  for (const auto& t : func13_tools()) {
    const std::string& n = t.name;
    if (!x) {
      ok.push_back(n);
      continue;
    }
    const double v = *x;
    if (n == "add" || n == "subtract" || n == "multiply" || n == "divide") ok.push_back(n);
    if (n == "power" && std::fabs(v) <= 50) ok.push_back(n);
    if (n == "sqrt" && v >= 0) ok.push_back(n);
    if ((n == "log10" || n == "ln") && v > 0) ok.push_back(n);
    if ((n == "lcm" || n == "gcd") && is_int(v) && std::fabs(v) >= 1 && std::fabs(v) <= 1e6) ok.push_back(n);
    if (n == "remainder" && is_int(v) && v >= 0) ok.push_back(n);
    if ((n == "choose" || n == "permutate") && is_int(v) && v >= 1 && v <= 20) ok.push_back(n);
  }
  FuncStep s;
  s.tool = rng.pick(ok);
  const std::string& n = s.tool;
  auto fresh = [&](std::int64_t lo, std::int64_t hi) { return x ? str(*x) : std::to_string(rng.range(lo, hi)); };
  std::string a, b;
  if (n == "add" || n == "subtract" || n == "multiply" || n == "divide") {
    a = fresh(2, 999);
    b = std::to_string(n == "multiply" || n == "divide" ? rng.range(2, 12) : rng.range(2, 99));
  } else if (n == "power") {
    a = fresh(2, 20);
    b = std::to_string(rng.range(2, 3));
  } else if (n == "sqrt" || n == "log10" || n == "ln") {
    a = fresh(2, 999);
  } else if (n == "lcm" || n == "gcd") {
    a = fresh(2, 99);
    b = std::to_string(rng.range(2, x ? 30 : 99));
  } else if (n == "remainder") {
    a = fresh(10, 999);
    b = std::to_string(rng.range(2, 30));
  } else {
    a = fresh(2, 20);
    const std::int64_t nv = static_cast<std::int64_t>(*parse_number(a));
    b = std::to_string(rng.range(1, std::min<std::int64_t>(nv, 5)));
  }
  s.args = {a};
  if (!b.empty()) s.args.push_back(b);
  static const std::map<std::string, std::string> phrases = {
      {"add", "the sum of {a} and {b}"},
      {"subtract", "the difference of {a} and {b}"},
      {"multiply", "the product of {a} and {b}"},
      {"divide", "{a} divided by {b}"},
      {"power", "{a} raised to the power {b}"},
      {"sqrt", "the square root of {a}"},
      {"log10", "the base-10 logarithm of {a}"},
      {"ln", "the natural logarithm of {a}"},
      {"lcm", "the least common multiple of {a} and {b}"},
      {"gcd", "the greatest common divisor of {a} and {b}"},
      {"remainder", "the remainder of {a} divided by {b}"},
      {"choose", "the number of ways to choose {b} items from {a}"},
      {"permutate", "the number of ordered arrangements of {b} items from {a}"},
  };
  s.phrase = phrases.at(n);
  if (!b.empty()) s.phrase.replace(s.phrase.find("{b}"), 3, b);
  if (n == "add") s.expr = infix(a, "+", b);
  if (n == "subtract") s.expr = infix(a, "-", b);
  if (n == "multiply") s.expr = infix(a, "*", b);
  if (n == "divide") s.expr = infix(a, "/", b);
  if (n == "power") s.expr = infix(a, "^", b);
  if (n == "sqrt" || n == "log10" || n == "ln") s.expr = n + "(" + a + ")";
  if (n == "lcm" || n == "gcd") s.expr = n + "(" + a + "," + b + ")";
  if (n == "remainder") s.expr = infix(a, "%", b);
  if (n == "choose") s.expr = "C(" + a + "," + b + ")";
  if (n == "permutate") s.expr = "P(" + a + "," + b + ")";
  return s;
}

AnnotatedAnswer func_problem(Rng& rng, std::size_t hops, const ToolPool& pool) {
  for (;;) {
    AnnotatedAnswer a;
    std::optional<double> cur;
    std::string q;
    bool good = true;
    for (std::size_t k = 1; k <= hops && good; ++k) {
      FuncStep s = func_step(rng, cur);
      const std::string ref = k == 1 ? s.args[0] : "r" + std::to_string(k - 1);
      s.phrase.replace(s.phrase.find("{a}"), 3, ref);
      try {
        const std::string r = execute_tool_strict(pool.get(s.tool), s.args);
        q += "Let r" + std::to_string(k) + " be " + s.phrase + ". ";
        a.answer += s.expr + "=";
        a.markers.push_back({a.answer.size(), s.tool, s.args, r});
        a.answer += r + ". ";
        cur = *parse_number(r);
        if (std::fabs(*cur) > 1e12) good = false;
      } catch (const Error&) {
        good = false;
      }
    }
    if (!good) continue;
    a.query = q + "What is r" + std::to_string(hops) + "?";
    a.gold_answer = str(*cur);
    a.answer += "The answer is " + a.gold_answer + ".";
    return a;
  }
}

// ---- kbsim ----

const std::vector<std::string>& kb_words() {
  static const std::vector<std::string> words = [] {
    std::istringstream in(
        "river mountain birth death capital currency language anthem flag founder leader spouse child parent "
        "sibling teacher student author publisher director composer singer painter architect coach team league "
        "stadium city country region province island ocean desert forest species genus family order color height "
        "weight area population elevation depth length width speed price budget revenue salary award prize medal "
        "title rank era century decade season genre style instrument label album novel poem film series episode "
        "studio network channel planet star galaxy moon orbit crater element isotope mineral rock fossil disease "
        "symptom drug gene protein organ tissue cell virus bacteria enzyme hormone muscle bone nerve blood religion "
        "deity temple church mosque festival holiday cuisine dish ingredient recipe beverage wine cheese bread "
        "fruit vegetable spice herb flower tree grass crop harvest soil climate rainfall wind storm volcano glacier "
        "canyon valley lake bay harbor port airport railway highway bridge tunnel tower castle palace museum "
        "library school university college campus degree major thesis journal editor critic reviewer patron "
        "sponsor owner tenant partner rival ally enemy successor predecessor mentor heir nickname motto emblem "
        "mascot uniform vessel engine fuel voltage");
    std::vector<std::string> w;
    for (std::string s; in >> s;) w.push_back(s);
    return w;
  }();
  return words;
}

const std::vector<std::string> kSyllables = {"ta", "ru", "ve", "no", "si", "ka", "lo", "mi", "ren", "tor", "va",
                                             "sel", "dun", "qui", "bar", "neth", "oru", "pim", "zal", "fen", "gor"};

std::string entity(Rng& rng) {
  std::string e;
  const auto n = rng.range(2, 3);
  for (std::int64_t i = 0; i < n; ++i) e += rng.pick(kSyllables);
  e[0] = static_cast<char>(e[0] - 'a' + 'A');
  return e;
}

using Words = std::array<std::string, 3>;

std::vector<Words> kb_relations(Rng& rng, std::size_t n) {
  const auto& words = kb_words();
  std::set<std::pair<std::string, std::string>> used;
  std::vector<Words> out;
  std::size_t attempts = 0;
  while (out.size() < n) {
    if (++attempts > 1000000) throw Error(Errc::InvalidArgument, "cannot draw that many distinct relations");
    std::vector<std::size_t> idx;
    while (idx.size() < 3) {
      const auto i = static_cast<std::size_t>(rng.below(words.size()));
      if (std::find(idx.begin(), idx.end(), i) == idx.end()) idx.push_back(i);
    }
    const Words w = {words[idx[0]], words[idx[1]], words[idx[2]]};
    std::vector<std::pair<std::string, std::string>> pairs;
    for (int i = 0; i < 3; ++i) {
      for (int j = i + 1; j < 3; ++j) pairs.push_back(std::minmax(w[i], w[j]));
    }
    if (std::any_of(pairs.begin(), pairs.end(), [&](const auto& p) { return used.count(p) > 0; })) continue;
    used.insert(pairs.begin(), pairs.end());
    out.push_back(w);
  }
  return out;
}

std::string kb_question(Rng& rng, const Words& w, const std::string& e) {
  switch (rng.below(4)) {
    case 0: return "What " + w[0] + " " + w[1] + " does " + e + " have?";
    case 1: return "Which " + w[1] + " " + w[2] + " is linked to " + e + "?";
    case 2: return "Find the " + w[0] + " " + w[1] + " " + w[2] + " of " + e + ".";
    default: return "Give the " + w[0] + " " + w[2] + " of " + e + ".";
  }
}

}  // namespace

BenchSet gen_arith4(std::size_t n_train, std::size_t n_dev, std::size_t n_test, std::uint64_t seed) {
  BenchSet set;
  set.name = "arith4";
  set.seed = seed;
  set.params_json = json{{"n_train", n_train}, {"n_dev", n_dev}, {"n_test", n_test}}.dump();
  set.pool = pool_of(arith4_tools());
  Rng rng(derive_seed(seed, "gen.arith4"));
  std::vector<AnnotatedAnswer> all;
  for (std::size_t i = 0; i < n_train + n_dev + n_test; ++i) all.push_back(arith_problem(rng));
  split_into(set, std::move(all), n_train, n_dev);
  return set;
}

BenchSet gen_arith4(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error(Errc::InvalidArgument, "gen_arith4 needs n > 0");
  if (n < 10) return gen_arith4(n, 0, 0, seed);
  const std::size_t dev = n / 10, test = n / 10;
  return gen_arith4(n - dev - test, dev, test, seed);
}

BenchSet gen_func13(std::size_t n_train, std::size_t n_dev, std::size_t n_test, std::size_t hops,
                    std::uint64_t seed) {
  if (hops < 1 || hops > 4) throw Error(Errc::InvalidArgument, "hops must be in 1..4");
  if (n_train + n_dev + n_test == 0) throw Error(Errc::InvalidArgument, "gen_func13 needs n > 0");
  BenchSet set;
  set.name = "func13";
  set.seed = seed;
  set.params_json = json{{"n_train", n_train}, {"n_dev", n_dev}, {"n_test", n_test}, {"hops", hops}}.dump();
  set.pool = pool_of(func13_tools());
  Rng rng(derive_seed(seed, "gen.func13"));
  std::vector<AnnotatedAnswer> all;
  for (std::size_t i = 0; i < n_train + n_dev + n_test; ++i) all.push_back(func_problem(rng, hops, set.pool));
  split_into(set, std::move(all), n_train, n_dev);
  return set;
}

void validate_kb_options(const KbOptions& o) {
  if (o.n_tools == 0) throw Error(Errc::ConfigError, "kbsim needs at least one tool");
  if (o.n_unseen >= o.n_tools) throw Error(Errc::ConfigError, "n_unseen must be below n_tools");
  if (!(o.noise >= 0.0 && o.noise <= 1.0)) throw Error(Errc::ConfigError, "noise must lie in [0, 1]");
  if (o.n_unseen == 0 && o.n_test_unseen > 0) throw Error(Errc::ConfigError, "unseen test questions need unseen tools");
}

BenchSet gen_kbsim(const KbOptions& o, std::uint64_t seed) {
  validate_kb_options(o);
  BenchSet set;
  set.name = "kbsim";
  set.seed = seed;
  set.params_json = json{{"n_tools", o.n_tools}, {"n_unseen", o.n_unseen},     {"n_train", o.n_train},
                         {"n_dev", o.n_dev},     {"n_test", o.n_test},         {"n_test_unseen", o.n_test_unseen},
                         {"noise", o.noise}}
                        .dump();
  Rng rng(derive_seed(seed, "gen.kbsim"));
  const auto rel = kb_relations(rng, o.n_tools);
  std::vector<std::size_t> order(o.n_tools);
  for (std::size_t i = 0; i < o.n_tools; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<bool> unseen(o.n_tools, false);
  for (std::size_t i = 0; i < o.n_unseen; ++i) unseen[order[i]] = true;
  std::vector<std::size_t> seen_tools, unseen_tools;
  for (std::size_t i = 0; i < o.n_tools; ++i) (unseen[i] ? unseen_tools : seen_tools).push_back(i);

  std::vector<ToolSpec> specs;
  for (const auto& w : rel) {
    ToolSpec s;
    s.tool_id = w[0] + "_" + w[1] + "_" + w[2];
    s.name = s.tool_id;
    s.description = "returns the " + w[0] + " " + w[1] + " " + w[2] + " of the subject";
    s.params = {{"subject", ParamKind::Entity}};
    s.executor = "kb_lookup";
    specs.push_back(std::move(s));
  }
  for (std::size_t i = 0; i < o.n_tools; ++i) specs[i].seen = !unseen[i];

  auto question = [&](std::size_t gold, bool noisy) {
    std::string e;
    do {
      e = entity(rng);
    } while (specs[gold].table.count(e));
    std::size_t src = gold;
    if (noisy && o.n_tools > 1) {
      src = static_cast<std::size_t>(rng.below(o.n_tools - 1));
      if (src >= gold) ++src;
    }
    const std::string answer = entity(rng);
    specs[gold].table[e] = answer;
    AnnotatedAnswer a;
    a.query = kb_question(rng, rel[src], e);
    a.answer = answer + ".";
    a.gold_answer = answer;
    a.markers.push_back({0, specs[gold].tool_id, {e}, answer});
    return a;
  };

  std::vector<AnnotatedAnswer> all;
  for (std::size_t k = 0; k < o.n_train; ++k) {
    const std::size_t g = k < seen_tools.size() ? seen_tools[k] : rng.pick(seen_tools);
    const bool noisy = o.noise > 0.0 && rng.uniform() < o.noise;
    all.push_back(question(g, noisy));
  }
  for (std::size_t k = 0; k < o.n_dev; ++k) all.push_back(question(rng.pick(seen_tools), false));
  for (std::size_t k = 0; k < o.n_test; ++k) all.push_back(question(rng.pick(seen_tools), false));
  for (std::size_t k = 0; k < o.n_test_unseen; ++k) {
    all.push_back(question(unseen_tools[k % unseen_tools.size()], false));
  }
  for (auto& s : specs) set.pool.add(std::move(s));
  for (std::size_t i : unseen_tools) set.unseen_ids.push_back(set.pool.at(i).tool_id);
  split_into(set, std::move(all), o.n_train, o.n_dev);
  return set;
}

std::vector<std::string> arith4_pretrain_docs(std::size_t n_problems, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "gen.arith4.pretrain"));
  std::vector<std::string> docs;
  for (std::size_t i = 0; i < n_problems; ++i) {
    const AnnotatedAnswer a = arith_problem(rng);
    docs.push_back("Q: " + a.query + "\nA: Let's think step by step. " + a.answer);
    for (const auto& m : a.markers) {
      docs.push_back("Q: " + a.query + "\nA: " + a.answer.substr(0, m.position) + "\nTool: " + m.tool_id +
                     "(a, b)\nCall: " + m.tool_id + "(a=\"" + m.args[0] + "\", b=\"" + m.args[1] + "\")");
    }
  }
  return docs;
}

SequenceSampler packed_pair_sampler(std::vector<std::string> docs) {
  if (docs.empty()) throw Error(Errc::EmptyInput, "no pretraining documents");
  return [docs = std::move(docs), vocab = Vocab()](Rng& rng) {
    const std::string& a = rng.pick(docs);
    const std::string& b = rng.pick(docs);
    auto ids = vocab.tokenize(a + "\n\n" + b);
    ids.push_back(vocab.end_id());
    return ids;
  };
}

LmWeights pretrain_arith4_lm(const ArithLmOptions& o,
                             const std::function<void(const PretrainRecord&, const LmWeights&)>& on_step) {
  LmWeights w = init_lm(o.lm, derive_seed(o.seed, "lm"));
  const auto sampler = packed_pair_sampler(arith4_pretrain_docs(o.n_problems, derive_seed(o.seed, "lm.corpus")));
  PretrainConfig pc = o.pretrain;
  pc.seed = derive_seed(o.seed, "lm.sampling");
  pretrain_lm(w, sampler, pc, [&](const PretrainRecord& r) {
    if (on_step) on_step(r, w);
  });
  return w;
}

std::string arith_lm_options_json(const ArithLmOptions& o) {
  return json{{"d", o.lm.d},
              {"layers", o.lm.layers},
              {"heads", o.lm.heads},
              {"context", o.lm.context},
              {"ffn", o.lm.ffn},
              {"hidden_scale", o.lm.hidden_scale},
              {"init_std", o.lm.init_std},
              {"steps", o.pretrain.steps},
              {"batch", o.pretrain.batch},
              {"lr", o.pretrain.lr},
              {"n_problems", o.n_problems},
              {"seed", o.seed}}
      .dump();
}

std::string annotated_to_json(const AnnotatedAnswer& a) {
  json markers = json::array();
  for (const auto& m : a.markers) {
    markers.push_back({{"position", m.position}, {"tool_id", m.tool_id}, {"args", m.args}, {"result", m.result}});
  }
  return json{{"id", a.id},
              {"query", a.query},
              {"answer", a.answer},
              {"gold_answer", a.gold_answer},
              {"markers", markers}}
      .dump();
}

AnnotatedAnswer annotated_from_json(std::string_view line) {
  static const std::set<std::string> fields = {"id", "query", "answer", "gold_answer", "markers"};
  AnnotatedAnswer a;
  try {
    const json j = json::parse(line);
    for (const auto& [k, v] : j.items()) {
      if (!fields.count(k)) throw Error(Errc::MalformedRecord, "unknown field " + k);
    }
    a.id = j.at("id").get<std::string>();
    a.query = j.at("query").get<std::string>();
    a.answer = j.at("answer").get<std::string>();
    a.gold_answer = j.at("gold_answer").get<std::string>();
    for (const auto& m : j.at("markers")) {
      a.markers.push_back({m.at("position").get<std::size_t>(), m.at("tool_id").get<std::string>(),
                           m.at("args").get<std::vector<std::string>>(), m.at("result").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedRecord, std::string("annotated answer: ") + e.what());
  }
  validate_annotated(a);
  return a;
}

namespace {

std::string split_jsonl(const std::vector<AnnotatedAnswer>& xs) {
  std::string out;
  for (const auto& a : xs) out += annotated_to_json(a) + "\n";
  return out;
}

std::vector<AnnotatedAnswer> parse_split(const std::string& text) {
  std::vector<AnnotatedAnswer> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(annotated_from_json(line));
  }
  return out;
}

const char* kSplits[] = {"train", "dev", "test"};

json manifest(const BenchSet& set, const std::map<std::string, std::string>& files) {
  return {{"name", set.name},
          {"generator_version", kGeneratorVersion},
          {"seed", set.seed},
          {"params", json::parse(set.params_json)},
          {"sizes", {{"train", set.train.size()}, {"dev", set.dev.size()}, {"test", set.test.size()}}},
          {"unseen_ids", set.unseen_ids},
          {"files", files}};
}

std::map<std::string, std::string> bench_files(const BenchSet& set) {
  std::map<std::string, std::string> f;
  f["pool.json"] = tool_pool_to_json(set.pool) + "\n";
  f["train.jsonl"] = split_jsonl(set.train);
  f["dev.jsonl"] = split_jsonl(set.dev);
  f["test.jsonl"] = split_jsonl(set.test);
  return f;
}

}  // namespace

std::string bench_manifest_json(const BenchSet& set) {
  std::map<std::string, std::string> hashes;
  for (const auto& [name, body] : bench_files(set)) hashes[name] = sha256_hex(body);
  return manifest(set, hashes).dump(1) + "\n";
}

void save_bench(const std::filesystem::path& dir, const BenchSet& set) {
  for (const auto& [name, body] : bench_files(set)) write_file(dir / name, body);
  write_file(dir / "manifest.json", bench_manifest_json(set));
}

BenchSet load_bench(const std::filesystem::path& dir) {
  json m;
  try {
    m = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedRecord, std::string("manifest: ") + e.what());
  }
  BenchSet set;
  try {
    set.name = m.at("name").get<std::string>();
    set.seed = m.at("seed").get<std::uint64_t>();
    set.params_json = m.at("params").dump();
    set.unseen_ids = m.at("unseen_ids").get<std::vector<std::string>>();
    for (const auto& [name, hash] : m.at("files").items()) {
      if (file_sha256(dir / name) != hash.get<std::string>()) {
        throw Error(Errc::ProvenanceMismatch, (dir / name).string() + " does not match its manifest hash");
      }
    }
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedRecord, std::string("manifest: ") + e.what());
  }
  set.pool = load_tool_pool(dir / "pool.json");
  std::vector<AnnotatedAnswer>* splits[] = {&set.train, &set.dev, &set.test};
  for (int i = 0; i < 3; ++i) *splits[i] = parse_split(read_file(dir / (std::string(kSplits[i]) + ".jsonl")));
  return set;
}

}  // namespace cotools
