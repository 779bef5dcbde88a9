#include <charconv>
#include <cmath>
#include <functional>

#include "cotools/toolpool.hpp"

namespace cotools {

std::string format_number(double x) {
  require_finite(x, "format_number");
  if (x == 0.0) return "0";  // also folds -0
  const double ax = std::fabs(x);
  const auto fmt = (ax >= 1e-6 && ax < 1e21) ? std::chars_format::fixed : std::chars_format::scientific;
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, fmt);
  if (res.ec != std::errc()) throw Error(Errc::InvalidArgument, "format_number overflow");
  return std::string(buf, res.ptr);
}

std::optional<double> parse_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v, std::chars_format::general);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

namespace {

using NumFn = std::function<double(const std::vector<double>&)>;

struct NumericExecutor {
  std::string name;
  std::size_t arity;
  NumFn fn;
};

[[noreturn]] void domain(const std::string& what) { throw Error(Errc::DomainError, what); }

double as_integer(double x, const char* fn) {
  if (x != std::floor(x) || std::fabs(x) > 9007199254740992.0) domain(std::string(fn) + " needs integer arguments");
  return x;
}

double gcd_of(double a, double b) {
  a = std::fabs(a);
  b = std::fabs(b);
  while (b != 0.0) {
    const double t = std::fmod(a, b);
    a = b;
    b = t;
  }
  return a;
}

double falling(double n, double k) {
  double r = 1.0;
  for (double i = 0; i < k; ++i) r *= (n - i);
  return r;
}

void check_nk(double n, double k, const char* fn) {
  as_integer(n, fn);
  as_integer(k, fn);
  if (n < 0 || k < 0 || k > n) domain(std::string(fn) + " needs 0 <= k <= n");
}

const std::vector<NumericExecutor>& numeric_executors() {
  static const std::vector<NumericExecutor> table = {
      {"add", 2, [](const auto& a) { return a[0] + a[1]; }},
      {"subtract", 2, [](const auto& a) { return a[0] - a[1]; }},
      {"multiply", 2, [](const auto& a) { return a[0] * a[1]; }},
      {"divide", 2,
       [](const auto& a) {
         if (a[1] == 0.0) domain("division by zero");
         return a[0] / a[1];
       }},
      {"power", 2, [](const auto& a) { return std::pow(a[0], a[1]); }},
      {"sqrt", 1,
       [](const auto& a) {
         if (a[0] < 0) domain("sqrt of a negative number");
         return std::sqrt(a[0]);
       }},
      {"log10", 1,
       [](const auto& a) {
         if (a[0] <= 0) domain("log10 of a non-positive number");
         return std::log10(a[0]);
       }},
      {"ln", 1,
       [](const auto& a) {
         if (a[0] <= 0) domain("ln of a non-positive number");
         return std::log(a[0]);
       }},
      {"lcm", 2,
       [](const auto& a) {
         const double x = as_integer(a[0], "lcm"), y = as_integer(a[1], "lcm");
         if (x == 0 || y == 0) return 0.0;
         return std::fabs(x / gcd_of(x, y) * y);
       }},
      {"gcd", 2, [](const auto& a) { return gcd_of(as_integer(a[0], "gcd"), as_integer(a[1], "gcd")); }},
      {"remainder", 2,
       [](const auto& a) {
         if (a[1] == 0.0) domain("remainder by zero");
         return std::fmod(a[0], a[1]);
       }},
      {"choose", 2,
       [](const auto& a) {
         check_nk(a[0], a[1], "choose");
         const double k = std::min(a[1], a[0] - a[1]);
         double r = 1.0;
         for (double i = 1; i <= k; ++i) r = r * (a[0] - k + i) / i;
         return std::round(r);
       }},
      {"permutate", 2,
       [](const auto& a) {
         check_nk(a[0], a[1], "permutate");
         return falling(a[0], a[1]);
       }},
  };
  return table;
}

const NumericExecutor* find_numeric(std::string_view name) {
  for (const auto& e : numeric_executors()) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

ToolSpec numeric_tool(const std::string& name, const std::string& desc, std::vector<std::string> params) {
  ToolSpec s;
  s.tool_id = name;
  s.name = name;
  s.description = desc;
  for (auto& p : params) s.params.push_back({std::move(p), ParamKind::Number});
  s.executor = name;
  return s;
}

}  // namespace

std::vector<std::string> builtin_executors() {
  std::vector<std::string> out;
  for (const auto& e : numeric_executors()) out.push_back(e.name);
  out.push_back("kb_lookup");
  return out;
}

std::string execute_tool_strict(const ToolSpec& spec, const std::vector<std::string>& args) {
  if (args.size() != spec.params.size()) {
    throw Error(Errc::ArityMismatch, spec.tool_id + " takes " + std::to_string(spec.params.size()) +
                                         " arguments, got " + std::to_string(args.size()));
  }
  if (spec.executor == "kb_lookup") {
    if (args.size() != 1) throw Error(Errc::ArityMismatch, "kb_lookup takes one argument");
    auto it = spec.table.find(args[0]);
    if (it == spec.table.end()) domain(spec.tool_id + " has no fact for " + args[0]);
    return it->second;
  }
  const NumericExecutor* ex = find_numeric(spec.executor);
  if (!ex) throw Error(Errc::UnknownTool, spec.tool_id + ": no executor " + spec.executor);
  if (ex->arity != args.size()) throw Error(Errc::ArityMismatch, spec.executor + " arity");
  std::vector<double> xs;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (spec.params[i].kind != ParamKind::Number) {
      throw Error(Errc::CoercionFailure, spec.params[i].name + " must be numeric for " + spec.executor);
    }
    const auto v = parse_number(args[i]);
    if (!v) throw Error(Errc::CoercionFailure, "\"" + args[i] + "\" is not a number");
    xs.push_back(*v);
  }
  const double r = ex->fn(xs);
  if (!std::isfinite(r)) domain(spec.executor + " result is not finite");
  return format_number(r);
}

ToolResult execute_tool(const ToolSpec& spec, const std::vector<std::string>& args) {
  try {
    return {true, execute_tool_strict(spec, args), ""};
  } catch (const Error& e) {
    return {false, std::string(kToolErrorSentinel), e.what()};
  }
}

std::vector<ToolSpec> arith4_tools() {
  return {
      numeric_tool("add", "adds two numbers and returns their sum", {"a", "b"}),
      numeric_tool("subtract", "subtracts the second number from the first", {"a", "b"}),
      numeric_tool("multiply", "multiplies two numbers and returns the product", {"a", "b"}),
      numeric_tool("divide", "divides the first number by the second", {"a", "b"}),
  };
}

std::vector<ToolSpec> func13_tools() {
  return {
      numeric_tool("add", "adds two numbers and returns their sum", {"a", "b"}),
      numeric_tool("subtract", "subtracts the second number from the first", {"a", "b"}),
      numeric_tool("multiply", "multiplies two numbers and returns the product", {"a", "b"}),
      numeric_tool("divide", "divides the first number by the second", {"a", "b"}),
      numeric_tool("power", "raises the first number to the power of the second", {"a", "b"}),
      numeric_tool("sqrt", "returns the square root of a number", {"a"}),
      numeric_tool("log10", "returns the base 10 logarithm of a number", {"a"}),
      numeric_tool("ln", "returns the natural logarithm of a number", {"a"}),
      numeric_tool("lcm", "returns the least common multiple of two integers", {"a", "b"}),
      numeric_tool("gcd", "returns the greatest common divisor of two integers", {"a", "b"}),
      numeric_tool("remainder", "returns the remainder of dividing the first number by the second", {"a", "b"}),
      numeric_tool("choose", "counts the ways to choose k items from n without order", {"n", "k"}),
      numeric_tool("permutate", "counts the ordered arrangements of k items from n", {"n", "k"}),
  };
}

}  // namespace cotools
