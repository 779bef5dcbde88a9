#include "config.hpp"

#include <charconv>
#include <sstream>

#include "cotools/checkpoint.hpp"
#include "cotools/errors.hpp"
#include "cotools/toolpool.hpp"

namespace cotools::cli {

namespace {

[[noreturn]] void config_error(const std::string& msg) { throw Error(Errc::ConfigError, msg); }

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

long long parse_int(const Key& key, const std::string& s) {
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    config_error(key.name + ": '" + s + "' is not an integer");
  }
  return v;
}

}  // namespace

const Key* Schema::find(const std::string& name) const {
  for (const auto& k : keys) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

json parse_flag_value(const Key& key, const std::string& text) {
  switch (key.kind) {
    case Kind::Str:
      return text;
    case Kind::Int:
      return parse_int(key, text);
    case Kind::Num: {
      const auto v = parse_number(text);
      if (!v) config_error(key.name + ": '" + text + "' is not a number");
      return *v;
    }
    case Kind::Bool:
      if (text == "true" || text == "1") return true;
      if (text == "false" || text == "0") return false;
      config_error(key.name + ": expected true or false, got '" + text + "'");
    case Kind::IntList: {
      json arr = json::array();
      for (const auto& s : split_list(text)) arr.push_back(parse_int(key, s));
      return arr;
    }
    case Kind::StrList: {
      json arr = json::array();
      for (const auto& s : split_list(text)) arr.push_back(s);
      return arr;
    }
  }
  config_error(key.name + ": unsupported kind");
}

void check_value(const Key& key, const json& v) {
  if (v.is_null()) return;
  bool ok = false;
  switch (key.kind) {
    case Kind::Str: ok = v.is_string(); break;
    case Kind::Int: ok = v.is_number_integer(); break;
    case Kind::Num: ok = v.is_number(); break;
    case Kind::Bool: ok = v.is_boolean(); break;
    case Kind::IntList:
      ok = v.is_array();
      for (const auto& e : v) ok = ok && e.is_number_integer();
      break;
    case Kind::StrList:
      ok = v.is_array();
      for (const auto& e : v) ok = ok && e.is_string();
      break;
  }
  if (!ok) config_error(key.name + ": wrong type " + std::string(v.type_name()));
}

RunConfig resolve_config(const Schema& schema, const std::optional<std::string>& config_path,
                         const FlagValues& flags, const char* env_seed) {
  json values = json::object();
  for (const auto& k : schema.keys) values[k.name] = k.def;

  if (config_path) {
    json file;
    try {
      file = json::parse(read_file(*config_path));
    } catch (const json::exception& e) {
      config_error(*config_path + ": " + e.what());
    }
    if (!file.is_object()) config_error(*config_path + ": config must be a JSON object");
    for (const auto& [name, v] : file.items()) {
      const Key* k = schema.find(name);
      if (!k) config_error("unknown config key '" + name + "' for " + schema.command);
      check_value(*k, v);
      values[name] = v;
    }
  }

  if (env_seed && *env_seed && schema.find("seed")) {
    values["seed"] = parse_flag_value(*schema.find("seed"), env_seed);
  }

  for (const auto& [name, text] : flags) {
    const Key* k = schema.find(name);
    if (!k) config_error("unknown flag '" + name + "'");
    values[name] = parse_flag_value(*k, text);
  }
  if (values.contains("seed") && values["seed"].is_number_integer() && values["seed"].get<long long>() < 0) {
    config_error("seed must be non-negative");
  }
  return RunConfig(schema, std::move(values));
}

const json& RunConfig::at(const std::string& key) const {
  if (!schema_->find(key)) throw Error(Errc::ConfigError, "no key '" + key + "' in " + schema_->command);
  return values_.at(key);
}

bool RunConfig::has(const std::string& key) const { return !at(key).is_null(); }

std::string RunConfig::str(const std::string& key) const {
  const json& v = at(key);
  if (v.is_null()) throw Error(Errc::ConfigError, schema_->command + ": '" + key + "' is required");
  return v.get<std::string>();
}

long long RunConfig::integer(const std::string& key) const {
  const json& v = at(key);
  if (v.is_null()) throw Error(Errc::ConfigError, schema_->command + ": '" + key + "' is required");
  return v.get<long long>();
}

std::size_t RunConfig::size(const std::string& key) const {
  const long long v = integer(key);
  if (v < 0) throw Error(Errc::ConfigError, key + " must be non-negative");
  return static_cast<std::size_t>(v);
}

double RunConfig::num(const std::string& key) const {
  const json& v = at(key);
  if (v.is_null()) throw Error(Errc::ConfigError, schema_->command + ": '" + key + "' is required");
  return v.get<double>();
}

bool RunConfig::flag(const std::string& key) const {
  const json& v = at(key);
  return !v.is_null() && v.get<bool>();
}

std::vector<std::size_t> RunConfig::sizes(const std::string& key) const {
  std::vector<std::size_t> out;
  for (const auto& e : at(key)) {
    if (e.get<long long>() < 0) throw Error(Errc::ConfigError, key + " entries must be non-negative");
    out.push_back(e.get<std::size_t>());
  }
  return out;
}

std::vector<std::string> RunConfig::strs(const std::string& key) const {
  std::vector<std::string> out;
  for (const auto& e : at(key)) out.push_back(e.get<std::string>());
  return out;
}

std::string RunConfig::fingerprint() const {
  return sha256_hex(json{{"command", schema_->command}, {"config", values_}}.dump());
}

json RunConfig::provenance() const {
  return {{"command", schema_->command}, {"config", values_}, {"config_fingerprint", fingerprint()}};
}

}  // namespace cotools::cli
