#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace cotools::cli {

using nlohmann::json;

enum class Kind { Str, Int, Num, Bool, IntList, StrList };

struct Key {
  std::string name;  // config key; the flag is the same with '-' for '_'
  Kind kind;
  json def;          // null: unset unless given
  std::string help;
};

struct Schema {
  std::string command;
  std::vector<Key> keys;
  const Key* find(const std::string& name) const;
};

// Resolved settings for one subcommand. Precedence, lowest first: schema
// defaults, the config file, COTOOLS_SEED (for "seed"), then flags.
class RunConfig {
 public:
  RunConfig(const Schema& schema, json values) : schema_(&schema), values_(std::move(values)) {}

  bool has(const std::string& key) const;
  std::string str(const std::string& key) const;
  long long integer(const std::string& key) const;
  std::size_t size(const std::string& key) const;
  double num(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<std::size_t> sizes(const std::string& key) const;
  std::vector<std::string> strs(const std::string& key) const;

  const json& values() const noexcept { return values_; }
  // sha256 over the canonical (sorted-key) dump of command + values.
  std::string fingerprint() const;
  json provenance() const;  // {"command", "config", "config_fingerprint"}

 private:
  const json& at(const std::string& key) const;
  const Schema* schema_;
  json values_;
};

// Raw flag text keyed by config name.
using FlagValues = std::map<std::string, std::string>;

// Throws Error(ConfigError) on unknown keys, wrong types or bad flag text.
RunConfig resolve_config(const Schema& schema, const std::optional<std::string>& config_path,
                         const FlagValues& flags, const char* env_seed);

json parse_flag_value(const Key& key, const std::string& text);
void check_value(const Key& key, const json& v);

}  // namespace cotools::cli
