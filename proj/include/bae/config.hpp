#pragma once

#include "bae/trainer.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace bae {

/// Flat `key = value` settings. Blank lines and text after '#' are ignored.
class ConfigFile {
 public:
  static ConfigFile parse(std::string_view text);
  static ConfigFile load(const std::filesystem::path& path);

  void set(const std::string& key, std::string value);
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// Keys understood by to_train_config.
const std::vector<std::string>& known_config_keys();

/// Defaults overridden by every key present. Unknown keys and unparsable
/// values raise ConfigError naming the key.
TrainConfig to_train_config(const ConfigFile& file);

/// Comma-separated list of numbers ("0,0.1,1").
std::vector<double> parse_number_list(std::string_view text);

}  // namespace bae
