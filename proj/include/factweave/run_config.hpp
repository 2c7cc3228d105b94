#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "factweave/model.hpp"
#include "factweave/trainer.hpp"

namespace factweave {

/// Run configuration from a `key = value` file plus command-line overrides.
/// Unknown keys are rejected; every run writes the effective values back out
/// as a frozen snapshot, which is itself a valid config file.
class RunConfig {
 public:
  RunConfig();  // defaults only

  static RunConfig from_file(const std::filesystem::path& path);
  void set(const std::string& key, const std::string& value);  // rejects unknown keys

  std::string get(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key) const;

  ModelConfig model_config() const;
  TrainConfig train_config() const;

  std::filesystem::path path(const std::string& key) const;  // "" when unset
  bool has_path(const std::string& key) const;

  /// Effective values, sorted by key, re-loadable as a config file.
  std::string snapshot() const;
  void write_snapshot(const std::filesystem::path& path) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace factweave
