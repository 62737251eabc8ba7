#pragma once

// TOML configuration (parsed with toml++). Keys are addressed as "section.key".

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace adaptcm {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when required keys are absent; lists every missing key by name.
class MissingKeys : public ConfigError {
 public:
  explicit MissingKeys(std::vector<std::string> keys);
  const std::vector<std::string>& keys() const { return keys_; }

 private:
  std::vector<std::string> keys_;
};

class Config {
 public:
  Config();
  ~Config();
  Config(const Config& other);
  Config(Config&&) noexcept;
  Config& operator=(const Config& other);
  Config& operator=(Config&&) noexcept;

  static Config parse(const std::string& text, const std::string& origin = "<string>");
  static Config load(const std::string& path);

  bool has(const std::string& key) const;
  /// Sets or replaces a key with a value in TOML syntax, e.g. "0.5", "[1, 2]" or "\"name\"".
  void set(const std::string& key, const std::string& raw);
  /// Applies "section.key=value" overrides.
  void apply_override(const std::string& assignment);

  /// Throws MissingKeys naming every key in `keys` that is absent.
  void require(const std::vector<std::string>& keys) const;

  double number(const std::string& key) const;
  long integer(const std::string& key) const;
  bool boolean(const std::string& key) const;
  std::string string(const std::string& key) const;
  std::vector<double> numbers(const std::string& key) const;
  std::vector<int> integers(const std::string& key) const;
  std::vector<std::vector<double>> table(const std::string& key) const;

  double number_or(const std::string& key, double fallback) const;
  long integer_or(const std::string& key, long fallback) const;
  bool boolean_or(const std::string& key, bool fallback) const;
  std::string string_or(const std::string& key, const std::string& fallback) const;

  /// Every leaf key in "section.key" form, sorted.
  std::vector<std::string> keys() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace adaptcm
