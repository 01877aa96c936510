#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

namespace t2d {

/// Validation failure tied to one configuration field.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Flat `section.key=value` configuration. Serialization is canonical
/// (sorted keys, one pair per line) so snapshots diff cleanly.
class KvConfig {
 public:
  static KvConfig parse(std::string_view text);
  static KvConfig load(const std::string& path);
  std::string to_text() const;

  void set(const std::string& key, std::string value);
  bool has(const std::string& key) const;
  const std::string& raw(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  /// Overlay `other` on top of this config.
  void merge(const KvConfig& other);
  /// Throws ConfigError naming the first key absent from `known`.
  void reject_unknown(const KvConfig& known) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

std::string format_real(double v);

}  // namespace t2d
