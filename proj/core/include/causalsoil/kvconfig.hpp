#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace causalsoil {

// Flat "key = value" text, one pair per line, '#' comments. Keys conventionally
// use dotted sections ("discovery.alpha"). Later duplicates overwrite earlier.
class KeyValues {
 public:
  static KeyValues parse(std::string_view text, std::string_view where = "config");
  static KeyValues load(const std::string& path);

  void set(const std::string& key, std::string value) { entries_[key] = std::move(value); }
  bool contains(const std::string& key) const { return entries_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& entries() const noexcept { return entries_; }

  // Sorted by key; deterministic.
  std::string to_text() const;

 private:
  std::map<std::string, std::string> entries_;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace causalsoil
