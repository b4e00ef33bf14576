#pragma once

// Strict INI experiment configs. Every getter records the value it resolved
// (including defaults); keys that no getter asked for are rejected by
// check_all_used(), so a typo never silently falls back to a default.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace odenet::lab {

class Config {
 public:
  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text, const std::string& source = "<string>");

  bool has(std::string_view section, std::string_view key) const;
  bool has_section(std::string_view section) const;
  /// Section names starting with `prefix`, in file order.
  std::vector<std::string> sections_with_prefix(std::string_view prefix) const;

  std::string text(std::string_view section, std::string_view key) const;
  std::string text(std::string_view section, std::string_view key, std::string_view fallback) const;
  double real(std::string_view section, std::string_view key) const;
  double real(std::string_view section, std::string_view key, double fallback) const;
  std::uint64_t count(std::string_view section, std::string_view key) const;
  std::uint64_t count(std::string_view section, std::string_view key, std::uint64_t fallback) const;
  std::optional<double> optional_real(std::string_view section, std::string_view key) const;
  /// Comma-separated reals.
  std::vector<double> reals(std::string_view section, std::string_view key) const;
  std::vector<double> reals(std::string_view section, std::string_view key, const std::vector<double>& fallback) const;
  /// Comma-separated non-negative integers; "a..b" expands to an inclusive range.
  std::vector<std::uint64_t> counts(std::string_view section, std::string_view key) const;
  std::vector<std::uint64_t> counts(std::string_view section, std::string_view key,
                                    const std::vector<std::uint64_t>& fallback) const;
  /// Comma-separated words.
  std::vector<std::string> words(std::string_view section, std::string_view key) const;

  /// Records a value that did not come from the file (e.g. a --seed override).
  void record(std::string_view section, std::string_view key, std::string value) const;
  /// Removes a key from the resolved record (it still counts as used).
  void forget(std::string_view section, std::string_view key) const;

  /// Throws ConfigError naming the first key no getter consumed.
  void check_all_used() const;

  /// Every resolved value as INI text, sections and keys in first-use order.
  std::string resolved_ini() const;

 private:
  struct Entry {
    std::string section, key, value;
  };
  const Entry* find(std::string_view section, std::string_view key) const;
  const std::string& raw(std::string_view section, std::string_view key) const;

  std::string source_;
  std::vector<Entry> entries_;
  std::vector<std::string> sections_;
  mutable std::vector<std::string> used_;  // "section.key", first use
  mutable std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>> resolved_;
};

/// Shortest round-trip decimal text of a double ("0.1", "1e-05", "nan").
std::string format_real(double value);

}  // namespace odenet::lab
