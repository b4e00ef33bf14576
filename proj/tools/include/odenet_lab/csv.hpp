#pragma once

// Comma-separated output: header row, '.' decimals, LF line endings, doubles
// in shortest round-trip form.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace odenet::lab {

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  CsvWriter& add(double value);
  CsvWriter& add(std::string_view value);
  CsvWriter& add(const char* value) { return add(std::string_view(value)); }
  CsvWriter& add(std::size_t value);
  CsvWriter& add(std::int64_t value);
  CsvWriter& add(int value) { return add(static_cast<std::int64_t>(value)); }
  CsvWriter& add(bool value) { return add(std::string_view(value ? "1" : "0")); }
  /// Ends the row; throws ContractError if the cell count differs from the header.
  void end_row();
  void close();

 private:
  std::ofstream out_;
  std::filesystem::path path_;
  std::size_t columns_;
  std::vector<std::string> cells_;
};

/// Writes `text` byte-for-byte (no newline translation).
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace odenet::lab
