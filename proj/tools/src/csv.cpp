#include "odenet_lab/csv.hpp"

#include "odenet/errors.hpp"
#include "odenet_lab/config.hpp"

namespace odenet::lab {

namespace {

std::string quote_if_needed(std::string_view cell) {
  if (cell.find_first_of(",\"\n") == std::string_view::npos) return std::string(cell);
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path), columns_(header.size()) {
  if (!out_) throw ConfigError("cannot write " + path.string());
  for (const auto& h : header) add(std::string_view(h));
  end_row();
}

CsvWriter& CsvWriter::add(double value) {
  cells_.push_back(format_real(value));
  return *this;
}

CsvWriter& CsvWriter::add(std::string_view value) {
  cells_.push_back(quote_if_needed(value));
  return *this;
}

CsvWriter& CsvWriter::add(std::size_t value) {
  cells_.push_back(std::to_string(value));
  return *this;
}

CsvWriter& CsvWriter::add(std::int64_t value) {
  cells_.push_back(std::to_string(value));
  return *this;
}

void CsvWriter::end_row() {
  if (cells_.size() != columns_) {
    throw ContractError(path_.string() + ": row has " + std::to_string(cells_.size()) + " cells, header has " +
                        std::to_string(columns_));
  }
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    if (i) out_ << ',';
    out_ << cells_[i];
  }
  out_ << '\n';
  cells_.clear();
}

void CsvWriter::close() {
  out_.close();
  if (!out_) throw ConfigError("failed writing " + path_.string());
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw ConfigError("failed writing " + path.string());
}

}  // namespace odenet::lab
