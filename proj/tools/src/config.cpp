#include "odenet_lab/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "odenet/errors.hpp"

namespace odenet::lab {

namespace {

std::string key_path(std::string_view section, std::string_view key) {
  return std::string(section) + "." + std::string(key);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = s.find(',', start);
    const auto piece = trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    out.push_back(piece);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (out.size() == 1 && out.front().empty()) out.clear();
  return out;
}

std::optional<double> to_real(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<std::uint64_t> to_count(std::string_view s) {
  s = trim(s);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (!s.empty() && ec == std::errc() && ptr == s.data() + s.size()) return v;
  // Accept integral reals such as 1e5.
  const auto r = to_real(s);
  if (r && *r >= 0.0 && *r <= 9.0e15 && std::floor(*r) == *r) return static_cast<std::uint64_t>(*r);
  return std::nullopt;
}

template <class T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    if constexpr (std::is_same_v<T, double>) {
      out += format_real(values[i]);
    } else if constexpr (std::is_same_v<T, std::string>) {
      out += values[i];
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

}  // namespace

std::string format_real(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  (void)ec;
  return std::string(buf, ptr);
}

Config Config::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return from_string(text.str(), path);
}

Config Config::from_string(const std::string& text, const std::string& source) {
  // Boost's INI reader only knows whole-line ';' comments. Also accept '#',
  // and trailing comments introduced by whitespace + ';' or '#'.
  std::istringstream lines(text);
  std::ostringstream cleaned;
  std::string line;
  while (std::getline(lines, line)) {
    const auto t = trim(line);
    if (!t.empty() && (t.front() == '#' || t.front() == ';')) {
      cleaned << '\n';
      continue;
    }
    for (std::size_t i = 1; i < line.size(); ++i) {
      if ((line[i] == ';' || line[i] == '#') && (line[i - 1] == ' ' || line[i - 1] == '\t')) {
        line.erase(i);
        break;
      }
    }
    cleaned << line << '\n';
  }
  boost::property_tree::ptree tree;
  std::istringstream in(cleaned.str());
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(source + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  Config cfg;
  cfg.source_ = source;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      if (!body.data().empty()) throw ConfigError(source + ": key '" + section + "' must appear inside a [section]");
      cfg.sections_.push_back(section);
      continue;
    }
    cfg.sections_.push_back(section);
    for (const auto& [key, value] : body) {
      cfg.entries_.push_back({section, key, std::string(trim(value.data()))});
    }
  }
  return cfg;
}

const Config::Entry* Config::find(std::string_view section, std::string_view key) const {
  for (const Entry& e : entries_)
    if (e.section == section && e.key == key) return &e;
  return nullptr;
}

bool Config::has(std::string_view section, std::string_view key) const { return find(section, key) != nullptr; }

bool Config::has_section(std::string_view section) const {
  return std::find(sections_.begin(), sections_.end(), section) != sections_.end();
}

std::vector<std::string> Config::sections_with_prefix(std::string_view prefix) const {
  std::vector<std::string> out;
  for (const auto& s : sections_)
    if (s.rfind(prefix, 0) == 0) out.push_back(s);
  return out;
}

const std::string& Config::raw(std::string_view section, std::string_view key) const {
  const Entry* e = find(section, key);
  if (!e) throw ConfigError(key_path(section, key) + ": required key is missing");
  const std::string path = key_path(section, key);
  if (std::find(used_.begin(), used_.end(), path) == used_.end()) used_.push_back(path);
  return e->value;
}

void Config::record(std::string_view section, std::string_view key, std::string value) const {
  auto it = std::find_if(resolved_.begin(), resolved_.end(), [&](const auto& s) { return s.first == section; });
  if (it == resolved_.end()) {
    resolved_.push_back({std::string(section), {}});
    it = std::prev(resolved_.end());
  }
  auto kit = std::find_if(it->second.begin(), it->second.end(), [&](const auto& kv) { return kv.first == key; });
  if (kit == it->second.end()) {
    it->second.emplace_back(std::string(key), std::move(value));
  } else {
    kit->second = std::move(value);
  }
}

void Config::forget(std::string_view section, std::string_view key) const {
  for (auto& [s, keys] : resolved_) {
    if (s != section) continue;
    std::erase_if(keys, [&](const auto& kv) { return kv.first == key; });
  }
  std::erase_if(resolved_, [](const auto& s) { return s.second.empty(); });
}

std::string Config::text(std::string_view section, std::string_view key) const {
  const std::string& v = raw(section, key);
  if (v.empty()) throw ConfigError(key_path(section, key) + ": value is empty");
  record(section, key, v);
  return v;
}

std::string Config::text(std::string_view section, std::string_view key, std::string_view fallback) const {
  if (!has(section, key)) {
    record(section, key, std::string(fallback));
    return std::string(fallback);
  }
  return text(section, key);
}

double Config::real(std::string_view section, std::string_view key) const {
  const std::string& v = raw(section, key);
  const auto r = to_real(v);
  if (!r || !std::isfinite(*r)) {
    throw ConfigError(key_path(section, key) + ": expected a finite real number, got '" + v + "'");
  }
  record(section, key, format_real(*r));
  return *r;
}

double Config::real(std::string_view section, std::string_view key, double fallback) const {
  if (!has(section, key)) {
    record(section, key, format_real(fallback));
    return fallback;
  }
  return real(section, key);
}

std::optional<double> Config::optional_real(std::string_view section, std::string_view key) const {
  if (!has(section, key)) return std::nullopt;
  return real(section, key);
}

std::uint64_t Config::count(std::string_view section, std::string_view key) const {
  const std::string& v = raw(section, key);
  const auto c = to_count(v);
  if (!c) throw ConfigError(key_path(section, key) + ": expected a non-negative integer, got '" + v + "'");
  record(section, key, std::to_string(*c));
  return *c;
}

std::uint64_t Config::count(std::string_view section, std::string_view key, std::uint64_t fallback) const {
  if (!has(section, key)) {
    record(section, key, std::to_string(fallback));
    return fallback;
  }
  return count(section, key);
}

std::vector<double> Config::reals(std::string_view section, std::string_view key) const {
  const std::string& v = raw(section, key);
  std::vector<double> out;
  for (auto piece : split_list(v)) {
    const auto r = to_real(piece);
    if (!r || !std::isfinite(*r)) {
      throw ConfigError(key_path(section, key) + ": expected a list of real numbers, got '" + std::string(piece) + "'");
    }
    out.push_back(*r);
  }
  if (out.empty()) throw ConfigError(key_path(section, key) + ": list is empty");
  record(section, key, join(out));
  return out;
}

std::vector<double> Config::reals(std::string_view section, std::string_view key,
                                  const std::vector<double>& fallback) const {
  if (!has(section, key)) {
    record(section, key, join(fallback));
    return fallback;
  }
  return reals(section, key);
}

std::vector<std::uint64_t> Config::counts(std::string_view section, std::string_view key) const {
  const std::string& v = raw(section, key);
  std::vector<std::uint64_t> out;
  for (auto piece : split_list(v)) {
    const std::size_t dots = piece.find("..");
    if (dots != std::string_view::npos) {
      const auto lo = to_count(piece.substr(0, dots));
      const auto hi = to_count(piece.substr(dots + 2));
      if (!lo || !hi || *hi < *lo || *hi - *lo > 100000) {
        throw ConfigError(key_path(section, key) + ": bad range '" + std::string(piece) + "'");
      }
      for (std::uint64_t i = *lo; i <= *hi; ++i) out.push_back(i);
      continue;
    }
    const auto c = to_count(piece);
    if (!c) {
      throw ConfigError(key_path(section, key) + ": expected non-negative integers, got '" + std::string(piece) + "'");
    }
    out.push_back(*c);
  }
  if (out.empty()) throw ConfigError(key_path(section, key) + ": list is empty");
  record(section, key, join(out));
  return out;
}

std::vector<std::uint64_t> Config::counts(std::string_view section, std::string_view key,
                                          const std::vector<std::uint64_t>& fallback) const {
  if (!has(section, key)) {
    record(section, key, join(fallback));
    return fallback;
  }
  return counts(section, key);
}

std::vector<std::string> Config::words(std::string_view section, std::string_view key) const {
  const std::string& v = raw(section, key);
  std::vector<std::string> out;
  for (auto piece : split_list(v)) {
    if (piece.empty()) throw ConfigError(key_path(section, key) + ": empty list item");
    out.emplace_back(piece);
  }
  if (out.empty()) throw ConfigError(key_path(section, key) + ": list is empty");
  record(section, key, join(out));
  return out;
}

void Config::check_all_used() const {
  for (const Entry& e : entries_) {
    const std::string path = key_path(e.section, e.key);
    if (std::find(used_.begin(), used_.end(), path) == used_.end()) {
      throw ConfigError(path + ": unknown key (not used by this command)");
    }
  }
  for (const std::string& s : sections_) {
    const bool any = std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.section == s; });
    if (!any) throw ConfigError("[" + s + "]: empty or unknown section");
  }
}

std::string Config::resolved_ini() const {
  std::string out;
  for (const auto& [section, keys] : resolved_) {
    if (!out.empty()) out += "\n";
    out += "[" + section + "]\n";
    for (const auto& [k, v] : keys) out += k + " = " + v + "\n";
  }
  return out;
}

}  // namespace odenet::lab
