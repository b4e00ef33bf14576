#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "odenet/archblocks.hpp"
#include "odenet/errors.hpp"

namespace odenet::arch {

namespace {

constexpr char kMagic[8] = {'O', 'D', 'N', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_unsigned_v<T>);
  unsigned char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>(value >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get_le(std::istream& in, const std::string& path) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw ParseError("checkpoint truncated: " + path, 0);
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
  return value;
}

}  // namespace

void save_checkpoint(const ad::ParamStore& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open checkpoint for writing: " + path);
  out.write(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const std::string& name : params.names()) {
    const Matrix& m = params.value(name);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_le<std::uint8_t>(out, params.decays(name) ? 1 : 0);
    put_le<std::uint64_t>(out, m.rows());
    put_le<std::uint64_t>(out, m.cols());
    for (double v : m.values()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw ConfigError("failed writing checkpoint: " + path);
}

ad::ParamStore load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint: " + path);
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw ParseError("not an odenet checkpoint: " + path, 0);
  }
  const auto version = get_le<std::uint32_t>(in, path);
  if (version != kVersion) throw ParseError("unsupported checkpoint version " + std::to_string(version), 0);
  const auto count = get_le<std::uint32_t>(in, path);
  ad::ParamStore params;
  for (std::uint32_t e = 0; e < count; ++e) {
    const auto len = get_le<std::uint32_t>(in, path);
    if (len > 4096) throw ParseError("checkpoint name too long: " + path, 0);
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw ParseError("checkpoint truncated: " + path, 0);
    const bool decay = get_le<std::uint8_t>(in, path) != 0;
    const auto rows = get_le<std::uint64_t>(in, path);
    const auto cols = get_le<std::uint64_t>(in, path);
    if (rows * cols > (1ULL << 32)) throw ParseError("checkpoint tensor too large: " + name, 0);
    Matrix m(rows, cols);
    for (double& v : m.values()) v = std::bit_cast<double>(get_le<std::uint64_t>(in, path));
    params.add(name, std::move(m), decay);
  }
  return params;
}

}  // namespace odenet::arch
