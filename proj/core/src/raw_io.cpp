#include "raw_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "pmseg/error.hpp"
#include "pmseg/hash.hpp"

namespace pmseg::detail {

std::vector<std::byte> encode_f64(std::span<const double> values) {
  std::vector<std::byte> out(values.size() * 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b) out[i * 8 + b] = static_cast<std::byte>((bits >> (8 * b)) & 0xff);
  }
  return out;
}

std::vector<double> decode_f64(std::span<const std::byte> bytes) {
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[i * 8 + b]) << (8 * b);
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw ConfigError("cannot write " + path.string());
}

std::vector<std::byte> read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError(path.string() + ": missing or unreadable");
  std::vector<char> raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  std::vector<std::byte> out(raw.size());
  if (!raw.empty()) std::memcpy(out.data(), raw.data(), raw.size());
  return out;
}

std::vector<std::byte> read_checked(const std::filesystem::path& path, std::size_t expected_bytes,
                                    const std::string& sha256) {
  std::vector<std::byte> bytes = read_file(path);
  if (bytes.size() < expected_bytes)
    throw ConfigError(path.string() + ": truncated at byte offset " + std::to_string(bytes.size()) + ", expected " +
                      std::to_string(expected_bytes) + " bytes");
  if (bytes.size() > expected_bytes)
    throw ConfigError(path.string() + ": unexpected data after byte offset " + std::to_string(expected_bytes));
  if (sha256_hex(bytes) != sha256) throw ConfigError(path.string() + ": checksum mismatch");
  return bytes;
}

}  // namespace pmseg::detail
