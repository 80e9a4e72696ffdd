#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

// Raw little-endian raster files shared by the corpus and checkpoint formats.
namespace pmseg::detail {

std::vector<std::byte> encode_f64(std::span<const double> values);
std::vector<double> decode_f64(std::span<const std::byte> bytes);

void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes);
std::vector<std::byte> read_file(const std::filesystem::path& path);

/// Reads `path`, requiring exactly `expected_bytes` bytes and the given
/// SHA-256. Errors name the file and the byte offset where data ran out.
std::vector<std::byte> read_checked(const std::filesystem::path& path, std::size_t expected_bytes,
                                    const std::string& sha256);

}  // namespace pmseg::detail
