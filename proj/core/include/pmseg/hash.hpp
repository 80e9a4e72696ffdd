#pragma once

#include <cstddef>
#include <span>
#include <string>

namespace pmseg {

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::span<const std::byte> bytes);
std::string sha256_hex(const std::string& text);

}  // namespace pmseg
