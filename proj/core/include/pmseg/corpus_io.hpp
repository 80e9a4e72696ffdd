#pragma once

#include <filesystem>
#include <string>

#include "pmseg/dataset.hpp"

namespace pmseg {

/// Writes manifest.json plus one raw raster per file under rasters/:
/// <id>.x.f64 (little-endian doubles), <id>.y.u8 and <id>.yc.u8, all
/// row-major. Returns the corpus hash.
std::string store_corpus(const Corpus& corpus, const std::filesystem::path& dir);

/// Verifies sizes and checksums. Errors name the offending file, and the
/// byte offset where data ran out or the manifest failed to parse.
Corpus load_corpus(const std::filesystem::path& dir);

/// SHA-256 of manifest.json, which itself pins every raster's checksum.
std::string corpus_hash(const std::filesystem::path& dir);

}  // namespace pmseg
