#include "pmseg/corpus_io.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "pmseg/error.hpp"
#include "pmseg/hash.hpp"
#include "raw_io.hpp"

namespace pmseg {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using detail::decode_f64;
using detail::encode_f64;
using detail::read_file;
using detail::write_file;

constexpr int kFormatVersion = 1;

template <typename T, typename Tag>
std::vector<std::byte> encode_u8(const Raster<T, Tag>& r) {
  std::vector<std::byte> out(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) out[i] = static_cast<std::byte>(r[i]);
  return out;
}

json geometry_to_json(const GeometryRecord& g) {
  return {{"original_shape", {g.original_height, g.original_width}},
          {"original_spacing", {g.original_spacing.row, g.original_spacing.col}},
          {"standard_spacing", {g.standard_spacing.row, g.standard_spacing.col}},
          {"resampled_shape", {g.resampled_height, g.resampled_width}},
          {"crop",
           {{"offset", {g.crop.row_offset, g.crop.col_offset}},
            {"src_shape", {g.crop.src_height, g.crop.src_width}},
            {"dst_shape", {g.crop.dst_height, g.crop.dst_width}}}}};
}

GeometryRecord geometry_from_json(const json& j) {
  GeometryRecord g;
  g.original_height = j.at("original_shape").at(0);
  g.original_width = j.at("original_shape").at(1);
  g.original_spacing = {j.at("original_spacing").at(0), j.at("original_spacing").at(1)};
  g.standard_spacing = {j.at("standard_spacing").at(0), j.at("standard_spacing").at(1)};
  g.resampled_height = j.at("resampled_shape").at(0);
  g.resampled_width = j.at("resampled_shape").at(1);
  const json& c = j.at("crop");
  g.crop.row_offset = c.at("offset").at(0);
  g.crop.col_offset = c.at("offset").at(1);
  g.crop.src_height = c.at("src_shape").at(0);
  g.crop.src_width = c.at("src_shape").at(1);
  g.crop.dst_height = c.at("dst_shape").at(0);
  g.crop.dst_width = c.at("dst_shape").at(1);
  return g;
}

json mapping_to_json(const ClassMapping& m) {
  json pairs = json::array();
  for (auto [local, global] : m.local_to_global) pairs.push_back({local, global});
  return {{"id", m.source_id},
          {"local_to_global", pairs},
          {"invalidated", std::vector<int>(m.invalidated.begin(), m.invalidated.end())},
          {"trust_background", m.trust_background}};
}

ClassMapping mapping_from_json(const json& j) {
  ClassMapping m;
  m.source_id = j.at("id").get<std::string>();
  for (const auto& p : j.at("local_to_global")) m.local_to_global[p.at(0).get<std::uint8_t>()] = p.at(1).get<std::uint8_t>();
  for (const auto& c : j.at("invalidated")) m.invalidated.insert(c.get<std::uint8_t>());
  m.trust_background = j.at("trust_background").get<bool>();
  return m;
}

json store_sample(const Sample& s, const std::string& split, const fs::path& dir) {
  if (s.id.empty() || s.id.find_first_of("/\\") != std::string::npos || s.id.starts_with("."))
    throw ConfigError("store_corpus: sample id '" + s.id + "' is not a valid file stem");
  if (s.feature.height() != s.label.height() || s.feature.width() != s.label.width())
    throw ConfigError("store_corpus: sample '" + s.id + "' has feature/label shape mismatch");
  json files = json::object();
  auto put = [&](const char* key, const std::string& name, std::span<const std::byte> bytes) {
    write_file(dir / "rasters" / name, bytes);
    files[key] = {{"path", "rasters/" + name}, {"bytes", bytes.size()}, {"sha256", sha256_hex(bytes)}};
  };
  put("feature", s.id + ".x.f64", encode_f64(s.feature.values()));
  put("label", s.id + ".y.u8", encode_u8(s.label));
  if (s.complete_label.size() != 0) put("complete_label", s.id + ".yc.u8", encode_u8(s.complete_label));
  std::vector<int> presence;
  for (bool b : s.presence.flags()) presence.push_back(b ? 1 : 0);
  return {{"id", s.id},
          {"split", split},
          {"subject", s.subject},
          {"source", s.source},
          {"shape", {s.feature.height(), s.feature.width()}},
          {"spacing", {s.feature.spacing().row, s.feature.spacing().col}},
          {"presence", presence},
          {"geometry", geometry_to_json(s.geometry)},
          {"files", files}};
}

std::vector<std::byte> load_checked(const fs::path& dir, const json& entry, std::size_t expected_bytes) {
  return detail::read_checked(dir / entry.at("path").get<std::string>(), expected_bytes,
                              entry.at("sha256").get<std::string>());
}

template <typename R>
R load_u8(const fs::path& dir, const json& entry, std::size_t h, std::size_t w, Spacing sp) {
  auto bytes = load_checked(dir, entry, h * w);
  std::vector<std::uint8_t> v(bytes.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<std::uint8_t>(bytes[i]);
  return R(h, w, std::move(v), sp);
}

}  // namespace

std::string store_corpus(const Corpus& corpus, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "rasters", ec);
  if (ec) throw ConfigError("cannot create " + (dir / "rasters").string() + ": " + ec.message());

  json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["class_names"] = corpus.manifest.class_names;
  manifest["sources"] = json::array();
  for (const auto& m : corpus.manifest.sources) manifest["sources"].push_back(mapping_to_json(m));
  manifest["samples"] = json::array();
  for (const auto& s : corpus.train) manifest["samples"].push_back(store_sample(s, "train", dir));
  for (const auto& s : corpus.test) manifest["samples"].push_back(store_sample(s, "test", dir));

  const std::string text = manifest.dump(1) + "\n";
  std::ofstream f(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  f << text;
  if (!f) throw ConfigError("cannot write " + (dir / "manifest.json").string());
  return sha256_hex(text);
}

Corpus load_corpus(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  const auto raw = read_file(manifest_path);
  json manifest;
  try {
    manifest = json::parse(reinterpret_cast<const char*>(raw.data()), reinterpret_cast<const char*>(raw.data()) + raw.size());
  } catch (const json::parse_error& e) {
    throw ConfigError(manifest_path.string() + ": malformed at byte offset " + std::to_string(e.byte) + ": " + e.what());
  }

  Corpus corpus;
  std::string current = "(header)";
  try {
    if (manifest.at("format_version").get<int>() != kFormatVersion)
      throw ConfigError(manifest_path.string() + ": unsupported format_version");
    corpus.manifest.class_names = manifest.at("class_names").get<std::vector<std::string>>();
    const std::size_t num_classes = corpus.manifest.num_classes();
    if (num_classes < 2) throw ConfigError(manifest_path.string() + ": need background plus a foreground class");
    for (const auto& m : manifest.at("sources")) {
      corpus.manifest.sources.push_back(mapping_from_json(m));
      corpus.manifest.sources.back().validate(num_classes);
    }
    for (const auto& e : manifest.at("samples")) {
      Sample s;
      s.id = e.at("id").get<std::string>();
      current = "sample '" + s.id + "'";
      s.subject = e.at("subject").get<std::string>();
      s.source = e.at("source").get<std::string>();
      corpus.manifest.source(s.source);
      const std::size_t h = e.at("shape").at(0), w = e.at("shape").at(1);
      const Spacing sp{e.at("spacing").at(0), e.at("spacing").at(1)};
      std::vector<bool> k;
      for (int v : e.at("presence").get<std::vector<int>>()) k.push_back(v != 0);
      if (k.size() != num_classes) throw ConfigError("presence length differs from class count");
      s.presence = PresenceArray(std::move(k));
      s.geometry = geometry_from_json(e.at("geometry"));
      const json& files = e.at("files");
      s.feature = FeatureImage(h, w, decode_f64(load_checked(dir, files.at("feature"), h * w * 8)), sp);
      s.label = load_u8<LabelMap>(dir, files.at("label"), h, w, sp);
      if (files.contains("complete_label")) s.complete_label = load_u8<LabelMap>(dir, files.at("complete_label"), h, w, sp);
      const std::string split = e.at("split").get<std::string>();
      if (split == "train") corpus.train.push_back(std::move(s));
      else if (split == "test") corpus.test.push_back(std::move(s));
      else throw ConfigError("split must be 'train' or 'test'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(manifest_path.string() + ": " + current + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(manifest_path.string() + ": " + current + ": " + e.what());
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.find(dir.string()) != std::string::npos) throw;
    throw ConfigError(manifest_path.string() + ": " + current + ": " + msg);
  }
  return corpus;
}

std::string corpus_hash(const fs::path& dir) {
  return sha256_hex(read_file(dir / "manifest.json"));
}

}  // namespace pmseg
