#include "pmseg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include <nlohmann/json.hpp>

#include "pmseg/error.hpp"
#include "pmseg/rng.hpp"

namespace pmseg {
namespace {

using nlohmann::json;

struct PlacedShape {
  std::uint8_t label;
  ShapeFamily family;
  double cy, cx;    // centre, mm
  double ry, rx;    // half extents along rows / cols, mm
};

bool contains(const PlacedShape& s, double y, double x) {
  const double dy = y - s.cy, dx = x - s.cx;
  switch (s.family) {
    case ShapeFamily::Disk:
    case ShapeFamily::Ellipse:
      return (dy * dy) / (s.ry * s.ry) + (dx * dx) / (s.rx * s.rx) <= 1.0;
    case ShapeFamily::Bar:
      return std::abs(dy) <= s.ry && std::abs(dx) <= s.rx;
  }
  return false;
}

std::string shape_name(ShapeFamily f) {
  switch (f) {
    case ShapeFamily::Disk: return "disk";
    case ShapeFamily::Ellipse: return "ellipse";
    case ShapeFamily::Bar: return "bar";
  }
  return "disk";
}

ShapeFamily parse_shape(const std::string& s) {
  if (s == "disk") return ShapeFamily::Disk;
  if (s == "ellipse") return ShapeFamily::Ellipse;
  if (s == "bar") return ShapeFamily::Bar;
  throw ConfigError("classes[].shape: unknown shape family '" + s + "'");
}

std::string zero_pad(std::size_t v, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*zu", width, v);
  return buf;
}

// Draws the half extents of one shape.
PlacedShape draw_shape(const ClassAppearance& a, std::uint8_t label, Rng& rng) {
  PlacedShape s{label, a.shape, 0.0, 0.0, 0.0, 0.0};
  const double major = rng.uniform(a.min_size, a.max_size);
  switch (a.shape) {
    case ShapeFamily::Disk:
      s.ry = s.rx = major;
      break;
    case ShapeFamily::Ellipse: {
      const double minor = major * rng.uniform(a.min_minor, a.max_minor);
      const bool tall = rng.bernoulli(0.5);
      s.ry = tall ? major : minor;
      s.rx = tall ? minor : major;
      break;
    }
    case ShapeFamily::Bar: {
      const double thick = rng.uniform(a.min_minor, a.max_minor);
      const bool tall = rng.bernoulli(0.5);
      s.ry = tall ? major : thick;
      s.rx = tall ? thick : major;
      break;
    }
  }
  return s;
}

constexpr double kMargin = 2.0;  // mm between shapes and to the border

}  // namespace

std::vector<std::string> SyntheticSpec::class_names() const {
  std::vector<std::string> names{"background"};
  for (const auto& c : classes) names.push_back(c.name);
  return names;
}

void SyntheticSpec::validate() const {
  if (height == 0 || width == 0) throw ConfigError("height/width must be positive");
  if (!(standard_spacing.row > 0.0) || !(standard_spacing.col > 0.0))
    throw ConfigError("standard_spacing must be positive");
  if (!(spacing_jitter >= 0.0 && spacing_jitter < 0.5)) throw ConfigError("spacing_jitter must be in [0, 0.5)");
  if (classes.empty()) throw ConfigError("classes must name at least one foreground class");
  if (classes.size() > 254) throw ConfigError("classes: too many classes");
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(background_mean) || !(background_std >= 0.0))
    throw ConfigError("background_mean must be in [0,1] and background_std >= 0");
  for (const auto& c : classes) {
    if (c.name.empty() || c.name == "background") throw ConfigError("classes[].name must be a non-empty foreground name");
    if (!(c.min_size > 0.0) || !(c.max_size >= c.min_size))
      throw ConfigError("classes[" + c.name + "].size range is invalid");
    if (c.shape != ShapeFamily::Disk && (!(c.min_minor > 0.0) || !(c.max_minor >= c.min_minor)))
      throw ConfigError("classes[" + c.name + "].minor range is invalid");
    if (!in_unit(c.intensity_mean) || !(c.intensity_std >= 0.0))
      throw ConfigError("classes[" + c.name + "].intensity must have mean in [0,1] and std >= 0");
  }
  const auto [a, b] = similar_pair;
  if (a == 0 || b == 0 || a > classes.size() || b > classes.size() || a == b)
    throw ConfigError("similar_pair must name two distinct foreground classes");
  if (!(empty_fraction >= 0.0 && empty_fraction < 1.0)) throw ConfigError("empty_fraction must be in [0, 1)");
  if (!(class_presence > 0.0 && class_presence <= 1.0)) throw ConfigError("class_presence must be in (0, 1]");
  if (images_per_subject == 0) throw ConfigError("images_per_subject must be positive");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must be in (0, 1)");
  if (max_placement_attempts == 0) throw ConfigError("max_placement_attempts must be positive");
  if (sources.empty()) throw ConfigError("sources must list at least one source");
  for (const auto& s : sources) {
    if (s.id.empty()) throw ConfigError("sources[].id must be non-empty");
    if (s.images == 0) throw ConfigError("sources[" + s.id + "].images must be positive");
    if (s.classes.empty()) throw ConfigError("sources[" + s.id + "].classes must be non-empty");
    for (auto c : s.classes)
      if (c == 0 || c > classes.size()) throw ConfigError("sources[" + s.id + "].classes out of range");
  }
}

SyntheticSpec default_synthetic_spec() {
  SyntheticSpec spec;
  spec.classes = {
      {"liver", ShapeFamily::Ellipse, 9.0, 13.0, 0.7, 1.0, 0.70, 0.05},
      {"pancreas", ShapeFamily::Bar, 7.0, 10.0, 2.0, 3.0, 0.45, 0.10},
      {"spleen", ShapeFamily::Disk, 4.0, 6.0, 0.0, 0.0, 0.70, 0.05},
  };
  spec.similar_pair = {1, 3};
  spec.sources = {
      {"liver", 90, {1}, false},
      {"pancreas", 110, {2}, false},
      {"spleen", 50, {3}, false},
  };
  return spec;
}

std::vector<Sample> generate_synthetic(const SyntheticSpec& spec, std::size_t n, std::uint64_t stream,
                                       const std::string& prefix) {
  spec.validate();
  if (n == 0) throw ConfigError("generate_synthetic: n must be positive");

  std::vector<ClassAppearance> look = spec.classes;
  {
    const auto& ref = spec.classes[spec.similar_pair.first - 1];
    auto& twin = look[spec.similar_pair.second - 1];
    twin.intensity_mean = ref.intensity_mean;
    twin.intensity_std = ref.intensity_std;
  }

  const double fov_y = static_cast<double>(spec.height) * spec.standard_spacing.row;
  const double fov_x = static_cast<double>(spec.width) * spec.standard_spacing.col;
  const std::uint64_t stream_seed = derive_seed(spec.seed, stream);
  const std::size_t num_classes = spec.num_classes();

  std::vector<Sample> out;
  out.reserve(n);
  for (std::size_t idx = 0; idx < n; ++idx) {
    const std::size_t subject_index = idx / spec.images_per_subject;
    Rng rng(derive_seed(stream_seed, 2 * idx));

    Spacing native = spec.standard_spacing;
    if (spec.spacing_jitter > 0.0) {
      Rng subject_rng(derive_seed(stream_seed, 2 * subject_index + 1));
      native.row *= 1.0 + subject_rng.uniform(-spec.spacing_jitter, spec.spacing_jitter);
      native.col *= 1.0 + subject_rng.uniform(-spec.spacing_jitter, spec.spacing_jitter);
    }
    const auto nh = static_cast<std::size_t>(std::max(1.0, std::round(fov_y / native.row)));
    const auto nw = static_cast<std::size_t>(std::max(1.0, std::round(fov_x / native.col)));

    std::vector<PlacedShape> shapes;
    if (!rng.bernoulli(spec.empty_fraction)) {
      std::vector<std::uint8_t> present;
      for (std::size_t c = 1; c < num_classes; ++c)
        if (rng.bernoulli(spec.class_presence)) present.push_back(static_cast<std::uint8_t>(c));
      if (present.empty()) present.push_back(static_cast<std::uint8_t>(1 + rng.below(num_classes - 1)));
      rng.shuffle(present.begin(), present.end());
      for (std::uint8_t c : present) {
        bool placed = false;
        for (std::size_t attempt = 0; attempt < spec.max_placement_attempts && !placed; ++attempt) {
          PlacedShape s = draw_shape(look[c - 1], c, rng);
          const double ylo = s.ry + kMargin, yhi = fov_y - s.ry - kMargin;
          const double xlo = s.rx + kMargin, xhi = fov_x - s.rx - kMargin;
          if (yhi < ylo || xhi < xlo) continue;
          s.cy = rng.uniform(ylo, yhi);
          s.cx = rng.uniform(xlo, xhi);
          placed = std::none_of(shapes.begin(), shapes.end(), [&](const PlacedShape& o) {
            return std::abs(o.cy - s.cy) < o.ry + s.ry + kMargin && std::abs(o.cx - s.cx) < o.rx + s.rx + kMargin;
          });
          if (placed) shapes.push_back(s);
        }
        if (!placed)
          throw ConfigError("generate_synthetic: could not place class " + std::to_string(c) + " in image " +
                            std::to_string(idx) + " of stream " + std::to_string(stream) + " (seed " +
                            std::to_string(spec.seed) + ") after " +
                            std::to_string(spec.max_placement_attempts) + " attempts");
      }
    }

    FeatureImage feature(nh, nw, native);
    LabelMap label(nh, nw, native);
    for (std::size_t i = 0; i < nh; ++i) {
      const double y = (static_cast<double>(i) + 0.5) * native.row;
      for (std::size_t j = 0; j < nw; ++j) {
        const double x = (static_cast<double>(j) + 0.5) * native.col;
        std::uint8_t c = 0;
        for (const auto& s : shapes)
          if (contains(s, y, x)) c = s.label;
        label(i, j) = c;
        const double mean = c ? look[c - 1].intensity_mean : spec.background_mean;
        const double sd = c ? look[c - 1].intensity_std : spec.background_std;
        feature(i, j) = std::clamp(rng.normal(mean, sd), 0.0, 1.0);
      }
    }

    StandardizedCase std_case = standardize(feature, label, spec.standard_spacing, spec.height, spec.width);
    Sample s;
    s.id = prefix + "-" + zero_pad(idx, 4);
    s.subject = prefix + "-s" + zero_pad(subject_index, 3);
    s.source = prefix;
    s.feature = std::move(std_case.feature);
    s.label = std_case.label;
    s.complete_label = std::move(std_case.label);
    s.presence = PresenceArray::all(num_classes, true);
    s.geometry = std_case.geometry;
    out.push_back(std::move(s));
  }
  return out;
}

Corpus build_synthetic_corpus(const SyntheticSpec& spec) {
  spec.validate();
  const auto names = spec.class_names();
  std::vector<SourceDataset> sources;
  for (std::size_t si = 0; si < spec.sources.size(); ++si) {
    const SyntheticSource& src = spec.sources[si];
    PartialSpec partial;
    partial.keep.insert(src.classes.begin(), src.classes.end());
    partial.trust_background = src.trust_background;
    auto samples = make_partial(generate_synthetic(spec, src.images, si + 1, src.id), partial);

    SourceDataset ds;
    ds.mapping.source_id = src.id;
    ds.mapping.trust_background = src.trust_background;
    std::vector<std::uint8_t> to_local(names.size(), 0);
    for (std::size_t l = 0; l < src.classes.size(); ++l) {
      const auto local = static_cast<std::uint8_t>(l + 1);
      ds.mapping.local_to_global[local] = src.classes[l];
      ds.local_names[local] = names[src.classes[l]];
      to_local[src.classes[l]] = local;
    }
    for (auto& s : samples) s.label = relabel(s.label, to_local);
    ds.samples = std::move(samples);
    sources.push_back(std::move(ds));
  }
  MergedDataset merged = merge_datasets(sources, names);

  Corpus corpus;
  corpus.manifest = merged.manifest;
  for (const auto& src : spec.sources) {
    std::vector<Sample> own;
    for (const auto& s : merged.samples)
      if (s.source == src.id) own.push_back(s);
    auto [train, test] = split_train_test(own, spec.test_fraction, spec.seed);
    std::move(train.begin(), train.end(), std::back_inserter(corpus.train));
    std::move(test.begin(), test.end(), std::back_inserter(corpus.test));
  }
  return corpus;
}

SyntheticSpec parse_synthetic_spec(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("synthetic spec: ") + e.what());
  }
  SyntheticSpec spec = default_synthetic_spec();
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    };
    get("height", spec.height);
    get("width", spec.width);
    if (j.contains("standard_spacing")) {
      const auto v = j.at("standard_spacing").get<std::vector<double>>();
      if (v.size() != 2) throw ConfigError("standard_spacing must have two entries");
      spec.standard_spacing = {v[0], v[1]};
    }
    get("spacing_jitter", spec.spacing_jitter);
    get("background_mean", spec.background_mean);
    get("background_std", spec.background_std);
    get("empty_fraction", spec.empty_fraction);
    get("class_presence", spec.class_presence);
    get("images_per_subject", spec.images_per_subject);
    get("test_fraction", spec.test_fraction);
    get("max_placement_attempts", spec.max_placement_attempts);
    get("seed", spec.seed);
    if (j.contains("similar_pair")) {
      const auto v = j.at("similar_pair").get<std::vector<int>>();
      if (v.size() != 2 || v[0] < 0 || v[1] < 0 || v[0] > 255 || v[1] > 255)
        throw ConfigError("similar_pair must have two class indices");
      spec.similar_pair = {static_cast<std::uint8_t>(v[0]), static_cast<std::uint8_t>(v[1])};
    }
    if (j.contains("classes")) {
      spec.classes.clear();
      for (const auto& c : j.at("classes")) {
        ClassAppearance a;
        a.name = c.at("name").get<std::string>();
        a.shape = parse_shape(c.value("shape", std::string("disk")));
        a.min_size = c.at("min_size").get<double>();
        a.max_size = c.at("max_size").get<double>();
        a.min_minor = c.value("min_minor", 0.0);
        a.max_minor = c.value("max_minor", 0.0);
        a.intensity_mean = c.at("intensity_mean").get<double>();
        a.intensity_std = c.at("intensity_std").get<double>();
        spec.classes.push_back(a);
      }
    }
    if (j.contains("sources")) {
      spec.sources.clear();
      for (const auto& s : j.at("sources")) {
        SyntheticSource src;
        src.id = s.at("id").get<std::string>();
        src.images = s.at("images").get<std::size_t>();
        for (int c : s.at("classes").get<std::vector<int>>()) {
          if (c <= 0 || c > 255) throw ConfigError("sources[" + src.id + "].classes out of range");
          src.classes.push_back(static_cast<std::uint8_t>(c));
        }
        src.trust_background = s.value("trust_background", false);
        spec.sources.push_back(src);
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synthetic spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

std::string synthetic_spec_to_json(const SyntheticSpec& spec) {
  json j;
  j["height"] = spec.height;
  j["width"] = spec.width;
  j["standard_spacing"] = {spec.standard_spacing.row, spec.standard_spacing.col};
  j["spacing_jitter"] = spec.spacing_jitter;
  j["background_mean"] = spec.background_mean;
  j["background_std"] = spec.background_std;
  j["empty_fraction"] = spec.empty_fraction;
  j["class_presence"] = spec.class_presence;
  j["images_per_subject"] = spec.images_per_subject;
  j["test_fraction"] = spec.test_fraction;
  j["max_placement_attempts"] = spec.max_placement_attempts;
  j["seed"] = spec.seed;
  j["similar_pair"] = {spec.similar_pair.first, spec.similar_pair.second};
  j["classes"] = json::array();
  for (const auto& c : spec.classes)
    j["classes"].push_back({{"name", c.name},
                            {"shape", shape_name(c.shape)},
                            {"min_size", c.min_size},
                            {"max_size", c.max_size},
                            {"min_minor", c.min_minor},
                            {"max_minor", c.max_minor},
                            {"intensity_mean", c.intensity_mean},
                            {"intensity_std", c.intensity_std}});
  j["sources"] = json::array();
  for (const auto& s : spec.sources)
    j["sources"].push_back({{"id", s.id},
                            {"images", s.images},
                            {"classes", std::vector<int>(s.classes.begin(), s.classes.end())},
                            {"trust_background", s.trust_background}});
  return j.dump(2);
}

}  // namespace pmseg
