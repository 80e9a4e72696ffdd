#include "pmseg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "pmseg/error.hpp"
#include "pmseg/rng.hpp"

namespace pmseg {
namespace {

// Subjects in first-appearance order with their sample indices.
std::vector<std::pair<std::string, std::vector<std::size_t>>> group_by_subject(
    const std::vector<Sample>& samples, const std::vector<std::size_t>& indices) {
  std::vector<std::pair<std::string, std::vector<std::size_t>>> groups;
  std::map<std::string, std::size_t> position;
  for (std::size_t i : indices) {
    auto [it, inserted] = position.emplace(samples[i].subject, groups.size());
    if (inserted) groups.push_back({samples[i].subject, {}});
    groups[it->second].second.push_back(i);
  }
  return groups;
}

// Source ids in first-appearance order with their sample indices.
std::vector<std::vector<std::size_t>> group_by_source(const std::vector<Sample>& samples) {
  std::vector<std::vector<std::size_t>> groups;
  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto [it, inserted] = position.emplace(samples[i].source, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  return groups;
}

bool closer(std::size_t count, std::size_t add, double target) {
  return std::abs(static_cast<double>(count + add) - target) < std::abs(static_cast<double>(count) - target);
}

}  // namespace

bool Sample::has_foreground() const {
  return std::any_of(label.values().begin(), label.values().end(), [](std::uint8_t v) { return v != 0; });
}

const ClassMapping& DatasetManifest::source(const std::string& id) const {
  for (const ClassMapping& m : sources)
    if (m.source_id == id) return m;
  throw ConfigError("unknown source '" + id + "'");
}

LabelMap relabel(const LabelMap& y, const std::vector<std::uint8_t>& lut) {
  LabelMap out(y.height(), y.width(), y.spacing());
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] >= lut.size())
      throw std::invalid_argument("relabel: label " + std::to_string(y[i]) + " has no mapping");
    out[i] = lut[y[i]];
  }
  return out;
}

std::vector<Sample> make_partial(const std::vector<Sample>& samples, const PartialSpec& spec) {
  if (spec.keep.empty()) throw ConfigError("make_partial: keep set is empty");
  std::vector<Sample> out;
  out.reserve(samples.size());
  for (const Sample& s : samples) {
    Sample p = s;
    const std::size_t num_classes = s.presence.size();
    if (s.complete_label.size() == 0) p.complete_label = s.label;
    for (std::size_t i = 0; i < p.label.size(); ++i)
      if (p.label[i] != 0 && !spec.keep.contains(p.label[i])) p.label[i] = 0;

    PresenceArray k = PresenceArray::all(num_classes, false);
    k.set(0, spec.trust_background);
    for (auto c : spec.keep) {
      if (c == 0 || c >= num_classes) throw ConfigError("make_partial: keep class out of range");
      k.set(c, true);
    }
    if (spec.invalidated_band) {
      const auto& band = *spec.invalidated_band;
      if (band.label == 0 || band.label >= num_classes)
        throw ConfigError("make_partial: invalidated band class out of range");
      for (std::size_t r = band.row_begin; r < std::min(band.row_end, p.label.height()); ++r)
        for (std::size_t c = 0; c < p.label.width(); ++c)
          if (p.label(r, c) == 0) p.label(r, c) = band.label;
      k.set(band.label, false);
    }
    p.presence = std::move(k);
    out.push_back(std::move(p));
  }
  return out;
}

MergedDataset merge_datasets(const std::vector<SourceDataset>& sources,
                             const std::vector<std::string>& class_names) {
  if (class_names.empty()) throw ConfigError("merge: no global classes");
  const std::size_t num_classes = class_names.size();
  MergedDataset merged;
  merged.manifest.class_names = class_names;
  std::set<std::string> seen_ids;
  for (const SourceDataset& src : sources) {
    const ClassMapping& m = src.mapping;
    m.validate(num_classes);
    if (!seen_ids.insert(m.source_id).second) throw ConfigError("merge: duplicate source '" + m.source_id + "'");
    for (const auto& [local, name] : src.local_names) {
      std::uint8_t global = 0;
      if (local != 0) {
        auto it = m.local_to_global.find(local);
        if (it == m.local_to_global.end())
          throw ConfigError("merge: source '" + m.source_id + "' names unmapped class " + std::to_string(local));
        global = it->second;
      }
      if (class_names[global] != name)
        throw ConfigError("merge: source '" + m.source_id + "' maps '" + name + "' onto global class " +
                          std::to_string(global) + " named '" + class_names[global] + "'");
    }
    merged.manifest.sources.push_back(m);
    for (const Sample& s : src.samples) {
      auto [label, presence] = remap_labels(s.label, m, num_classes);
      if (!presence.any()) throw ConfigError("merge: source '" + m.source_id + "' trusts no class");
      Sample g = s;
      g.source = m.source_id;
      g.label = std::move(label);
      g.presence = std::move(presence);
      merged.samples.push_back(std::move(g));
    }
  }
  return merged;
}

std::pair<std::vector<Sample>, std::vector<Sample>> split_train_test(const std::vector<Sample>& samples,
                                                                      double test_fraction,
                                                                      std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ConfigError("split: test fraction must be in (0, 1)");
  std::vector<std::size_t> all(samples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  auto groups = group_by_subject(samples, all);
  if (groups.size() < 2) throw ConfigError("split: a single subject owns every image");

  Rng rng(derive_seed(seed, 0x5b117));
  rng.shuffle(groups.begin(), groups.end());
  const double target = std::round(test_fraction * static_cast<double>(samples.size()));
  std::vector<bool> is_test(samples.size(), false);
  std::size_t count = 0;
  for (const auto& [subject, members] : groups) {
    if (closer(count, members.size(), target)) {
      count += members.size();
      for (std::size_t i : members) is_test[i] = true;
    }
  }
  std::pair<std::vector<Sample>, std::vector<Sample>> out;
  for (std::size_t i = 0; i < samples.size(); ++i) (is_test[i] ? out.second : out.first).push_back(samples[i]);
  return out;
}

const std::vector<double>& standard_shrink_levels() {
  static const std::vector<double> levels{80.0, 40.0, 20.0, 10.0, 5.0, 2.5};
  return levels;
}

std::vector<Sample> shrink_dataset(const std::vector<Sample>& train, double percent, std::uint64_t seed) {
  if (!(percent > 0.0 && percent <= 80.0)) throw ConfigError("shrink: percent must be in (0, 80]");
  if (percent == 80.0) return train;
  const double fraction = percent / 80.0;
  std::vector<bool> keep(train.size(), false);
  for (const auto& members : group_by_source(train)) {
    auto groups = group_by_subject(train, members);
    Rng rng(derive_seed(seed, 0x5a1e));
    rng.shuffle(groups.begin(), groups.end());
    const double target = fraction * static_cast<double>(members.size());
    std::size_t count = 0;
    for (const auto& [subject, idx] : groups) {
      // Every source keeps at least one subject.
      if (count > 0 && !closer(count, idx.size(), target)) break;
      count += idx.size();
      for (std::size_t i : idx) keep[i] = true;
    }
  }
  std::vector<Sample> out;
  for (std::size_t i = 0; i < train.size(); ++i)
    if (keep[i]) out.push_back(train[i]);
  if (out.empty())
    throw ConfigError("shrink: " + std::to_string(percent) + "% of " + std::to_string(train.size()) +
                      " images leaves nothing");
  return out;
}

std::vector<Sample> specific_view(const std::vector<Sample>& samples, const ClassMapping& mapping) {
  std::uint8_t max_local = 0;
  for (auto [local, global] : mapping.local_to_global) max_local = std::max(max_local, local);
  const std::size_t local_classes = max_local + 1u;

  std::vector<std::uint8_t> lut(256, 0);
  for (auto [local, global] : mapping.local_to_global) lut[global] = local;
  PresenceArray k = PresenceArray::all(local_classes, true);
  for (auto [local, global] : mapping.local_to_global)
    if (mapping.invalidated.contains(global)) k.set(local, false);

  std::vector<Sample> out;
  for (const Sample& s : samples) {
    if (s.source != mapping.source_id) continue;
    Sample v = s;
    v.label = relabel(s.label, lut);
    if (s.complete_label.size() != 0) v.complete_label = relabel(s.complete_label, lut);
    v.presence = k;
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace pmseg
