#include "pmseg/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pmseg/error.hpp"

namespace pmseg {

std::vector<std::size_t> largest_remainder(std::size_t total, const std::vector<double>& weights) {
  if (weights.empty()) throw ConfigError("largest_remainder: no weights");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("largest_remainder: weights must be finite and >= 0");
    sum += w;
  }
  if (!(sum > 0.0)) throw ConfigError("largest_remainder: weights sum to zero");

  std::vector<std::size_t> parts(weights.size());
  std::vector<double> rem(weights.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = static_cast<double>(total) * weights[i] / sum;
    parts[i] = static_cast<std::size_t>(std::floor(exact));
    rem[i] = exact - static_cast<double>(parts[i]);
    assigned += parts[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++parts[order[i % order.size()]];
  return parts;
}

std::size_t BatchStream::Stratum::draw() {
  if (cursor == 0) rng.shuffle(members.begin(), members.end());
  const std::size_t v = members[cursor];
  cursor = (cursor + 1) % members.size();
  return v;
}

BatchStream::BatchStream(const std::vector<Sample>& samples, const SamplerConfig& config) {
  if (config.batch_size == 0) throw ConfigError("sampler: batch size must be positive");
  if (!(config.foreground_fraction >= 0.0 && config.foreground_fraction <= 1.0))
    throw ConfigError("sampler: foreground fraction must be in [0, 1]");
  if (samples.empty()) throw ConfigError("sampler: no samples");

  std::vector<std::string> sources;
  std::map<std::string, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> members;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::string& src = samples[i].source;
    if (!members.contains(src)) sources.push_back(src);
    auto& [fg, empty] = members[src];
    (samples[i].has_foreground() ? fg : empty).push_back(i);
  }

  std::vector<double> weights;
  if (config.proportions.empty()) {
    for (const auto& s : sources) {
      const auto& [fg, empty] = members[s];
      weights.push_back(static_cast<double>(config.exclude_empty ? fg.size() : fg.size() + empty.size()));
    }
  } else {
    double sum = 0.0;
    for (const auto& [id, p] : config.proportions) {
      if (!members.contains(id)) throw ConfigError("sampler: proportion given for unknown source '" + id + "'");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("sampler: proportions must sum to 1");
    for (const auto& s : sources) {
      auto it = config.proportions.find(s);
      weights.push_back(it == config.proportions.end() ? 0.0 : it->second);
    }
  }
  const auto counts = largest_remainder(config.batch_size, weights);

  for (std::size_t s = 0; s < sources.size(); ++s) {
    if (counts[s] == 0) continue;
    SourceQuota q{sources[s], counts[s], 0};
    if (!config.exclude_empty) {
      const auto split = largest_remainder(counts[s], {config.foreground_fraction, 1.0 - config.foreground_fraction});
      q.foreground = split[0];
      q.empty = split[1];
    }
    auto& [fg, empty] = members[sources[s]];
    if (q.foreground > 0 && fg.empty())
      throw ConfigError("sampler: source '" + sources[s] + "' has no foreground-bearing sample");
    if (q.empty > 0 && empty.empty())
      throw ConfigError("sampler: source '" + sources[s] + "' has no empty sample");
    quotas_.push_back(q);
    Stratum f, e;
    f.members = fg;
    f.rng = Rng(derive_seed(config.seed, 2 * s));
    e.members = empty;
    e.rng = Rng(derive_seed(config.seed, 2 * s + 1));
    strata_.push_back(std::move(f));
    strata_.push_back(std::move(e));
  }
}

std::vector<std::size_t> BatchStream::next() {
  std::vector<std::size_t> batch;
  for (std::size_t q = 0; q < quotas_.size(); ++q) {
    for (std::size_t i = 0; i < quotas_[q].foreground; ++i) batch.push_back(strata_[2 * q].draw());
    for (std::size_t i = 0; i < quotas_[q].empty; ++i) batch.push_back(strata_[2 * q + 1].draw());
  }
  return batch;
}

}  // namespace pmseg
