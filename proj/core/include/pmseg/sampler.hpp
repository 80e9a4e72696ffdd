#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pmseg/dataset.hpp"
#include "pmseg/rng.hpp"

namespace pmseg {

struct SamplerConfig {
  std::size_t batch_size = 15;
  /// Source id -> share of each batch. Empty means proportional to source size.
  std::map<std::string, double> proportions;
  double foreground_fraction = 0.5;
  /// Draw only foreground-bearing samples.
  bool exclude_empty = false;
  std::uint64_t seed = 0;
};

/// Splits `total` into integer parts proportional to `weights` (Hamilton's
/// method). Remainder ties go to the earlier entry.
std::vector<std::size_t> largest_remainder(std::size_t total, const std::vector<double>& weights);

/// Fixed per-batch composition of one source.
struct SourceQuota {
  std::string source;
  std::size_t foreground = 0;
  std::size_t empty = 0;
};

/// Infinite deterministic stream of index batches into `samples`. Each
/// stratum (source x foreground/empty) is walked in shuffled passes and
/// reshuffled when exhausted, so small strata are sampled with replacement
/// across passes.
class BatchStream {
 public:
  BatchStream(const std::vector<Sample>& samples, const SamplerConfig& config);

  std::vector<std::size_t> next();
  const std::vector<SourceQuota>& quotas() const noexcept { return quotas_; }

 private:
  struct Stratum {
    std::vector<std::size_t> members;
    std::size_t cursor = 0;
    Rng rng{0};
    std::size_t draw();
  };

  std::vector<SourceQuota> quotas_;
  // Parallel to quotas_: foreground then empty stratum per source.
  std::vector<Stratum> strata_;
};

}  // namespace pmseg
