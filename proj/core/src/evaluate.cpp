#include "pmseg/evaluate.hpp"

#include <stdexcept>

#include "pmseg/resample.hpp"

namespace pmseg {

std::vector<std::set<std::string>> annotating_sources(const DatasetManifest& manifest) {
  std::vector<std::set<std::string>> out(manifest.num_classes());
  for (const ClassMapping& m : manifest.sources) {
    if (m.trust_background) out[0].insert(m.source_id);
    for (auto [local, global] : m.local_to_global)
      if (global < out.size() && !m.invalidated.contains(global)) out[global].insert(m.source_id);
  }
  return out;
}

double PooledDice::mean_foreground() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 1; c < counts.size(); ++c) {
    if (images[c] == 0) continue;
    sum += dice(c);
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

PooledDice score_predictions(const std::vector<Sample>& samples, const std::vector<Tensor>& probabilities,
                             const std::vector<std::set<std::string>>& class_sources) {
  if (samples.size() != probabilities.size())
    throw std::invalid_argument("score: " + std::to_string(samples.size()) + " samples but " +
                                std::to_string(probabilities.size()) + " predictions");
  const std::size_t classes = class_sources.size();
  PooledDice out;
  out.counts.assign(classes, {});
  out.images.assign(classes, 0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    const Tensor& p = probabilities[i];
    if (p.rank() != 3 || p.dim(0) != classes)
      throw std::invalid_argument("score: prediction for '" + s.id + "' has shape " + to_string(p.shape()) +
                                  ", expected " + std::to_string(classes) + " channels");
    const LabelMap& truth_std = s.complete_label.size() ? s.complete_label : s.label;
    // Truth restored through the same inverse geometry as the prediction.
    const LabelMap truth =
        retag<LabelMap>(restore_prediction(one_hot(truth_std, classes), s.geometry));
    const PredictionMap pred = restore_prediction(p, s.geometry);
    for (std::size_t c = 0; c < classes; ++c) {
      if (!class_sources[c].contains(s.source)) continue;
      out.counts[c] += overlap_counts(truth, pred, static_cast<std::uint8_t>(c));
      ++out.images[c];
    }
    for (std::size_t j = 0; j < truth.size(); ++j)
      if (truth[j] == 0 && pred[j] != 0) ++out.background_false_positives;
  }
  return out;
}

PooledDice evaluate_pooled(const NetConfig& net, const NetParams& params, const std::vector<Sample>& samples,
                           const std::vector<std::set<std::string>>& class_sources) {
  std::vector<Tensor> probs;
  probs.reserve(samples.size());
  for (const Sample& s : samples) probs.push_back(predict(net, params, s.feature));
  return score_predictions(samples, probs, class_sources);
}

}  // namespace pmseg
