#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "pmseg/labels.hpp"
#include "pmseg/presence.hpp"
#include "pmseg/raster.hpp"
#include "pmseg/tensor.hpp"

namespace fixture {

/// Random labels, a random strictly positive probability map and a presence
/// array with at least one true entry.
struct Instance {
  pmseg::LabelMap y;
  pmseg::Tensor p;
  pmseg::PresenceArray k;
};

inline Instance random_instance(std::mt19937_64& gen, std::size_t h, std::size_t w, std::size_t classes) {
  std::uniform_int_distribution<int> label(0, static_cast<int>(classes) - 1);
  std::uniform_real_distribution<double> logit(-3.0, 3.0);
  std::bernoulli_distribution coin(0.5);
  Instance inst{pmseg::LabelMap(h, w), pmseg::Tensor({classes, h, w}), {}};
  for (std::size_t i = 0; i < h * w; ++i) inst.y[i] = static_cast<std::uint8_t>(label(gen));
  for (std::size_t i = 0; i < h * w; ++i) {
    double z = 0.0;
    std::vector<double> e(classes);
    for (std::size_t c = 0; c < classes; ++c) z += e[c] = std::exp(logit(gen));
    for (std::size_t c = 0; c < classes; ++c) inst.p[c * h * w + i] = e[c] / z;
  }
  std::vector<bool> k(classes);
  do {
    for (std::size_t c = 0; c < classes; ++c) k[c] = coin(gen);
  } while (std::none_of(k.begin(), k.end(), [](bool b) { return b; }));
  inst.k = pmseg::PresenceArray(k);
  return inst;
}

template <typename Tag>
oracle::Labels to_oracle(const pmseg::Raster<std::uint8_t, Tag>& y) {
  oracle::Labels out(y.height(), std::vector<int>(y.width()));
  for (std::size_t i = 0; i < y.height(); ++i)
    for (std::size_t j = 0; j < y.width(); ++j) out[i][j] = y(i, j);
  return out;
}

inline oracle::Probs to_oracle(const pmseg::Tensor& p) {
  oracle::Probs out(p.dim(0), std::vector<std::vector<double>>(p.dim(1), std::vector<double>(p.dim(2))));
  for (std::size_t c = 0; c < p.dim(0); ++c)
    for (std::size_t i = 0; i < p.dim(1); ++i)
      for (std::size_t j = 0; j < p.dim(2); ++j) out[c][i][j] = p.at(c, i, j);
  return out;
}

inline oracle::Weights to_oracle(const pmseg::PresenceMask& w) {
  oracle::Weights out(w.height(), std::vector<double>(w.width()));
  for (std::size_t i = 0; i < w.height(); ++i)
    for (std::size_t j = 0; j < w.width(); ++j) out[i][j] = w(i, j);
  return out;
}

inline pmseg::LabelMap labels(std::size_t h, std::size_t w, std::vector<std::uint8_t> v) {
  return pmseg::LabelMap(h, w, std::move(v));
}

inline pmseg::PredictionMap prediction(std::size_t h, std::size_t w, std::vector<std::uint8_t> v) {
  return pmseg::PredictionMap(h, w, std::move(v));
}

inline pmseg::PresenceArray presence(std::initializer_list<bool> k) { return pmseg::PresenceArray(std::vector<bool>(k)); }

}  // namespace fixture
