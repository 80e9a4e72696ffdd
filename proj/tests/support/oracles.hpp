#pragma once

// Naive reference implementations written straight from the loss and mask
// definitions. They share no code with the library: plain nested loops over
// [class][row][col] arrays.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace oracle {

using Labels = std::vector<std::vector<int>>;                  // [row][col]
using Probs = std::vector<std::vector<std::vector<double>>>;  // [class][row][col]
using Weights = std::vector<std::vector<double>>;             // [row][col]

inline int rows(const Labels& y) { return static_cast<int>(y.size()); }
inline int cols(const Labels& y) { return static_cast<int>(y[0].size()); }

inline Probs one_hot(const Labels& y, int classes) {
  Probs out(classes, std::vector<std::vector<double>>(rows(y), std::vector<double>(cols(y), 0.0)));
  for (int c = 0; c < classes; ++c)
    for (int i = 0; i < rows(y); ++i)
      for (int j = 0; j < cols(y); ++j) out[c][i][j] = y[i][j] == c ? 1.0 : 0.0;
  return out;
}

inline Labels argmax(const Probs& p) {
  Labels out(p[0].size(), std::vector<int>(p[0][0].size(), 0));
  for (std::size_t i = 0; i < p[0].size(); ++i)
    for (std::size_t j = 0; j < p[0][0].size(); ++j) {
      int best = 0;
      for (std::size_t c = 1; c < p.size(); ++c)
        if (p[c][i][j] > p[best][i][j]) best = static_cast<int>(c);
      out[i][j] = best;
    }
  return out;
}

inline double hard_dice(const Labels& y, const Labels& yhat, int c) {
  double inter = 0, a = 0, b = 0;
  for (int i = 0; i < rows(y); ++i)
    for (int j = 0; j < cols(y); ++j) {
      const bool t = y[i][j] == c, q = yhat[i][j] == c;
      inter += (t && q) ? 1 : 0;
      a += t ? 1 : 0;
      b += q ? 1 : 0;
    }
  return a + b == 0 ? 1.0 : 2 * inter / (a + b);
}

inline Weights mask_base(const Labels& y, const std::vector<bool>& k) {
  Weights w(rows(y), std::vector<double>(cols(y), 0.0));
  for (int i = 0; i < rows(y); ++i)
    for (int j = 0; j < cols(y); ++j)
      for (int c = 0; c < static_cast<int>(k.size()); ++c)
        if (k[c] && y[i][j] == c) w[i][j] += 1.0;
  return w;
}

inline Weights mask_or(const Labels& y, const Labels& yhat, const std::vector<bool>& k) {
  Weights w(rows(y), std::vector<double>(cols(y), 0.0));
  for (int i = 0; i < rows(y); ++i)
    for (int j = 0; j < cols(y); ++j) w[i][j] = (k[y[i][j]] || k[yhat[i][j]]) ? 1.0 : 0.0;
  return w;
}

inline Weights mask_plus(const Labels& y, const Labels& yhat, const std::vector<bool>& k) {
  Weights w(rows(y), std::vector<double>(cols(y), 0.0));
  for (int i = 0; i < rows(y); ++i)
    for (int j = 0; j < cols(y); ++j)
      for (int c = 0; c < static_cast<int>(k.size()); ++c)
        if (k[c]) w[i][j] += (y[i][j] == c ? 1.0 : 0.0) + (yhat[i][j] == c ? 1.0 : 0.0);
  return w;
}

inline double softdice(const Labels& y, const Probs& p, int c, double eps) {
  double inter = 0, ys = 0, ps = 0;
  for (int i = 0; i < rows(y); ++i)
    for (int j = 0; j < cols(y); ++j) {
      const double t = y[i][j] == c ? 1.0 : 0.0;
      inter += t * p[c][i][j];
      ys += t;
      ps += p[c][i][j];
    }
  return (2 * inter + eps) / (ys + ps + eps);
}

inline double softdice_loss(const Labels& y, const Probs& p, double eps) {
  double s = 0;
  for (int c = 0; c < static_cast<int>(p.size()); ++c) s += 1 - softdice(y, p, c, eps);
  return s;
}

inline double logdice_loss(const Labels& y, const Probs& p, double eps) {
  double s = 0;
  for (int c = 0; c < static_cast<int>(p.size()); ++c) s -= std::log(softdice(y, p, c, eps));
  return s;
}

inline double masked_softdice(const Labels& y, const Probs& p, const std::vector<bool>& k, double eps) {
  double s = 0, n = 0;
  for (int c = 0; c < static_cast<int>(p.size()); ++c)
    if (k[c]) {
      s += 1 - softdice(y, p, c, eps);
      n += 1;
    }
  return s / n;
}

inline double masked_logdice(const Labels& y, const Probs& p, const std::vector<bool>& k, double eps) {
  double s = 0, n = 0;
  for (int c = 0; c < static_cast<int>(p.size()); ++c)
    if (k[c]) {
      s -= std::log(softdice(y, p, c, eps));
      n += 1;
    }
  return s / n;
}

inline double crossentropy(const Labels& y, const Probs& p, double floor = 1e-12) {
  double s = 0;
  for (int i = 0; i < rows(y); ++i)
    for (int j = 0; j < cols(y); ++j) s -= std::log(std::max(floor, p[y[i][j]][i][j]));
  return s / (rows(y) * cols(y));
}

inline double masked_crossentropy(const Labels& y, const Probs& p, const Weights& w, bool normalize,
                                  double floor = 1e-12) {
  double s = 0, ws = 0;
  for (int i = 0; i < rows(y); ++i)
    for (int j = 0; j < cols(y); ++j) {
      for (int c = 0; c < static_cast<int>(p.size()); ++c)
        if (y[i][j] == c) s -= w[i][j] * std::log(std::max(floor, p[c][i][j]));
      ws += w[i][j];
    }
  return normalize ? s / std::max(1.0, ws) : s;
}

inline double tversky(const Labels& y, const Probs& p, int c, double alpha, double beta, double eps) {
  double tp = 0, fp = 0, fn = 0;
  for (int i = 0; i < rows(y); ++i)
    for (int j = 0; j < cols(y); ++j) {
      const double t = y[i][j] == c ? 1.0 : 0.0;
      tp += t * p[c][i][j];
      fp += (1 - t) * p[c][i][j];
      fn += t * (1 - p[c][i][j]);
    }
  return (tp + eps) / (tp + alpha * fp + beta * fn + eps);
}

inline double masked_ftl(const Labels& y, const Probs& p, const std::vector<bool>& k, double alpha, double beta,
                         double gamma, double eps) {
  double s = 0, n = 0;
  for (int c = 0; c < static_cast<int>(p.size()); ++c)
    if (k[c]) {
      s += std::pow(std::max(0.0, 1 - tversky(y, p, c, alpha, beta, eps)), 1 / gamma);
      n += 1;
    }
  return s / n;
}

/// Weighted per-pixel L1 distance between one-hot truth and p.
inline double masked_mae(const Labels& y, const Probs& p, const Weights& w, bool normalize) {
  double s = 0, ws = 0;
  for (int i = 0; i < rows(y); ++i)
    for (int j = 0; j < cols(y); ++j) {
      double l1 = 0;
      for (int c = 0; c < static_cast<int>(p.size()); ++c) l1 += std::abs((y[i][j] == c ? 1.0 : 0.0) - p[c][i][j]);
      s += w[i][j] * l1;
      ws += w[i][j];
    }
  return normalize ? s / std::max(1.0, ws) : s;
}

}  // namespace oracle
