#pragma once

#include "csip/heads.hpp"

#include <array>
#include <span>
#include <stdexcept>

namespace csip {

/// Per-class F1 in [0, 100] over the locked label set {0..4}. Precision,
/// recall and F1 are defined as 0 whenever their denominator is 0, so a
/// class absent from gold and pred contributes 0 rather than dropping out.
inline std::array<double, kNumClasses> per_class_f1(std::span<const int> gold,
                                                    std::span<const int> pred) {
  if (gold.empty() || gold.size() != pred.size())
    throw std::invalid_argument("per_class_f1: label lists empty or mismatched");
  std::array<long, kNumClasses> tp{}, fp{}, fn{};
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const int g = gold[i];
    const int p = pred[i];
    if (g < 0 || g >= kNumClasses || p < 0 || p >= kNumClasses)
      throw std::invalid_argument("per_class_f1: label outside {0..4}");
    if (g == p) {
      ++tp[static_cast<std::size_t>(g)];
    } else {
      ++fp[static_cast<std::size_t>(p)];
      ++fn[static_cast<std::size_t>(g)];
    }
  }
  std::array<double, kNumClasses> f1{};
  for (int c = 0; c < kNumClasses; ++c) {
    const auto i = static_cast<std::size_t>(c);
    const double prec_den = static_cast<double>(tp[i] + fp[i]);
    const double rec_den = static_cast<double>(tp[i] + fn[i]);
    const double prec = prec_den > 0 ? static_cast<double>(tp[i]) / prec_den : 0.0;
    const double rec = rec_den > 0 ? static_cast<double>(tp[i]) / rec_den : 0.0;
    f1[i] = (prec + rec) > 0 ? 100.0 * 2.0 * prec * rec / (prec + rec) : 0.0;
  }
  return f1;
}

/// Unweighted mean of the five per-class F1 values; the denominator is
/// always 5 regardless of which classes appear.
inline double macro_f1(std::span<const int> gold, std::span<const int> pred) {
  const auto f1 = per_class_f1(gold, pred);
  double s = 0.0;
  for (double v : f1) s += v;
  return s / static_cast<double>(kNumClasses);
}

}  // namespace csip
