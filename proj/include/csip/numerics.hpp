#pragma once

#include "csip/autodiff.hpp"
#include "csip/rng.hpp"
#include "csip/tensor.hpp"

#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>

namespace csip {

/// Xavier-uniform: values in +-gain*sqrt(6/(rows+cols)), filled in
/// row-major order for a reproducible draw sequence. gain = 0 degenerates
/// to an all-zero tensor.
inline Matrix xavier_uniform(int rows, int cols, double gain, Xoshiro256ss& rng) {
  if (rows < 1 || cols < 1)
    throw std::invalid_argument("xavier_uniform: non-positive dimension");
  if (gain < 0.0) throw std::invalid_argument("xavier_uniform: negative gain");
  const double bound = gain * std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
  return m;
}

inline Matrix xavier_uniform_init(int rows, int cols, double gain,
                                  std::uint64_t rng_seed) {
  Xoshiro256ss rng(rng_seed, stream::kInit);
  return xavier_uniform(rows, cols, gain, rng);
}

/// Fan-in scaled uniform: values in +-1/sqrt(cols), the default linear
/// layer initialization this project uses for fresh classification heads.
inline Matrix fan_in_uniform(int rows, int cols, Xoshiro256ss& rng) {
  if (rows < 1 || cols < 1)
    throw std::invalid_argument("fan_in_uniform: non-positive dimension");
  const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
  return m;
}

inline Matrix fan_in_uniform_init(int rows, int cols, std::uint64_t rng_seed) {
  Xoshiro256ss rng(rng_seed, stream::kInit);
  return fan_in_uniform(rows, cols, rng);
}

/// Scales all gradients by max_norm/g when the global L2 norm g across
/// every tensor exceeds max_norm; otherwise leaves them unchanged.
inline void clip_global_norm(std::span<const TensorPtr> params, double max_norm) {
  if (max_norm <= 0.0) throw std::invalid_argument("clip_global_norm: max_norm <= 0");
  double sq = 0.0;
  for (const auto& p : params) sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  const double s = max_norm / norm;
  for (const auto& p : params) p->grad *= s;
}

/// Builds a scalar loss graph from the given parameters. Called repeatedly
/// by grad_check, so the build must be deterministic (dropout disabled).
using LossBuilder = std::function<Var(Tape&)>;

/// Max over all parameter entries of the relative disagreement between the
/// analytic gradient and a central finite difference with the given step.
inline double grad_check(const LossBuilder& build,
                         std::span<const TensorPtr> params, double step) {
  if (step <= 0.0) throw std::invalid_argument("grad_check: step <= 0");

  const auto eval = [&]() {
    Tape t;
    Var loss = build(t);
    const double v = t.scalar(loss);
    if (!std::isfinite(v)) throw NumericFailure("grad_check: non-finite forward value");
    return v;
  };

  for (const auto& p : params) p->zero_grad();
  {
    Tape t;
    Var loss = build(t);
    if (!std::isfinite(t.scalar(loss)))
      throw NumericFailure("grad_check: non-finite forward value");
    t.backward(loss);
  }

  double worst = 0.0;
  for (const auto& p : params) {
    for (Eigen::Index j = 0; j < p->value.cols(); ++j) {
      for (Eigen::Index i = 0; i < p->value.rows(); ++i) {
        const double saved = p->value(i, j);
        p->value(i, j) = saved + step;
        const double up = eval();
        p->value(i, j) = saved - step;
        const double down = eval();
        p->value(i, j) = saved;
        const double cd = (up - down) / (2.0 * step);
        const double an = p->grad(i, j);
        const double rel =
            std::abs(an - cd) / std::max({std::abs(an), std::abs(cd), 1e-8});
        worst = std::max(worst, rel);
      }
    }
  }
  return worst;
}

}  // namespace csip
