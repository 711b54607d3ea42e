#pragma once

#include "csip/predfile.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace csip {

/// Raised when a pre-registered invariant is violated; callers map this
/// to the aborted-invariant exit status.
struct AbortError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One seed's method-vs-baseline macro-F1 pair; the delta is in
/// percentage points. Seeds are the unit of every confirmatory statistic.
struct SeedDelta {
  std::uint64_t seed = 0;
  double method_f1 = 0.0;
  double baseline_f1 = 0.0;
  double delta = 0.0;
};

struct SeedDeltaSeries {
  std::vector<SeedDelta> rows;

  std::vector<double> deltas() const {
    std::vector<double> d;
    d.reserve(rows.size());
    for (const auto& r : rows) d.push_back(r.delta);
    return d;
  }
};

SeedDeltaSeries make_series(std::span<const std::uint64_t> seeds,
                            std::span<const double> method_f1,
                            std::span<const double> baseline_f1);

struct BootstrapParams {
  long rounds = 20000;
  std::uint64_t rng_seed = 4242;
  double level = 0.95;
};

/// The locked confirmatory rule's parameters.
struct DecisionRule {
  double mean_pp = 0.8;
  double strength_pp = 1.0;
  long bootstrap_rounds = 20000;
  std::uint64_t bootstrap_seed = 4242;
  double level = 0.95;

  BootstrapParams bootstrap() const {
    return {bootstrap_rounds, bootstrap_seed, level};
  }
};

struct IntervalEstimate {
  double mean = 0.0;
  double sd = 0.0;  // N-1 denominator
  double boot_lo = 0.0;
  double boot_hi = 0.0;
  double t_lo = 0.0;
  double t_hi = 0.0;
  int n = 0;
  BootstrapParams boot;
};

struct Verdict {
  bool c1_pass = false;
  bool c1_prime = false;
  double mean = 0.0;
  double boot_lo = 0.0;
  double t_lo = 0.0;
};

/// Draws n_primary then n_backup seeds without replacement from the
/// candidate pool minus the banned set, using a generator seeded with
/// int(hex_prefix, 16). Fully reproducible; the two lists are disjoint.
std::pair<std::vector<std::uint64_t>, std::vector<std::uint64_t>> derive_seeds(
    const std::string& hex_prefix, int n_primary, int n_backup,
    std::span<const std::uint64_t> banned, std::span<const std::uint64_t> pool);

/// Pairs method and baseline prediction files by seed and computes the
/// per-seed macro-F1 deltas. Aborts on a seed-set mismatch or on any
/// gold-vector disagreement across the files.
SeedDeltaSeries per_seed_deltas(std::span<const PredictionFile> method_files,
                                std::span<const PredictionFile> baseline_files);

/// Student-t quantile P(T <= x) = p for df degrees of freedom, accurate
/// to well under 1e-4 for df <= 200.
double student_t_quantile(double p, int df);

/// mean +- t_{(1+level)/2, n-1} * sd / sqrt(n). Requires n >= 2.
std::pair<double, double> student_t_ci(std::span<const double> deltas,
                                       double level = 0.95);

/// Percentile bootstrap over seed resamples. Round b draws its indices
/// from a generator keyed by (rng_seed, b), so the result is independent
/// of evaluation order. Percentiles interpolate linearly between closest
/// ranks (inclusive).
std::pair<double, double> seed_bootstrap_ci(std::span<const double> deltas,
                                            long rounds = 20000,
                                            std::uint64_t rng_seed = 4242,
                                            double level = 0.95);

/// Example-conditional bootstrap: each round resamples test rows once,
/// recomputes every seed's delta on the resample and records the
/// seed-mean; the interval is the percentile interval over rounds.
std::pair<double, double> example_bootstrap_ci(
    std::span<const PredictionFile> method_files,
    std::span<const PredictionFile> baseline_files, long rounds,
    std::uint64_t rng_seed, double level = 0.95);

IntervalEstimate interval_estimate(std::span<const double> deltas,
                                   const BootstrapParams& boot);

/// Locked rule: C1 passes iff mean >= mean_threshold AND both lower
/// bounds are strictly positive; the descriptive C1' label additionally
/// requires mean >= strength_threshold and never upgrades a C1 fail.
Verdict decide(double mean, double boot_lo, double t_lo,
               double mean_threshold = 0.8, double strength_threshold = 1.0);

struct PairedSummary {
  std::vector<std::uint64_t> seeds;
  std::vector<double> differences;  // a minus b, per seed
  IntervalEstimate estimate;
};

/// Per-seed paired differences between two matched-seed series
/// (series_a minus series_b), with both interval types on the pairs.
PairedSummary matched_seed_compare(const SeedDeltaSeries& series_a,
                                   const SeedDeltaSeries& series_b,
                                   const BootstrapParams& boot = {});

}  // namespace csip
