#include "csip/stats.hpp"

#include "csip/metrics.hpp"
#include "csip/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace csip {

SeedDeltaSeries make_series(std::span<const std::uint64_t> seeds,
                            std::span<const double> method_f1,
                            std::span<const double> baseline_f1) {
  if (seeds.size() != method_f1.size() || seeds.size() != baseline_f1.size())
    throw std::invalid_argument("make_series: length mismatch");
  SeedDeltaSeries s;
  s.rows.reserve(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i)
    s.rows.push_back(
        {seeds[i], method_f1[i], baseline_f1[i], method_f1[i] - baseline_f1[i]});
  std::sort(s.rows.begin(), s.rows.end(),
            [](const SeedDelta& a, const SeedDelta& b) { return a.seed < b.seed; });
  for (std::size_t i = 1; i < s.rows.size(); ++i)
    if (s.rows[i].seed == s.rows[i - 1].seed)
      throw std::invalid_argument("make_series: duplicate seed");
  return s;
}

std::pair<std::vector<std::uint64_t>, std::vector<std::uint64_t>> derive_seeds(
    const std::string& hex_prefix, int n_primary, int n_backup,
    std::span<const std::uint64_t> banned, std::span<const std::uint64_t> pool) {
  if (hex_prefix.empty() ||
      hex_prefix.find_first_not_of("0123456789abcdefABCDEF") != std::string::npos)
    throw std::invalid_argument("derive_seeds: malformed hex prefix");
  if (n_primary < 0 || n_backup < 0)
    throw std::invalid_argument("derive_seeds: negative count");
  const std::uint64_t generator_seed = std::stoull(hex_prefix, nullptr, 16);

  const std::set<std::uint64_t> banned_set(banned.begin(), banned.end());
  std::vector<std::uint64_t> candidates;
  candidates.reserve(pool.size());
  for (std::uint64_t s : pool)
    if (!banned_set.count(s)) candidates.push_back(s);

  const std::size_t want = static_cast<std::size_t>(n_primary + n_backup);
  if (candidates.size() < want)
    throw std::invalid_argument("derive_seeds: candidate pool too small after exclusions");

  // Partial Fisher-Yates: the first `want` slots are a uniform draw
  // without replacement.
  Xoshiro256ss rng(generator_seed);
  for (std::size_t i = 0; i < want; ++i) {
    const std::size_t j =
        i + static_cast<std::size_t>(rng.below(candidates.size() - i));
    std::swap(candidates[i], candidates[j]);
  }

  std::vector<std::uint64_t> primary(candidates.begin(),
                                     candidates.begin() + n_primary);
  std::vector<std::uint64_t> backup(candidates.begin() + n_primary,
                                    candidates.begin() + static_cast<long>(want));
  for (std::uint64_t s : primary)
    if (banned_set.count(s)) throw std::logic_error("derive_seeds: banned seed selected");
  for (std::uint64_t s : backup)
    if (banned_set.count(s)) throw std::logic_error("derive_seeds: banned seed selected");
  return {std::move(primary), std::move(backup)};
}

SeedDeltaSeries per_seed_deltas(std::span<const PredictionFile> method_files,
                                std::span<const PredictionFile> baseline_files) {
  if (method_files.empty())
    throw std::invalid_argument("per_seed_deltas: no method files");
  std::map<std::uint64_t, const PredictionFile*> method, baseline;
  for (const auto& f : method_files)
    if (!method.emplace(f.seed, &f).second)
      throw AbortError("per_seed_deltas: duplicate method seed " + std::to_string(f.seed));
  for (const auto& f : baseline_files)
    if (!baseline.emplace(f.seed, &f).second)
      throw AbortError("per_seed_deltas: duplicate baseline seed " + std::to_string(f.seed));
  if (method.size() != baseline.size())
    throw AbortError("per_seed_deltas: seed-set mismatch");
  for (const auto& [seed, file] : method)
    if (!baseline.count(seed))
      throw AbortError("per_seed_deltas: seed " + std::to_string(seed) +
                       " missing on baseline side");

  const std::vector<int> reference_gold = method_files.front().gold();
  const auto check = [&](const PredictionFile& f) {
    if (auto issue = validate_prediction_file(f, reference_gold))
      throw AbortError("per_seed_deltas: " + *issue + " (seed " +
                       std::to_string(f.seed) + ", cell " + f.cell + ")");
  };
  for (const auto& f : method_files) check(f);
  for (const auto& f : baseline_files) check(f);

  SeedDeltaSeries series;
  series.rows.reserve(method.size());
  for (const auto& [seed, mf] : method) {
    const PredictionFile* bf = baseline.at(seed);
    const double m = macro_f1(mf->gold(), mf->pred());
    const double b = macro_f1(bf->gold(), bf->pred());
    series.rows.push_back({seed, m, b, m - b});
  }
  return series;
}

// ---------------------------------------------------------------------------
// Student-t quantile via the regularized incomplete beta function.
// ---------------------------------------------------------------------------

namespace {

double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

double regularized_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0))
    return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, int df) {
  const double v = static_cast<double>(df);
  const double x = v / (v + t * t);
  const double tail = 0.5 * regularized_incomplete_beta(v / 2.0, 0.5, x);
  return t >= 0.0 ? 1.0 - tail : tail;
}

/// Linear interpolation between closest ranks (inclusive) on sorted data.
double percentile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("percentile of empty data");
  if (sorted.size() == 1) return sorted.front();
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  const double frac = pos - std::floor(pos);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

double student_t_quantile(double p, int df) {
  if (df < 1) throw std::invalid_argument("student_t_quantile: df < 1");
  if (p <= 0.0 || p >= 1.0)
    throw std::invalid_argument("student_t_quantile: p outside (0,1)");
  double lo = -1.0, hi = 1.0;
  while (student_t_cdf(lo, df) > p) lo *= 2.0;
  while (student_t_cdf(hi, df) < p) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (student_t_cdf(mid, df) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

namespace {

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sd_of(std::span<const double> v, double mean) {
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

std::pair<double, double> student_t_ci(std::span<const double> deltas, double level) {
  if (deltas.size() < 2)
    throw std::invalid_argument("student_t_ci: needs at least two observations");
  const double m = mean_of(deltas);
  const double sd = sd_of(deltas, m);
  const double t = student_t_quantile(0.5 + level / 2.0,
                                      static_cast<int>(deltas.size()) - 1);
  const double half = t * sd / std::sqrt(static_cast<double>(deltas.size()));
  return {m - half, m + half};
}

std::pair<double, double> seed_bootstrap_ci(std::span<const double> deltas,
                                            long rounds, std::uint64_t rng_seed,
                                            double level) {
  if (deltas.empty())
    throw std::invalid_argument("seed_bootstrap_ci: empty delta series");
  if (rounds < 1) throw std::invalid_argument("seed_bootstrap_ci: rounds < 1");

  // Sorted copy, so the interval does not depend on input order.
  std::vector<double> values(deltas.begin(), deltas.end());
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();

  std::vector<double> means;
  means.reserve(static_cast<std::size_t>(rounds));
  for (long b = 0; b < rounds; ++b) {
    // Per-round substream: schedule-independent and parallelizable.
    Xoshiro256ss rng(rng_seed, static_cast<std::uint64_t>(b) + 1);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      s += values[static_cast<std::size_t>(rng.below(n))];
    means.push_back(s / static_cast<double>(n));
  }
  std::sort(means.begin(), means.end());
  const double alpha = 1.0 - level;
  return {percentile_sorted(means, alpha / 2.0),
          percentile_sorted(means, 1.0 - alpha / 2.0)};
}

std::pair<double, double> example_bootstrap_ci(
    std::span<const PredictionFile> method_files,
    std::span<const PredictionFile> baseline_files, long rounds,
    std::uint64_t rng_seed, double level) {
  // Reuses the pairing and invariant checks of the primary path.
  const SeedDeltaSeries series = per_seed_deltas(method_files, baseline_files);
  if (rounds < 1) throw std::invalid_argument("example_bootstrap_ci: rounds < 1");

  std::map<std::uint64_t, std::pair<const PredictionFile*, const PredictionFile*>> by_seed;
  for (const auto& f : method_files) by_seed[f.seed].first = &f;
  for (const auto& f : baseline_files) by_seed[f.seed].second = &f;

  const std::vector<int> gold = method_files.front().gold();
  const std::size_t n = gold.size();
  struct SeedPreds {
    std::vector<int> method;
    std::vector<int> baseline;
  };
  std::vector<SeedPreds> preds;
  preds.reserve(by_seed.size());
  for (const auto& [seed, pair] : by_seed)
    preds.push_back({pair.first->pred(), pair.second->pred()});

  std::vector<double> round_means;
  round_means.reserve(static_cast<std::size_t>(rounds));
  std::vector<int> g(n), pm(n), pb(n);
  for (long b = 0; b < rounds; ++b) {
    Xoshiro256ss rng(rng_seed, static_cast<std::uint64_t>(b) + 1);
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i)
      idx[i] = static_cast<std::size_t>(rng.below(n));
    double delta_sum = 0.0;
    for (const auto& sp : preds) {
      for (std::size_t i = 0; i < n; ++i) {
        g[i] = gold[idx[i]];
        pm[i] = sp.method[idx[i]];
        pb[i] = sp.baseline[idx[i]];
      }
      delta_sum += macro_f1(g, pm) - macro_f1(g, pb);
    }
    round_means.push_back(delta_sum / static_cast<double>(preds.size()));
  }
  std::sort(round_means.begin(), round_means.end());
  const double alpha = 1.0 - level;
  return {percentile_sorted(round_means, alpha / 2.0),
          percentile_sorted(round_means, 1.0 - alpha / 2.0)};
}

IntervalEstimate interval_estimate(std::span<const double> deltas,
                                   const BootstrapParams& boot) {
  if (deltas.empty()) throw std::invalid_argument("interval_estimate: empty series");
  IntervalEstimate e;
  e.n = static_cast<int>(deltas.size());
  e.boot = boot;
  e.mean = mean_of(deltas);
  if (deltas.size() >= 2) {
    e.sd = sd_of(deltas, e.mean);
    std::tie(e.t_lo, e.t_hi) = student_t_ci(deltas, boot.level);
  } else {
    e.sd = 0.0;
    e.t_lo = e.t_hi = e.mean;
  }
  std::tie(e.boot_lo, e.boot_hi) =
      seed_bootstrap_ci(deltas, boot.rounds, boot.rng_seed, boot.level);
  return e;
}

Verdict decide(double mean, double boot_lo, double t_lo, double mean_threshold,
               double strength_threshold) {
  Verdict v;
  v.mean = mean;
  v.boot_lo = boot_lo;
  v.t_lo = t_lo;
  const bool bounds_positive = boot_lo > 0.0 && t_lo > 0.0;
  v.c1_pass = mean >= mean_threshold && bounds_positive;
  v.c1_prime = mean >= strength_threshold && bounds_positive && v.c1_pass;
  return v;
}

PairedSummary matched_seed_compare(const SeedDeltaSeries& series_a,
                                   const SeedDeltaSeries& series_b,
                                   const BootstrapParams& boot) {
  std::map<std::uint64_t, double> b_by_seed;
  for (const auto& r : series_b.rows) b_by_seed[r.seed] = r.delta;
  if (series_a.rows.size() != b_by_seed.size())
    throw AbortError("matched_seed_compare: seed-set mismatch");

  PairedSummary out;
  std::map<std::uint64_t, double> a_by_seed;
  for (const auto& r : series_a.rows) a_by_seed[r.seed] = r.delta;
  for (const auto& [seed, a_delta] : a_by_seed) {
    auto it = b_by_seed.find(seed);
    if (it == b_by_seed.end())
      throw AbortError("matched_seed_compare: seed " + std::to_string(seed) +
                       " missing on one side");
    out.seeds.push_back(seed);
    out.differences.push_back(a_delta - it->second);
  }
  out.estimate = interval_estimate(out.differences, boot);
  return out;
}

}  // namespace csip
