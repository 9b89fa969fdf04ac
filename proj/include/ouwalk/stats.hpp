#pragma once

// Empirical-vs-analytic comparisons for sampled ensembles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ouwalk/moments.hpp"
#include "ouwalk/sim.hpp"

namespace ouwalk {

inline constexpr std::size_t kStandardErrorBatches = 32;
inline constexpr std::size_t kMinEnsembleSize = 100;
inline constexpr double kFddPassThreshold = 0.05;
inline constexpr double kCounterexampleThreshold = 0.3;
inline constexpr double kRoundingFloor = 1e-10;

struct MomentReport {
  int order = 0;
  double empirical = 0.0;
  double standard_error = 0.0;
  double exact = 0.0;
  double z = 0.0;
};

inline double mean_of(std::span<const double> xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

inline double sample_variance(std::span<const double> xs) {
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

/// Standard error of the mean from equal-size batch means (trailing
/// remainder excluded from the batching, not from the mean).
inline double batch_standard_error(std::span<const double> xs,
                                   std::size_t batches = kStandardErrorBatches) {
  if (xs.size() < 2 * batches) throw std::invalid_argument("batch_standard_error: too few samples");
  const std::size_t size = xs.size() / batches;
  std::vector<double> means(batches);
  for (std::size_t b = 0; b < batches; ++b) means[b] = mean_of(xs.subspan(b * size, size));
  return std::sqrt(sample_variance(means) / static_cast<double>(batches));
}

inline double z_score(double empirical, double exact, double se) {
  if (se > 0.0) return (empirical - exact) / se;
  if (empirical == exact) return 0.0;
  return std::copysign(std::numeric_limits<double>::infinity(), empirical - exact);
}

/// Psi = sum_k phi_k Y_{t_k} per path (columns 1..K).
inline std::vector<double> psi_samples(const PathEnsemble& ensemble, std::span<const double> phi) {
  if (phi.size() != ensemble.grid.size()) throw std::invalid_argument("psi_samples: phi size != K");
  std::vector<double> out(ensemble.paths);
  for (std::size_t i = 0; i < ensemble.paths; ++i) {
    double psi = 0.0;
    for (std::size_t k = 0; k < phi.size(); ++k) psi += phi[k] * ensemble.at(i, k + 1);
    out[i] = psi;
  }
  return out;
}

inline MomentReport moment_report(std::span<const double> samples, int L, double exact) {
  if (samples.size() < kMinEnsembleSize) throw std::invalid_argument("empirical_moment: need N >= 100");
  std::vector<double> powered(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!std::isfinite(samples[i])) throw std::invalid_argument("empirical_moment: non-finite sample");
    powered[i] = std::pow(samples[i], L);
  }
  MomentReport r;
  r.order = L;
  r.exact = exact;
  r.empirical = mean_of(powered);
  r.standard_error = batch_standard_error(powered);
  // A (near-)deterministic ensemble has an SE of pure rounding noise; don't
  // let that turn last-bit differences into huge z-scores.
  const double floor = kRoundingFloor * (1.0 + std::abs(exact));
  r.z = z_score(r.empirical, exact, std::max(r.standard_error, floor));
  return r;
}

/// Sample mean of Psi^L with a 32-batch standard error, against `exact`.
inline MomentReport empirical_moment(const PathEnsemble& ensemble, std::span<const double> phi, int L,
                                     double exact) {
  return moment_report(psi_samples(ensemble, phi), L, exact);
}

inline double normal_cdf(double x, double mean, double variance) {
  return 0.5 * std::erfc(-(x - mean) / std::sqrt(2.0 * variance));
}

/// sup_x |F_N(x) - Phi((x - mean)/sd)|.
inline double ks_distance(std::vector<double> samples, double mean, double variance) {
  if (samples.size() < kMinEnsembleSize) throw std::invalid_argument("ks_distance: need N >= 100");
  if (!(variance > 0.0)) throw std::invalid_argument("ks_distance: target variance must be > 0");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double F = normal_cdf(samples[i], mean, variance);
    worst = std::max({worst, (static_cast<double>(i) + 1.0) / n - F, F - static_cast<double>(i) / n});
  }
  return worst;
}

/// KS against a Gaussian target that may be degenerate (variance 0): then the
/// distance is 0 iff every sample sits exactly at the mean, else 1.
inline double ks_distance_or_point_mass(const std::vector<double>& samples, double mean, double variance) {
  if (variance > 1e-300) return ks_distance(samples, mean, variance);
  for (double x : samples)
    if (std::abs(x - mean) > 1e-12 * std::max(1.0, std::abs(mean))) return 1.0;
  return 0.0;
}

// ---------------------------------------------------------------------------
// Finite-dimensional distributions

struct FddDraw {
  std::vector<double> phi;
  double target_mean = 0.0;
  double target_variance = 0.0;
  double ks = 0.0;
  std::vector<MomentReport> moments;  // orders 1..4 against Gaussian moments of Gamma
};

struct FddReport {
  std::vector<FddDraw> draws;
  double worst_ks = 0.0;
  double worst_abs_z = 0.0;

  bool passed() const { return worst_ks < kFddPassThreshold; }
  bool counterexample() const { return worst_ks >= kCounterexampleThreshold; }
};

struct FddConfig {
  std::size_t draws = 8;  // R
  std::size_t paths = 10'000;
  std::uint64_t master_seed = 1;
  unsigned threads = 1;
  int max_order = 4;
};

/// Samples Y on the grid once, then for R random unit weight vectors phi
/// compares Psi = sum phi_k Y_{t_k} with Gamma = sum phi_k U_{t_k}, U the OU
/// process started at `ou_start`.
inline FddReport fdd_test(const WalkParams& walk, const DirectionVector& theta, const TimeGrid& grid,
                          double ou_start, const FddConfig& cfg) {
  if (grid.size() > kMaxPsiTimes) throw std::length_error("fdd_test: K must be <= 4");
  const auto ensemble = simulate_projection_paths(walk, theta, grid, cfg.paths, cfg.master_seed, cfg.threads);
  FddReport report;
  const std::size_t K = grid.size();
  for (std::size_t r = 0; r < cfg.draws; ++r) {
    Engine rng = stream_engine(mix64(cfg.master_seed) + 1, r);
    std::normal_distribution<double> normal;
    FddDraw draw;
    draw.phi.resize(K);
    double sq = 0.0;
    for (double& x : draw.phi) {
      x = normal(rng);
      sq += x * x;
    }
    for (double& x : draw.phi) x /= std::sqrt(sq);
    const auto law = gamma_law(OUParams{ou_start}, grid.times(), draw.phi);
    draw.target_mean = law.mean;
    draw.target_variance = law.variance;
    const auto psi = psi_samples(ensemble, draw.phi);
    draw.ks = ks_distance_or_point_mass(psi, law.mean, law.variance);
    for (int L = 1; L <= cfg.max_order; ++L) {
      auto m = moment_report(psi, L, gaussian_moment(law.mean, law.variance, L));
      report.worst_abs_z = std::max(report.worst_abs_z, std::abs(m.z));
      draw.moments.push_back(m);
    }
    report.worst_ks = std::max(report.worst_ks, draw.ks);
    report.draws.push_back(std::move(draw));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Convergence in d

enum class SweepStatistic { ExactMean, Mean, Variance, Ks, FDiscrepancy };

inline std::string to_string(SweepStatistic s) {
  switch (s) {
    case SweepStatistic::ExactMean: return "exact_mean";
    case SweepStatistic::Mean: return "mean";
    case SweepStatistic::Variance: return "var";
    case SweepStatistic::Ks: return "ks";
    case SweepStatistic::FDiscrepancy: return "f_discrepancy";
  }
  return "?";
}

inline SweepStatistic parse_sweep_statistic(const std::string& s) {
  if (s == "exact_mean") return SweepStatistic::ExactMean;
  if (s == "mean") return SweepStatistic::Mean;
  if (s == "var") return SweepStatistic::Variance;
  if (s == "ks") return SweepStatistic::Ks;
  if (s == "f_discrepancy") return SweepStatistic::FDiscrepancy;
  throw std::invalid_argument("unknown sweep statistic '" + s + "'");
}

struct ConvergenceRow {
  int d = 0;
  std::string statistic;
  double observed = 0.0;
  double target = 0.0;
  double gap = 0.0;
};

struct SweepConfig {
  std::vector<int> dims;
  SweepStatistic statistic = SweepStatistic::ExactMean;
  double t = 1.0;
  double u = 0.0;
  double p = 0.5;
  DirectionSpec direction = direction::FlatSigned{0.0};
  int eta = 2;  // for FDiscrepancy
  std::size_t paths = 10'000;
  std::uint64_t master_seed = 1;
  unsigned threads = 1;
};

/// Per-d gap between a statistic of Y_t and its OU target (start u).
inline std::vector<ConvergenceRow> convergence_sweep(const SweepConfig& cfg) {
  if (cfg.dims.empty()) throw std::invalid_argument("convergence_sweep: empty dimension list");
  for (std::size_t i = 1; i < cfg.dims.size(); ++i) {
    if (cfg.dims[i] <= cfg.dims[i - 1]) throw std::invalid_argument("convergence_sweep: dims must increase");
  }
  const auto target = ou_transition(OUParams{cfg.u}, cfg.t);
  std::vector<ConvergenceRow> rows;
  for (int d : cfg.dims) {
    const WalkParams walk(d, cfg.p);
    const TimeGrid grid({cfg.t}, walk);
    ConvergenceRow row;
    row.d = d;
    row.statistic = to_string(cfg.statistic);
    if (cfg.statistic == SweepStatistic::FDiscrepancy) {
      const int eta[] = {cfg.eta};
      row.observed = f_discrepancy(walk, grid, eta);
      row.target = 0.0;
    } else {
      const auto theta = make_direction(cfg.direction, d);
      if (cfg.statistic == SweepStatistic::ExactMean) {
        const int eta[] = {1};
        row.observed = theta.start_projection() * moment_X_from_eta(walk, grid, eta);
        row.target = target.mean;
      } else {
        const auto ens = simulate_projection_paths(walk, theta, grid, cfg.paths, cfg.master_seed, cfg.threads);
        const auto ys = ens.column(1);
        switch (cfg.statistic) {
          case SweepStatistic::Mean:
            row.observed = mean_of(ys);
            row.target = target.mean;
            break;
          case SweepStatistic::Variance:
            row.observed = sample_variance(ys);
            row.target = target.variance;
            break;
          default:
            row.observed = ks_distance(ys, target.mean, target.variance);
            row.target = 0.0;
            break;
        }
      }
    }
    row.gap = std::abs(row.observed - row.target);
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Tightness and increments

struct ProportionInterval {
  double estimate;
  double lower;
  double upper;
};

/// Wilson score interval for hits/n at normal quantile z.
inline ProportionInterval wilson_interval(std::size_t hits, std::size_t n, double z = 4.0) {
  if (n == 0) throw std::invalid_argument("wilson_interval: n must be > 0");
  const double nn = static_cast<double>(n);
  const double phat = static_cast<double>(hits) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (phat + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(phat * (1.0 - phat) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {phat, std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

struct TightnessReport {
  double t1 = 0.0, t2 = 0.0, t3 = 0.0;
  double epsilon = 0.0;
  std::size_t hits = 0;
  std::size_t paths = 0;
  ProportionInterval probability{0.0, 0.0, 0.0};
  /// (t3 - t1)^{3/2} / eps^3
  double window_scale = 0.0;
  /// (n3 - n2) (n2 - n1)^{1/2} delta^{3/2} / eps^3
  double pulse_scale = 0.0;
};

/// Estimates P(|Y_t3 - Y_t2| >= eps, |Y_t2 - Y_t1| >= eps). No constant is
/// asserted; the scales are reported for inspection.
inline TightnessReport tightness_probe(const WalkParams& walk, const DirectionVector& theta, double t1,
                                       double t2, double t3, double epsilon, std::size_t N,
                                       std::uint64_t master_seed, unsigned threads = 1) {
  if (!(t1 < t2 && t2 < t3)) throw std::invalid_argument("tightness_probe: need t1 < t2 < t3");
  if (!(epsilon > 0.0)) throw std::invalid_argument("tightness_probe: epsilon must be > 0");
  const TimeGrid grid({t1, t2, t3}, walk);
  const auto ens = simulate_projection_paths(walk, theta, grid, N, master_seed, threads);
  TightnessReport r;
  r.t1 = t1;
  r.t2 = t2;
  r.t3 = t3;
  r.epsilon = epsilon;
  r.paths = N;
  for (std::size_t i = 0; i < N; ++i) {
    if (std::abs(ens.at(i, 3) - ens.at(i, 2)) >= epsilon && std::abs(ens.at(i, 2) - ens.at(i, 1)) >= epsilon) {
      ++r.hits;
    }
  }
  r.probability = wilson_interval(r.hits, N);
  const double eps3 = epsilon * epsilon * epsilon;
  r.window_scale = std::pow(t3 - t1, 1.5) / eps3;
  r.pulse_scale = static_cast<double>(grid.pulses(3) - grid.pulses(2)) *
                  std::sqrt(static_cast<double>(grid.pulses(2) - grid.pulses(1))) *
                  std::pow(walk.delta(), 1.5) / eps3;
  return r;
}

/// The narrower window's probability is not significantly above the wider one's.
inline bool tightness_monotone(const TightnessReport& wide, const TightnessReport& narrow) {
  return narrow.probability.estimate <= wide.probability.estimate ||
         narrow.probability.lower <= wide.probability.upper;
}

struct IncrementBin {
  double y_low = 0.0;
  double y_high = 0.0;
  std::size_t count = 0;
  double empirical = 0.0;   // mean (Y_t2 - Y_t1)^2 in the bin
  double predicted = 0.0;   // mean conditional_sq_increment(Y_t1) in the bin
  double standard_error = 0.0;
  double z = 0.0;
};

struct IncrementCheck {
  long pulses = 0;  // m = n2 - n1
  std::vector<IncrementBin> bins;
  double worst_abs_z = 0.0;
  bool bound_holds = true;  // closed form <= 2 m delta (1 + 2 y^2) on every sample
};

/// Bins paths by Y_t1 into equal-count bins and compares the mean squared
/// increment in each bin with the closed-form conditional second moment.
inline IncrementCheck conditional_increment_check(const WalkParams& walk, const DirectionVector& theta,
                                                  double t1, double t2, std::size_t N, std::size_t bins,
                                                  std::uint64_t master_seed, unsigned threads = 1) {
  if (bins < 1 || N < bins * 2) throw std::invalid_argument("conditional_increment_check: too few paths per bin");
  const TimeGrid grid({t1, t2}, walk);
  const auto ens = simulate_projection_paths(walk, theta, grid, N, master_seed, threads);
  IncrementCheck out;
  out.pulses = grid.segment_pulses(2);
  const double delta = walk.delta();
  struct Sample {
    double y1, sq, predicted;
  };
  std::vector<Sample> samples(N);
  for (std::size_t i = 0; i < N; ++i) {
    const double y1 = ens.at(i, 1);
    const double inc = ens.at(i, 2) - y1;
    const double g = conditional_sq_increment(y1, out.pulses, delta);
    if (g > 2.0 * static_cast<double>(out.pulses) * delta * (1.0 + 2.0 * y1 * y1) + 1e-12) out.bound_holds = false;
    samples[i] = {y1, inc * inc, g};
  }
  std::stable_sort(samples.begin(), samples.end(), [](const Sample& a, const Sample& b) { return a.y1 < b.y1; });
  for (std::size_t b = 0; b < bins; ++b) {
    const std::size_t lo = b * N / bins;
    const std::size_t hi = (b + 1) * N / bins;
    IncrementBin bin;
    bin.y_low = samples[lo].y1;
    bin.y_high = samples[hi - 1].y1;
    bin.count = hi - lo;
    std::vector<double> diff;
    diff.reserve(bin.count);
    for (std::size_t i = lo; i < hi; ++i) {
      bin.empirical += samples[i].sq;
      bin.predicted += samples[i].predicted;
      diff.push_back(samples[i].sq - samples[i].predicted);
    }
    bin.empirical /= static_cast<double>(bin.count);
    bin.predicted /= static_cast<double>(bin.count);
    bin.standard_error = std::sqrt(sample_variance(diff) / static_cast<double>(bin.count));
    bin.z = z_score(bin.empirical, bin.predicted, bin.standard_error);
    out.worst_abs_z = std::max(out.worst_abs_z, std::abs(bin.z));
    out.bins.push_back(bin);
  }
  return out;
}

}  // namespace ouwalk
