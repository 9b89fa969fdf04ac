#pragma once

// Exact finite-dimensional moments of the projected cube walk Y = <theta, X>
// and of its independent-coordinate surrogate Z, plus the Gaussian (OU)
// targets they converge to.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "ouwalk/params.hpp"
#include "ouwalk/partitions.hpp"

namespace ouwalk {

enum class Process { X, Z };

/// (1 - x)^n, with log-space accumulation for long runs and an explicit sign
/// when the base is negative.
inline double decay_power(double x, long n) {
  if (n == 0) return 1.0;
  const double base = 1.0 - x;
  if (base == 0.0) return 0.0;
  if (n <= 1000) return std::pow(base, static_cast<double>(n));
  if (base > 0.0) return std::exp(static_cast<double>(n) * std::log1p(-x));
  const double magnitude = std::exp(static_cast<double>(n) * std::log(-base));
  return (n % 2 == 0) ? magnitude : -magnitude;
}

/// eta_k: number of coordinate values with odd multiplicity in the tail of the
/// multi-index that starts at segment k.
inline std::vector<int> eta_profile(const MultiIndexSplit& split) {
  const std::size_t K = split.segments();
  std::vector<int> eta(K, 0);
  std::map<int, int> parity;
  std::size_t pos = split.index.size();
  for (std::size_t k = K; k-- > 0;) {
    for (int c = 0; c < split.segment_lengths[k]; ++c) {
      int& bit = parity[split.index[--pos]];
      bit ^= 1;
    }
    int odd = 0;
    for (const auto& [value, bit] : parity) odd += bit;
    eta[k] = odd;
  }
  return eta;
}

/// Same profile for every multi-index in the class of `pi`, where the first
/// lengths[0] positions belong to segment 1, the next lengths[1] to segment 2, ...
inline std::vector<int> eta_profile(const SetPartition& pi, std::span<const int> lengths) {
  std::vector<int> eta(lengths.size(), 0);
  std::array<int, kMaxGroundSize> parity{};
  int odd = 0;
  int pos = pi.ground_size();
  for (std::size_t k = lengths.size(); k-- > 0;) {
    for (int c = 0; c < lengths[k]; ++c) {
      int& bit = parity[static_cast<std::size_t>(pi.label(--pos))];
      bit ^= 1;
      odd += bit ? 1 : -1;
    }
    eta[k] = odd;
  }
  return eta;
}

namespace detail {

inline void check_segments(const TimeGrid& grid, std::size_t K) {
  if (!grid.has_pulses()) throw std::invalid_argument("moment: grid has no pulse counts");
  if (grid.size() != K) throw std::invalid_argument("moment: grid size != number of segments");
}

}  // namespace detail

/// prod_k (1 - eta_k delta)^{n_k - n_{k-1}}
inline double moment_X_from_eta(const WalkParams& walk, const TimeGrid& grid,
                                std::span<const int> eta) {
  detail::check_segments(grid, eta.size());
  double out = 1.0;
  for (std::size_t k = 0; k < eta.size(); ++k) {
    out *= decay_power(eta[k] * walk.delta(), grid.segment_pulses(k + 1));
  }
  return out;
}

/// prod_k (1 - delta)^{eta_k (n_k - n_{k-1})}
inline double moment_Z_from_eta(const WalkParams& walk, const TimeGrid& grid,
                                std::span<const int> eta) {
  detail::check_segments(grid, eta.size());
  long exponent = 0;
  for (std::size_t k = 0; k < eta.size(); ++k) exponent += eta[k] * grid.segment_pulses(k + 1);
  return decay_power(walk.delta(), exponent);
}

inline double moment_from_eta(const WalkParams& walk, const TimeGrid& grid,
                              std::span<const int> eta, Process which) {
  return which == Process::X ? moment_X_from_eta(walk, grid, eta)
                             : moment_Z_from_eta(walk, grid, eta);
}

/// E prod_k prod_{l in segment k} X_{n_k, i_l}, walk started at (1, ..., 1).
inline double exact_moment_X(const WalkParams& walk, const TimeGrid& grid,
                             const MultiIndexSplit& split) {
  return moment_X_from_eta(walk, grid, eta_profile(split));
}

inline double exact_moment_Z(const WalkParams& walk, const TimeGrid& grid,
                             const MultiIndexSplit& split) {
  return moment_Z_from_eta(walk, grid, eta_profile(split));
}

/// Discrepancy f_d between the X and Z products for an eta profile.
inline double f_discrepancy(const WalkParams& walk, const TimeGrid& grid,
                            std::span<const int> eta) {
  return moment_X_from_eta(walk, grid, eta) - moment_Z_from_eta(walk, grid, eta);
}

inline constexpr int kMaxPsiOrder = 8;
inline constexpr std::size_t kMaxPsiTimes = 4;

/// Exact E{Psi^L} for Psi = sum_k phi_k <theta, V_{t_k}> with V = X or Z.
///
/// Psi^L is expanded over ordered assignments s in [K]^L of factors to times;
/// each assignment contributes prod phi_{s_l} times the joint moment for the
/// segment lengths it induces. Joint moments are sums over partition classes
/// of (class sum of theta) x (moment for that class's eta profile), and both
/// are cached.
class PsiMomentEngine {
 public:
  PsiMomentEngine(WalkParams walk, TimeGrid grid, const DirectionVector& theta, int max_order)
      : walk_(walk), grid_(std::move(grid)), max_order_(max_order) {
    if (max_order < 1 || max_order > kMaxPsiOrder) {
      throw std::length_error("psi moment: L must be in [1, 8]");
    }
    if (grid_.size() < 1 || grid_.size() > kMaxPsiTimes) {
      throw std::length_error("psi moment: K must be in [1, 4]");
    }
    if (!grid_.has_pulses()) throw std::invalid_argument("psi moment: grid has no pulse counts");
    if (theta.d() != walk.d()) throw std::invalid_argument("psi moment: theta dimension != d");
    power_sums_ = theta.power_sums(max_order);
    for (int L = 1; L <= max_order; ++L) {
      CoeffTable table(L);
      auto& level = classes_[L];
      for (auto& pi : enumerate_partitions(L)) {
        level.push_back({pi, class_sum_constant(power_sums_, pi, table)});
      }
    }
  }

  const TimeGrid& grid() const { return grid_; }

  /// E prod_k <theta, V_{t_k}>^{lengths[k]}
  double joint_moment(const std::vector<int>& lengths, Process which) const {
    if (lengths.size() != grid_.size()) {
      throw std::invalid_argument("joint moment: lengths size != K");
    }
    int L = 0;
    for (int l : lengths) L += l;
    if (L == 0) return 1.0;
    if (L > max_order_) throw std::length_error("joint moment: order exceeds engine limit");
    auto key = std::pair{lengths, which};
    if (auto it = joint_cache_.find(key); it != joint_cache_.end()) return it->second;
    double total = 0.0;
    for (const auto& [pi, weight] : classes_.at(L)) {
      if (weight == 0.0) continue;
      auto eta = eta_profile(pi, lengths);
      total += weight * moment_from_eta(walk_, grid_, eta, which);
    }
    joint_cache_.emplace(key, total);
    return total;
  }

  double psi_moment(std::span<const double> phi, int L, Process which) const {
    const std::size_t K = grid_.size();
    if (phi.size() != K) throw std::invalid_argument("psi moment: phi size != K");
    if (L < 0 || L > max_order_) throw std::length_error("psi moment: order exceeds engine limit");
    if (L == 0) return 1.0;
    std::vector<std::size_t> assignment(static_cast<std::size_t>(L), 0);
    double total = 0.0;
    while (true) {
      std::vector<int> lengths(K, 0);
      double weight = 1.0;
      for (std::size_t s : assignment) {
        ++lengths[s];
        weight *= phi[s];
      }
      if (weight != 0.0) total += weight * joint_moment(lengths, which);
      std::size_t pos = 0;
      while (pos < assignment.size() && assignment[pos] == K - 1) assignment[pos++] = 0;
      if (pos == assignment.size()) break;
      ++assignment[pos];
    }
    return total;
  }

 private:
  struct ClassWeight {
    SetPartition pi;
    double weight;  // sum over I_pi of prod theta_{i_l}
  };

  WalkParams walk_;
  TimeGrid grid_;
  int max_order_;
  std::vector<double> power_sums_;
  std::map<int, std::vector<ClassWeight>> classes_;
  mutable std::map<std::pair<std::vector<int>, Process>, double> joint_cache_;
};

/// One-shot E{Psi^L} (or the Z analogue).
inline double psi_moment_exact(const WalkParams& walk, const TimeGrid& grid,
                               const DirectionVector& theta, std::span<const double> phi, int L,
                               Process which) {
  return PsiMomentEngine(walk, grid, theta, L).psi_moment(phi, L, which);
}

/// OU process dU = -U dt + sqrt(2) dW started at u.
struct OUParams {
  double start = 0.0;
};

struct GaussianLaw {
  double mean;
  double variance;
};

inline GaussianLaw ou_transition(const OUParams& ou, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("ou_transition: t must be >= 0");
  const double decay = std::exp(-t);
  return {ou.start * decay, 1.0 - decay * decay};
}

/// Cov(U_s, U_t) for the OU process from a fixed start.
inline double ou_covariance(double s, double t) {
  if (s == t) return 1.0 - std::exp(-2.0 * s);
  return std::exp(-std::abs(t - s)) - std::exp(-(s + t));
}

/// E X^L for X ~ Normal(mean, variance): sum over even m of
/// C(L, m) mean^{L-m} variance^{m/2} (m-1)!!.
inline double gaussian_moment(double mean, double variance, int L) {
  if (L < 0) throw std::invalid_argument("gaussian_moment: L must be >= 0");
  double total = 0.0;
  double binom = 1.0;  // C(L, m)
  double double_factorial = 1.0;  // (m-1)!!
  for (int m = 0; m <= L; ++m) {
    if (m > 0) binom = binom * (L - m + 1) / m;
    if (m % 2 == 0) {
      if (m >= 2) double_factorial *= (m - 1);
      total += binom * std::pow(mean, L - m) * std::pow(variance, m / 2) * double_factorial;
    }
  }
  return total;
}

/// Law of Gamma = sum_k phi_k U_{t_k}.
inline GaussianLaw gamma_law(const OUParams& ou, std::span<const double> times,
                             std::span<const double> phi) {
  if (times.size() != phi.size()) throw std::invalid_argument("gamma_law: phi size != K");
  double mean = 0.0;
  double variance = 0.0;
  for (std::size_t j = 0; j < times.size(); ++j) {
    mean += phi[j] * std::exp(-times[j]);
    for (std::size_t k = 0; k < times.size(); ++k) {
      variance += phi[j] * phi[k] * ou_covariance(times[j], times[k]);
    }
  }
  return {ou.start * mean, variance};
}

inline constexpr int kMaxGammaOrder = 12;

inline double gamma_moment(const OUParams& ou, std::span<const double> times,
                           std::span<const double> phi, int L) {
  if (L < 0 || L > kMaxGammaOrder) throw std::length_error("gamma_moment: L must be in [0, 12]");
  const auto law = gamma_law(ou, times, phi);
  return gaussian_moment(law.mean, law.variance, L);
}

/// E{(Y_{t2} - Y_{t1})^2 | Y_{t1} = y1} after m further pulses.
inline double conditional_sq_increment(double y1, long m, double delta) {
  if (m < 0) throw std::invalid_argument("conditional_sq_increment: m must be >= 0");
  if (!(delta > 0.0 && delta <= 1.0)) {
    throw std::invalid_argument("conditional_sq_increment: delta must lie in (0, 1]");
  }
  const double two = decay_power(2.0 * delta, m);
  const double one = decay_power(delta, m);
  return 1.0 - two + y1 * y1 * (two - 2.0 * one + 1.0);
}

/// One-dimensional projection of spherical Brownian motion on the sphere of
/// radius sqrt(d).
struct ProjectedDiffusionParams {
  int d;

  double drift(double y) const { return -static_cast<double>(d - 1) * y / d; }
  double diffusion(double y) const { return 2.0 * (1.0 - y * y / d); }
  double boundary() const { return std::sqrt(static_cast<double>(d)); }
};

}  // namespace ouwalk
