#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace ouwalk {

/// Lazy nearest-neighbour walk on {-1,+1}^d: per clock pulse it stays with
/// probability 1-p, otherwise flips one uniformly chosen coordinate.
class WalkParams {
 public:
  WalkParams(int d, double p) : d_(d), p_(p) {
    if (d < 1) throw std::invalid_argument("WalkParams: d must be >= 1");
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("WalkParams: p must lie in (0, 1]");
  }

  int d() const { return d_; }
  double p() const { return p_; }
  /// Pulse interval 2p/d.
  double delta() const { return 2.0 * p_ / d_; }
  /// Non-unit eigenvalue of the single-coordinate chain.
  double lambda() const { return 1.0 - 2.0 * p_; }

  /// floor(t / delta). Computed as t*d/(2p) and snapped up when within 1e-9
  /// (relative) of an integer so exact multiples of delta land on the multiple.
  long pulses_at(double t) const {
    if (!(t >= 0.0) || !std::isfinite(t)) {
      throw std::invalid_argument("pulses_at: time must be finite and >= 0");
    }
    const double x = t * d_ / (2.0 * p_);
    const double up = std::ceil(x);
    if (up - x <= 1e-9 * std::max(1.0, x)) return static_cast<long>(up);
    return static_cast<long>(std::floor(x));
  }

 private:
  int d_;
  double p_;
};

/// Observation times t_1 < ... < t_K (t_1 may be 0) with the implicit origin
/// t_0 = 0. When built for a walk it also carries pulse counts n_0 = 0 <= n_1
/// <= ... <= n_K.
class TimeGrid {
 public:
  TimeGrid() = default;

  explicit TimeGrid(std::vector<double> times) : times_(std::move(times)) {
    if (times_.empty()) throw std::invalid_argument("TimeGrid: need at least one time");
    for (std::size_t k = 0; k < times_.size(); ++k) {
      if (!std::isfinite(times_[k]) || times_[k] < 0.0) {
        throw std::invalid_argument("TimeGrid: times must be finite and >= 0");
      }
      if (k > 0 && !(times_[k] > times_[k - 1])) {
        throw std::invalid_argument("TimeGrid: times must be strictly increasing");
      }
    }
  }

  TimeGrid(std::vector<double> times, const WalkParams& walk) : TimeGrid(std::move(times)) {
    pulses_.push_back(0);
    for (double t : times_) pulses_.push_back(walk.pulses_at(t));
  }

  /// Grid given directly in pulses; times are n_k * delta.
  static TimeGrid from_pulses(const std::vector<long>& pulses, const WalkParams& walk) {
    if (pulses.empty()) throw std::invalid_argument("TimeGrid: need at least one pulse count");
    TimeGrid g;
    g.pulses_.push_back(0);
    for (std::size_t k = 0; k < pulses.size(); ++k) {
      if (pulses[k] < 0 || (k > 0 && pulses[k] < pulses[k - 1])) {
        throw std::invalid_argument("TimeGrid: pulse counts must be non-decreasing and >= 0");
      }
      g.times_.push_back(static_cast<double>(pulses[k]) * walk.delta());
      g.pulses_.push_back(pulses[k]);
    }
    return g;
  }

  /// Number of observation times K.
  std::size_t size() const { return times_.size(); }
  const std::vector<double>& times() const { return times_; }
  /// t_k for k in [0, K]; t_0 = 0.
  double time(std::size_t k) const { return k == 0 ? 0.0 : times_[k - 1]; }

  bool has_pulses() const { return !pulses_.empty(); }
  /// n_k for k in [0, K].
  long pulses(std::size_t k) const {
    if (!has_pulses()) throw std::logic_error("TimeGrid: no pulse counts (continuous grid)");
    return pulses_[k];
  }
  /// n_k - n_{k-1} for k in [1, K].
  long segment_pulses(std::size_t k) const { return pulses(k) - pulses(k - 1); }

 private:
  std::vector<double> times_;
  std::vector<long> pulses_;
};

/// A multi-index i in [d]^L (0-based entries) cut into K consecutive segments;
/// segment k holds the positions observed at time t_k.
struct MultiIndexSplit {
  std::vector<int> index;
  std::vector<int> segment_lengths;

  MultiIndexSplit(std::vector<int> i, std::vector<int> lengths, int d)
      : index(std::move(i)), segment_lengths(std::move(lengths)) {
    for (int v : index) {
      if (v < 0 || v >= d) throw std::invalid_argument("MultiIndexSplit: entry outside [0, d)");
    }
    for (int l : segment_lengths) {
      if (l < 0) throw std::invalid_argument("MultiIndexSplit: negative segment length");
    }
    if (std::accumulate(segment_lengths.begin(), segment_lengths.end(), 0) !=
        static_cast<int>(index.size())) {
      throw std::invalid_argument("MultiIndexSplit: segment lengths must sum to L");
    }
  }

  std::size_t segments() const { return segment_lengths.size(); }
};

/// Unit direction theta on S^{d-1}.
class DirectionVector {
 public:
  explicit DirectionVector(std::vector<double> coords) : coords_(std::move(coords)) {
    if (coords_.empty()) throw std::invalid_argument("DirectionVector: empty");
    double sq = 0.0;
    for (double x : coords_) sq += x * x;
    if (std::abs(sq - 1.0) > 1e-12) {
      throw std::invalid_argument("DirectionVector: squared norm must be 1 within 1e-12");
    }
  }

  int d() const { return static_cast<int>(coords_.size()); }
  const std::vector<double>& coords() const { return coords_; }
  double operator[](std::size_t j) const { return coords_[j]; }

  double sup_norm() const {
    double m = 0.0;
    for (double x : coords_) m = std::max(m, std::abs(x));
    return m;
  }
  double abs_sum() const {
    double s = 0.0;
    for (double x : coords_) s += std::abs(x);
    return s;
  }
  /// <theta, (1,...,1)>, the projection of the walk's start state.
  double start_projection() const { return std::accumulate(coords_.begin(), coords_.end(), 0.0); }

  /// sum_j theta_j^r for r = 0..max_order.
  std::vector<double> power_sums(int max_order) const {
    std::vector<double> out(static_cast<std::size_t>(max_order + 1), 0.0);
    for (double x : coords_) {
      double v = 1.0;
      for (int r = 0; r <= max_order; ++r) {
        out[static_cast<std::size_t>(r)] += v;
        v *= x;
      }
    }
    return out;
  }

 private:
  std::vector<double> coords_;
};

}  // namespace ouwalk
