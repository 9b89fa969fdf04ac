#pragma once

// Exact law of the cube walk for small d, computed by pushing the start
// distribution through the 2^d-state transition matrix. Independent of the
// closed-form moment formulas; used to check them.

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "ouwalk/params.hpp"

namespace ouwalk::chain {

inline constexpr int kMaxChainDimension = 12;

/// State s encodes x_j = -1 iff bit j of s is set.
inline int coordinate(unsigned state, int j) { return (state >> j) & 1u ? -1 : 1; }

inline void check_dimension(int d) {
  if (d < 1 || d > kMaxChainDimension) {
    throw std::length_error("chain: dimension must be in [1, 12]");
  }
}

/// One pulse applied to a distribution over the 2^d states.
inline std::vector<double> step(const WalkParams& walk, std::span<const double> dist) {
  const int d = walk.d();
  std::vector<double> out(dist.size(), 0.0);
  const double move = walk.p() / d;
  for (unsigned s = 0; s < dist.size(); ++s) {
    if (dist[s] == 0.0) continue;
    out[s] += (1.0 - walk.p()) * dist[s];
    for (int j = 0; j < d; ++j) out[s ^ (1u << j)] += move * dist[s];
  }
  return out;
}

inline std::vector<double> advance(const WalkParams& walk, std::vector<double> dist, long pulses) {
  for (long n = 0; n < pulses; ++n) dist = step(walk, dist);
  return dist;
}

/// Law of X(n) from (1, ..., 1).
inline std::vector<double> distribution(const WalkParams& walk, long pulses) {
  check_dimension(walk.d());
  std::vector<double> dist(std::size_t{1} << walk.d(), 0.0);
  dist[0] = 1.0;
  return advance(walk, std::move(dist), pulses);
}

/// E prod_k g_k(X_{n_k}) by the forward recursion: multiply by g_k at each
/// observation time, then propagate to the next one.
template <typename Observable>
double expectation(const WalkParams& walk, const TimeGrid& grid, Observable&& g) {
  check_dimension(walk.d());
  std::vector<double> weight(std::size_t{1} << walk.d(), 0.0);
  weight[0] = 1.0;
  for (std::size_t k = 1; k <= grid.size(); ++k) {
    weight = advance(walk, std::move(weight), grid.segment_pulses(k));
    for (unsigned s = 0; s < weight.size(); ++s) weight[s] *= g(k - 1, s);
  }
  double total = 0.0;
  for (double w : weight) total += w;
  return total;
}

/// E prod_k prod_{l in segment k} X_{n_k, i_l}
inline double joint_moment(const WalkParams& walk, const TimeGrid& grid, const MultiIndexSplit& split) {
  if (split.segments() != grid.size()) {
    throw std::invalid_argument("chain::joint_moment: segments != grid size");
  }
  std::vector<std::size_t> start(split.segments() + 1, 0);
  for (std::size_t k = 0; k < split.segments(); ++k) {
    start[k + 1] = start[k] + static_cast<std::size_t>(split.segment_lengths[k]);
  }
  return expectation(walk, grid, [&](std::size_t k, unsigned s) {
    double v = 1.0;
    for (std::size_t pos = start[k]; pos < start[k + 1]; ++pos) v *= coordinate(s, split.index[pos]);
    return v;
  });
}

/// E (sum_k phi_k <theta, X_{n_k}>)^L by enumerating every state sequence on
/// the grid. Cost (2^d)^K, intended for d <= 4, K <= 2.
inline double psi_moment(const WalkParams& walk, const TimeGrid& grid, std::span<const double> theta,
                         std::span<const double> phi, int L) {
  check_dimension(walk.d());
  if (theta.size() != static_cast<std::size_t>(walk.d()) || phi.size() != grid.size()) {
    throw std::invalid_argument("chain::psi_moment: size mismatch");
  }
  const std::size_t states = std::size_t{1} << walk.d();
  // Transition kernel for each segment.
  std::vector<std::vector<double>> kernel(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    kernel[k].resize(states * states);
    for (unsigned from = 0; from < states; ++from) {
      std::vector<double> unit(states, 0.0);
      unit[from] = 1.0;
      auto row = advance(walk, std::move(unit), grid.segment_pulses(k + 1));
      for (unsigned to = 0; to < states; ++to) kernel[k][from * states + to] = row[to];
    }
  }
  auto projection = [&](unsigned s) {
    double y = 0.0;
    for (int j = 0; j < walk.d(); ++j) y += theta[static_cast<std::size_t>(j)] * coordinate(s, j);
    return y;
  };
  double total = 0.0;
  auto recurse = [&](auto&& self, std::size_t k, unsigned from, double prob, double psi) -> void {
    if (k == grid.size()) {
      total += prob * std::pow(psi, L);
      return;
    }
    for (unsigned to = 0; to < states; ++to) {
      const double q = kernel[k][from * states + to];
      if (q == 0.0) continue;
      self(self, k + 1, to, prob * q, psi + phi[k] * projection(to));
    }
  };
  recurse(recurse, 0, 0u, 1.0, 0.0);
  return total;
}

}  // namespace ouwalk::chain
