#pragma once

// Samplers for the cube walk X, its multinomial-count representation, the
// independent-coordinate surrogate Z, the exact OU process and spherical
// Brownian motion (1-D projection and full sphere).
//
// Every ensemble sampler draws path i from stream_engine(master_seed, i), so
// results are bit-identical for any thread count.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "ouwalk/chain.hpp"
#include "ouwalk/moments.hpp"
#include "ouwalk/params.hpp"
#include "ouwalk/rng.hpp"

namespace ouwalk {

/// A vertex of {-1,+1}^d.
struct CubeState {
  std::vector<std::int8_t> coords;

  static CubeState ones(int d) { return {std::vector<std::int8_t>(static_cast<std::size_t>(d), 1)}; }

  int d() const { return static_cast<int>(coords.size()); }
  bool valid() const {
    for (auto c : coords)
      if (c != 1 && c != -1) return false;
    return true;
  }
  double project(const DirectionVector& theta) const {
    double y = 0.0;
    for (std::size_t j = 0; j < coords.size(); ++j) y += theta[j] * coords[j];
    return y;
  }
  /// Index in the chain:: encoding (bit j set iff x_j = -1).
  unsigned encode() const {
    unsigned s = 0;
    for (std::size_t j = 0; j < coords.size(); ++j)
      if (coords[j] < 0) s |= 1u << j;
    return s;
  }
};

namespace direction {
struct FlatSigned {
  double u;
};
struct UniformSphere {
  std::uint64_t seed;
};
struct Basis {
  int index;  // 0-based
};
struct Custom {
  std::vector<double> values;
};
}  // namespace direction

using DirectionSpec =
    std::variant<direction::FlatSigned, direction::UniformSphere, direction::Basis, direction::Custom>;

/// Builds theta for dimension d.
///  - FlatSigned(u): entries +-1/sqrt(d), the first round((d + u sqrt(d))/2) positive.
///  - UniformSphere: normalized standard Gaussian vector.
///  - Basis(j): e_j.
///  - Custom: the given vector, normalized.
inline DirectionVector make_direction(const DirectionSpec& spec, int d) {
  if (d < 1) throw std::invalid_argument("make_direction: d must be >= 1");
  const double root = std::sqrt(static_cast<double>(d));
  auto normalized = [](std::vector<double> v) {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    if (!(sq > 0.0) || !std::isfinite(sq)) throw std::invalid_argument("make_direction: zero vector");
    const double norm = std::sqrt(sq);
    for (double& x : v) x /= norm;
    return DirectionVector(std::move(v));
  };
  return std::visit(
      [&](const auto& s) -> DirectionVector {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, direction::FlatSigned>) {
          if (!(std::abs(s.u) <= root)) {
            throw std::invalid_argument("make_direction: flat_signed needs |u| <= sqrt(d)");
          }
          const long positive = std::lround((d + s.u * root) / 2.0);
          std::vector<double> v(static_cast<std::size_t>(d), -1.0 / root);
          for (long j = 0; j < positive; ++j) v[static_cast<std::size_t>(j)] = 1.0 / root;
          return normalized(std::move(v));
        } else if constexpr (std::is_same_v<T, direction::UniformSphere>) {
          Engine rng(stream_seed(s.seed, 0));
          std::normal_distribution<double> normal;
          std::vector<double> v(static_cast<std::size_t>(d));
          for (double& x : v) x = normal(rng);
          return normalized(std::move(v));
        } else if constexpr (std::is_same_v<T, direction::Basis>) {
          if (s.index < 0 || s.index >= d) throw std::invalid_argument("make_direction: basis index out of range");
          std::vector<double> v(static_cast<std::size_t>(d), 0.0);
          v[static_cast<std::size_t>(s.index)] = 1.0;
          return DirectionVector(std::move(v));
        } else {
          if (static_cast<int>(s.values.size()) != d) {
            throw std::invalid_argument("make_direction: custom vector has wrong length");
          }
          return normalized(s.values);
        }
      },
      spec);
}

/// One clock pulse in place. Returns the flipped coordinate, or -1 if lazy.
template <typename Rng>
int lnnrw_step(CubeState& state, const WalkParams& walk, Rng& rng) {
  std::bernoulli_distribution move(walk.p());
  if (!move(rng)) return -1;
  std::uniform_int_distribution<int> pick(0, walk.d() - 1);
  const int j = pick(rng);
  state.coords[static_cast<std::size_t>(j)] = static_cast<std::int8_t>(-state.coords[static_cast<std::size_t>(j)]);
  return j;
}

template <typename Rng>
CubeState lnnrw_pulse(CubeState state, const WalkParams& walk, Rng& rng) {
  if (state.d() != walk.d() || !state.valid()) throw std::invalid_argument("lnnrw_pulse: invalid state");
  lnnrw_step(state, walk, rng);
  return state;
}

/// Probability that the single-coordinate chain is at -1 after m steps from +1.
inline double coordinate_flip_probability(const WalkParams& walk, long m) {
  return 0.5 * (1.0 - std::pow(walk.lambda(), static_cast<double>(m)));
}

/// X(n) drawn as: pulse counts M ~ Multinomial(n; 1/d, ..., 1/d), then each
/// coordinate runs its own two-state chain (flip probability p per step) for
/// M_j steps from +1.
template <typename Rng>
CubeState simulate_counts_representation(const WalkParams& walk, long n, Rng& rng) {
  if (n < 0) throw std::invalid_argument("simulate_counts_representation: n must be >= 0");
  const int d = walk.d();
  CubeState state = CubeState::ones(d);
  long remaining = n;
  for (int j = 0; j < d; ++j) {
    long m = remaining;
    if (j < d - 1 && remaining > 0) {
      std::binomial_distribution<long> draw(remaining, 1.0 / (d - j));
      m = draw(rng);
    }
    remaining -= m;
    std::bernoulli_distribution flip(coordinate_flip_probability(walk, m));
    if (flip(rng)) state.coords[static_cast<std::size_t>(j)] = -1;
  }
  return state;
}

/// Exact law of simulate_counts_representation over the 2^d states, by
/// enumerating every multinomial split of n pulses.
inline std::vector<double> counts_representation_law(const WalkParams& walk, long n) {
  chain::check_dimension(walk.d());
  if (n < 0) throw std::invalid_argument("counts_representation_law: n must be >= 0");
  const int d = walk.d();
  std::vector<double> law(std::size_t{1} << d, 0.0);
  std::vector<long> counts(static_cast<std::size_t>(d), 0);
  const double log_uniform = -static_cast<double>(n) * std::log(static_cast<double>(d));
  auto emit = [&] {
    double log_prob = std::lgamma(static_cast<double>(n) + 1.0) + log_uniform;
    for (long m : counts) log_prob -= std::lgamma(static_cast<double>(m) + 1.0);
    const double prob = std::exp(log_prob);
    for (unsigned s = 0; s < law.size(); ++s) {
      double q = prob;
      for (int j = 0; j < d; ++j) {
        const double flip = coordinate_flip_probability(walk, counts[static_cast<std::size_t>(j)]);
        q *= ((s >> j) & 1u) ? flip : 1.0 - flip;
      }
      law[s] += q;
    }
  };
  auto recurse = [&](auto&& self, int j, long remaining) -> void {
    if (j == d - 1) {
      counts[static_cast<std::size_t>(j)] = remaining;
      emit();
      return;
    }
    for (long m = 0; m <= remaining; ++m) {
      counts[static_cast<std::size_t>(j)] = m;
      self(self, j + 1, remaining - m);
    }
  };
  recurse(recurse, 0, n);
  return law;
}

/// N paths sampled on a time grid; row i holds the values at t_0 = 0, t_1, ..., t_K.
struct PathEnsemble {
  TimeGrid grid;
  std::size_t paths = 0;
  std::vector<double> values;
  std::uint64_t master_seed = 0;

  PathEnsemble() = default;
  PathEnsemble(TimeGrid g, std::size_t n, std::uint64_t seed)
      : grid(std::move(g)), paths(n), values(n * (grid.size() + 1), 0.0), master_seed(seed) {}

  std::size_t columns() const { return grid.size() + 1; }
  double& at(std::size_t path, std::size_t k) { return values[path * columns() + k]; }
  double at(std::size_t path, std::size_t k) const { return values[path * columns() + k]; }
  std::span<const double> row(std::size_t path) const {
    return {values.data() + path * columns(), columns()};
  }
  std::vector<double> column(std::size_t k) const {
    std::vector<double> out(paths);
    for (std::size_t i = 0; i < paths; ++i) out[i] = at(i, k);
    return out;
  }
};

inline void check_direction(const WalkParams& walk, const DirectionVector& theta) {
  if (theta.d() != walk.d()) throw std::invalid_argument("theta dimension != walk dimension");
}

/// Y = <theta, X> for N independent walks from (1, ..., 1), recorded after
/// n_k pulses (Y is constant on [n delta, (n+1) delta)).
inline PathEnsemble simulate_projection_paths(const WalkParams& walk, const DirectionVector& theta,
                                              const TimeGrid& grid, std::size_t N,
                                              std::uint64_t master_seed, unsigned threads = 1) {
  check_direction(walk, theta);
  if (!grid.has_pulses()) throw std::invalid_argument("simulate_projection_paths: grid has no pulses");
  PathEnsemble out(grid, N, master_seed);
  parallel_for(N, threads, [&](std::size_t i) {
    Engine rng = stream_engine(master_seed, i);
    CubeState x = CubeState::ones(walk.d());
    out.at(i, 0) = x.project(theta);
    for (std::size_t k = 1; k <= grid.size(); ++k) {
      for (long n = grid.segment_pulses(k); n > 0; --n) lnnrw_step(x, walk, rng);
      out.at(i, k) = x.project(theta);
    }
  });
  return out;
}

/// <theta, Z> where the d coordinates are independent copies of one walk
/// coordinate: over m pulses coordinate j is active B_j ~ Bi(m, 1/d) times.
inline PathEnsemble simulate_z_paths(const WalkParams& walk, const DirectionVector& theta,
                                     const TimeGrid& grid, std::size_t N, std::uint64_t master_seed,
                                     unsigned threads = 1) {
  check_direction(walk, theta);
  if (!grid.has_pulses()) throw std::invalid_argument("simulate_z_paths: grid has no pulses");
  PathEnsemble out(grid, N, master_seed);
  parallel_for(N, threads, [&](std::size_t i) {
    Engine rng = stream_engine(master_seed, i);
    CubeState z = CubeState::ones(walk.d());
    out.at(i, 0) = z.project(theta);
    for (std::size_t k = 1; k <= grid.size(); ++k) {
      const long m = grid.segment_pulses(k);
      if (m > 0) {
        std::binomial_distribution<long> active(m, 1.0 / walk.d());
        for (auto& c : z.coords) {
          std::bernoulli_distribution flip(coordinate_flip_probability(walk, active(rng)));
          if (flip(rng)) c = static_cast<std::int8_t>(-c);
        }
      }
      out.at(i, k) = z.project(theta);
    }
  });
  return out;
}

/// Exact OU sampling through Gaussian transitions.
inline PathEnsemble simulate_ou_paths(const OUParams& ou, const TimeGrid& grid, std::size_t N,
                                      std::uint64_t master_seed, unsigned threads = 1) {
  PathEnsemble out(grid, N, master_seed);
  parallel_for(N, threads, [&](std::size_t i) {
    Engine rng = stream_engine(master_seed, i);
    std::normal_distribution<double> normal;
    double u = ou.start;
    out.at(i, 0) = u;
    for (std::size_t k = 1; k <= grid.size(); ++k) {
      const double decay = std::exp(-(grid.time(k) - grid.time(k - 1)));
      u = u * decay + std::sqrt(1.0 - decay * decay) * normal(rng);
      out.at(i, k) = u;
    }
  });
  return out;
}

namespace detail {

/// Splits [t0, t1] into ceil((t1-t0)/h) equal steps.
inline long step_count(double span, double h) {
  if (span <= 0.0) return 0;
  return std::max(1L, static_cast<long>(std::ceil(span / h - 1e-9)));
}

}  // namespace detail

/// Euler-Maruyama for dY = b_d(Y) dt + sqrt(a_d(Y)) dW, clamped to [-sqrt d, sqrt d].
inline PathEnsemble simulate_projected_sbm(const ProjectedDiffusionParams& diff, double y0,
                                           const TimeGrid& grid, std::size_t N, double h,
                                           std::uint64_t master_seed, unsigned threads = 1) {
  if (!(h > 0.0)) throw std::invalid_argument("simulate_projected_sbm: step must be > 0");
  if (diff.d < 1) throw std::invalid_argument("simulate_projected_sbm: d must be >= 1");
  const double edge = diff.boundary();
  if (!(std::abs(y0) <= edge)) throw std::invalid_argument("simulate_projected_sbm: |y0| > sqrt(d)");
  PathEnsemble out(grid, N, master_seed);
  parallel_for(N, threads, [&](std::size_t i) {
    Engine rng = stream_engine(master_seed, i);
    std::normal_distribution<double> normal;
    double y = y0;
    out.at(i, 0) = y;
    for (std::size_t k = 1; k <= grid.size(); ++k) {
      const double span = grid.time(k) - grid.time(k - 1);
      const long steps = detail::step_count(span, h);
      const double dt = steps > 0 ? span / steps : 0.0;
      const double root_dt = std::sqrt(dt);
      for (long s = 0; s < steps; ++s) {
        const double a = std::max(0.0, diff.diffusion(y));
        y += diff.drift(y) * dt + std::sqrt(a) * root_dt * normal(rng);
        y = std::clamp(y, -edge, edge);
      }
      out.at(i, k) = y;
    }
  });
  return out;
}

/// A point x on the sphere of radius sqrt(d) with <theta, x> = y0.
inline std::vector<double> sphere_start(const DirectionVector& theta, double y0) {
  const int d = theta.d();
  const double radius_sq = static_cast<double>(d);
  if (!(y0 * y0 <= radius_sq)) throw std::invalid_argument("sphere_start: |y0| > sqrt(d)");
  std::vector<double> x(theta.coords());
  for (double& v : x) v *= y0;
  const double rest = std::sqrt(std::max(0.0, radius_sq - y0 * y0));
  if (rest == 0.0) return x;
  if (d < 2) throw std::invalid_argument("sphere_start: no orthogonal direction for d = 1");
  // Unit vector orthogonal to theta: Gram-Schmidt on the basis vector where
  // theta is smallest in magnitude.
  std::size_t j0 = 0;
  for (std::size_t j = 1; j < x.size(); ++j)
    if (std::abs(theta[j]) < std::abs(theta[j0])) j0 = j;
  std::vector<double> v(x.size(), 0.0);
  v[j0] = 1.0;
  const double along = theta[j0];
  double sq = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j) {
    v[j] -= along * theta[j];
    sq += v[j] * v[j];
  }
  const double norm = std::sqrt(sq);
  for (std::size_t j = 0; j < x.size(); ++j) x[j] += rest * v[j] / norm;
  return x;
}

/// One Euler step of spherical Brownian motion on the sphere of radius
/// sqrt(d): add a sqrt(2 dt)-scaled Gaussian increment projected onto the
/// tangent space at x, then rescale back onto the sphere. `noise` is scratch
/// of size d.
template <typename Rng>
void sphere_step(std::vector<double>& x, double dt, Rng& rng, std::vector<double>& noise) {
  const std::size_t d = x.size();
  std::normal_distribution<double> normal;
  noise.resize(d);
  const double radius_sq = static_cast<double>(d);
  const double scale = std::sqrt(2.0 * dt);
  double radial = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    noise[j] = normal(rng);
    radial += noise[j] * x[j];
  }
  radial /= radius_sq;
  double norm_sq = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    x[j] += scale * (noise[j] - radial * x[j]);
    norm_sq += x[j] * x[j];
  }
  const double rescale = std::sqrt(radius_sq / norm_sq);
  for (double& v : x) v *= rescale;
}

/// Spherical Brownian motion from x0 (|x0| = sqrt(d)), recorded as <theta, X>.
inline PathEnsemble simulate_full_sbm(int d, std::span<const double> x0, const DirectionVector& theta,
                                      const TimeGrid& grid, std::size_t N, double h,
                                      std::uint64_t master_seed, unsigned threads = 1) {
  if (!(h > 0.0)) throw std::invalid_argument("simulate_full_sbm: step must be > 0");
  if (static_cast<int>(x0.size()) != d || theta.d() != d) {
    throw std::invalid_argument("simulate_full_sbm: dimension mismatch");
  }
  const double radius = std::sqrt(static_cast<double>(d));
  double sq = 0.0;
  for (double x : x0) sq += x * x;
  if (std::abs(std::sqrt(sq) - radius) > 1e-9) {
    throw std::invalid_argument("simulate_full_sbm: start is not on the sphere of radius sqrt(d)");
  }
  PathEnsemble out(grid, N, master_seed);
  auto project = [&](const std::vector<double>& x) {
    double y = 0.0;
    for (int j = 0; j < d; ++j) y += theta[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(j)];
    return y;
  };
  parallel_for(N, threads, [&](std::size_t i) {
    Engine rng = stream_engine(master_seed, i);
    std::vector<double> x(x0.begin(), x0.end());
    std::vector<double> noise;
    out.at(i, 0) = project(x);
    for (std::size_t k = 1; k <= grid.size(); ++k) {
      const double span = grid.time(k) - grid.time(k - 1);
      const long steps = detail::step_count(span, h);
      for (long s = 0; s < steps; ++s) sphere_step(x, span / steps, rng, noise);
      out.at(i, k) = project(x);
    }
  });
  return out;
}

}  // namespace ouwalk
