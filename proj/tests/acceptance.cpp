// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--only N]... [--known-failure CHECK_ID]...
//
// Exit status is 0 when every check passes, ignoring checks named with
// --known-failure (those still print FAIL).

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include <unistd.h>

#include "ouwalk/chain.hpp"
#include "ouwalk/commands.hpp"
#include "ouwalk/stats.hpp"

#ifndef OUWALK_CLI_PATH
#error "OUWALK_CLI_PATH must name the ouwalk executable"
#endif

namespace {

using namespace ouwalk;

struct Check {
  std::string id;
  bool ok;
  std::string detail;
};

struct Outcome {
  std::vector<Check> checks;
  void add(std::string id, bool ok, std::string detail) { checks.push_back({std::move(id), ok, std::move(detail)}); }
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

template <typename F>
void for_each_index(int d, int L, F&& f) {
  std::vector<int> index(static_cast<std::size_t>(L), 0);
  while (true) {
    f(index);
    std::size_t pos = 0;
    while (pos < index.size() && index[pos] == d - 1) index[pos++] = 0;
    if (pos == index.size()) return;
    ++index[pos];
  }
}

template <typename F>
void for_each_composition(int L, std::size_t K, F&& f) {
  std::vector<int> parts(K, 0);
  auto rec = [&](auto&& self, std::size_t k, int left) -> void {
    if (k + 1 == K) {
      parts[k] = left;
      f(parts);
      return;
    }
    for (int x = 0; x <= left; ++x) {
      parts[k] = x;
      self(self, k + 1, left - x);
    }
  };
  rec(rec, 0, L);
}

// 1. Exact moments against the 2^d-state transition matrix.
Outcome exact_chain_oracle() {
  Outcome o;
  double worst = 0.0;
  std::size_t compared = 0;
  std::vector<std::vector<long>> grids;
  for (long n1 = 0; n1 <= 4; ++n1) {
    grids.push_back({n1});
    for (long n2 = n1; n2 <= 4; ++n2) grids.push_back({n1, n2});
  }
  for (int d = 2; d <= 4; ++d) {
    for (double p : {0.5, 1.0}) {
      const WalkParams walk(d, p);
      for (const auto& pulses : grids) {
        const auto grid = TimeGrid::from_pulses(pulses, walk);
        for (int L = 1; L <= 3; ++L) {
          for_each_composition(L, pulses.size(), [&](const std::vector<int>& lengths) {
            for_each_index(d, L, [&](const std::vector<int>& index) {
              const MultiIndexSplit split(index, lengths, d);
              worst = std::max(worst, std::abs(exact_moment_X(walk, grid, split) - chain::joint_moment(walk, grid, split)));
              ++compared;
            });
          });
        }
      }
    }
  }
  o.add("1.max_abs_error", worst <= 1e-10, "max |err| " + fmt(worst) + " over " + std::to_string(compared) + " moments");
  return o;
}

// 2. Partition expansion against brute force; exact column sums.
Outcome partition_identity() {
  Outcome o;
  Engine rng(20240611);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  double worst = 0.0;
  for (int L = 1; L <= 4; ++L) {
    CoeffTable table(L);
    const auto all = enumerate_partitions(L);
    for (int d = 1; d <= 6; ++d) {
      for (int rep = 0; rep < 20; ++rep) {
        RealArray2D a(d, L);
        for (double& x : a.data) x = unif(rng);
        const auto brute = class_sums_bruteforce_all(a);
        for (const auto& pi : all) {
          const double expected = brute.count(pi) ? brute.at(pi) : 0.0;
          worst = std::max(worst, std::abs(class_sum_fast(a, pi, table) - expected) / (1.0 + std::abs(expected)));
        }
      }
    }
  }
  o.add("2.class_sums", worst <= 1e-9, "max rel err " + fmt(worst));
  std::size_t bad = 0, sums = 0;
  for (int L = 1; L <= 6; ++L) {
    const auto all = enumerate_partitions(L);
    const auto entries = CoeffTable(L).materialize();
    for (const auto& pi : all) {
      for (const auto& nu : all) {
        if (!strictly_coarsens(nu, pi)) continue;
        std::int64_t sum = 0;
        for (const auto& mu : all) {
          if (coarsens(nu, mu) && coarsens(mu, pi)) sum += entries.at({mu, nu});
        }
        ++sums;
        bad += sum != 0;
      }
    }
  }
  o.add("2.column_sums", bad == 0, std::to_string(sums) + " column sums, " + std::to_string(bad) + " nonzero");
  return o;
}

// 3. Counts representation against the chain pushforward.
Outcome representation_equivalence() {
  Outcome o;
  double worst = 0.0;
  for (double p : {0.5, 1.0}) {
    const WalkParams walk(2, p);
    for (long n = 0; n <= 4; ++n) {
      const auto a = counts_representation_law(walk, n);
      const auto b = chain::distribution(walk, n);
      double tv = 0.0;
      for (std::size_t s = 0; s < a.size(); ++s) tv += std::abs(a[s] - b[s]);
      worst = std::max(worst, 0.5 * tv);
    }
  }
  o.add("3.total_variation", worst <= 1e-12, "max TV " + fmt(worst));
  return o;
}

// 4. Monte Carlo psi moments against the exact engine.
Outcome mc_vs_exact() {
  Outcome o;
  const WalkParams walk(50, 0.5);
  const auto theta = make_direction(direction::FlatSigned{1.0}, 50);
  const TimeGrid grid({0.5, 1.0}, walk);
  const std::vector<double> phi{1.0, 1.0};
  const auto ens = simulate_projection_paths(walk, theta, grid, 100'000, 4);
  const PsiMomentEngine engine(walk, grid, theta, 4);
  std::string detail;
  bool ok = true;
  for (int L = 1; L <= 4; ++L) {
    const auto m = empirical_moment(ens, phi, L, engine.psi_moment(phi, L, Process::X));
    ok = ok && std::abs(m.z) <= 4.0;
    detail += (L > 1 ? ", " : "") + std::string("z") + std::to_string(L) + "=" + fmt(m.z);
  }
  o.add("4.within_4_se", ok, detail);
  return o;
}

// 5. Marginal convergence to OU and decay of the exact-mean gap.
Outcome ou_convergence() {
  Outcome o;
  const double t = 1.0;
  for (double u : {0.0, 1.0}) {
    const std::string tag = u == 0.0 ? "u0" : "u1";
    const WalkParams walk(1000, 0.5);
    const auto theta = make_direction(direction::FlatSigned{u}, 1000);
    const auto ens = simulate_projection_paths(walk, theta, TimeGrid({t}, walk), 10'000, u == 0.0 ? 50 : 51);
    const auto law = ou_transition(OUParams{u}, t);
    const double ks = ks_distance(ens.column(1), law.mean, law.variance);
    o.add("5.ks_" + tag, ks < 0.05, "KS(" + tag + ")=" + fmt(ks));

    SweepConfig sweep;
    sweep.dims = {10, 100, 1000, 10000};
    sweep.statistic = SweepStatistic::ExactMean;
    sweep.t = t;
    sweep.u = u;
    sweep.direction = direction::FlatSigned{u};
    const auto rows = convergence_sweep(sweep);
    std::string gaps;
    bool decreasing = true, all_zero = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      gaps += (i ? "," : "") + fmt(rows[i].gap);
      if (i > 0 && !(rows[i].gap < rows[i - 1].gap)) decreasing = false;
      if (rows[i].gap > 1e-12) all_zero = false;
    }
    // A gap that is zero up to rounding at every d cannot decrease; it
    // satisfies the criterion's intent trivially.
    o.add("5.exact_mean_decreasing_" + tag, decreasing || all_zero,
          "gaps(" + tag + ")=" + gaps + (all_zero ? " (identically zero)" : ""));
    o.add("5.exact_mean_small_" + tag, rows.back().gap < 1e-3, "gap(" + tag + ",1e4)=" + fmt(rows.back().gap));
  }
  return o;
}

// 6. The basis direction stays two-valued and far from the OU law.
Outcome counterexample() {
  Outcome o;
  bool two_valued = true;
  double worst_ks = 1.0;
  for (int d : {10, 200, 1000}) {
    const WalkParams walk(d, 0.5);
    const auto e1 = make_direction(direction::Basis{0}, d);
    const auto ens = simulate_projection_paths(walk, e1, TimeGrid({0.5, 1.0}, walk), 10'000, 6);
    for (double y : ens.values) two_valued = two_valued && (y == 1.0 || y == -1.0);
    const auto law = ou_transition(OUParams{1.0}, 1.0);
    worst_ks = std::min(worst_ks, ks_distance(ens.column(2), law.mean, law.variance));
  }
  o.add("6.two_valued", two_valued, two_valued ? "all Y in {-1,+1}" : "Y left {-1,+1}");
  o.add("6.ks", worst_ks >= 0.3, "min KS " + fmt(worst_ks));
  return o;
}

struct MeanVar {
  double mean, var, se_mean, se_var;
};

MeanVar mean_var(const std::vector<double>& ys) {
  const double n = static_cast<double>(ys.size());
  const double m = mean_of(ys);
  const double v = sample_variance(ys);
  double m4 = 0.0;
  for (double y : ys) m4 += std::pow(y - m, 4);
  m4 /= n;
  return {m, v, std::sqrt(v / n), std::sqrt(std::max(0.0, m4 - v * v) / n)};
}

// 7. Euler scheme for the projected diffusion, and the full sphere.
Outcome projected_sbm() {
  Outcome o;
  constexpr double kAllowance = 5e-3;
  const TimeGrid grid({1.0});
  const auto target = ou_transition(OUParams{1.0}, 1.0);
  const auto proj = mean_var(simulate_projected_sbm(ProjectedDiffusionParams{1000}, 1.0, grid, 10'000, 1e-3, 7).column(1));
  const double dm = std::abs(proj.mean - target.mean), dv = std::abs(proj.var - target.variance);
  o.add("7.mean", dm <= 4.0 * proj.se_mean + kAllowance, "|mean-e^-1|=" + fmt(dm));
  o.add("7.var", dv <= 4.0 * proj.se_var + kAllowance, "|var-(1-e^-2)|=" + fmt(dv));

  const int d = 200;
  const auto theta = make_direction(direction::FlatSigned{1.0}, d);
  const auto full = mean_var(simulate_full_sbm(d, sphere_start(theta, 1.0), theta, grid, 10'000, 1e-3, 71).column(1));
  const auto line = mean_var(simulate_projected_sbm(ProjectedDiffusionParams{d}, 1.0, grid, 10'000, 1e-3, 72).column(1));
  const double fm = std::abs(full.mean - line.mean), fv = std::abs(full.var - line.var);
  o.add("7.sphere_mean", fm <= 4.0 * std::hypot(full.se_mean, line.se_mean) + kAllowance, "sphere |dmean|=" + fmt(fm));
  o.add("7.sphere_var", fv <= 4.0 * std::hypot(full.se_var, line.se_var) + kAllowance, "sphere |dvar|=" + fmt(fv));
  return o;
}

// 8. Binned conditional squared increments.
Outcome conditional_increment() {
  Outcome o;
  const WalkParams walk(100, 0.5);
  const auto theta = make_direction(direction::FlatSigned{1.0}, 100);
  const auto check = conditional_increment_check(walk, theta, 0.5, 0.7, 100'000, 10, 8);
  o.add("8.bins", check.worst_abs_z <= 4.0, "worst bin |z| " + fmt(check.worst_abs_z) + " over " +
                                                 std::to_string(check.bins.size()) + " bins");
  o.add("8.bound", check.bound_holds, check.bound_holds ? "bound holds" : "bound violated");
  return o;
}

// 9. Decay of the discrepancy f_d.
Outcome f_decay() {
  Outcome o;
  SweepConfig sweep;
  sweep.dims = {10, 100, 1000, 10000};
  sweep.statistic = SweepStatistic::FDiscrepancy;
  sweep.eta = 2;
  sweep.t = 1.0;
  sweep.p = 0.5;
  const auto rows = convergence_sweep(sweep);
  const double expected = std::pow(0.8, 10) - std::pow(0.9, 20);
  o.add("9.d10", std::abs(rows[0].observed - expected) <= 1e-12, "f_10=" + format_double(rows[0].observed));
  bool shrinking = true;
  for (std::size_t i = 1; i < rows.size(); ++i) shrinking = shrinking && rows[i].gap < rows[i - 1].gap;
  o.add("9.shrinking", shrinking, "");
  o.add("9.small", rows.back().gap < 1e-3, "|f_1e4|=" + fmt(rows.back().gap));
  return o;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// 10. Byte-identical CLI output across runs and thread counts.
Outcome determinism() {
  Outcome o;
  const auto dir = std::filesystem::temp_directory_path() / ("ouwalk_acceptance_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  struct Case {
    std::string command, args;
  };
  const std::vector<Case> cases{
      {"converge", "--set converge.dims=10,100,1000 --set theta.u=0 --set sim.paths=5000 --set fdd.draws=4"},
      {"simulate", "--set walk.d=1000 --set grid.times=0.25,0.5,1"},
      {"simulate", "--set process.kind=sbm1d --set walk.d=200 --set sim.paths=2000 --format json"},
      {"simulate", "--set sim.paths=50 --set output.mode=paths"},
  };
  for (std::size_t c = 0; c < cases.size(); ++c) {
    std::vector<std::string> outputs;
    for (const char* threads : {"1", "1", "4"}) {
      const auto out = dir / ("case" + std::to_string(c) + "_" + std::to_string(outputs.size()) + ".out");
      const std::string cmd = std::string(OUWALK_CLI_PATH) + " " + cases[c].command + " " + cases[c].args +
                              " --seed 12345 --threads " + threads + " --out " + out.string() + " 2>/dev/null";
      const int status = std::system(cmd.c_str());
      if (status != 0) {
        o.add("10." + cases[c].command + std::to_string(c), false, "exit status " + std::to_string(status));
        break;
      }
      outputs.push_back(slurp(out));
    }
    if (outputs.size() == 3) {
      const bool same = !outputs[0].empty() && outputs[0] == outputs[1] && outputs[0] == outputs[2];
      o.add("10." + cases[c].command + std::to_string(c), same, "");
    }
  }
  std::filesystem::remove_all(dir);
  o.add("10.cases", true, std::to_string(cases.size()) + " cases x {1,1,4} threads");
  return o;
}

struct Criterion {
  int number;
  const char* title;
  double time_limit;  // seconds, 0 = none
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::set<std::string> known;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--known-failure" && i + 1 < argc) {
      known.insert(argv[++i]);
    } else if (a == "--only" && i + 1 < argc) {
      only.insert(std::atoi(argv[++i]));
    } else {
      std::cerr << "usage: acceptance [--only N]... [--known-failure CHECK_ID]...\n";
      return 2;
    }
  }
  const std::vector<Criterion> criteria{
      {1, "exact-chain oracle", 10.0, exact_chain_oracle},
      {2, "partition identity", 10.0, partition_identity},
      {3, "representation equivalence", 1.0, representation_equivalence},
      {4, "MC vs exact", 60.0, mc_vs_exact},
      {5, "OU convergence", 120.0, ou_convergence},
      {6, "basis counterexample", 0.0, counterexample},
      {7, "projected SBM", 0.0, projected_sbm},
      {8, "conditional increment", 0.0, conditional_increment},
      {9, "f_d decay", 0.0, f_decay},
      {10, "determinism", 0.0, determinism},
  };
  bool all_ok = true;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.number)) continue;
    const auto start = Clock::now();
    Outcome out = c.run();
    const double secs = seconds_since(start);
    if (c.time_limit > 0.0) {
      out.add(std::to_string(c.number) + ".runtime", secs < c.time_limit, "limit " + fmt(c.time_limit) + " s");
    }
    bool ok = true;
    std::string details, failed;
    for (const auto& ch : out.checks) {
      if (!ch.detail.empty()) details += (details.empty() ? "" : "; ") + ch.detail;
      if (!ch.ok) {
        ok = false;
        failed += (failed.empty() ? "" : ",") + ch.id + (known.count(ch.id) ? " (known)" : "");
        if (!known.count(ch.id)) all_ok = false;
      }
    }
    std::printf("criterion %2d %s  %-27s %s; %.2f s%s%s\n", c.number, ok ? "PASS" : "FAIL", c.title,
                details.c_str(), secs, failed.empty() ? "" : "  failed: ", failed.c_str());
    std::fflush(stdout);
  }
  return all_ok ? 0 : 1;
}
