#pragma once

// Subcommands of the experiment runner. Each returns a process exit code:
//   0 pass, 1 acceptance failure, 2 usage/config error,
//   3 expected counterexample confirmed, 4 I/O error.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "ouwalk/chain.hpp"
#include "ouwalk/config.hpp"
#include "ouwalk/stats.hpp"

namespace ouwalk {

enum ExitCode : int {
  kExitPass = 0,
  kExitFail = 1,
  kExitUsage = 2,
  kExitCounterexample = 3,
  kExitIo = 4,
};

struct RunOptions {
  unsigned threads = 1;
  bool expect_fail = false;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Tabular output

using Cell = std::variant<long long, double, std::string>;

struct Report {
  std::string command;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  std::string status = "pass";  // pass | fail | counterexample
  std::vector<std::pair<std::string, std::string>> notes;

  void add(std::vector<Cell> row) { rows.push_back(std::move(row)); }
};

inline std::string csv_cell(const Cell& c) {
  if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
  if (const auto* x = std::get_if<double>(&c)) return format_double(*x);
  return std::get<std::string>(c);
}

/// The run's configuration minus the output location, which does not affect
/// results and would otherwise make identical runs differ.
inline std::vector<std::pair<std::string, std::string>> provenance(const ExperimentConfig& cfg) {
  auto kv = config_entries(cfg);
  std::erase_if(kv, [](const auto& e) { return e.first == "output.path"; });
  return kv;
}

inline std::string render_csv(const Report& r, const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "# command=" << r.command << "\n";
  out << "# master_seed=" << cfg.seed << "\n";
  for (const auto& [k, v] : provenance(cfg)) out << "# config." << k << "=" << v << "\n";
  out << "# status=" << r.status << "\n";
  for (const auto& [k, v] : r.notes) out << "# " << k << "=" << v << "\n";
  for (std::size_t i = 0; i < r.columns.size(); ++i) out << (i ? "," : "") << r.columns[i];
  out << "\n";
  for (const auto& row : r.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << csv_cell(row[i]);
    out << "\n";
  }
  return out.str();
}

inline std::string render_json(const Report& r, const ExperimentConfig& cfg) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["command"] = r.command;
  j["status"] = r.status;
  j["master_seed"] = cfg.seed;
  ordered_json config = ordered_json::object();
  for (const auto& [k, v] : provenance(cfg)) config[k] = v;
  j["config"] = config;
  ordered_json notes = ordered_json::object();
  for (const auto& [k, v] : r.notes) notes[k] = v;
  j["notes"] = notes;
  j["columns"] = r.columns;
  ordered_json rows = ordered_json::array();
  for (const auto& row : r.rows) {
    ordered_json obj = ordered_json::object();
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::visit([&](const auto& v) { obj[r.columns[i]] = v; }, row[i]);
    }
    rows.push_back(std::move(obj));
  }
  j["rows"] = rows;
  return j.dump(2) + "\n";
}

/// Writes the rendered report to cfg.output_path, or to `fallback` when no
/// path is configured.
inline void emit(const Report& r, const ExperimentConfig& cfg, std::ostream& fallback) {
  const std::string text = cfg.format == OutputFormat::Csv ? render_csv(r, cfg) : render_json(r, cfg);
  if (cfg.output_path.empty()) {
    fallback << text;
    fallback.flush();
    return;
  }
  std::ofstream file(cfg.output_path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot open '" + cfg.output_path + "' for writing");
  file << text;
  file.close();
  if (!file) throw IoError("failed writing '" + cfg.output_path + "'");
}

namespace commands_detail {

inline std::string join_doubles(const std::vector<double>& xs, char sep = ';') {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += sep;
    out += format_double(xs[i]);
  }
  return out;
}

/// Linear interpolation between order statistics (type 7).
inline double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.size() == 1) return sorted[0];
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline std::vector<std::uint64_t> bell_numbers(int max_n) {
  // B_{n+1} = sum_k C(n, k) B_k
  std::vector<std::uint64_t> bell{1};
  for (int n = 0; n < max_n; ++n) {
    std::uint64_t next = 0, binom = 1;
    for (int k = 0; k <= n; ++k) {
      next += binom * bell[static_cast<std::size_t>(k)];
      binom = binom * static_cast<std::uint64_t>(n - k) / static_cast<std::uint64_t>(k + 1);
    }
    bell.push_back(next);
  }
  return bell;
}

/// Calls f(lengths) for every composition of L into K non-negative parts.
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

inline double sweep_start(const ExperimentConfig& cfg) {
  if (cfg.ou_u) return *cfg.ou_u;
  if (cfg.theta.kind == "flat_signed") return cfg.theta.u;
  return cfg.direction(cfg.converge_dims.back()).start_projection();
}

}  // namespace commands_detail

// ---------------------------------------------------------------------------
// Subcommands

// Partition-lattice identities up to partitions.max_order: lattice sizes,
// exact column sums of the coefficient table (L <= 6), and agreement of the
// coefficient expansion with brute-force class sums on random arrays
// (L <= 6, d <= 6).
inline int cmd_verify_partitions(const ExperimentConfig& cfg, const RunOptions&, std::ostream& out,
                                 std::ostream& err) {
  constexpr int kIdentityMaxOrder = 6;
  constexpr int kArraysPerShape = 20;
  constexpr double kRelTol = 1e-9;
  Report r;
  r.command = "verify-partitions";
  r.columns = {"L", "partitions", "bell", "column_sums", "class_sums", "max_rel_error", "passed"};
  const auto bell = commands_detail::bell_numbers(cfg.partitions_max_order);
  std::string first_failure;
  for (int L = 1; L <= cfg.partitions_max_order; ++L) {
    const auto all = enumerate_partitions(L);
    bool ok = all.size() == bell[static_cast<std::size_t>(L)];
    if (!ok && first_failure.empty()) first_failure = "L=" + std::to_string(L) + " partition count";
    std::string columns = "skipped", classes = "skipped";
    double worst = 0.0;
    if (L <= kIdentityMaxOrder) {
      CoeffTable table(L);
      const auto entries = table.materialize();
      bool col_ok = true;
      for (const auto& pi : all) {
        for (const auto& nu : all) {
          if (!strictly_coarsens(nu, pi)) continue;
          std::int64_t sum = 0;
          for (const auto& mu : all) {
            if (coarsens(nu, mu) && coarsens(mu, pi)) sum += entries.at({mu, nu});
          }
          if (sum != 0 && col_ok) {
            col_ok = false;
            if (first_failure.empty()) {
              first_failure = "L=" + std::to_string(L) + " column sum pi=" + pi.to_string() + " nu=" + nu.to_string();
            }
          }
        }
      }
      columns = col_ok ? "pass" : "fail";

      bool cls_ok = true;
      for (int d = 1; d <= 6; ++d) {
        for (int rep = 0; rep < kArraysPerShape; ++rep) {
          const std::uint64_t stream = static_cast<std::uint64_t>((L * 7 + d) * kArraysPerShape + rep);
          Engine rng = stream_engine(cfg.seed, stream);
          std::uniform_real_distribution<double> unif(-1.0, 1.0);
          RealArray2D a(d, L);
          for (double& x : a.data) x = unif(rng);
          const auto brute = class_sums_bruteforce_all(a);
          for (const auto& pi : all) {
            const double expected = brute.count(pi) ? brute.at(pi) : 0.0;
            const double rel = std::abs(class_sum_fast(a, pi, table) - expected) / (1.0 + std::abs(expected));
            worst = std::max(worst, rel);
            if (rel > kRelTol && cls_ok) {
              cls_ok = false;
              if (first_failure.empty()) {
                first_failure = "L=" + std::to_string(L) + " class sum pi=" + pi.to_string() + " d=" +
                                std::to_string(d) + " seed=" + std::to_string(cfg.seed) + " stream=" +
                                std::to_string(stream);
              }
            }
          }
        }
      }
      classes = cls_ok ? "pass" : "fail";
      ok = ok && col_ok && cls_ok;
    }
    r.add({static_cast<long long>(L), static_cast<long long>(all.size()),
           static_cast<long long>(bell[static_cast<std::size_t>(L)]), columns, classes, worst,
           std::string(ok ? "true" : "false")});
  }
  if (!first_failure.empty()) {
    r.status = "fail";
    r.notes.emplace_back("first_failure", first_failure);
    err << "verify-partitions: first failure: " << first_failure << "\n";
  }
  emit(r, cfg, out);
  return first_failure.empty() ? kExitPass : kExitFail;
}

// Exact moments against the 2^d-state chain (d = 2, 3, 4, every multi-index
// up to order min(3, moments.max_order)) and Monte Carlo psi moments at
// walk.d within 4 standard errors.
inline int cmd_verify_moments(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& out,
                              std::ostream& err) {
  constexpr double kChainTol = 1e-10;
  constexpr double kZTol = 4.0;
  if (cfg.times.size() > kMaxPsiTimes) throw ConfigError("grid.times has more than 4 times");
  Report r;
  r.command = "verify-moments";
  r.columns = {"check", "d", "L", "observed", "reference", "deviation", "tolerance", "passed"};
  bool all_ok = true;
  auto record = [&](const std::string& check, int d, int L, double obs, double ref, double dev, double tol) {
    const bool ok = dev <= tol;
    all_ok = all_ok && ok;
    r.add({check, static_cast<long long>(d), static_cast<long long>(L), obs, ref, dev, tol,
           std::string(ok ? "true" : "false")});
    if (!ok) err << "verify-moments: " << check << " d=" << d << " L=" << L << " deviation " << dev << "\n";
  };

  const std::size_t K = cfg.times.size();
  const int chain_order = std::min(cfg.max_order, 3);
  for (int d = 2; d <= 4; ++d) {
    const WalkParams walk(d, cfg.p);
    const TimeGrid grid(cfg.times, walk);
    for (int L = 1; L <= chain_order; ++L) {
      double worst = -1.0, worst_obs = 0.0, worst_ref = 0.0;
      commands_detail::for_each_composition(L, K, [&](const std::vector<int>& lengths) {
        std::vector<int> index(static_cast<std::size_t>(L), 0);
        while (true) {
          const MultiIndexSplit split(index, lengths, d);
          const double obs = exact_moment_X(walk, grid, split);
          const double ref = chain::joint_moment(walk, grid, split);
          if (std::abs(obs - ref) > worst) {
            worst = std::abs(obs - ref);
            worst_obs = obs;
            worst_ref = ref;
          }
          std::size_t pos = 0;
          while (pos < index.size() && index[pos] == d - 1) index[pos++] = 0;
          if (pos == index.size()) break;
          ++index[pos];
        }
      });
      record("chain_joint_moment", d, L, worst_obs, worst_ref, worst, kChainTol);
    }
  }

  const auto walk = cfg.walk();
  const auto theta = cfg.direction();
  const TimeGrid grid(cfg.times, walk);
  const auto phi = cfg.weights();
  const Process which = cfg.process == ProcessKind::Z ? Process::Z : Process::X;
  const auto ens = which == Process::Z ? simulate_z_paths(walk, theta, grid, cfg.paths, cfg.seed, opts.threads)
                                       : simulate_projection_paths(walk, theta, grid, cfg.paths, cfg.seed, opts.threads);
  const PsiMomentEngine engine(walk, grid, theta, cfg.max_order);
  const auto samples = psi_samples(ens, phi);
  for (int L = 1; L <= cfg.max_order; ++L) {
    const double exact = engine.psi_moment(phi, L, which);
    if (samples.size() < kMinEnsembleSize) {
      throw ConfigError("sim.paths must be >= " + std::to_string(kMinEnsembleSize));
    }
    const auto m = moment_report(samples, L, exact);
    record("monte_carlo_psi_moment", walk.d(), L, m.empirical, exact, std::abs(m.z), kZTol);
  }
  r.status = all_ok ? "pass" : "fail";
  emit(r, cfg, out);
  return all_ok ? kExitPass : kExitFail;
}

// Convergence in d of Y_t towards the OU marginal, plus the fdd test at the
// largest d. Passes when the KS distance at the largest d and the fdd test
// are both below the pass threshold; exact-mean, mean and variance gaps are
// reported as data.
inline int cmd_converge(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& out, std::ostream&) {
  if (cfg.converge_dims.empty()) throw ConfigError("converge.dims is empty");
  if (cfg.times.size() > kMaxPsiTimes) throw ConfigError("grid.times has more than 4 times");
  Report r;
  r.command = "converge";
  r.columns = {"d", "statistic", "observed", "target", "gap"};
  SweepConfig sweep;
  sweep.dims = cfg.converge_dims;
  sweep.t = cfg.converge_time;
  sweep.u = commands_detail::sweep_start(cfg);
  sweep.p = cfg.p;
  sweep.direction = cfg.direction_spec();
  sweep.paths = cfg.paths;
  sweep.master_seed = cfg.seed;
  sweep.threads = opts.threads;
  double final_ks = 0.0;
  for (auto stat : {SweepStatistic::ExactMean, SweepStatistic::Mean, SweepStatistic::Variance, SweepStatistic::Ks,
                    SweepStatistic::FDiscrepancy}) {
    sweep.statistic = stat;
    for (const auto& row : convergence_sweep(sweep)) {
      r.add({static_cast<long long>(row.d), row.statistic, row.observed, row.target, row.gap});
      if (stat == SweepStatistic::Ks) final_ks = row.observed;
    }
  }
  const int dmax = cfg.converge_dims.back();
  const WalkParams walk(dmax, cfg.p);
  FddConfig fc;
  fc.draws = cfg.fdd_draws;
  fc.paths = cfg.paths;
  fc.master_seed = cfg.seed;
  fc.threads = opts.threads;
  fc.max_order = std::min(cfg.max_order, 4);
  const auto fdd = fdd_test(walk, cfg.direction(dmax), TimeGrid(cfg.times, walk), sweep.u, fc);
  r.add({static_cast<long long>(dmax), std::string("fdd_worst_ks"), fdd.worst_ks, 0.0, fdd.worst_ks});
  r.add({static_cast<long long>(dmax), std::string("fdd_worst_abs_z"), fdd.worst_abs_z, 0.0, fdd.worst_abs_z});

  const bool passed = final_ks < kFddPassThreshold && fdd.passed();
  const bool counterexample = final_ks >= kCounterexampleThreshold && fdd.counterexample();
  r.status = passed ? "pass" : (counterexample ? "counterexample" : "fail");
  r.notes.emplace_back("ks_threshold", format_double(kFddPassThreshold));
  r.notes.emplace_back("counterexample_threshold", format_double(kCounterexampleThreshold));
  emit(r, cfg, out);
  if (opts.expect_fail) return (!passed && counterexample) ? kExitCounterexample : kExitFail;
  return passed ? kExitPass : kExitFail;
}

// Samples the configured process on the grid; writes a per-time summary
// (with the OU targets alongside) or the raw paths.
inline int cmd_simulate(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& out, std::ostream&) {
  const double start = cfg.ou_start();
  PathEnsemble ens;
  switch (cfg.process) {
    case ProcessKind::Lnnrw:
    case ProcessKind::Z: {
      const auto walk = cfg.walk();
      const TimeGrid grid(cfg.times, walk);
      ens = cfg.process == ProcessKind::Lnnrw
                ? simulate_projection_paths(walk, cfg.direction(), grid, cfg.paths, cfg.seed, opts.threads)
                : simulate_z_paths(walk, cfg.direction(), grid, cfg.paths, cfg.seed, opts.threads);
      break;
    }
    case ProcessKind::Ou:
      ens = simulate_ou_paths(OUParams{start}, TimeGrid(cfg.times), cfg.paths, cfg.seed, opts.threads);
      break;
    case ProcessKind::Sbm1d:
      ens = simulate_projected_sbm(ProjectedDiffusionParams{cfg.d}, start, TimeGrid(cfg.times), cfg.paths, cfg.step,
                                   cfg.seed, opts.threads);
      break;
    case ProcessKind::SbmFull: {
      const auto theta = cfg.direction();
      const auto x0 = sphere_start(theta, start);
      ens = simulate_full_sbm(cfg.d, x0, theta, TimeGrid(cfg.times), cfg.paths, cfg.step, cfg.seed, opts.threads);
      break;
    }
  }

  Report r;
  r.command = "simulate";
  r.notes.emplace_back("process", to_string(cfg.process));
  if (cfg.mode == OutputMode::Paths) {
    r.columns = {"path"};
    for (std::size_t k = 0; k < ens.columns(); ++k) r.columns.push_back("y_" + std::to_string(k));
    for (std::size_t i = 0; i < ens.paths; ++i) {
      std::vector<Cell> row{static_cast<long long>(i)};
      for (double y : ens.row(i)) row.emplace_back(y);
      r.add(std::move(row));
    }
  } else {
    r.columns = {"k", "t", "mean", "var", "q05", "q25", "q50", "q75", "q95", "ou_mean", "ou_var"};
    for (std::size_t k = 0; k < ens.columns(); ++k) {
      auto ys = ens.column(k);
      const double mean = mean_of(ys);
      const double var = ys.size() > 1 ? sample_variance(ys) : 0.0;
      std::sort(ys.begin(), ys.end());
      const double t = ens.grid.time(k);
      const auto target = ou_transition(OUParams{start}, t);
      r.add({static_cast<long long>(k), t, mean, var, commands_detail::quantile(ys, 0.05),
             commands_detail::quantile(ys, 0.25), commands_detail::quantile(ys, 0.5),
             commands_detail::quantile(ys, 0.75), commands_detail::quantile(ys, 0.95), target.mean, target.variance});
    }
  }
  emit(r, cfg, out);
  return kExitPass;
}

// Random Cramer-Wold projections of the walk on the grid against the OU
// Gaussian limit.
inline int cmd_fdd_test(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& out, std::ostream&) {
  if (cfg.times.size() > kMaxPsiTimes) throw ConfigError("grid.times has more than 4 times");
  const auto walk = cfg.walk();
  FddConfig fc;
  fc.draws = cfg.fdd_draws;
  fc.paths = cfg.paths;
  fc.master_seed = cfg.seed;
  fc.threads = opts.threads;
  fc.max_order = std::min(cfg.max_order, 4);
  const auto report = fdd_test(walk, cfg.direction(), TimeGrid(cfg.times, walk), cfg.ou_start(), fc);
  Report r;
  r.command = "fdd-test";
  r.columns = {"draw", "phi", "target_mean", "target_var", "ks", "max_abs_z"};
  for (std::size_t i = 0; i < report.draws.size(); ++i) {
    const auto& dr = report.draws[i];
    double z = 0.0;
    for (const auto& m : dr.moments) z = std::max(z, std::abs(m.z));
    r.add({static_cast<long long>(i), commands_detail::join_doubles(dr.phi), dr.target_mean, dr.target_variance,
           dr.ks, z});
  }
  r.notes.emplace_back("worst_ks", format_double(report.worst_ks));
  r.notes.emplace_back("worst_abs_z", format_double(report.worst_abs_z));
  r.status = report.passed() ? "pass" : (report.counterexample() ? "counterexample" : "fail");
  emit(r, cfg, out);
  if (opts.expect_fail) return report.counterexample() ? kExitCounterexample : kExitFail;
  return report.passed() ? kExitPass : kExitFail;
}

// P(|Y_t3 - Y_t2| >= eps, |Y_t2 - Y_t1| >= eps) for the configured window and
// for the window halved about t1; passes when halving does not significantly
// increase the probability.
inline int cmd_tightness_probe(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& out,
                               std::ostream&) {
  const auto walk = cfg.walk();
  const auto theta = cfg.direction();
  const auto& tt = cfg.tightness_times;
  const auto wide =
      tightness_probe(walk, theta, tt[0], tt[1], tt[2], cfg.tightness_epsilon, cfg.paths, cfg.seed, opts.threads);
  const double n1 = tt[0] + 0.5 * (tt[1] - tt[0]);
  const double n2 = tt[0] + 0.5 * (tt[2] - tt[0]);
  const auto narrow = tightness_probe(walk, theta, tt[0], n1, n2, cfg.tightness_epsilon, cfg.paths,
                                      mix64(cfg.seed), opts.threads);
  Report r;
  r.command = "tightness-probe";
  r.columns = {"window", "t1", "t2", "t3", "epsilon", "hits", "paths", "probability", "lower", "upper",
               "window_scale", "pulse_scale"};
  for (const auto* rep : {&wide, &narrow}) {
    r.add({std::string(rep == &wide ? "wide" : "narrow"), rep->t1, rep->t2, rep->t3, rep->epsilon,
           static_cast<long long>(rep->hits), static_cast<long long>(rep->paths), rep->probability.estimate,
           rep->probability.lower, rep->probability.upper, rep->window_scale, rep->pulse_scale});
  }
  const bool ok = tightness_monotone(wide, narrow);
  r.status = ok ? "pass" : "fail";
  emit(r, cfg, out);
  return ok ? kExitPass : kExitFail;
}

/// Dispatches by subcommand name, mapping exceptions onto exit codes.
inline int run_command(const std::string& name, const ExperimentConfig& cfg, const RunOptions& opts,
                       std::ostream& out, std::ostream& err) {
  try {
    validate(cfg);
    if (name == "verify-partitions") return cmd_verify_partitions(cfg, opts, out, err);
    if (name == "verify-moments") return cmd_verify_moments(cfg, opts, out, err);
    if (name == "converge") return cmd_converge(cfg, opts, out, err);
    if (name == "simulate") return cmd_simulate(cfg, opts, out, err);
    if (name == "fdd-test") return cmd_fdd_test(cfg, opts, out, err);
    if (name == "tightness-probe") return cmd_tightness_probe(cfg, opts, out, err);
    err << "unknown subcommand '" << name << "'\n";
    return kExitUsage;
  } catch (const IoError& e) {
    err << name << ": " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    err << name << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::length_error& e) {
    err << name << ": " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace ouwalk
