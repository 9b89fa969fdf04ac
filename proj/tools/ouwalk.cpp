// Command-line experiment runner.
//
//   ouwalk <subcommand> [--config PATH] [--seed U64] [--threads N]
//                       [--out PATH] [--format csv|json] [--expect-fail]
//                       [--set key=value ...]

#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "ouwalk/commands.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::string out;
  std::string format;
  bool expect_fail = false;
  std::vector<std::string> overrides;
  std::optional<int> max_order;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "key=value configuration file");
  sub->add_option("--seed", f.seed, "master seed (overrides the config)");
  sub->add_option("--threads", f.threads, "worker threads; never changes results")->check(CLI::PositiveNumber);
  sub->add_option("--out", f.out, "output file (default: stdout)");
  sub->add_option("--format", f.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  sub->add_flag("--expect-fail", f.expect_fail, "exit 3 when the run confirms a counterexample");
  sub->add_option("--set", f.overrides, "extra key=value assignment, applied after --config");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Projected hypercube walks and their Ornstein-Uhlenbeck limit"};
  app.require_subcommand(1);
  Flags flags;
  for (const char* name :
       {"verify-partitions", "verify-moments", "converge", "simulate", "fdd-test", "tightness-probe"}) {
    auto* sub = app.add_subcommand(name);
    add_common(sub, flags);
    if (std::string(name) == "verify-partitions") {
      sub->add_option("--max-order", flags.max_order, "largest ground-set size L");
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : ouwalk::kExitUsage;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  ouwalk::ExperimentConfig cfg;
  try {
    if (!flags.config.empty()) {
      std::ifstream probe(flags.config);
      if (!probe) {
        std::cerr << command << ": cannot read config '" << flags.config << "'\n";
        return ouwalk::kExitIo;
      }
      std::stringstream text;
      text << probe.rdbuf();
      cfg = ouwalk::parse_config(text.str(), false);
    }
    for (const auto& kv : flags.overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ouwalk::ConfigError("--set expects key=value, got '" + kv + "'");
      ouwalk::assign(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (flags.seed) cfg.seed = *flags.seed;
    if (!flags.out.empty()) cfg.output_path = flags.out;
    if (!flags.format.empty()) cfg.format = ouwalk::parse_output_format(flags.format);
    if (flags.max_order) cfg.partitions_max_order = *flags.max_order;
  } catch (const std::invalid_argument& e) {
    std::cerr << command << ": " << e.what() << "\n";
    return ouwalk::kExitUsage;
  }

  ouwalk::RunOptions opts;
  opts.threads = flags.threads;
  opts.expect_fail = flags.expect_fail;
  return ouwalk::run_command(command, cfg, opts, std::cout, std::cerr);
}
