#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "jif/experiment.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

struct CommonOptions {
  std::string config;
  std::string out;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--out", opts.out, "Output directory (overrides the config's \"out\")");
  cmd->add_option("--set", opts.overrides, "Config override key=value, dotted keys; repeatable");
  cmd->add_option("--seed", opts.seed, "Seed override");
}

jif::ExperimentConfig resolve(const CommonOptions& opts, bool seed_is_dataset) {
  std::vector<std::string> overrides = opts.overrides;
  if (opts.seed) {
    const std::string s = std::to_string(*opts.seed);
    overrides.push_back(seed_is_dataset ? "dataset.synthetic.seed=" + s : "seeds=[" + s + "]");
  }
  if (!opts.out.empty()) overrides.push_back("out=" + nlohmann::json(opts.out).dump());
  std::optional<std::filesystem::path> path;
  if (!opts.config.empty()) path = opts.config;
  return jif::load_config(path, overrides);
}

int run_gradcheck(std::uint64_t seed, const std::string& fault) {
  const auto results = jif::run_gradcheck_suite(seed, fault);
  bool ok = true;
  std::printf("%-22s %8s %14s  %s\n", "block", "params", "max_rel_error", "status");
  for (const auto& r : results) {
    std::printf("%-22s %8lld %14.3e  %s\n", r.block.c_str(), static_cast<long long>(r.parameters),
                r.max_rel_error, r.pass ? "PASS" : "FAIL");
    ok = ok && r.pass;
  }
  std::printf("%s\n", ok ? "all blocks pass" : "gradient check FAILED");
  return ok ? kOk : kFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Image + metadata fusion experiments"};
  app.require_subcommand(1);

  CommonOptions gen_opts;
  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset directory");
  add_common(gen, gen_opts);

  CommonOptions run_opts;
  int jobs = 1;
  auto* run = app.add_subcommand("run", "Train and evaluate the fold x seed grid");
  add_common(run, run_opts);
  run->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  std::string results;
  std::string compare_out;
  double alpha = 0.05;
  std::string metric = "bac";
  std::string wilcoxon = "auto";
  auto* compare = app.add_subcommand("compare", "Friedman + pairwise Wilcoxon over a result CSV");
  compare->add_option("results", results, "Result CSV (method,run,<metric>...)")->required();
  compare->add_option("--alpha", alpha, "Significance level");
  compare->add_option("--out", compare_out, "Report directory (default: next to the CSV)");
  compare->add_option("--metric", metric, "Metric column");
  compare->add_option("--wilcoxon", wilcoxon, "exact, normal or auto");

  std::uint64_t grad_seed = 0;
  std::string fault;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable block");
  gradcheck->add_option("--seed", grad_seed, "Seed for toy inputs and weights");
  gradcheck->add_option("--inject-fault", fault, "Block whose backward is deliberately doubled");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) {
      const jif::ExperimentConfig cfg = resolve(gen_opts, true);
      jif::cmd_generate(cfg, cfg.out);
      std::cout << "wrote " << cfg.out.string() << "\n";
      return kOk;
    }
    if (*run) {
      const jif::ExperimentConfig cfg = resolve(run_opts, false);
      const jif::RunSummary summary = jif::cmd_run(cfg, jobs, &std::cerr);
      std::cout << "wrote " << (cfg.out / "results.csv").string() << "\n";
      if (!summary.failures.empty()) {
        std::cerr << summary.failures.size() << " unit(s) failed\n";
        return kFailed;
      }
      return kOk;
    }
    if (*compare) {
      const std::filesystem::path csv = results;
      const std::filesystem::path out = compare_out.empty() ? csv.parent_path() : std::filesystem::path(compare_out);
      std::cout << jif::cmd_compare(csv, alpha, jif::wilcoxon_mode_from_string(wilcoxon), metric,
                                    out.empty() ? std::filesystem::path(".") : out);
      return kOk;
    }
    if (*gradcheck) return run_gradcheck(grad_seed, fault);
  } catch (const jif::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const jif::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kUsage;
  } catch (const jif::FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kUsage;
  } catch (const jif::DimensionError& e) {
    std::cerr << "dimension error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailed;
  }
  return kUsage;
}
