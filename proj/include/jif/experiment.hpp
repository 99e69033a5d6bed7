#pragma once

// Experiment plumbing behind the `jif` command line: JSON configs with
// dotted-path overrides, synthetic dataset generation, the fold x seed
// training grid, statistical comparison of result tables and the
// finite-difference suite over every differentiable block.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "jif/data.hpp"
#include "jif/stats.hpp"
#include "jif/training.hpp"

namespace jif {

// ---- finite-difference suite ----

struct GradCheckBlockResult {
  std::string block;
  double max_rel_error = 0.0;
  Index parameters = 0;
  bool pass = false;
};

std::vector<std::string> gradcheck_block_names();

// Runs every block at toy dimensions. `inject_fault` names a block whose
// output is routed through an identity op with a doubled backward.
std::vector<GradCheckBlockResult> run_gradcheck_suite(std::uint64_t seed = 0,
                                                      const std::string& inject_fault = "",
                                                      double tol = 1e-4);

// ---- configuration ----

struct ModelConfig {
  std::vector<Index> image_channels{8, 16, 32};
  Index kernel_size = 3;
  Index image_dim = 128;
  std::vector<Index> metadata_widths{64, 64};
  Index heads = 8;
  bool literal_eq7 = false;
};

// One trained model per (seed, fold). A JIF method yields two result rows,
// <name>-OFB and <name>-ALL, scored from the same trained model.
struct MethodSpec {
  Structure structure = Structure::JIF;
  FusionKind fusion = FusionKind::MMFA;

  std::string name() const;  // Image, JF-CAT, JF-MMFA, JIF-CAT, JIF-MMFA
  std::vector<std::string> result_names() const;
  static MethodSpec parse(const std::string& name);
};

struct ExperimentConfig {
  bool synthetic = true;
  SyntheticSpec synthetic_spec;
  std::filesystem::path dataset_dir;
  Index height = 32;  // resize target when loading a directory
  Index width = 32;

  Structure structure = Structure::JIF;
  FusionKind fusion = FusionKind::MMFA;
  ReportMode report = ReportMode::All;
  std::vector<MethodSpec> methods;  // empty: the single (structure, fusion) above

  ModelConfig model;
  TrainConfig train;
  int folds = 5;
  std::vector<std::uint64_t> seeds{0};
  // "next-fold": validate on fold (f + 1) mod k and train on the rest;
  // "test-fold": validate on the held-out fold itself.
  std::string validation = "next-fold";
  std::filesystem::path out = "jif_out";

  std::vector<MethodSpec> effective_methods() const;
  void validate() const;
};

nlohmann::json default_config_json();
// Missing keys take defaults; unknown keys and bad enumerations throw ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

// "a.b.c=value". The value is parsed as JSON when possible, else kept as a string.
void apply_override(nlohmann::json& j, const std::string& assignment);

ExperimentConfig load_config(const std::optional<std::filesystem::path>& path,
                             const std::vector<std::string>& overrides);

// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(std::string_view bytes);

// ---- commands ----

Dataset load_experiment_dataset(const ExperimentConfig& cfg);

void cmd_generate(const ExperimentConfig& cfg, const std::filesystem::path& out);

struct RunFailure {
  std::string run;
  std::string method;
  std::string reason;
};

struct RunSummary {
  std::string results_csv;  // method,run,bac,acc,auc
  std::vector<RunFailure> failures;
};

// Trains the fold x seed grid with up to `jobs` workers and writes every
// artifact under cfg.out. Rows are ordered by (fold, seed, method).
RunSummary cmd_run(const ExperimentConfig& cfg, int jobs, std::ostream* progress = nullptr);

// Writes comparison.json and comparison.md into out_dir and returns the markdown.
std::string cmd_compare(const std::filesystem::path& results_csv, double alpha, WilcoxonMode mode,
                        const std::string& metric, const std::filesystem::path& out_dir);

WilcoxonMode wilcoxon_mode_from_string(const std::string& name);

}  // namespace jif
