#include "jif/experiment.hpp"

#include <Eigen/Core>

#include <atomic>
#include <cstdio>
#include <mutex>
#include <ostream>
#include <thread>

#include "jif/csv.hpp"

namespace jif {

using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string lower(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

void reject_unknown_keys(const json& given, const json& known, const std::string& path) {
  if (!given.is_object()) return;
  for (const auto& [key, value] : given.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!known.contains(key)) throw ConfigError("unknown config key '" + where + "'");
    if (known[key].is_object()) reject_unknown_keys(value, known[key], where);
  }
}

std::vector<Index> index_list(const json& j, const std::string& what) {
  std::vector<Index> out;
  for (const auto& v : j) {
    const auto x = v.get<long long>();
    if (x < 1) throw ConfigError(what + " entries must be positive");
    out.push_back(static_cast<Index>(x));
  }
  return out;
}

std::uint64_t mix_seed(std::uint64_t seed, int fold) {
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(fold) + 1;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void create_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
}

}  // namespace

// ---- methods ----

std::string MethodSpec::name() const {
  if (structure == Structure::ImageOnly) return "Image";
  const std::string prefix = structure == Structure::JF ? "JF-" : "JIF-";
  return prefix + (fusion == FusionKind::Concat ? "CAT" : "MMFA");
}

std::vector<std::string> MethodSpec::result_names() const {
  if (structure != Structure::JIF) return {name()};
  return {name() + "-OFB", name() + "-ALL"};
}

MethodSpec MethodSpec::parse(const std::string& name) {
  for (Structure s : {Structure::ImageOnly, Structure::JF, Structure::JIF}) {
    for (FusionKind f : {FusionKind::Concat, FusionKind::MMFA}) {
      const MethodSpec m{s, f};
      if (m.name() == name) return m;
    }
  }
  throw ConfigError("unknown method '" + name + "' (expected Image, JF-CAT, JF-MMFA, JIF-CAT or JIF-MMFA)");
}

// ---- configuration ----

std::vector<MethodSpec> ExperimentConfig::effective_methods() const {
  if (!methods.empty()) return methods;
  return {MethodSpec{structure, structure == Structure::ImageOnly ? FusionKind::Concat : fusion}};
}

void ExperimentConfig::validate() const {
  if (synthetic) {
    synthetic_spec.validate();
  } else {
    if (!std::filesystem::is_directory(dataset_dir)) {
      throw ConfigError("dataset directory '" + dataset_dir.string() + "' does not exist");
    }
    if (height < 4 || width < 4) throw ConfigError("dataset height and width must be at least 4");
  }
  train.validate();
  if (folds < 2) throw ConfigError("folds must be at least 2");
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  if (validation != "next-fold" && validation != "test-fold") {
    throw ConfigError("validation must be \"next-fold\" or \"test-fold\"");
  }
  if (validation == "next-fold" && folds < 3) throw ConfigError("next-fold validation needs at least 3 folds");
  if (model.image_channels.empty()) throw ConfigError("model.image_channels must not be empty");
  if (model.metadata_widths.empty()) throw ConfigError("model.metadata_widths must not be empty");
  if (model.kernel_size < 1 || model.kernel_size % 2 == 0) throw ConfigError("kernel_size must be odd");
  if (model.image_dim < 1 || model.heads < 1) throw ConfigError("image_dim and heads must be positive");
  for (const auto& m : effective_methods()) {
    if (m.structure != Structure::ImageOnly && m.fusion == FusionKind::MMFA) {
      AttentionConfig att;
      att.heads = model.heads;
      att.image_width = model.image_dim;
      att.metadata_width = model.metadata_widths.back();
      att.validate();
    }
  }
}

json default_config_json() {
  return json{
      {"dataset",
       {{"source", "synthetic"},
        {"path", ""},
        {"height", 32},
        {"width", 32},
        {"synthetic",
         {{"samples_per_class", {80, 90, 20, 50, 40, 50}},
          {"channels", 3},
          {"height", 32},
          {"width", 32},
          {"image_signal", 1.0},
          {"meta_signal", 1.0},
          {"mode", "redundant"},
          {"noise", 0.1},
          {"categorical_columns", 4},
          {"vocabulary_size", 6},
          {"seed", 0}}}}},
      {"structure", "jif"},
      {"fusion", "mmfa"},
      {"report", "all"},
      {"methods", json::array()},
      {"model",
       {{"image_channels", {8, 16, 32}},
        {"kernel_size", 3},
        {"image_dim", 128},
        {"metadata_widths", {64, 64}},
        {"heads", 8},
        {"literal_eq7", false}}},
      {"train",
       {{"epochs", 150},
        {"lr0", 0.005},
        {"eta_min", 0.0},
        {"patience", 30},
        {"batch_size", 16},
        {"beta", 0.5},
        {"momentum", 0.0},
        {"augment", true}}},
      {"folds", 5},
      {"seeds", {0}},
      {"validation", "next-fold"},
      {"out", "jif_out"}};
}

ExperimentConfig config_from_json(const json& given) {
  if (!given.is_object()) throw ConfigError("config must be a JSON object");
  json j = default_config_json();
  reject_unknown_keys(given, j, "");
  j.merge_patch(given);

  ExperimentConfig cfg;
  try {
    const json& ds = j["dataset"];
    const std::string source = ds["source"].get<std::string>();
    if (source != "synthetic" && source != "directory") {
      throw ConfigError("dataset.source must be \"synthetic\" or \"directory\"");
    }
    cfg.synthetic = source == "synthetic";
    cfg.dataset_dir = ds["path"].get<std::string>();
    cfg.height = ds["height"].get<Index>();
    cfg.width = ds["width"].get<Index>();
    const json& syn = ds["synthetic"];
    SyntheticSpec& spec = cfg.synthetic_spec;
    spec.samples_per_class = index_list(syn["samples_per_class"], "samples_per_class");
    spec.channels = syn["channels"].get<Index>();
    spec.height = syn["height"].get<Index>();
    spec.width = syn["width"].get<Index>();
    spec.image_signal = syn["image_signal"].get<double>();
    spec.meta_signal = syn["meta_signal"].get<double>();
    spec.mode = complementarity_from_string(syn["mode"].get<std::string>());
    spec.noise = syn["noise"].get<double>();
    spec.categorical_columns = syn["categorical_columns"].get<Index>();
    spec.vocabulary_size = syn["vocabulary_size"].get<Index>();
    spec.seed = syn["seed"].get<std::uint64_t>();

    cfg.structure = structure_from_string(j["structure"].get<std::string>());
    cfg.fusion = fusion_kind_from_string(j["fusion"].get<std::string>());
    cfg.report = report_mode_from_string(j["report"].get<std::string>());
    for (const auto& m : j["methods"]) cfg.methods.push_back(MethodSpec::parse(m.get<std::string>()));

    const json& model = j["model"];
    cfg.model.image_channels = index_list(model["image_channels"], "image_channels");
    cfg.model.kernel_size = model["kernel_size"].get<Index>();
    cfg.model.image_dim = model["image_dim"].get<Index>();
    cfg.model.metadata_widths = index_list(model["metadata_widths"], "metadata_widths");
    cfg.model.heads = model["heads"].get<Index>();
    cfg.model.literal_eq7 = model["literal_eq7"].get<bool>();

    const json& train = j["train"];
    cfg.train.epochs = train["epochs"].get<int>();
    cfg.train.lr0 = train["lr0"].get<double>();
    cfg.train.eta_min = train["eta_min"].get<double>();
    cfg.train.patience = train["patience"].get<int>();
    cfg.train.batch_size = train["batch_size"].get<Index>();
    cfg.train.beta = train["beta"].get<double>();
    cfg.train.momentum = train["momentum"].get<double>();
    cfg.train.augment = train["augment"].get<bool>();
    cfg.train.report = cfg.report;

    cfg.folds = j["folds"].get<int>();
    cfg.seeds.clear();
    if (j["seeds"].is_array()) {
      for (const auto& s : j["seeds"]) cfg.seeds.push_back(s.get<std::uint64_t>());
    } else {
      cfg.seeds.push_back(j["seeds"].get<std::uint64_t>());
    }
    cfg.validation = j["validation"].get<std::string>();
    cfg.out = j["out"].get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  const SyntheticSpec& spec = cfg.synthetic_spec;
  json methods = json::array();
  for (const auto& m : cfg.methods) methods.push_back(m.name());
  return json{
      {"dataset",
       {{"source", cfg.synthetic ? "synthetic" : "directory"},
        {"path", cfg.dataset_dir.string()},
        {"height", cfg.height},
        {"width", cfg.width},
        {"synthetic",
         {{"samples_per_class", spec.samples_per_class},
          {"channels", spec.channels},
          {"height", spec.height},
          {"width", spec.width},
          {"image_signal", spec.image_signal},
          {"meta_signal", spec.meta_signal},
          {"mode", to_string(spec.mode)},
          {"noise", spec.noise},
          {"categorical_columns", spec.categorical_columns},
          {"vocabulary_size", spec.vocabulary_size},
          {"seed", spec.seed}}}}},
      {"structure", to_string(cfg.structure)},
      {"fusion", to_string(cfg.fusion)},
      {"report", to_string(cfg.report)},
      {"methods", methods},
      {"model",
       {{"image_channels", cfg.model.image_channels},
        {"kernel_size", cfg.model.kernel_size},
        {"image_dim", cfg.model.image_dim},
        {"metadata_widths", cfg.model.metadata_widths},
        {"heads", cfg.model.heads},
        {"literal_eq7", cfg.model.literal_eq7}}},
      {"train",
       {{"epochs", cfg.train.epochs},
        {"lr0", cfg.train.lr0},
        {"eta_min", cfg.train.eta_min},
        {"patience", cfg.train.patience},
        {"batch_size", cfg.train.batch_size},
        {"beta", cfg.train.beta},
        {"momentum", cfg.train.momentum},
        {"augment", cfg.train.augment}}},
      {"folds", cfg.folds},
      {"seeds", cfg.seeds},
      {"validation", cfg.validation},
      {"out", cfg.out.string()}};
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("override '" + assignment + "' has an empty key segment");
    if (!node->is_object()) throw ConfigError("override '" + path + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

ExperimentConfig load_config(const std::optional<std::filesystem::path>& path,
                             const std::vector<std::string>& overrides) {
  json j = json::object();
  if (path) {
    if (!std::filesystem::exists(*path)) throw ConfigError("config file '" + path->string() + "' not found");
    j = json::parse(read_text_file(*path), nullptr, false);
    if (j.is_discarded()) throw ConfigError("config file '" + path->string() + "' is not valid JSON");
  }
  for (const auto& o : overrides) apply_override(j, o);
  return config_from_json(j);
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

WilcoxonMode wilcoxon_mode_from_string(const std::string& name) {
  if (name == "exact") return WilcoxonMode::Exact;
  if (name == "normal") return WilcoxonMode::Normal;
  if (name == "auto") return WilcoxonMode::Auto;
  throw ConfigError("unknown Wilcoxon mode '" + name + "' (expected exact, normal or auto)");
}

// ---- commands ----

Dataset load_experiment_dataset(const ExperimentConfig& cfg) {
  if (cfg.synthetic) return generate_synthetic(cfg.synthetic_spec);
  return load_dataset_dir(cfg.dataset_dir, cfg.height, cfg.width);
}

void cmd_generate(const ExperimentConfig& cfg, const std::filesystem::path& out) {
  if (!cfg.synthetic) throw ConfigError("generate needs dataset.source = \"synthetic\"");
  cfg.synthetic_spec.validate();
  write_dataset_dir(generate_synthetic(cfg.synthetic_spec), out);
}

namespace {

struct Unit {
  int fold = 0;
  std::uint64_t seed = 0;
  MethodSpec method;
  std::string run;
};

struct UnitOutcome {
  std::vector<std::string> rows;
  std::optional<RunFailure> failure;
};

AssemblyConfig assembly_for(const ExperimentConfig& cfg, const Dataset& data, const MethodSpec& m) {
  AssemblyConfig a;
  a.structure = m.structure;
  a.fusion = m.fusion;
  a.num_classes = data.num_classes();
  a.image.channels = data.channels;
  a.image.height = data.height;
  a.image.width = data.width;
  a.image.block_channels = cfg.model.image_channels;
  a.image.kernel_size = cfg.model.kernel_size;
  a.image.output_dim = cfg.model.image_dim;
  a.metadata_input_width = data.metadata.cols();
  a.metadata_widths = cfg.model.metadata_widths;
  a.attention.heads = cfg.model.heads;
  a.attention.literal_eq7 = cfg.model.literal_eq7;
  return a;
}

UnitOutcome run_unit(const ExperimentConfig& cfg, const Dataset& data, const FoldSplit& split,
                     const Unit& unit) {
  UnitOutcome outcome;
  const auto k = static_cast<std::size_t>(cfg.folds);
  const auto test_fold = static_cast<std::size_t>(unit.fold);
  const std::size_t val_fold = cfg.validation == "next-fold" ? (test_fold + 1) % k : test_fold;
  std::vector<int> train_idx;
  for (std::size_t f = 0; f < k; ++f) {
    if (f == test_fold || f == val_fold) continue;
    train_idx.insert(train_idx.end(), split.folds[f].begin(), split.folds[f].end());
  }
  std::sort(train_idx.begin(), train_idx.end());

  const std::filesystem::path dir = cfg.out / "runs" / unit.run / unit.method.name();
  try {
    const Dataset train_set = data.subset(train_idx);
    const Dataset val_set = data.subset(split.folds[val_fold]);
    const Dataset test_set = data.subset(split.folds[test_fold]);

    const std::uint64_t stream = mix_seed(unit.seed, unit.fold);
    Rng rng(stream);
    ModelAssembly model(assembly_for(cfg, data, unit.method), rng);
    TrainConfig tc = cfg.train;
    tc.seed = stream + 1;
    tc.report = cfg.report;
    const TrainResult result = train(model, train_set, val_set, tc);
    const Predictions pred = predict(model, test_set);

    create_dir(dir);
    write_text_file(dir / "train_log.csv", result.log.to_csv());
    Parameters params = model.parameters();
    save_checkpoint(Checkpoint::capture(params), dir / "model.bin", dir / "model.json");

    const auto names = unit.method.result_names();
    for (std::size_t r = 0; r < names.size(); ++r) {
      const ReportMode mode = names.size() == 1 ? cfg.report : (r == 0 ? ReportMode::OFB : ReportMode::All);
      const Metrics m = evaluate_scores(pred.scores(unit.method.structure, mode), test_set.labels,
                                        static_cast<int>(data.num_classes()));
      write_text_file(dir / ("confusion_" + names[r] + ".csv"), confusion_to_csv(m.confusion, data.schema.classes));
      write_text_file(dir / ("metrics_" + names[r] + ".json"), metrics_to_json(m));
      outcome.rows.push_back(csv_field(names[r]) + "," + unit.run + "," + fmt(m.bac) + "," + fmt(m.acc) + "," +
                             fmt(m.auc) + "\n");
    }
  } catch (const std::exception& e) {
    outcome.rows.clear();
    outcome.failure = RunFailure{unit.run, unit.method.name(), e.what()};
  }
  return outcome;
}

}  // namespace

RunSummary cmd_run(const ExperimentConfig& cfg, int jobs, std::ostream* progress) {
  cfg.validate();
  if (jobs < 1) throw ConfigError("--jobs must be at least 1");
  const Dataset data = load_experiment_dataset(cfg);
  if (data.size() < cfg.folds) throw ConfigError("fewer samples than folds");
  create_dir(cfg.out);

  std::vector<FoldSplit> splits;
  for (std::uint64_t seed : cfg.seeds) splits.push_back(stratified_kfold(data.labels, cfg.folds, seed));
  if (progress) {
    for (const auto& w : splits.front().warnings) *progress << "warning: " << w << "\n";
  }

  const auto methods = cfg.effective_methods();
  std::vector<Unit> units;
  std::vector<std::size_t> split_of;
  for (int fold = 0; fold < cfg.folds; ++fold) {
    for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
      for (const auto& m : methods) {
        const std::string run = "f" + std::to_string(fold) + "-s" + std::to_string(cfg.seeds[s]);
        units.push_back({fold, cfg.seeds[s], m, run});
        split_of.push_back(s);
      }
    }
  }

  std::vector<UnitOutcome> outcomes(units.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < units.size(); i = next++) {
      outcomes[i] = run_unit(cfg, data, splits[split_of[i]], units[i]);
      if (progress) {
        std::lock_guard lock(log_mutex);
        *progress << "[" << units[i].run << "] " << units[i].method.name()
                  << (outcomes[i].failure ? " FAILED: " + outcomes[i].failure->reason : " done") << "\n";
      }
    }
  };
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), units.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  RunSummary summary;
  summary.results_csv = "method,run,bac,acc,auc\n";
  json failures = json::array();
  for (const auto& o : outcomes) {
    for (const auto& row : o.rows) summary.results_csv += row;
    if (o.failure) {
      summary.failures.push_back(*o.failure);
      failures.push_back({{"run", o.failure->run}, {"method", o.failure->method}, {"reason", o.failure->reason}});
    }
  }
  write_text_file(cfg.out / "results.csv", summary.results_csv);

  const json config = config_to_json(cfg);
  write_text_file(cfg.out / "config.json", config.dump(2) + "\n");
  const json manifest{{"config_hash", fnv1a_hex(config.dump())},
                      {"versions",
                       {{"jif", kVersion},
                        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                      "." + std::to_string(EIGEN_MINOR_VERSION)},
                        {"compiler", __VERSION__}}},
                      {"dataset", {{"samples", data.size()}, {"classes", data.schema.classes}}},
                      {"units", units.size()},
                      {"failures", failures}};
  write_text_file(cfg.out / "manifest.json", manifest.dump(2) + "\n");
  return summary;
}

std::string cmd_compare(const std::filesystem::path& results_csv, double alpha, WilcoxonMode mode,
                        const std::string& metric, const std::filesystem::path& out_dir) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (!std::filesystem::exists(results_csv)) throw DataError("results file '" + results_csv.string() + "' not found");
  const FoldResultTable table = read_fold_table(read_text_file(results_csv), lower(metric));
  const ComparisonReport report = compare_methods(table, alpha, mode);
  const std::string markdown = report_to_markdown(report);
  create_dir(out_dir);
  write_text_file(out_dir / "comparison.json", report_to_json(report));
  write_text_file(out_dir / "comparison.md", markdown);
  return markdown;
}

}  // namespace jif
