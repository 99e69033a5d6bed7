#pragma once

// SGD training with cosine-annealed learning rate, augmentation, class-weighted
// loss and early stopping on validation balanced accuracy.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "jif/data.hpp"
#include "jif/evaluation.hpp"
#include "jif/structures.hpp"

namespace jif {

enum class ReportMode { OFB, All };

std::string to_string(ReportMode mode);
ReportMode report_mode_from_string(const std::string& name);

struct AugmentConfig {
  double hflip = 0.5;
  double vflip = 0.5;
  double shift = 0.5;
  double rotate = 0.5;
  double scale = 0.5;
  double max_shift_fraction = 0.125;
  double max_small_angle_deg = 15.0;
  double min_scale = 0.9;
  double max_scale = 1.1;

  static AugmentConfig none() { return {0.0, 0.0, 0.0, 0.0, 0.0}; }
};

struct TrainConfig {
  int epochs = 150;
  double lr0 = 0.005;
  double eta_min = 0.0;
  int patience = 30;
  Index batch_size = 16;
  std::uint64_t seed = 0;
  double beta = 0.5;
  double momentum = 0.0;
  bool augment = true;
  AugmentConfig augmentation;
  ReportMode report = ReportMode::All;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 0-based
  double lr = 0.0;
  double loss_image = 0.0;     // mean over batches; 0 when absent
  double loss_metadata = 0.0;
  double loss_fused = 0.0;
  double loss_total = 0.0;
  double val_bac = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_val_bac = 0.0;
  std::string stop_reason;

  std::string to_csv() const;
};

// eta_min + (lr0 - eta_min) * (1 + cos(pi * t / T)) / 2.
double cosine_lr(int t, int total, double lr0, double eta_min);

// p <- p - lr * g over every leaf that has a gradient. With momentum > 0 the
// optional velocity buffers (keyed by parameter name) are used.
void sgd_step(Parameters& params, double lr, double momentum = 0.0,
              std::map<std::string, Matrix>* velocity = nullptr);

// Each transform is applied independently with its configured probability.
Image augment(const Image& image, Rng& rng, const AugmentConfig& cfg = {});

Image flip_horizontal(const Image& image);
Image flip_vertical(const Image& image);
Image shift_image(const Image& image, Index dy, Index dx);
// Nearest-neighbour rotation about the centre, zero fill.
Image rotate_image(const Image& image, double degrees);
// Nearest-neighbour zoom about the centre (crop when > 1, pad when < 1).
Image scale_image(const Image& image, double factor);

struct Predictions {
  Matrix image;     // P_I (empty when absent)
  Matrix metadata;  // P_M
  Matrix fused;     // P_IM
  // Probabilities the model is scored on: P_I for image-only, P_IM for JF and
  // JIF-OFB, the decision-level mean for JIF-All.
  Matrix scores(Structure structure, ReportMode mode) const;
};

// Eval-mode forward in batches; never records a graph.
Predictions predict(ModelAssembly& model, const Dataset& data, Index batch_size = 64);

struct Metrics {
  double bac = 0.0;
  double acc = 0.0;
  double auc = 0.0;
  std::vector<double> per_class_recall;
  ConfusionMatrix confusion;
};

Metrics evaluate_scores(const Matrix& scores, std::span<const int> labels, int num_classes);
std::string metrics_to_json(const Metrics& m);
std::string confusion_to_csv(const ConfusionMatrix& cm, const std::vector<std::string>& classes);

struct TrainResult {
  TrainLog log;
  std::vector<double> class_weights;
};

// Trains in place; on return the model holds the best-validation parameters.
TrainResult train(ModelAssembly& model, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& cfg);

// Value snapshot of all leaves and batch-norm buffers.
struct Checkpoint {
  std::vector<std::pair<std::string, Matrix>> arrays;

  static Checkpoint capture(const Parameters& params);
  void restore(Parameters& params) const;
};

// Flat little-endian float64 blob plus a JSON manifest of names, shapes and
// byte offsets.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& bin_path,
                     const std::filesystem::path& manifest_path);
Checkpoint load_checkpoint(const std::filesystem::path& bin_path,
                           const std::filesystem::path& manifest_path);

}  // namespace jif
