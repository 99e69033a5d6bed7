#pragma once

// Model assemblies: image-only, Joint Fusion (one classifier on F_IM) and
// Joint-Individual Fusion (extra classifiers on f_I and f_M, combined loss,
// decision-level averaging).

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jif/encoders.hpp"
#include "jif/fusion.hpp"

namespace jif {

enum class Structure { ImageOnly, JF, JIF };

std::string to_string(Structure s);
Structure structure_from_string(const std::string& name);

struct AssemblyConfig {
  Structure structure = Structure::JIF;
  FusionKind fusion = FusionKind::MMFA;
  Index num_classes = 6;
  ImageEncoderConfig image;
  Index metadata_input_width = 0;
  std::vector<Index> metadata_widths{64, 64};
  AttentionConfig attention;
};

// Logits and probabilities per branch; branches absent from the structure
// are left undefined.
struct Branch {
  Tensor logits;
  Tensor probs;
  bool present() const { return logits.defined(); }
};

struct PredictionTriple {
  Branch image;     // P_I
  Branch metadata;  // P_M
  Branch fused;     // P_IM
};

class ModelAssembly {
 public:
  ModelAssembly(const AssemblyConfig& config, Rng& rng);

  const AssemblyConfig& config() const { return config_; }
  Structure structure() const { return config_.structure; }

  ImageEncoder& image_encoder() { return image_encoder_; }
  MetadataEncoder& metadata_encoder() { return metadata_encoder_; }
  FusionModule& fusion() { return fusion_; }
  std::optional<Linear>& head_image() { return head_image_; }
  std::optional<Linear>& head_metadata() { return head_metadata_; }
  std::optional<Linear>& head_fused() { return head_fused_; }

  // images: B x (C*H*W); metadata: B x encoded width (ignored for image-only).
  PredictionTriple forward(const Tensor& images, const Tensor& metadata, Mode mode);

  Parameters parameters();

 private:
  AssemblyConfig config_;
  ImageEncoder image_encoder_;
  MetadataEncoder metadata_encoder_;
  FusionModule fusion_;
  std::optional<Linear> head_image_;
  std::optional<Linear> head_metadata_;
  std::optional<Linear> head_fused_;
};

struct LossBreakdown {
  Tensor total;
  std::optional<double> image;     // L_I
  std::optional<double> metadata;  // L_M
  std::optional<double> fused;     // L_IM
};

// Class-weighted cross-entropy on one branch, computed from its logits.
Tensor weighted_ce(const Branch& branch, std::span<const int> labels,
                   std::span<const double> class_weights);

// JF: L_IM. JIF: beta * L_I + (1 - beta) * L_M + L_IM. Image-only: L_I.
LossBreakdown total_loss(const PredictionTriple& triple, Structure structure,
                         std::span<const int> labels, std::span<const double> class_weights,
                         double beta);

// Scalar combination used by total_loss, exposed for direct checks.
double combine_losses(double image, double metadata, double fused, double beta);

// Arithmetic mean of P_I, P_M, P_IM (rows are samples).
Matrix decision_fuse(const PredictionTriple& triple);
Matrix decision_fuse(const Matrix& image, const Matrix& metadata, const Matrix& fused);

// w_c = total / (N * count_c).
std::vector<double> class_weights_from_counts(std::span<const Index> counts);

// Row-wise argmax, ties to the lowest class index.
std::vector<int> argmax_rows(const Matrix& scores);

}  // namespace jif
