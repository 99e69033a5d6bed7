#include "jif/structures.hpp"

#include <numeric>

namespace jif {

std::string to_string(Structure s) {
  switch (s) {
    case Structure::ImageOnly: return "image";
    case Structure::JF: return "jf";
    case Structure::JIF: return "jif";
  }
  return "?";
}

Structure structure_from_string(const std::string& name) {
  if (name == "image") return Structure::ImageOnly;
  if (name == "jf") return Structure::JF;
  if (name == "jif") return Structure::JIF;
  throw ConfigError("unknown structure '" + name + "' (expected \"image\", \"jf\" or \"jif\")");
}

ModelAssembly::ModelAssembly(const AssemblyConfig& config, Rng& rng) : config_(config) {
  if (config.num_classes < 2) throw ConfigError("need at least two classes");
  image_encoder_ = ImageEncoder(config.image, rng);
  const Index d_i = image_encoder_.output_width();
  if (config.structure == Structure::ImageOnly) {
    head_image_ = Linear(d_i, config.num_classes, rng);
    return;
  }
  if (config.metadata_input_width <= 0) throw ConfigError("metadata input width must be positive");
  metadata_encoder_ = MetadataEncoder(config.metadata_input_width, config.metadata_widths, rng);
  const Index d_m = metadata_encoder_.output_width();
  fusion_ = config.fusion == FusionKind::MMFA
                ? FusionModule::mmfa(d_i, d_m, config.attention, rng)
                : FusionModule::concat(d_i, d_m);
  head_fused_ = Linear(fusion_.output_width(), config.num_classes, rng);
  if (config.structure == Structure::JIF) {
    head_image_ = Linear(d_i, config.num_classes, rng);
    head_metadata_ = Linear(d_m, config.num_classes, rng);
  }
}

namespace {

Branch classify(const Linear& head, const Tensor& features) {
  Branch b;
  b.logits = head(features);
  b.probs = softmax(b.logits);
  return b;
}

}  // namespace

PredictionTriple ModelAssembly::forward(const Tensor& images, const Tensor& metadata, Mode mode) {
  PredictionTriple out;
  const Tensor f_i = image_encoder_.forward(images, mode);
  if (config_.structure == Structure::ImageOnly) {
    out.image = classify(*head_image_, f_i);
    return out;
  }
  if (images.rows() != metadata.rows()) {
    throw DimensionError("image batch of " + std::to_string(images.rows()) +
                         " rows paired with metadata batch of " + std::to_string(metadata.rows()));
  }
  const Tensor f_m = metadata_encoder_.forward(metadata, mode);
  out.fused = classify(*head_fused_, fusion_.forward(f_i, f_m, mode));
  if (config_.structure == Structure::JIF) {
    out.image = classify(*head_image_, f_i);
    out.metadata = classify(*head_metadata_, f_m);
  }
  return out;
}

Parameters ModelAssembly::parameters() {
  Parameters p;
  image_encoder_.collect("image_encoder", p);
  if (config_.structure != Structure::ImageOnly) {
    metadata_encoder_.collect("metadata_encoder", p);
    fusion_.collect("fusion", p);
  }
  if (head_image_) head_image_->collect("head_image", p);
  if (head_metadata_) head_metadata_->collect("head_metadata", p);
  if (head_fused_) head_fused_->collect("head_fused", p);
  return p;
}

Tensor weighted_ce(const Branch& branch, std::span<const int> labels,
                   std::span<const double> class_weights) {
  if (!branch.present()) throw ContractError("weighted_ce on an absent branch");
  return weighted_cross_entropy(branch.logits, labels, class_weights);
}

double combine_losses(double image, double metadata, double fused, double beta) {
  return beta * image + (1.0 - beta) * metadata + fused;
}

LossBreakdown total_loss(const PredictionTriple& triple, Structure structure,
                         std::span<const int> labels, std::span<const double> class_weights,
                         double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in [0, 1]");
  LossBreakdown out;
  switch (structure) {
    case Structure::ImageOnly: {
      out.total = weighted_ce(triple.image, labels, class_weights);
      out.image = out.total.item();
      break;
    }
    case Structure::JF: {
      out.total = weighted_ce(triple.fused, labels, class_weights);
      out.fused = out.total.item();
      break;
    }
    case Structure::JIF: {
      if (!triple.image.present() || !triple.metadata.present() || !triple.fused.present()) {
        throw ContractError("JIF loss needs P_I, P_M and P_IM");
      }
      const Tensor l_i = weighted_ce(triple.image, labels, class_weights);
      const Tensor l_m = weighted_ce(triple.metadata, labels, class_weights);
      const Tensor l_im = weighted_ce(triple.fused, labels, class_weights);
      out.total = add(add(scale(l_i, beta), scale(l_m, 1.0 - beta)), l_im);
      out.image = l_i.item();
      out.metadata = l_m.item();
      out.fused = l_im.item();
      break;
    }
  }
  return out;
}

Matrix decision_fuse(const Matrix& image, const Matrix& metadata, const Matrix& fused) {
  if (image.rows() != fused.rows() || image.cols() != fused.cols() ||
      metadata.rows() != fused.rows() || metadata.cols() != fused.cols()) {
    throw DimensionError("decision_fuse: prediction shapes differ");
  }
  return (image + metadata + fused) / 3.0;
}

Matrix decision_fuse(const PredictionTriple& triple) {
  if (!triple.image.present() || !triple.metadata.present() || !triple.fused.present()) {
    throw ContractError("decision_fuse needs P_I, P_M and P_IM");
  }
  return decision_fuse(triple.image.probs.value(), triple.metadata.probs.value(),
                       triple.fused.probs.value());
}

std::vector<double> class_weights_from_counts(std::span<const Index> counts) {
  if (counts.empty()) throw ConfigError("no classes to weight");
  const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), Index{0}));
  const double n = static_cast<double>(counts.size());
  std::vector<double> w;
  w.reserve(counts.size());
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] < 1) {
      throw ConfigError("class " + std::to_string(c) +
                        " has no training samples; use a stratified split so every class is "
                        "represented");
    }
    w.push_back(total / (n * static_cast<double>(counts[c])));
  }
  return w;
}

std::vector<int> argmax_rows(const Matrix& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Index r = 0; r < scores.rows(); ++r) {
    Index best = 0;
    for (Index c = 1; c < scores.cols(); ++c)
      if (scores(r, c) > scores(r, best)) best = c;
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

}  // namespace jif
