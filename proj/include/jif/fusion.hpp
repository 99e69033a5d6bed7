#pragma once

// Fusion modules F_1(f_I, f_M) -> F_IM: plain concatenation and multi-modal
// fusion attention (MMFA).
//
// MMFA projects each modality to (q, k, v) with linear + batch norm, builds
// F_Q/F_K/F_V by concatenating metadata-part then image-part, gates F_V per
// coordinate with a blockwise softmax of F_K * F_Q (one block per head),
// projects back with nn(x) = BN(x W + b) and adds the skip Concat(f_I, f_M).

#include <array>
#include <memory>
#include <string>
#include <variant>

#include "jif/layers.hpp"

namespace jif {

struct AttentionConfig {
  Index heads = 8;
  Index image_width = 0;     // d_img; 0 means "use D_I"
  Index metadata_width = 0;  // d_meta; 0 means "use D_M"
  // Divide the softmax output by sqrt(s) instead of scaling its argument.
  bool literal_eq7 = false;

  Index total_width() const { return image_width + metadata_width; }
  Index head_width() const { return total_width() / heads; }
  // Throws DimensionError unless heads divides the total width.
  void validate() const;
};

using QKV = std::array<Tensor, 3>;  // (query, key, value)

Tensor fuse_concat(const Tensor& image_features, const Tensor& metadata_features);

// linear -> batch norm -> split into (q, k, v) thirds.
class QkvProjection {
 public:
  QkvProjection() = default;
  QkvProjection(Index in, Index width, Rng& rng);

  Index width() const { return fc_.out_features() / 3; }
  Linear& fc() { return fc_; }
  BatchNorm& norm() { return norm_; }

  QKV forward(const Tensor& f, Mode mode);
  void collect(const std::string& prefix, Parameters& out);

 private:
  Linear fc_;
  BatchNorm norm_;
};

// Per sample: (F_Q, F_K, F_V) with metadata-part first.
QKV assemble_kqv(const QKV& image, const QKV& metadata);

// Per-head weights softmax(F_K * F_Q / sqrt(s)) over each head's s coordinates
// (or softmax(F_K * F_Q) / sqrt(s) in literal mode).
Tensor attention_weights(const Tensor& queries, const Tensor& keys, const AttentionConfig& cfg);
// Concat over heads of weights_i * F_V^i.
Tensor attention_heads(const Tensor& queries, const Tensor& keys, const Tensor& values,
                       const AttentionConfig& cfg);

class MMFA {
 public:
  MMFA() = default;
  MMFA(Index image_dim, Index metadata_dim, AttentionConfig cfg, Rng& rng);

  const AttentionConfig& config() const { return cfg_; }
  Index output_width() const { return image_dim_ + metadata_dim_; }
  QkvProjection& image_qkv() { return image_qkv_; }
  QkvProjection& metadata_qkv() { return metadata_qkv_; }
  Linear& out_fc() { return out_fc_; }
  BatchNorm& out_norm() { return out_norm_; }

  Tensor forward(const Tensor& image_features, const Tensor& metadata_features, Mode mode);
  void collect(const std::string& prefix, Parameters& out);
  // Sets every weight, bias, gamma and beta to zero.
  void zero_parameters();

 private:
  Index image_dim_ = 0;
  Index metadata_dim_ = 0;
  AttentionConfig cfg_;
  QkvProjection image_qkv_;
  QkvProjection metadata_qkv_;
  Linear out_fc_;
  BatchNorm out_norm_;
};

inline Tensor mmfa_fuse(const Tensor& image_features, const Tensor& metadata_features, MMFA& params,
                        Mode mode) {
  return params.forward(image_features, metadata_features, mode);
}

enum class FusionKind { Concat, MMFA };

std::string to_string(FusionKind kind);
FusionKind fusion_kind_from_string(const std::string& name);

// Owning wrapper so a model can hold either fusion module behind one call.
class FusionModule {
 public:
  FusionModule() = default;
  static FusionModule concat(Index image_dim, Index metadata_dim);
  static FusionModule mmfa(Index image_dim, Index metadata_dim, AttentionConfig cfg, Rng& rng);

  FusionKind kind() const { return kind_; }
  Index output_width() const { return output_width_; }
  MMFA* attention() { return mmfa_.get(); }

  Tensor forward(const Tensor& image_features, const Tensor& metadata_features, Mode mode);
  void collect(const std::string& prefix, Parameters& out);

 private:
  FusionKind kind_ = FusionKind::Concat;
  Index output_width_ = 0;
  std::unique_ptr<MMFA> mmfa_;
};

}  // namespace jif
