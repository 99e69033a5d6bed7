#include "jif/fusion.hpp"

#include <cmath>

namespace jif {

void AttentionConfig::validate() const {
  if (heads <= 0 || total_width() <= 0 || total_width() % heads != 0) {
    throw DimensionError("attention width " + std::to_string(total_width()) +
                         " is not divisible by " + std::to_string(heads) + " heads");
  }
}

Tensor fuse_concat(const Tensor& image_features, const Tensor& metadata_features) {
  if (image_features.rows() != metadata_features.rows()) {
    throw DimensionError("fusion: image batch " + to_string(image_features.shape()) +
                         " and metadata batch " + to_string(metadata_features.shape()) +
                         " differ in size");
  }
  return concat(image_features, metadata_features);
}

QkvProjection::QkvProjection(Index in, Index width, Rng& rng)
    : fc_(in, 3 * width, rng), norm_(3 * width) {}

QKV QkvProjection::forward(const Tensor& f, Mode mode) {
  return split_thirds(norm_(fc_(f), mode));
}

void QkvProjection::collect(const std::string& prefix, Parameters& out) {
  fc_.collect(prefix + ".fc", out);
  norm_.collect(prefix + ".bn", out);
}

QKV assemble_kqv(const QKV& image, const QKV& metadata) {
  QKV out;
  for (std::size_t i = 0; i < 3; ++i) out[i] = concat(metadata[i], image[i]);
  return out;
}

Tensor attention_weights(const Tensor& queries, const Tensor& keys, const AttentionConfig& cfg) {
  cfg.validate();
  if (queries.cols() != cfg.total_width() || keys.cols() != cfg.total_width()) {
    throw DimensionError("attention: inputs " + to_string(queries.shape()) + " and " +
                         to_string(keys.shape()) + " do not have width " +
                         std::to_string(cfg.total_width()));
  }
  const Index s = cfg.head_width();
  const double inv_sqrt_s = 1.0 / std::sqrt(static_cast<double>(s));
  const Tensor scores = mul(keys, queries);
  if (cfg.literal_eq7) return scale(softmax_blocks(scores, s), inv_sqrt_s);
  return softmax_blocks(scale(scores, inv_sqrt_s), s);
}

Tensor attention_heads(const Tensor& queries, const Tensor& keys, const Tensor& values,
                       const AttentionConfig& cfg) {
  return mul(attention_weights(queries, keys, cfg), values);
}

MMFA::MMFA(Index image_dim, Index metadata_dim, AttentionConfig cfg, Rng& rng)
    : image_dim_(image_dim), metadata_dim_(metadata_dim), cfg_(cfg) {
  if (cfg_.image_width == 0) cfg_.image_width = image_dim;
  if (cfg_.metadata_width == 0) cfg_.metadata_width = metadata_dim;
  cfg_.validate();
  image_qkv_ = QkvProjection(image_dim, cfg_.image_width, rng);
  metadata_qkv_ = QkvProjection(metadata_dim, cfg_.metadata_width, rng);
  out_fc_ = Linear(cfg_.total_width(), image_dim + metadata_dim, rng);
  out_norm_ = BatchNorm(image_dim + metadata_dim);
}

Tensor MMFA::forward(const Tensor& image_features, const Tensor& metadata_features, Mode mode) {
  const Tensor skip = fuse_concat(image_features, metadata_features);
  const auto [q, k, v] = assemble_kqv(image_qkv_.forward(image_features, mode),
                                      metadata_qkv_.forward(metadata_features, mode));
  const Tensor attended = attention_heads(q, k, v, cfg_);
  return add(out_norm_(out_fc_(attended), mode), skip);
}

void MMFA::collect(const std::string& prefix, Parameters& out) {
  image_qkv_.collect(prefix + ".qkv_image", out);
  metadata_qkv_.collect(prefix + ".qkv_meta", out);
  out_fc_.collect(prefix + ".nn.fc", out);
  out_norm_.collect(prefix + ".nn.bn", out);
}

void MMFA::zero_parameters() {
  Parameters p;
  collect("mmfa", p);
  for (auto& [name, t] : p.tensors) t.mutable_value().setZero();
}

std::string to_string(FusionKind kind) { return kind == FusionKind::MMFA ? "mmfa" : "cat"; }

FusionKind fusion_kind_from_string(const std::string& name) {
  if (name == "cat") return FusionKind::Concat;
  if (name == "mmfa") return FusionKind::MMFA;
  throw ConfigError("unknown fusion '" + name + "' (expected \"cat\" or \"mmfa\")");
}

FusionModule FusionModule::concat(Index image_dim, Index metadata_dim) {
  FusionModule m;
  m.kind_ = FusionKind::Concat;
  m.output_width_ = image_dim + metadata_dim;
  return m;
}

FusionModule FusionModule::mmfa(Index image_dim, Index metadata_dim, AttentionConfig cfg,
                                Rng& rng) {
  FusionModule m;
  m.kind_ = FusionKind::MMFA;
  m.mmfa_ = std::make_unique<MMFA>(image_dim, metadata_dim, cfg, rng);
  m.output_width_ = m.mmfa_->output_width();
  return m;
}

Tensor FusionModule::forward(const Tensor& image_features, const Tensor& metadata_features,
                             Mode mode) {
  if (kind_ == FusionKind::MMFA) return mmfa_->forward(image_features, metadata_features, mode);
  return fuse_concat(image_features, metadata_features);
}

void FusionModule::collect(const std::string& prefix, Parameters& out) {
  if (mmfa_) mmfa_->collect(prefix, out);
}

}  // namespace jif
