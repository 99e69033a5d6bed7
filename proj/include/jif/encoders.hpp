#pragma once

// Modality encoders: the image CNN producing f_I and the fully connected
// metadata network producing f_M, plus the tabular schema that defines how a
// raw metadata record becomes the network's input row.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "jif/layers.hpp"

namespace jif {

enum class ColumnKind { Categorical, Numeric };

// Strict rejects categorical values outside the vocabulary; lenient maps them
// to the unknown slot. Missing cells are accepted under both policies.
enum class MissingPolicy { Strict, Lenient };

struct MetadataColumn {
  std::string name;
  ColumnKind kind = ColumnKind::Categorical;
  std::vector<std::string> vocabulary;  // categorical only
  double min = 0.0;                     // numeric only
  double max = 1.0;
  MissingPolicy policy = MissingPolicy::Lenient;

  // |vocabulary| + 1 unknown slot, or 1 for numeric columns.
  Index width() const;
};

struct MetadataSchema {
  std::vector<std::string> classes;
  std::vector<MetadataColumn> columns;

  Index encoded_width() const;
  // Throws ConfigError on empty/duplicate vocabularies or degenerate ranges.
  void validate() const;
  int class_index(std::string_view name) const;  // -1 when unknown
};

std::string schema_to_json(const MetadataSchema& schema);
MetadataSchema schema_from_json(std::string_view text);

// One raw value per schema column, in schema order. nullopt or "" is missing.
using MetadataRecord = std::vector<std::optional<std::string>>;

// Categorical -> indicator (unknown slot when missing), numeric ->
// (v - min)/(max - min) clamped to [0, 1], missing numeric -> 0.5.
RowVector one_hot_encode(const MetadataRecord& record, const MetadataSchema& schema);

class MetadataEncoder {
 public:
  struct Block {
    Linear fc;
    BatchNorm norm;
  };

  MetadataEncoder() = default;
  // One (linear -> batch norm -> ReLU) block per entry of `widths`.
  MetadataEncoder(Index input_width, const std::vector<Index>& widths, Rng& rng);

  Index input_width() const { return input_width_; }
  Index output_width() const;
  std::vector<Block>& blocks() { return blocks_; }

  Tensor forward(const Tensor& batch, Mode mode);
  void collect(const std::string& prefix, Parameters& out);

 private:
  Index input_width_ = 0;
  std::vector<Block> blocks_;
};

struct ImageEncoderConfig {
  Index channels = 3;
  Index height = 32;
  Index width = 32;
  std::vector<Index> block_channels{8, 16, 32};
  Index kernel_size = 3;
  Index output_dim = 128;
};

// conv -> BN -> ReLU -> 2x2 max-pool per block, then global average pooling
// and a linear projection to output_dim.
class ImageEncoder {
 public:
  struct Block {
    Conv2d conv;
    BatchNorm norm;
  };

  ImageEncoder() = default;
  ImageEncoder(const ImageEncoderConfig& config, Rng& rng);

  const ImageEncoderConfig& config() const { return config_; }
  Index output_width() const { return config_.output_dim; }
  std::vector<Block>& blocks() { return blocks_; }
  Linear& projection() { return projection_; }

  // batch: B x (C*H*W) matrix, or a tensor already shaped {B, C, H, W}.
  Tensor forward(const Tensor& batch, Mode mode);
  void collect(const std::string& prefix, Parameters& out);

 private:
  ImageEncoderConfig config_;
  std::vector<Block> blocks_;
  Linear projection_;
};

inline Tensor encode_metadata(const Tensor& batch, MetadataEncoder& encoder, Mode mode) {
  return encoder.forward(batch, mode);
}

inline Tensor encode_image(const Tensor& batch, ImageEncoder& encoder, Mode mode) {
  return encoder.forward(batch, mode);
}

}  // namespace jif
