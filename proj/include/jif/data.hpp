#pragma once

// Datasets: NetPBM image I/O, metadata CSV ingestion, the on-disk dataset
// layout (meta.csv, schema.json, images/<id>.ppm) and a class-conditional
// synthetic generator with per-modality signal control.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "jif/autodiff.hpp"
#include "jif/encoders.hpp"

namespace jif {

// Channel-major C x H x W pixels in [0, 1].
struct Image {
  Index channels = 0;
  Index height = 0;
  Index width = 0;
  Eigen::ArrayXd pixels;

  Image() = default;
  Image(Index c, Index h, Index w) : channels(c), height(h), width(w), pixels(Eigen::ArrayXd::Zero(c * h * w)) {}

  double& at(Index c, Index y, Index x) { return pixels[(c * height + y) * width + x]; }
  double at(Index c, Index y, Index x) const { return pixels[(c * height + y) * width + x]; }
};

// Binary P5 (grayscale) or P6 (RGB), maxval up to 65535. Throws FormatError
// with the byte offset of the first problem.
Image decode_netpbm(std::span<const std::uint8_t> bytes);
// P6 for 3 channels, P5 for 1; 8-bit, values rounded to the nearest 1/255.
std::vector<std::uint8_t> encode_netpbm(const Image& image);

// Half-pixel-centred bilinear interpolation, edge-clamped.
Image resize_bilinear(const Image& image, Index height, Index width);
// Grayscale becomes three identical channels; RGB passes through.
Image to_rgb(const Image& image);

// decode + scale to [0,1] + promote to RGB + resize to height x width.
Image load_image(const std::filesystem::path& path, Index height, Index width);
void save_image(const Image& image, const std::filesystem::path& path);

struct Dataset {
  Index channels = 3;
  Index height = 32;
  Index width = 32;
  MetadataSchema schema;
  std::vector<std::string> ids;
  std::vector<MetadataRecord> records;  // raw values, schema column order
  Matrix images;                        // n x (C*H*W)
  Matrix metadata;                      // n x encoded width
  std::vector<int> labels;

  Index size() const { return static_cast<Index>(labels.size()); }
  Index num_classes() const { return static_cast<Index>(schema.classes.size()); }
  std::vector<Index> class_counts() const;
  Dataset subset(std::span<const int> indices) const;
  Image image(Index i) const;
};

struct MetadataTable {
  std::vector<std::string> ids;
  std::vector<MetadataRecord> records;
  std::vector<int> labels;
};

// Header-keyed: needs `id`, `diagnostic` and every schema column.
MetadataTable parse_metadata_csv(std::string_view csv_text, const MetadataSchema& schema);
MetadataTable load_metadata_csv(const std::filesystem::path& csv_path,
                                const std::filesystem::path& schema_path);

Dataset load_dataset_dir(const std::filesystem::path& dir, Index height, Index width);
void write_dataset_dir(const Dataset& dataset, const std::filesystem::path& dir);

enum class Complementarity { Redundant, Complementary, ImageOnly, MetaOnly };

std::string to_string(Complementarity mode);
Complementarity complementarity_from_string(const std::string& name);

struct SyntheticSpec {
  std::vector<Index> samples_per_class{80, 90, 20, 50, 40, 50};
  Index channels = 3;
  Index height = 32;
  Index width = 32;
  double image_signal = 1.0;  // alpha_img
  double meta_signal = 1.0;   // alpha_meta
  Complementarity mode = Complementarity::Redundant;
  double noise = 0.1;
  Index categorical_columns = 4;
  Index vocabulary_size = 6;
  std::uint64_t seed = 0;

  Index num_classes() const { return static_cast<Index>(samples_per_class.size()); }
  void validate() const;
};

// Which template an image shows and which metadata peak a record follows,
// for a given class; -1 means the modality carries no class signal.
struct SignalKeys {
  int image = -1;
  int metadata = -1;
};
SignalKeys signal_keys(const SyntheticSpec& spec, int label);

// Noise-free class template for a signal key.
Image synthetic_template(Index key, Index channels, Index height, Index width);

Dataset generate_synthetic(const SyntheticSpec& spec);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace jif
