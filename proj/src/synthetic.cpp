#include <algorithm>
#include <cmath>
#include <cstdio>

#include "jif/data.hpp"
#include "jif/rng.hpp"

namespace jif {

std::string to_string(Complementarity mode) {
  switch (mode) {
    case Complementarity::Redundant: return "redundant";
    case Complementarity::Complementary: return "complementary";
    case Complementarity::ImageOnly: return "image-only";
    case Complementarity::MetaOnly: return "meta-only";
  }
  return "?";
}

Complementarity complementarity_from_string(const std::string& name) {
  if (name == "redundant") return Complementarity::Redundant;
  if (name == "complementary") return Complementarity::Complementary;
  if (name == "image-only") return Complementarity::ImageOnly;
  if (name == "meta-only") return Complementarity::MetaOnly;
  throw ConfigError("unknown complementarity mode '" + name + "'");
}

void SyntheticSpec::validate() const {
  const Index n = num_classes();
  if (n < 2) throw ConfigError("synthetic data needs at least two classes");
  for (Index c : samples_per_class) {
    if (c < 1) throw ConfigError("every class needs at least one sample");
  }
  if (mode == Complementarity::Complementary && n % 2 != 0) {
    throw ConfigError("complementary mode pairs classes into super-classes and needs an even class "
                      "count, got " + std::to_string(n));
  }
  if (!(image_signal >= 0.0 && image_signal <= 1.0) || !(meta_signal >= 0.0 && meta_signal <= 1.0)) {
    throw ConfigError("signal strengths must lie in [0, 1]");
  }
  if (!(noise >= 0.0)) throw ConfigError("noise must be non-negative");
  if (channels != 3 && channels != 1) throw ConfigError("synthetic images have 1 or 3 channels");
  if (height < 4 || width < 4) throw ConfigError("synthetic images must be at least 4x4");
  if (categorical_columns < 1 || vocabulary_size < 2) {
    throw ConfigError("need at least one categorical column with two or more values");
  }
  const Index meta_keys = mode == Complementarity::Complementary ? 2 : n;
  if (vocabulary_size < meta_keys) {
    throw ConfigError("vocabulary size " + std::to_string(vocabulary_size) +
                      " cannot separate " + std::to_string(meta_keys) + " metadata keys");
  }
}

SignalKeys signal_keys(const SyntheticSpec& spec, int label) {
  switch (spec.mode) {
    case Complementarity::Redundant: return {label, label};
    case Complementarity::Complementary: return {label / 2, label % 2};
    case Complementarity::ImageOnly: return {label, -1};
    case Complementarity::MetaOnly: return {-1, label};
  }
  return {};
}

Image synthetic_template(Index key, Index channels, Index height, Index width) {
  static constexpr double palette[][3] = {{0.9, 0.15, 0.1}, {0.1, 0.8, 0.2}, {0.15, 0.25, 0.95},
                                          {0.95, 0.85, 0.1}, {0.85, 0.1, 0.85}, {0.1, 0.85, 0.9},
                                          {0.6, 0.4, 0.2}, {0.5, 0.5, 0.5}};
  constexpr Index palette_size = sizeof(palette) / sizeof(palette[0]);
  const double* color = palette[key % palette_size];
  const Index shape = key % 3;
  Image img(channels, height, width);
  const double cy = 0.5 * static_cast<double>(height - 1);
  const double cx = 0.5 * static_cast<double>(width - 1);
  const double radius = 0.3 * static_cast<double>(std::min(height, width));
  for (Index y = 0; y < height; ++y) {
    for (Index x = 0; x < width; ++x) {
      const double dy = static_cast<double>(y) - cy;
      const double dx = static_cast<double>(x) - cx;
      bool inside = false;
      switch (shape) {
        case 0: inside = dx * dx + dy * dy <= radius * radius; break;           // disc
        case 1: inside = std::abs(dx) <= radius && std::abs(dy) <= radius; break;  // square
        default: inside = (y / std::max<Index>(height / 8, 1)) % 2 == 0; break;    // stripes
      }
      for (Index c = 0; c < channels; ++c) {
        const double v = channels == 3 ? color[c] : (color[0] + color[1] + color[2]) / 3.0;
        img.at(c, y, x) = inside ? v : 0.1;
      }
    }
  }
  return img;
}

namespace {

const std::vector<std::string>& lesion_names() {
  static const std::vector<std::string> names{"ACK", "BCC", "MEL", "NEV", "SCC", "SEK"};
  return names;
}

}  // namespace

Dataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const Index n_classes = spec.num_classes();
  Dataset ds;
  ds.channels = spec.channels;
  ds.height = spec.height;
  ds.width = spec.width;

  for (Index c = 0; c < n_classes; ++c) {
    ds.schema.classes.push_back(n_classes == 6 ? lesion_names()[static_cast<std::size_t>(c)]
                                               : "class" + std::to_string(c));
  }
  std::vector<std::string> vocab;
  for (Index v = 0; v < spec.vocabulary_size; ++v) vocab.push_back("v" + std::to_string(v));
  for (Index j = 0; j < spec.categorical_columns; ++j) {
    ds.schema.columns.push_back(
        {"feature" + std::to_string(j), ColumnKind::Categorical, vocab, 0.0, 1.0, MissingPolicy::Lenient});
  }
  // Uninformative numeric column, present so both encodings are exercised.
  ds.schema.columns.push_back({"age", ColumnKind::Numeric, {}, 0.0, 100.0, MissingPolicy::Lenient});

  Index total = 0;
  for (Index c : spec.samples_per_class) total += c;
  const Index pixels = spec.channels * spec.height * spec.width;
  ds.images.resize(total, pixels);
  ds.metadata.resize(total, ds.schema.encoded_width());

  std::vector<Image> templates;
  for (Index k = 0; k < n_classes; ++k) {
    templates.push_back(synthetic_template(k, spec.channels, spec.height, spec.width));
  }

  Rng rng(spec.seed);
  Index row = 0;
  for (Index c = 0; c < n_classes; ++c) {
    const SignalKeys keys = signal_keys(spec, static_cast<int>(c));
    for (Index s = 0; s < spec.samples_per_class[static_cast<std::size_t>(c)]; ++s, ++row) {
      const double alpha = keys.image >= 0 ? spec.image_signal : 0.0;
      for (Index p = 0; p < pixels; ++p) {
        const double base = keys.image >= 0 ? templates[static_cast<std::size_t>(keys.image)].pixels[p] : 0.0;
        double v = alpha * base + (1.0 - alpha) * rng.uniform();
        if (spec.noise > 0.0) v += spec.noise * rng.normal();
        ds.images(row, p) = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
      }

      MetadataRecord record;
      for (Index j = 0; j < spec.categorical_columns; ++j) {
        Index value;
        const bool peaked = keys.metadata >= 0 && rng.bernoulli(spec.meta_signal);
        if (peaked) {
          value = (keys.metadata + j) % spec.vocabulary_size;
        } else {
          value = static_cast<Index>(rng.below(static_cast<std::uint64_t>(spec.vocabulary_size)));
        }
        record.emplace_back(vocab[static_cast<std::size_t>(value)]);
      }
      record.emplace_back(std::to_string(20 + rng.below(61)));

      char id[32];
      std::snprintf(id, sizeof id, "syn_%06ld", static_cast<long>(row));
      ds.ids.emplace_back(id);
      ds.metadata.row(row) = one_hot_encode(record, ds.schema);
      ds.records.push_back(std::move(record));
      ds.labels.push_back(static_cast<int>(c));
    }
  }
  return ds;
}

}  // namespace jif
