#include "jif/encoders.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>

#include "json.hpp"

namespace jif {

using nlohmann::json;

Index MetadataColumn::width() const {
  return kind == ColumnKind::Categorical ? static_cast<Index>(vocabulary.size()) + 1 : 1;
}

Index MetadataSchema::encoded_width() const {
  Index w = 0;
  for (const auto& c : columns) w += c.width();
  return w;
}

void MetadataSchema::validate() const {
  std::set<std::string> names;
  for (const auto& c : columns) {
    if (!names.insert(c.name).second) throw ConfigError("duplicate metadata column '" + c.name + "'");
    if (c.kind == ColumnKind::Categorical) {
      if (c.vocabulary.empty()) throw ConfigError("column '" + c.name + "' has an empty vocabulary");
      std::set<std::string> seen(c.vocabulary.begin(), c.vocabulary.end());
      if (seen.size() != c.vocabulary.size()) {
        throw ConfigError("column '" + c.name + "' has duplicate vocabulary entries");
      }
    } else if (!(c.max > c.min)) {
      throw ConfigError("column '" + c.name + "' needs max > min");
    }
  }
  std::set<std::string> classes(this->classes.begin(), this->classes.end());
  if (classes.size() != this->classes.size()) throw ConfigError("duplicate class names in schema");
}

int MetadataSchema::class_index(std::string_view name) const {
  auto it = std::find(classes.begin(), classes.end(), name);
  return it == classes.end() ? -1 : static_cast<int>(it - classes.begin());
}

std::string schema_to_json(const MetadataSchema& schema) {
  json columns = json::array();
  for (const auto& c : schema.columns) {
    json col{{"name", c.name},
             {"missing", c.policy == MissingPolicy::Strict ? "strict" : "lenient"}};
    if (c.kind == ColumnKind::Categorical) {
      col["kind"] = "categorical";
      col["vocabulary"] = c.vocabulary;
    } else {
      col["kind"] = "numeric";
      col["min"] = c.min;
      col["max"] = c.max;
    }
    columns.push_back(std::move(col));
  }
  json doc{{"classes", schema.classes}, {"columns", std::move(columns)}};
  return doc.dump(2) + "\n";
}

MetadataSchema schema_from_json(std::string_view text) {
  MetadataSchema schema;
  try {
    const json doc = json::parse(text);
    schema.classes = doc.value("classes", std::vector<std::string>{});
    for (const auto& col : doc.at("columns")) {
      MetadataColumn c;
      c.name = col.at("name").get<std::string>();
      const auto kind = col.at("kind").get<std::string>();
      if (kind == "categorical") {
        c.kind = ColumnKind::Categorical;
        c.vocabulary = col.at("vocabulary").get<std::vector<std::string>>();
      } else if (kind == "numeric") {
        c.kind = ColumnKind::Numeric;
        c.min = col.at("min").get<double>();
        c.max = col.at("max").get<double>();
      } else {
        throw ConfigError("column '" + c.name + "': unknown kind '" + kind + "'");
      }
      const auto policy = col.value("missing", std::string("lenient"));
      if (policy != "strict" && policy != "lenient") {
        throw ConfigError("column '" + c.name + "': unknown missing policy '" + policy + "'");
      }
      c.policy = policy == "strict" ? MissingPolicy::Strict : MissingPolicy::Lenient;
      schema.columns.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("schema JSON: ") + e.what());
  }
  schema.validate();
  return schema;
}

RowVector one_hot_encode(const MetadataRecord& record, const MetadataSchema& schema) {
  if (record.size() != schema.columns.size()) {
    throw DataError("metadata record has " + std::to_string(record.size()) + " values, schema has " +
                    std::to_string(schema.columns.size()) + " columns");
  }
  RowVector out = RowVector::Zero(schema.encoded_width());
  Index offset = 0;
  for (std::size_t i = 0; i < record.size(); ++i) {
    const MetadataColumn& col = schema.columns[i];
    const bool missing = !record[i] || record[i]->empty();
    if (col.kind == ColumnKind::Categorical) {
      const Index unknown = static_cast<Index>(col.vocabulary.size());
      Index slot = unknown;
      if (!missing) {
        auto it = std::find(col.vocabulary.begin(), col.vocabulary.end(), *record[i]);
        if (it != col.vocabulary.end()) {
          slot = it - col.vocabulary.begin();
        } else if (col.policy == MissingPolicy::Strict) {
          throw DataError("column '" + col.name + "': value '" + *record[i] +
                          "' is not in the vocabulary");
        }
      }
      out[offset + slot] = 1.0;
    } else if (missing) {
      out[offset] = 0.5;
    } else {
      char* end = nullptr;
      const double v = std::strtod(record[i]->c_str(), &end);
      if (end == record[i]->c_str() || *end != '\0') {
        throw DataError("column '" + col.name + "': '" + *record[i] + "' is not numeric");
      }
      out[offset] = std::clamp((v - col.min) / (col.max - col.min), 0.0, 1.0);
    }
    offset += col.width();
  }
  return out;
}

// ---- metadata encoder ----

MetadataEncoder::MetadataEncoder(Index input_width, const std::vector<Index>& widths, Rng& rng)
    : input_width_(input_width) {
  if (widths.empty()) throw ConfigError("metadata encoder needs at least one block");
  Index in = input_width;
  for (Index w : widths) {
    blocks_.push_back({Linear(in, w, rng), BatchNorm(w)});
    in = w;
  }
}

Index MetadataEncoder::output_width() const {
  return blocks_.empty() ? input_width_ : blocks_.back().fc.out_features();
}

Tensor MetadataEncoder::forward(const Tensor& batch, Mode mode) {
  if (batch.cols() != input_width_) {
    throw DimensionError("metadata batch " + to_string(batch.shape()) + " does not match encoded width " +
                         std::to_string(input_width_));
  }
  Tensor h = batch;
  for (auto& block : blocks_) h = relu(block.norm(block.fc(h), mode));
  return h;
}

void MetadataEncoder::collect(const std::string& prefix, Parameters& out) {
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const std::string p = prefix + ".block" + std::to_string(i);
    blocks_[i].fc.collect(p + ".fc", out);
    blocks_[i].norm.collect(p + ".bn", out);
  }
}

// ---- image encoder ----

ImageEncoder::ImageEncoder(const ImageEncoderConfig& config, Rng& rng) : config_(config) {
  const Index reduction = Index{1} << config.block_channels.size();
  if (config.height % reduction != 0 || config.width % reduction != 0) {
    throw ConfigError("image size " + std::to_string(config.height) + "x" +
                      std::to_string(config.width) + " is not divisible by " +
                      std::to_string(reduction) + " for " +
                      std::to_string(config.block_channels.size()) + " pooling blocks");
  }
  Index in = config.channels;
  for (Index c : config.block_channels) {
    blocks_.push_back({Conv2d(in, c, config.kernel_size, rng), BatchNorm(c)});
    in = c;
  }
  projection_ = Linear(in, config.output_dim, rng);
}

Tensor ImageEncoder::forward(const Tensor& batch, Mode mode) {
  const Shape expected{batch.rows(), config_.channels, config_.height, config_.width};
  Tensor h = batch;
  if (batch.shape() != expected) {
    if (batch.size() != element_count(expected)) {
      throw DimensionError("image batch " + to_string(batch.shape()) + " does not match " +
                           to_string(expected));
    }
    h = reshape(batch, expected);
  }
  for (auto& block : blocks_) h = max_pool2(relu(block.norm(block.conv(h), mode)));
  return projection_(global_avg_pool(h));
}

void ImageEncoder::collect(const std::string& prefix, Parameters& out) {
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const std::string p = prefix + ".block" + std::to_string(i);
    blocks_[i].conv.collect(p + ".conv", out);
    blocks_[i].norm.collect(p + ".bn", out);
  }
  projection_.collect(prefix + ".proj", out);
}

}  // namespace jif
