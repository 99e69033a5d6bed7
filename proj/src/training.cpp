#include "jif/training.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

#include "json.hpp"

namespace jif {

std::string to_string(ReportMode mode) { return mode == ReportMode::All ? "all" : "ofb"; }

ReportMode report_mode_from_string(const std::string& name) {
  if (name == "all") return ReportMode::All;
  if (name == "ofb") return ReportMode::OFB;
  throw ConfigError("unknown report mode '" + name + "' (expected \"ofb\" or \"all\")");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (!(lr0 > 0.0)) throw ConfigError("lr0 must be positive");
  if (!(eta_min >= 0.0)) throw ConfigError("eta_min must be non-negative");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in [0, 1]");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string TrainLog::to_csv() const {
  std::string out = "epoch,lr,L_I,L_M,L_IM,val_bac\n";
  for (const auto& e : epochs) {
    out += std::to_string(e.epoch) + "," + fmt(e.lr) + "," + fmt(e.loss_image) + "," +
           fmt(e.loss_metadata) + "," + fmt(e.loss_fused) + "," + fmt(e.val_bac) + "\n";
  }
  return out;
}

double cosine_lr(int t, int total, double lr0, double eta_min) {
  if (total <= 0) throw ConfigError("cosine schedule needs a positive epoch budget");
  if (t < 0 || t > total) {
    throw ContractError("cosine schedule: epoch " + std::to_string(t) + " outside [0, " +
                        std::to_string(total) + "]");
  }
  return eta_min + 0.5 * (lr0 - eta_min) *
                       (1.0 + std::cos(std::numbers::pi * static_cast<double>(t) / total));
}

void sgd_step(Parameters& params, double lr, double momentum, std::map<std::string, Matrix>* velocity) {
  if (!(lr >= 0.0)) throw ConfigError("learning rate must be non-negative");
  for (auto& [name, t] : params.tensors) {
    if (!t.has_grad()) continue;
    const Matrix g = t.grad();
    if (!g.allFinite()) throw NumericError("non-finite gradient for parameter " + name);
    if (momentum > 0.0 && velocity != nullptr) {
      auto [it, fresh] = velocity->try_emplace(name, Matrix::Zero(g.rows(), g.cols()));
      it->second = momentum * it->second + g;
      t.mutable_value() -= lr * it->second;
    } else {
      t.mutable_value() -= lr * g;
    }
  }
}

// ---- augmentation ----

Image flip_horizontal(const Image& image) {
  Image out(image.channels, image.height, image.width);
  for (Index c = 0; c < image.channels; ++c)
    for (Index y = 0; y < image.height; ++y)
      for (Index x = 0; x < image.width; ++x) out.at(c, y, x) = image.at(c, y, image.width - 1 - x);
  return out;
}

Image flip_vertical(const Image& image) {
  Image out(image.channels, image.height, image.width);
  for (Index c = 0; c < image.channels; ++c)
    for (Index y = 0; y < image.height; ++y)
      for (Index x = 0; x < image.width; ++x) out.at(c, y, x) = image.at(c, image.height - 1 - y, x);
  return out;
}

Image shift_image(const Image& image, Index dy, Index dx) {
  Image out(image.channels, image.height, image.width);
  for (Index c = 0; c < image.channels; ++c) {
    for (Index y = 0; y < image.height; ++y) {
      const Index sy = y - dy;
      if (sy < 0 || sy >= image.height) continue;
      for (Index x = 0; x < image.width; ++x) {
        const Index sx = x - dx;
        if (sx < 0 || sx >= image.width) continue;
        out.at(c, y, x) = image.at(c, sy, sx);
      }
    }
  }
  return out;
}

namespace {

// Inverse-maps every output pixel through `source(y, x) -> (sy, sx)`.
template <typename Map>
Image remap_nearest(const Image& image, Map source) {
  Image out(image.channels, image.height, image.width);
  for (Index y = 0; y < image.height; ++y) {
    for (Index x = 0; x < image.width; ++x) {
      const auto [fy, fx] = source(static_cast<double>(y), static_cast<double>(x));
      const auto sy = static_cast<Index>(std::lround(fy));
      const auto sx = static_cast<Index>(std::lround(fx));
      if (sy < 0 || sy >= image.height || sx < 0 || sx >= image.width) continue;
      for (Index c = 0; c < image.channels; ++c) out.at(c, y, x) = image.at(c, sy, sx);
    }
  }
  return out;
}

}  // namespace

Image rotate_image(const Image& image, double degrees) {
  const double rad = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(rad), sn = std::sin(rad);
  const double cy = 0.5 * static_cast<double>(image.height - 1);
  const double cx = 0.5 * static_cast<double>(image.width - 1);
  return remap_nearest(image, [&](double y, double x) {
    const double dy = y - cy, dx = x - cx;
    return std::pair{cy + sn * dx + cs * dy, cx + cs * dx - sn * dy};
  });
}

Image scale_image(const Image& image, double factor) {
  const double cy = 0.5 * static_cast<double>(image.height - 1);
  const double cx = 0.5 * static_cast<double>(image.width - 1);
  return remap_nearest(image, [&](double y, double x) {
    return std::pair{cy + (y - cy) / factor, cx + (x - cx) / factor};
  });
}

Image augment(const Image& image, Rng& rng, const AugmentConfig& cfg) {
  Image out = image;
  if (rng.bernoulli(cfg.hflip)) out = flip_horizontal(out);
  if (rng.bernoulli(cfg.vflip)) out = flip_vertical(out);
  if (rng.bernoulli(cfg.shift)) {
    const auto max_dy = static_cast<Index>(cfg.max_shift_fraction * static_cast<double>(out.height));
    const auto max_dx = static_cast<Index>(cfg.max_shift_fraction * static_cast<double>(out.width));
    const Index dy = static_cast<Index>(rng.below(static_cast<std::uint64_t>(2 * max_dy + 1))) - max_dy;
    const Index dx = static_cast<Index>(rng.below(static_cast<std::uint64_t>(2 * max_dx + 1))) - max_dx;
    out = shift_image(out, dy, dx);
  }
  if (rng.bernoulli(cfg.rotate)) {
    switch (rng.below(3)) {
      case 0: out = rotate_image(out, 90.0); break;
      case 1: out = rotate_image(out, -90.0); break;
      default:
        out = rotate_image(out, rng.uniform(-cfg.max_small_angle_deg, cfg.max_small_angle_deg));
    }
  }
  if (rng.bernoulli(cfg.scale)) out = scale_image(out, rng.uniform(cfg.min_scale, cfg.max_scale));
  return out;
}

// ---- prediction and metrics ----

Matrix Predictions::scores(Structure structure, ReportMode mode) const {
  switch (structure) {
    case Structure::ImageOnly: return image;
    case Structure::JF: return fused;
    case Structure::JIF: return mode == ReportMode::All ? decision_fuse(image, metadata, fused) : fused;
  }
  return fused;
}

Predictions predict(ModelAssembly& model, const Dataset& data, Index batch_size) {
  Predictions out;
  const Index n = data.size();
  const Index classes = model.config().num_classes;
  const bool has_meta = model.structure() != Structure::ImageOnly;
  const bool jif = model.structure() == Structure::JIF;
  if (!has_meta || jif) out.image.resize(n, classes);
  if (jif) out.metadata.resize(n, classes);
  if (has_meta) out.fused.resize(n, classes);
  for (Index start = 0; start < n; start += batch_size) {
    const Index len = std::min(batch_size, n - start);
    const Tensor images = Tensor::constant(data.images.middleRows(start, len));
    const Tensor meta = Tensor::constant(data.metadata.middleRows(start, len));
    const PredictionTriple p = model.forward(images, meta, Mode::Eval);
    if (p.image.present()) out.image.middleRows(start, len) = p.image.probs.value();
    if (p.metadata.present()) out.metadata.middleRows(start, len) = p.metadata.probs.value();
    if (p.fused.present()) out.fused.middleRows(start, len) = p.fused.probs.value();
  }
  return out;
}

Metrics evaluate_scores(const Matrix& scores, std::span<const int> labels, int num_classes) {
  Metrics m;
  const std::vector<int> pred = argmax_rows(scores);
  m.confusion = confusion(labels, pred, num_classes);
  m.bac = balanced_accuracy(m.confusion);
  m.acc = accuracy(m.confusion);
  const Eigen::VectorXd recall = per_class_recall(m.confusion);
  m.per_class_recall.assign(recall.data(), recall.data() + recall.size());
  try {
    m.auc = auc_macro_ovr(scores, labels);
  } catch (const DataError&) {
    m.auc = std::numeric_limits<double>::quiet_NaN();
  }
  return m;
}

std::string metrics_to_json(const Metrics& m) {
  nlohmann::json doc;
  doc["bac"] = m.bac;
  doc["acc"] = m.acc;
  doc["auc"] = std::isnan(m.auc) ? nlohmann::json(nullptr) : nlohmann::json(m.auc);
  doc["per_class_recall"] = nlohmann::json::array();
  for (double r : m.per_class_recall)
    doc["per_class_recall"].push_back(std::isnan(r) ? nlohmann::json(nullptr) : nlohmann::json(r));
  return doc.dump(2) + "\n";
}

std::string confusion_to_csv(const ConfusionMatrix& cm, const std::vector<std::string>& classes) {
  std::string out = "true\\pred";
  for (Index c = 0; c < cm.cols(); ++c) {
    out += "," + (static_cast<std::size_t>(c) < classes.size() ? classes[static_cast<std::size_t>(c)]
                                                                : std::to_string(c));
  }
  out += "\n";
  for (Index r = 0; r < cm.rows(); ++r) {
    out += static_cast<std::size_t>(r) < classes.size() ? classes[static_cast<std::size_t>(r)]
                                                         : std::to_string(r);
    for (Index c = 0; c < cm.cols(); ++c) out += "," + std::to_string(cm(r, c));
    out += "\n";
  }
  return out;
}

// ---- training loop ----

namespace {

std::vector<std::vector<int>> make_batches(std::span<const int> order, Index batch_size) {
  std::vector<std::vector<int>> batches;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  // Train-mode batch norm has no variance on a single sample.
  if (batches.size() > 1 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

}  // namespace

TrainResult train(ModelAssembly& model, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.size() == 0 || val_set.size() == 0) {
    throw ConfigError("training and validation splits must both be non-empty");
  }
  TrainResult result;
  result.class_weights = class_weights_from_counts(train_set.class_counts());
  const int num_classes = static_cast<int>(model.config().num_classes);

  Parameters params = model.parameters();
  std::map<std::string, Matrix> velocity;
  Rng rng(cfg.seed);
  std::vector<int> order(static_cast<std::size_t>(train_set.size()));
  std::iota(order.begin(), order.end(), 0);

  Checkpoint best = Checkpoint::capture(params);
  TrainLog& log = result.log;
  log.stop_reason = "epoch budget exhausted";
  const Index pixels = train_set.images.cols();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = cosine_lr(epoch, cfg.epochs, cfg.lr0, cfg.eta_min);
    rng.shuffle(std::span<int>(order));
    const auto batches = make_batches(order, cfg.batch_size);
    for (const auto& batch : batches) {
      const auto len = static_cast<Index>(batch.size());
      Matrix images(len, pixels);
      Matrix meta(len, train_set.metadata.cols());
      std::vector<int> labels(batch.size());
      for (Index i = 0; i < len; ++i) {
        const int src = batch[static_cast<std::size_t>(i)];
        if (cfg.augment) {
          images.row(i) = augment(train_set.image(src), rng, cfg.augmentation).pixels.matrix().transpose();
        } else {
          images.row(i) = train_set.images.row(src);
        }
        meta.row(i) = train_set.metadata.row(src);
        labels[static_cast<std::size_t>(i)] = train_set.labels[static_cast<std::size_t>(src)];
      }
      const PredictionTriple triple =
          model.forward(Tensor::constant(std::move(images)), Tensor::constant(std::move(meta)), Mode::Train);
      const LossBreakdown loss =
          total_loss(triple, model.structure(), labels, result.class_weights, cfg.beta);
      if (!std::isfinite(loss.total.item())) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
      }
      params.zero_grad();
      backward(loss.total);
      sgd_step(params, rec.lr, cfg.momentum, &velocity);
      rec.loss_image += loss.image.value_or(0.0);
      rec.loss_metadata += loss.metadata.value_or(0.0);
      rec.loss_fused += loss.fused.value_or(0.0);
      rec.loss_total += loss.total.item();
    }
    const auto nb = static_cast<double>(batches.size());
    rec.loss_image /= nb;
    rec.loss_metadata /= nb;
    rec.loss_fused /= nb;
    rec.loss_total /= nb;

    const Predictions val = predict(model, val_set);
    const Matrix scores = val.scores(model.structure(), cfg.report);
    rec.val_bac = balanced_accuracy(confusion(val_set.labels, argmax_rows(scores), num_classes));
    log.epochs.push_back(rec);

    if (log.best_epoch < 0 || rec.val_bac > log.best_val_bac) {
      log.best_epoch = epoch;
      log.best_val_bac = rec.val_bac;
      best = Checkpoint::capture(params);
    } else if (epoch - log.best_epoch >= cfg.patience) {
      log.stop_reason = "validation BAC did not improve for " + std::to_string(cfg.patience) + " epochs";
      break;
    }
  }
  params.zero_grad();
  best.restore(params);
  return result;
}

// ---- checkpoints ----

Checkpoint Checkpoint::capture(const Parameters& params) {
  Checkpoint c;
  for (const auto& [name, t] : params.tensors) c.arrays.emplace_back(name, t.value());
  for (const auto& [name, state] : params.norms) {
    c.arrays.emplace_back(name + ".running_mean", Matrix(state->running_mean));
    c.arrays.emplace_back(name + ".running_var", Matrix(state->running_var));
  }
  return c;
}

void Checkpoint::restore(Parameters& params) const {
  std::map<std::string, const Matrix*> by_name;
  for (const auto& [name, m] : arrays) by_name[name] = &m;
  auto fetch = [&](const std::string& name, Index rows, Index cols) -> const Matrix& {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw DataError("checkpoint has no array '" + name + "'");
    if (it->second->rows() != rows || it->second->cols() != cols) {
      throw DimensionError("checkpoint array '" + name + "' has the wrong shape");
    }
    return *it->second;
  };
  for (auto& [name, t] : params.tensors) t.mutable_value() = fetch(name, t.rows(), t.cols());
  for (auto& [name, state] : params.norms) {
    const Index n = state->running_mean.size();
    state->running_mean = fetch(name + ".running_mean", 1, n);
    state->running_var = fetch(name + ".running_var", 1, n);
  }
}

}  // namespace jif
