#include <algorithm>
#include <functional>

#include "jif/experiment.hpp"
#include "jif/structures.hpp"

namespace jif {

namespace {

Matrix random_matrix(Index rows, Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
  return m;
}

// Identity forward, doubled backward.
Tensor faulty_identity(const Tensor& x) {
  return make_op("fault", x.value(), x.shape(), {x},
                 [](const Matrix& g, std::span<const detail::NodePtr> in) { in[0]->accumulate(2.0 * g); });
}

// Scalar readout sum(out * R) with a fixed random R, so every output
// coordinate contributes a distinct weight.
Tensor readout(const Tensor& out, const Matrix& weights) {
  return sum(mul(out, Tensor::constant(weights, out.shape())));
}

struct Block {
  std::string name;
  std::function<Tensor()> f;
  std::vector<Tensor> leaves;
};

constexpr Index kBatch = 6;
constexpr Index kClasses = 3;

}  // namespace

std::vector<std::string> gradcheck_block_names() {
  return {"metadata_encoder",      "image_encoder",           "fuse_concat",
          "mmfa_fuse[scaled]",     "mmfa_fuse[literal]",      "head_C_I",
          "head_C_M",              "head_C_IM",               "total_loss[beta=0]",
          "total_loss[beta=0.5]",  "total_loss[beta=1]"};
}

std::vector<GradCheckBlockResult> run_gradcheck_suite(std::uint64_t seed, const std::string& inject_fault,
                                                      double tol) {
  const auto names = gradcheck_block_names();
  if (!inject_fault.empty() && std::find(names.begin(), names.end(), inject_fault) == names.end()) {
    throw ConfigError("unknown gradcheck block '" + inject_fault + "'");
  }
  Rng rng(seed);
  const std::vector<int> labels{0, 1, 2, 0, 1, 2};
  const std::vector<double> class_weights{0.5, 1.25, 2.0};
  auto guard = [&](const std::string& block, const Tensor& t) {
    return block == inject_fault ? faulty_identity(t) : t;
  };
  auto with_params = [](Parameters p, std::vector<Tensor> extra = {}) {
    std::vector<Tensor> leaves = p.leaves();
    leaves.insert(leaves.end(), extra.begin(), extra.end());
    return leaves;
  };

  std::vector<Block> blocks;

  // Encoders.
  auto meta_enc = std::make_shared<MetadataEncoder>(5, std::vector<Index>{4, 3}, rng);
  const Tensor meta_in = Tensor::constant(random_matrix(kBatch, 5, rng));
  const Matrix meta_r = random_matrix(kBatch, 3, rng);
  {
    Parameters p;
    meta_enc->collect("meta", p);
    blocks.push_back({names[0],
                      [=] { return readout(guard(names[0], meta_enc->forward(meta_in, Mode::Train)), meta_r); },
                      with_params(p)});
  }

  ImageEncoderConfig img_cfg;
  img_cfg.channels = 2;
  img_cfg.height = img_cfg.width = 8;
  img_cfg.block_channels = {2, 3};
  img_cfg.output_dim = 4;
  auto img_enc = std::make_shared<ImageEncoder>(img_cfg, rng);
  const Tensor img_in = Tensor::constant(random_matrix(kBatch, 2 * 8 * 8, rng));
  const Matrix img_r = random_matrix(kBatch, 4, rng);
  {
    Parameters p;
    img_enc->collect("image", p);
    blocks.push_back({names[1],
                      [=] { return readout(guard(names[1], img_enc->forward(img_in, Mode::Train)), img_r); },
                      with_params(p)});
  }

  // Fusion.
  const Tensor f_i = Tensor::parameter(random_matrix(kBatch, 4, rng));
  const Tensor f_m = Tensor::parameter(random_matrix(kBatch, 2, rng));
  const Matrix fused_r = random_matrix(kBatch, 6, rng);
  blocks.push_back({names[2], [=] { return readout(guard(names[2], fuse_concat(f_i, f_m)), fused_r); }, {f_i, f_m}});

  for (int literal = 0; literal < 2; ++literal) {
    AttentionConfig att;
    att.heads = 3;
    att.literal_eq7 = literal == 1;
    auto mmfa = std::make_shared<MMFA>(4, 2, att, rng);
    Parameters p;
    mmfa->collect("mmfa", p);
    const std::string& name = names[static_cast<std::size_t>(3 + literal)];
    blocks.push_back({name,
                      [=] { return readout(guard(name, mmfa->forward(f_i, f_m, Mode::Train)), fused_r); },
                      with_params(p, {f_i, f_m})});
  }

  // Classifier heads under the class-weighted loss.
  const std::array<Index, 3> head_inputs{4, 2, 6};
  for (std::size_t h = 0; h < 3; ++h) {
    auto head = std::make_shared<Linear>(head_inputs[h], kClasses, rng);
    const Tensor x = Tensor::parameter(random_matrix(kBatch, head_inputs[h], rng));
    const std::string& name = names[5 + h];
    blocks.push_back({name,
                      [=] { return weighted_cross_entropy(guard(name, (*head)(x)), labels, class_weights); },
                      {head->weight, head->bias, x}});
  }

  // Full JIF-MMFA assembly under the total loss.
  AssemblyConfig model_cfg;
  model_cfg.structure = Structure::JIF;
  model_cfg.fusion = FusionKind::MMFA;
  model_cfg.num_classes = kClasses;
  model_cfg.image = img_cfg;
  model_cfg.image.block_channels = {2};
  model_cfg.metadata_input_width = 5;
  model_cfg.metadata_widths = {2};
  model_cfg.attention.heads = 2;
  auto model = std::make_shared<ModelAssembly>(model_cfg, rng);
  const std::array<double, 3> betas{0.0, 0.5, 1.0};
  for (std::size_t b = 0; b < 3; ++b) {
    const std::string& name = names[8 + b];
    const double beta = betas[b];
    blocks.push_back({name,
                      [=] {
                        const PredictionTriple t = model->forward(img_in, meta_in, Mode::Train);
                        return guard(name, total_loss(t, Structure::JIF, labels, class_weights, beta).total);
                      },
                      with_params(model->parameters())});
  }

  std::vector<GradCheckBlockResult> results;
  for (auto& block : blocks) {
    const GradCheckReport r = grad_check_leaves(block.f, block.leaves, 1e-5, tol, kModuleGradFloor);
    Index count = 0;
    for (const auto& leaf : block.leaves) count += leaf.size();
    results.push_back({block.name, r.max_rel_error, count, r.pass});
  }
  return results;
}

}  // namespace jif
