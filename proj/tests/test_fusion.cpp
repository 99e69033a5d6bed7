#include <cmath>

#include "doctest.h"
#include "jif/fusion.hpp"
#include "test_util.hpp"

using namespace jif;

namespace {

Tensor row(std::initializer_list<double> v) {
  Matrix m(1, static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) m(0, i++) = x;
  return Tensor::constant(m);
}

AttentionConfig attention(Index heads, Index d_img, Index d_meta, bool literal = false) {
  AttentionConfig cfg;
  cfg.heads = heads;
  cfg.image_width = d_img;
  cfg.metadata_width = d_meta;
  cfg.literal_eq7 = literal;
  return cfg;
}

}  // namespace

TEST_CASE("fuse_concat") {
  CHECK(fuse_concat(row({1, 2}), row({3})).value() == row({1, 2, 3}).value());
  Rng rng(1);
  CHECK(fuse_concat(Tensor::constant(Matrix::Zero(2, 128)), Tensor::constant(Matrix::Zero(2, 64))).cols() ==
        192);
  CHECK_THROWS_AS(fuse_concat(Tensor::constant(Matrix::Zero(2, 3)), Tensor::constant(Matrix::Zero(3, 3))),
                  DimensionError);

  Tensor a = Tensor::parameter(test::random_matrix(2, 3, rng));
  Tensor b = Tensor::parameter(test::random_matrix(2, 2, rng));
  const Matrix up = test::random_matrix(2, 5, rng);
  backward(sum(mul(fuse_concat(a, b), Tensor::constant(up))));
  CHECK(a.grad() == up.leftCols(3));
  CHECK(b.grad() == up.rightCols(2));
}

TEST_CASE("qkv projection: zero parameters, widths and gradient") {
  Rng rng(2);
  QkvProjection proj(128, 128, rng);
  CHECK(proj.fc().out_features() == 384);
  proj.fc().weight.mutable_value().setZero();
  proj.fc().bias.mutable_value().setZero();
  const auto [q, k, v] = proj.forward(Tensor::constant(test::random_matrix(3, 128, rng)), Mode::Train);
  CHECK(q.value().cwiseAbs().maxCoeff() == 0.0);
  CHECK(k.value().cwiseAbs().maxCoeff() == 0.0);
  CHECK(v.value().cwiseAbs().maxCoeff() == 0.0);

  QkvProjection small(4, 2, rng);
  const Tensor x = Tensor::constant(test::random_matrix(5, 4, rng));
  const Matrix w = test::random_matrix(5, 2, rng);
  Parameters p;
  small.collect("qkv", p);
  auto leaves = p.leaves();
  auto f = [&] {
    const auto parts = small.forward(x, Mode::Train);
    return add(add(sum(mul(parts[0], Tensor::constant(w))), sum(mul(parts[1], parts[1]))),
               sum(mul(parts[2], mul(parts[0], Tensor::constant(w)))));
  };
  CHECK(grad_check_leaves(f, leaves).max_rel_error < 1e-4);
}

TEST_CASE("assemble_kqv puts the metadata part first") {
  const QKV img{row({1}), row({5}), row({7})};
  const QKV meta{row({0}), row({2}), row({3})};
  const QKV out = assemble_kqv(img, meta);
  CHECK(out[1].value() == row({2, 5}).value());
  CHECK(out[0].value() == row({0, 1}).value());
  CHECK(out[2].value() == row({3, 7}).value());
}

TEST_CASE("attention heads: uniform weights when keys and queries vanish") {
  const AttentionConfig cfg = attention(2, 2, 2);
  const Tensor zero = Tensor::constant(Matrix::Zero(1, 4));
  const Tensor values = row({2, 4, 6, 8});
  const Matrix out = attention_heads(zero, zero, values, cfg).value();
  CHECK(out == (values.value() / 2.0));
}

TEST_CASE("attention heads: hand-evaluated softmax and saturation") {
  const AttentionConfig cfg = attention(1, 1, 1);
  // K*Q = [ln2*sqrt2, 0]; after the 1/sqrt(2) temperature the logits are [ln 2, 0].
  const Tensor q = row({std::log(2.0) * std::sqrt(2.0), 0.0});
  const Tensor k = row({1.0, 0.0});
  const Matrix w = attention_weights(q, k, cfg).value();
  CHECK(w(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(w(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

  const AttentionConfig wide = attention(1, 2, 2);
  const Matrix out = attention_heads(row({1, 1, 1, 1}), row({0, 200, 0, 0}), row({3, 9, 4, 5}), wide).value();
  CHECK(out(0, 1) == doctest::Approx(9.0));
  CHECK(std::abs(out(0, 0)) < 1e-12);
  CHECK(std::abs(out(0, 2)) < 1e-12);
  CHECK(std::abs(out(0, 3)) < 1e-12);
}

TEST_CASE("literal mode divides the softmax output") {
  const AttentionConfig cfg = attention(1, 2, 2, true);
  const Tensor zero = Tensor::constant(Matrix::Zero(1, 4));
  const Matrix w = attention_weights(zero, zero, cfg).value();
  CHECK(w == Matrix::Constant(1, 4, 0.25 / 2.0));
}

TEST_CASE("attention rejects indivisible widths") {
  CHECK_THROWS_AS(attention(5, 6, 3).validate(), DimensionError);
  const Tensor x = Tensor::constant(Matrix::Zero(1, 9));
  CHECK_THROWS_AS(attention_weights(x, x, attention(5, 6, 3)), DimensionError);
  Rng rng(3);
  CHECK_THROWS_AS(MMFA(6, 3, attention(4, 0, 0), rng), DimensionError);
}

TEST_CASE("attention weights lie on the per-head simplex") {
  Rng rng(4);
  const AttentionConfig cfg = attention(4, 8, 4);
  const Matrix q = test::random_matrix(50, 12, rng, -5.0, 5.0);
  const Matrix k = test::random_matrix(50, 12, rng, -5.0, 5.0);
  const Matrix w = attention_weights(Tensor::constant(q), Tensor::constant(k), cfg).value();
  CHECK(w.minCoeff() >= 0.0);
  for (Index r = 0; r < 50; ++r)
    for (Index h = 0; h < 4; ++h) CHECK(std::abs(w.block(r, h * 3, 1, 3).sum() - 1.0) < 1e-12);
}

TEST_CASE("mmfa: width law, default arithmetic and skip identity") {
  Rng rng(5);
  MMFA defaults(128, 64, AttentionConfig{}, rng);
  CHECK(defaults.output_width() == 192);
  CHECK(defaults.config().total_width() == 192);
  CHECK(defaults.config().head_width() == 24);

  MMFA m(6, 3, attention(3, 0, 0), rng);
  const Tensor fi = Tensor::constant(test::random_matrix(4, 6, rng));
  const Tensor fm = Tensor::constant(test::random_matrix(4, 3, rng));
  CHECK(mmfa_fuse(fi, fm, m, Mode::Train).cols() == 9);
  m.zero_parameters();
  CHECK(mmfa_fuse(fi, fm, m, Mode::Train).value() == fuse_concat(fi, fm).value());
}

TEST_CASE("mmfa: eval mode is batch-equivariant") {
  Rng rng(6);
  MMFA m(6, 3, attention(3, 0, 0), rng);
  // Move running stats off the defaults.
  for (int i = 0; i < 3; ++i)
    mmfa_fuse(Tensor::constant(test::random_matrix(8, 6, rng)), Tensor::constant(test::random_matrix(8, 3, rng)),
              m, Mode::Train);
  const Matrix fi = test::random_matrix(5, 6, rng);
  const Matrix fm = test::random_matrix(5, 3, rng);
  const std::vector<Index> perm{3, 0, 4, 1, 2};
  Matrix pi(5, 6), pm(5, 3);
  for (Index r = 0; r < 5; ++r) {
    pi.row(r) = fi.row(perm[static_cast<std::size_t>(r)]);
    pm.row(r) = fm.row(perm[static_cast<std::size_t>(r)]);
  }
  const Matrix out = mmfa_fuse(Tensor::constant(fi), Tensor::constant(fm), m, Mode::Eval).value();
  const Matrix permuted = mmfa_fuse(Tensor::constant(pi), Tensor::constant(pm), m, Mode::Eval).value();
  for (Index r = 0; r < 5; ++r)
    CHECK((permuted.row(r) - out.row(perm[static_cast<std::size_t>(r)])).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("mmfa: full gradient check on toy dims, both scaling placements") {
  for (bool literal : {false, true}) {
    Rng rng(7);
    MMFA m(6, 3, attention(3, 0, 0, literal), rng);
    Tensor fi = Tensor::parameter(test::random_matrix(4, 6, rng));
    Tensor fm = Tensor::parameter(test::random_matrix(4, 3, rng));
    const Tensor w = Tensor::constant(test::random_matrix(4, 9, rng));
    Parameters p;
    m.collect("mmfa", p);
    auto leaves = p.leaves();
    leaves.push_back(fi);
    leaves.push_back(fm);
    const auto report =
        grad_check_leaves([&] { return sum(mul(mmfa_fuse(fi, fm, m, Mode::Train), w)); }, leaves);
    CHECK(report.max_rel_error < 1e-4);
  }
}

TEST_CASE("fusion module wrapper") {
  Rng rng(8);
  FusionModule cat = FusionModule::concat(4, 2);
  CHECK(cat.kind() == FusionKind::Concat);
  CHECK(cat.output_width() == 6);
  CHECK(cat.attention() == nullptr);
  FusionModule att = FusionModule::mmfa(4, 2, attention(2, 0, 0), rng);
  CHECK(att.output_width() == 6);
  CHECK(fusion_kind_from_string(to_string(FusionKind::MMFA)) == FusionKind::MMFA);
  CHECK(fusion_kind_from_string("cat") == FusionKind::Concat);
  CHECK_THROWS_AS(fusion_kind_from_string("sum"), ConfigError);
}
