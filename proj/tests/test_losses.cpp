#include "facefit/losses.hpp"
#include "facefit/noise.hpp"
#include "facefit/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace facefit;

namespace {

Image random_image(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  Image img(w, h);
  for (Index i = 0; i < img.data().size(); ++i) img.data().data()[i] = rng.uniform(0.05, 0.95);
  return img;
}

}  // namespace

TEST_SUITE_BEGIN("losses");

TEST_CASE("identity_loss: zero on identical images, two on antipodal features") {
  const auto f = make_identity_extractor(64);
  const Image a = random_image(32, 32, 1);
  CHECK(identity_loss(a, a, *f) == 0.0);

  Rng rng(2);
  VecX fa(16);
  for (Index i = 0; i < 16; ++i) fa[i] = rng.normal();
  CHECK(identity_loss_features(fa, -fa) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK_THROWS_AS(identity_loss_features(VecX::Zero(16), fa), std::invalid_argument);
}

TEST_CASE("identity_loss: matches the scalar cosine oracle and is symmetric") {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    VecX fa(24), fb(24);
    for (Index i = 0; i < 24; ++i) {
      fa[i] = rng.normal();
      fb[i] = rng.normal();
    }
    Real dot = 0, na = 0, nb = 0;
    for (Index i = 0; i < 24; ++i) {
      dot += fa[i] * fb[i];
      na += fa[i] * fa[i];
      nb += fb[i] * fb[i];
    }
    const Real expected = 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
    REQUIRE(identity_loss_features(fa, fb) == doctest::Approx(expected).epsilon(1e-12));
    REQUIRE(identity_loss_features(fa, fb) ==
            doctest::Approx(identity_loss_features(fb, fa)).epsilon(1e-12));
    REQUIRE(identity_loss_features(fa, fb) >= 0.0);
    REQUIRE(identity_loss_features(fa, fb) <= 2.0);
  }
}

TEST_CASE("identity_loss gradient matches finite differences") {
  Rng rng(4);
  VecX fa(16), fb(16);
  for (Index i = 0; i < 16; ++i) {
    fa[i] = rng.normal();
    fb[i] = rng.normal();
  }
  VecX dfa;
  identity_loss_features(fa, fb, &dfa);
  const Real h = 1e-6;
  for (Index k = 0; k < 16; ++k) {
    VecX p = fa, m = fa;
    p[k] += h;
    m[k] -= h;
    const Real fd = (identity_loss_features(p, fb) - identity_loss_features(m, fb)) / (2 * h);
    REQUIRE(std::abs(dfa[k] - fd) / std::max(std::abs(fd), 1e-8) < 1e-5);
  }
}

TEST_CASE("sym_rec_loss: trivia and the naive oracle") {
  const Image a = random_image(16, 16, 5);
  CHECK(sym_rec_loss(a, a, a, a) == 0.0);

  Image shifted = a;
  shifted.data().array() += 0.1;
  CHECK(sym_rec_loss(shifted, a, a, a) == doctest::Approx(0.01).epsilon(1e-12));

  const Image b = random_image(16, 16, 6);
  const Image c = random_image(16, 16, 7);
  const Image d = random_image(16, 16, 8);
  Real mse1 = 0, mse2 = 0;
  for (Index i = 0; i < a.data().size(); ++i) {
    mse1 += (b.data().data()[i] - a.data().data()[i]) * (b.data().data()[i] - a.data().data()[i]);
    mse2 += (d.data().data()[i] - c.data().data()[i]) * (d.data().data()[i] - c.data().data()[i]);
  }
  mse1 /= Real(a.data().size());
  mse2 /= Real(a.data().size());
  CHECK(sym_rec_loss(b, a, d, c) == doctest::Approx(mse1 + mse2).epsilon(1e-12));

  CHECK_THROWS_AS(sym_rec_loss(random_image(8, 8, 9), a, a, a), std::invalid_argument);
}

TEST_CASE("perceptual_loss: trivia and the scalar oracle") {
  const auto f = make_perceptual_extractor(64);
  const Image a = random_image(32, 32, 10);
  CHECK(perceptual_loss(a, a, *f) == 0.0);

  Rng rng(11);
  VecX fa(32);
  for (Index i = 0; i < 32; ++i) fa[i] = rng.normal();
  VecX fb = fa;
  fb[7] += 0.37;
  CHECK((fa - fb).squaredNorm() == doctest::Approx(0.37 * 0.37).epsilon(1e-12));

  const Image b = random_image(32, 32, 12);
  const VecX va = f->extract(a), vb = f->extract(b);
  Real expected = 0;
  for (Index i = 0; i < va.size(); ++i) expected += (va[i] - vb[i]) * (va[i] - vb[i]);
  CHECK(perceptual_loss(a, b, *f) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("perceptual gradient matches finite differences through the extractor") {
  const auto f = make_perceptual_extractor(32);
  const Image a = random_image(24, 24, 13);
  const Image b = random_image(24, 24, 14);
  MatX3 da;
  perceptual_loss_grad(a, b, *f, da);
  Rng rng(15);
  const Real h = 1e-6;
  for (int trial = 0; trial < 12; ++trial) {
    const Index px = rng.uniform_int(0, int(a.pixels() - 1));
    const int c = rng.uniform_int(0, 2);
    Image p = a, m = a;
    p.data()(px, c) += h;
    m.data()(px, c) -= h;
    const Real fd = (perceptual_loss(p, b, *f) - perceptual_loss(m, b, *f)) / (2 * h);
    REQUIRE(std::abs(da(px, c) - fd) / std::max(std::abs(fd), 1e-8) < 1e-5);
  }
}

TEST_CASE("sym_rec and landmark gradients match finite differences") {
  const Image a = random_image(12, 12, 301);
  const Image b = random_image(12, 12, 302);
  const Image c = random_image(12, 12, 303);
  const Image d = random_image(12, 12, 304);
  MatX3 dren, dren_flip;
  sym_rec_loss_grad(a, b, c, d, dren, dren_flip);
  Rng rng(305);
  const Real h = 1e-6;
  for (int trial = 0; trial < 8; ++trial) {
    const Index px = rng.uniform_int(0, int(a.pixels() - 1));
    const int ch = rng.uniform_int(0, 2);
    Image p = a, m = a;
    p.data()(px, ch) += h;
    m.data()(px, ch) -= h;
    const Real fd = (sym_rec_loss(p, b, c, d) - sym_rec_loss(m, b, c, d)) / (2 * h);
    REQUIRE(std::abs(dren(px, ch) - fd) / std::max(std::abs(fd), 1e-8) < 1e-5);
  }

  MatX2 la(68, 2), lb(68, 2);
  for (Index i = 0; i < la.size(); ++i) {
    la.data()[i] = rng.uniform();
    lb.data()[i] = rng.uniform();
  }
  MatX2 dla;
  landmark_loss_grad(la, lb, dla);
  for (int trial = 0; trial < 8; ++trial) {
    const Index r = rng.uniform_int(0, 67);
    const int col = rng.uniform_int(0, 1);
    MatX2 p = la, m = la;
    p(r, col) += h;
    m(r, col) -= h;
    const Real fd = (landmark_loss(p, lb) - landmark_loss(m, lb)) / (2 * h);
    REQUIRE(std::abs(dla(r, col) - fd) / std::max(std::abs(fd), 1e-8) < 1e-5);
  }
}

TEST_CASE("landmark_loss: trivia and the scalar oracle") {
  Rng rng(16);
  MatX2 a(68, 2);
  for (Index i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform();
  CHECK(landmark_loss(a, a) == 0.0);

  MatX2 shifted = a;
  shifted.col(0).array() += 0.1;
  CHECK(landmark_loss(shifted, a) == doctest::Approx(0.01).epsilon(1e-12));

  MatX2 b(68, 2);
  for (Index i = 0; i < b.size(); ++i) b.data()[i] = rng.uniform();
  Real expected = 0;
  for (Index i = 0; i < 68; ++i)
    expected += (a.row(i) - b.row(i)).squaredNorm();
  CHECK(landmark_loss(a, b) == doctest::Approx(expected / 68.0).epsilon(1e-12));

  CHECK_THROWS_AS(landmark_loss(a, MatX2::Zero(67, 2)), std::invalid_argument);
}

TEST_CASE("shape_center_loss: trivia and the brute-force oracle") {
  VecX v(4);
  v << 1, -2, 3, 0.5;
  SUBCASE("identical vectors in a group cost nothing") {
    CHECK(shape_center_loss({{v, v, v}}) == 0.0);
  }
  SUBCASE("a symmetric pair about zero costs twice its squared norm") {
    CHECK(shape_center_loss({{v, VecX(-v)}}) == doctest::Approx(2 * v.squaredNorm()).epsilon(1e-12));
  }
  SUBCASE("random groups match the two-pass oracle") {
    Rng rng(17);
    std::vector<std::vector<VecX>> groups;
    for (int g = 0; g < 4; ++g) {
      std::vector<VecX> group;
      const int count = rng.uniform_int(2, 6);
      for (int k = 0; k < count; ++k) {
        VecX s(5);
        for (Index i = 0; i < 5; ++i) s[i] = rng.normal();
        group.push_back(s);
      }
      groups.push_back(group);
    }
    Real expected = 0;
    for (const auto& group : groups) {
      VecX mu = VecX::Zero(5);
      for (const auto& s : group) mu += s;
      mu /= Real(group.size());
      for (const auto& s : group)
        for (Index i = 0; i < 5; ++i) expected += (s[i] - mu[i]) * (s[i] - mu[i]);
    }
    CHECK(shape_center_loss(groups) == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("reg_loss: trivia and the scalar oracle") {
  CHECK(reg_loss(VecX::Zero(5), VecX::Zero(3), ScalarGrid(4)) == 0.0);

  VecX s = VecX::Zero(5);
  s[0] = 3.0;
  CHECK(reg_loss(s, VecX::Zero(3), ScalarGrid(4)) == doctest::Approx(9.0).epsilon(1e-15));

  Rng rng(18);
  VecX s2(5), psi(3);
  ScalarGrid d(4);
  for (Index i = 0; i < 5; ++i) s2[i] = rng.normal();
  for (Index i = 0; i < 3; ++i) psi[i] = rng.normal();
  for (Index i = 0; i < d.texels(); ++i) d.data()[i] = rng.normal(0, 0.005);
  Real expected = 0;
  for (Index i = 0; i < 5; ++i) expected += s2[i] * s2[i];
  for (Index i = 0; i < 3; ++i) expected += psi[i] * psi[i];
  for (Index i = 0; i < d.texels(); ++i) expected += d.data()[i] * d.data()[i];
  CHECK(reg_loss(s2, psi, d) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("total_loss: unit terms, stage weights, the 7.5001 pin") {
  std::map<std::string, Real> unit_terms = {
      {"id", 1.0}, {"perc", 1.0}, {"lmk", 1.0}, {"sc", 1.0}, {"reg", 1.0}};
  LossWeights ones{1, 1, 1, 1, 1, 1};
  CHECK(total_loss(LossStage::kShape, unit_terms, ones).total == 5.0);

  const LossWeights defaults = LossWeights::shape_stage_defaults();
  const LossReport report = total_loss(LossStage::kShape, unit_terms, defaults);
  CHECK(report.total == 7.5001);

  // missing required term
  std::map<std::string, Real> missing = {{"id", 1.0}, {"perc", 1.0}, {"lmk", 1.0}, {"sc", 1.0}};
  CHECK_THROWS_AS(total_loss(LossStage::kShape, missing, defaults), std::invalid_argument);
  std::map<std::string, Real> albedo_terms = {
      {"sym_rec", 1.0}, {"id", 1.0}, {"perc", 1.0}, {"lmk", 1.0}};
  CHECK_NOTHROW(total_loss(LossStage::kAlbedo, albedo_terms, ones));

  // random weights match a dot-product oracle
  Rng rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    std::map<std::string, Real> terms;
    for (const auto* name : {"id", "perc", "lmk", "sc", "reg"})
      terms[name] = rng.uniform(0.0, 3.0);
    LossWeights w{0, rng.uniform(0, 2), rng.uniform(0, 2), rng.uniform(0, 2), rng.uniform(0, 2),
                  rng.uniform(0, 2)};
    const Real expected = w.id * terms["id"] + w.perc * terms["perc"] + w.lmk * terms["lmk"] +
                          w.sc * terms["sc"] + w.reg * terms["reg"];
    REQUIRE(total_loss(LossStage::kShape, terms, w).total ==
            doctest::Approx(expected).epsilon(1e-12));
  }

  // linear in each term with the others held fixed
  LossWeights w{0, 0.7, 1.3, 2.0, 0.5, 0.1};
  std::map<std::string, Real> base = {
      {"id", 1.0}, {"perc", 2.0}, {"lmk", 0.5}, {"sc", 1.5}, {"reg", 3.0}};
  const Real t0 = total_loss(LossStage::kShape, base, w).total;
  base["perc"] += 1.0;
  const Real t1 = total_loss(LossStage::kShape, base, w).total;
  base["perc"] += 1.0;
  const Real t2 = total_loss(LossStage::kShape, base, w).total;
  CHECK(t1 - t0 == doctest::Approx(t2 - t1).epsilon(1e-12));

  CHECK_THROWS_AS(([&] {
                    LossWeights bad;
                    bad.id = -1.0;
                    bad.validate();
                  }()),
                  std::invalid_argument);
}

TEST_CASE("loss report serializes to JSON lines") {
  const LossReport report = total_loss(
      LossStage::kShape,
      {{"id", 0.5}, {"perc", 1.0}, {"lmk", 0.1}, {"sc", 0.2}, {"reg", 0.01}},
      LossWeights::shape_stage_defaults());
  const std::string line = report.to_json();
  CHECK(line.find("\"total\"") != std::string::npos);
  CHECK(line.find("\"perc\"") != std::string::npos);
  CHECK(line.find('\n') == std::string::npos);
}

TEST_CASE("feature extractors are deterministic and named") {
  const auto f = make_identity_extractor(128);
  CHECK(f->dim() == 128);
  CHECK(f->name() == "patch-id");
  const Image a = random_image(48, 48, 20);
  const VecX v1 = f->extract(a);
  const VecX v2 = f->extract(a);
  CHECK((v1 - v2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(v1.norm() > 0.0);
}

TEST_SUITE_END();
