#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cxnn/models.hpp"
#include "cxnn/rng.hpp"

using namespace cxnn;

namespace {

ArchSpec spec_of(ArchFamily family, int64_t base_width = 0, int64_t classes = -1,
                 int64_t in_ch = 1) {
  ArchSpec s;
  s.family = family;
  const bool resnet = family == ArchFamily::ResNet18 || family == ArchFamily::ResNet34 ||
                      family == ArchFamily::ResNet50;
  s.task = resnet ? TaskKind::Classification : TaskKind::Segmentation;
  s.num_classes = classes >= 0 ? classes : (resnet ? 3 : 1);
  s.in_channels = in_ch;
  s.base_width = base_width;
  return s;
}

ArchSpec tiny_resnet() {
  ArchSpec s = spec_of(ArchFamily::ResNet18, 8);
  s.depth = {1, 1, 1, 1};
  return s;
}

Tensor<float> random_image(Rng& rng, Shape shape) {
  Tensor<float> t(shape);
  for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.uniform(0, 1));
  return t;
}

}  // namespace

TEST_CASE("canonical ResNet18 at ImageNet head matches the published 11,689,512") {
  auto m = build<float>(spec_of(ArchFamily::ResNet18, 0, 1000, 3), Variant::real(), 1);
  CHECK(m->meta.trainable == 11689512);
}

TEST_CASE("canonical single-channel 3-class counts against the reference table") {
  struct Row {
    ArchFamily family;
    int64_t expect;      // cross-checked against an independent arithmetic oracle
    double table_m;      // reference table value in millions
    double tolerance;
  };
  const Row rows[] = {
      {ArchFamily::ResNet18, 11171779, 11.4, 0.05},
      {ArchFamily::ResNet34, 21279939, 21.5, 0.05},
      {ArchFamily::ResNet50, 23507907, 23.9, 0.05},
      {ArchFamily::UNet, 31036481, 31.4, 0.10},
      {ArchFamily::AttentionUNet, 34870573, 34.3, 0.10},
      {ArchFamily::ReconResNet, 17282049, 17.3, 0.10},
  };
  for (const Row& r : rows) {
    CAPTURE(family_name(r.family));
    auto m = build<float>(spec_of(r.family), Variant::real(), 1);
    CHECK(m->meta.trainable == r.expect);
    const double ratio = static_cast<double>(m->meta.trainable) / (r.table_m * 1e6);
    CHECK(std::abs(ratio - 1.0) < r.tolerance);
  }
}

TEST_CASE("complex variant doubles the trainable count exactly, keeps feature count") {
  const ArchFamily families[] = {ArchFamily::ResNet18, ArchFamily::ResNet34,
                                 ArchFamily::ResNet50, ArchFamily::UNet,
                                 ArchFamily::AttentionUNet, ArchFamily::ReconResNet};
  for (ArchFamily f : families) {
    CAPTURE(family_name(f));
    // tiny widths keep this fast; the canonical sweep lives in acceptance
    ArchSpec s = spec_of(f, 8);
    if (f == ArchFamily::ResNet18) s.depth = {1, 1, 1, 1};
    if (f == ArchFamily::ReconResNet) s.depth = {3};
    auto real = build<float>(s, Variant::real(), 5);
    auto cplx = build<float>(s, Variant::complex(), 5);
    CHECK(cplx->meta.trainable == 2 * real->meta.trainable);
    CHECK(cplx->meta.total_features == real->meta.total_features);
    CHECK(cplx->meta.stage_features == real->meta.stage_features);
  }
}

TEST_CASE("widened variant lands within 3% of the complex count") {
  ArchSpec s = tiny_resnet();
  auto real = build<float>(s, Variant::real(), 5);
  auto widened = build<float>(s, Variant::widened(2.0), 5);
  auto cplx = build<float>(s, Variant::complex(), 5);
  const double vs_complex =
      static_cast<double>(widened->meta.trainable) / static_cast<double>(cplx->meta.trainable);
  CHECK(std::abs(vs_complex - 1.0) < 0.03);
  const double vs_real =
      static_cast<double>(widened->meta.trainable) / static_cast<double>(real->meta.trainable);
  CHECK(vs_real > 1.94);
  CHECK(vs_real < 2.06);
}

TEST_CASE("widen: multiplier 1 is the identity; stage features scale by sqrt(2)") {
  ArchSpec s = tiny_resnet();
  auto m1 = build<float>(widen(s, 1.0), Variant::real(), 3);
  auto m0 = build<float>(s, Variant::real(), 3);
  CHECK(m1->meta.trainable == m0->meta.trainable);

  auto mw = build<float>(s, Variant::widened(2.0), 3);
  for (size_t i = 0; i < m0->meta.stage_features.size(); ++i) {
    const int64_t expect = static_cast<int64_t>(
        std::llround(static_cast<double>(m0->meta.stage_features[i]) * std::sqrt(2.0)));
    CHECK(mw->meta.stage_features[i] == expect);
  }
  CHECK_THROWS_AS(widen(s, 0.5), SpecError);
}

TEST_CASE("widen multiplier 4 on a conv stack doubles channels, ~quadruples params") {
  ArchSpec s = tiny_resnet();
  auto m0 = build<float>(s, Variant::real(), 3);
  auto m4 = build<float>(s, Variant::widened(4.0), 3);
  for (size_t i = 0; i < m0->meta.stage_features.size(); ++i)
    CHECK(m4->meta.stage_features[i] == 2 * m0->meta.stage_features[i]);
  const double ratio =
      static_cast<double>(m4->meta.trainable) / static_cast<double>(m0->meta.trainable);
  CHECK(std::abs(ratio / 4.0 - 1.0) < 0.03);
}

TEST_CASE("literal widening multiplies channels by the raw factor (params ~4x)") {
  ArchSpec s = tiny_resnet();
  auto m0 = build<float>(s, Variant::real(), 3);
  auto m2 = build<float>(s, Variant::widened(2.0, /*literal=*/true), 3);
  for (size_t i = 0; i < m0->meta.stage_features.size(); ++i)
    CHECK(m2->meta.stage_features[i] == 2 * m0->meta.stage_features[i]);
  const double ratio =
      static_cast<double>(m2->meta.trainable) / static_cast<double>(m0->meta.trainable);
  CHECK(ratio > 3.5);
  CHECK(ratio < 4.5);
}

TEST_CASE("build is deterministic in (spec, variant, seed)") {
  ArchSpec s = tiny_resnet();
  auto a = build<float>(s, Variant::real(), 7);
  auto b = build<float>(s, Variant::real(), 7);
  auto pa = a->parameters();
  auto pb = b->parameters();
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i) {
    REQUIRE(pa[i]->value_re.size() == pb[i]->value_re.size());
    for (int64_t j = 0; j < pa[i]->value_re.size(); ++j)
      CHECK(pa[i]->value_re[j] == pb[i]->value_re[j]);
  }
  auto c = build<float>(s, Variant::real(), 8);
  bool any_diff = false;
  auto pcs = c->parameters();
  for (int64_t j = 0; j < pa[0]->value_re.size(); ++j)
    any_diff |= pa[0]->value_re[j] != pcs[0]->value_re[j];
  CHECK(any_diff);
}

TEST_CASE("forward shape contract across families and variants") {
  Rng rng(77);
  const Variant variants[] = {Variant::real(), Variant::widened(2.0), Variant::complex()};

  SUBCASE("classification: [B, K] real scores, input >= 32") {
    for (ArchFamily f : {ArchFamily::ResNet18, ArchFamily::ResNet34, ArchFamily::ResNet50}) {
      CAPTURE(family_name(f));
      ArchSpec s = spec_of(f, 8);
      s.depth = {1, 1, 1, 1};
      for (const Variant& v : variants) {
        auto m = build<float>(s, v, 11);
        for (int64_t hw : {32, 48}) {
          Tape<float> tape;
          Var scores =
              m->forward(tape, tape.constant(random_image(rng, Shape{2, 1, hw, hw})), false);
          CHECK(tape.value(scores).shape() == Shape{2, 3});
          CHECK(tape.value(scores).all_finite());
        }
      }
    }
  }

  SUBCASE("segmentation: [B, 1, H, W] real scores, input >= 16") {
    for (ArchFamily f : {ArchFamily::UNet, ArchFamily::AttentionUNet, ArchFamily::ReconResNet}) {
      CAPTURE(family_name(f));
      ArchSpec s = spec_of(f, 4);
      if (f == ArchFamily::ReconResNet) s.depth = {2};
      for (const Variant& v : variants) {
        auto m = build<float>(s, v, 13);
        Tape<float> tape;
        Var scores = m->forward(tape, tape.constant(random_image(rng, Shape{2, 1, 16, 16})), false);
        CHECK(tape.value(scores).shape() == Shape{2, 1, 16, 16});
        CHECK(tape.value(scores).all_finite());
      }
    }
  }
}

TEST_CASE("unsupported family/task combinations are spec errors") {
  ArchSpec s;
  s.family = ArchFamily::ResNet18;
  s.task = TaskKind::Segmentation;
  CHECK_THROWS_AS(s.validate(), SpecError);
  ArchSpec u;
  u.family = ArchFamily::UNet;
  u.task = TaskKind::Classification;
  CHECK_THROWS_AS(u.validate(), SpecError);
}

TEST_CASE("ablating a skip connection changes UNet output") {
  Rng rng(99);
  auto img = random_image(rng, Shape{1, 1, 16, 16});

  ArchSpec s = spec_of(ArchFamily::UNet, 4);
  build_detail::UNetModel<float> model(s, Variant::real(), 21);
  Tape<float> t0;
  Var base = model.forward(t0, t0.constant(img), false);
  for (int level = 0; level < 4; ++level) {
    model.ablate_skip_level = level;
    Tape<float> t1;
    Var ablated = model.forward(t1, t1.constant(img), false);
    bool differs = false;
    for (int64_t i = 0; i < t0.value(base).size(); ++i)
      differs |= t0.value(base)[i] != t1.value(ablated)[i];
    CHECK(differs);
  }
  model.ablate_skip_level = -1;

  build_detail::AttentionUNetModel<float> att(spec_of(ArchFamily::AttentionUNet, 4),
                                              Variant::real(), 22);
  Tape<float> t2;
  Var abase = att.forward(t2, t2.constant(img), false);
  att.ablate_skip_level = 2;
  Tape<float> t3;
  Var aablated = att.forward(t3, t3.constant(img), false);
  bool differs = false;
  for (int64_t i = 0; i < t2.value(abase).size(); ++i)
    differs |= t2.value(abase)[i] != t3.value(aablated)[i];
  CHECK(differs);
}

TEST_CASE("ReconResNet keeps segmentation geometry at 64x64") {
  ArchSpec s = spec_of(ArchFamily::ReconResNet, 8);
  s.depth = {2};
  auto m = build<float>(s, Variant::complex(), 31);
  Rng rng(3);
  Tape<float> tape;
  Var out = m->forward(tape, tape.constant(random_image(rng, Shape{2, 1, 64, 64})), false);
  CHECK(tape.value(out).shape() == Shape{2, 1, 64, 64});
}
