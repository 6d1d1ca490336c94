#include <gtest/gtest.h>

#include <cmath>

#include "gradient_checks.hpp"
#include "oracles.hpp"
#include "pctlab/errors.hpp"
#include "pctlab/losses.hpp"
#include "pctlab/rng.hpp"

using namespace pctlab;

TEST(CrossEntropy, Uniform) {
  const auto r = cross_entropy(Vec{0, 0}, 0);
  EXPECT_NEAR(r.loss, std::log(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(r.grad[0], -0.5);
  EXPECT_DOUBLE_EQ(r.grad[1], 0.5);
}

TEST(CrossEntropy, Confident) { EXPECT_LT(cross_entropy(Vec{10, -10}, 0).loss, 1e-8); }

TEST(CrossEntropy, GradientSumsToZero) {
  Rng r(4);
  for (int t = 0; t < 100; ++t) {
    const Vec v = gradcheck::random_vec(r, 6, 4.0);
    const auto g = cross_entropy(v, static_cast<int>(r.below(6))).grad;
    double s = 0;
    for (double x : g) s += x;
    EXPECT_NEAR(s, 0.0, 1e-14);
  }
}

TEST(CrossEntropy, LabelOutOfRange) {
  EXPECT_THROW(cross_entropy(Vec{0, 0}, 2), ConfigError);
  EXPECT_THROW(cross_entropy(Vec{0, 0}, -1), ConfigError);
}

TEST(InhibitionSet, TopK) {
  LdiConfig c;
  c.subset = SubsetMode::top_k;
  c.top_k = 2;
  EXPECT_EQ(select_inhibition_set(Vec{0.1, 2.0, -1.0, 0.5}, c), (std::vector<int>{1, 3}));
  c.top_k = 1;
  EXPECT_EQ(select_inhibition_set(Vec{1, 1, 0}, c), (std::vector<int>{0}));
  c.top_k = 4;
  EXPECT_THROW(select_inhibition_set(Vec{1, 1, 0}, c), ConfigError);
}

TEST(InhibitionSet, All) {
  EXPECT_EQ(select_inhibition_set(Vec(5, 0.0), LdiConfig{}), (std::vector<int>{0, 1, 2, 3, 4}));
}

TEST(Ldi, HandExample) {
  LdiConfig c;
  c.xi = 0.5;
  const auto r = ldi(Vec{2.0, 0.0, -1.0}, Vec{1.0, 0.5, -1.0}, c);
  EXPECT_DOUBLE_EQ(r.loss, 0.25);
  EXPECT_EQ(r.grad, (Vec{1.0, 0.0, 0.0}));
}

TEST(Ldi, IdentityIsZero) {
  for (double xi : {0.0, 0.3, 2.0}) {
    LdiConfig c;
    c.xi = xi;
    const Vec v{1.0, -2.0, 3.5};
    const auto r = ldi(v, v, c);
    EXPECT_EQ(r.loss, 0.0);
    EXPECT_EQ(r.grad, Vec(3, 0.0));
  }
}

TEST(Ldi, DegeneratesToLogitMatching) {
  Rng r(8);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t c = 2 + r.below(10);
    const Vec a = gradcheck::random_vec(r, c, 3.0), b = gradcheck::random_vec(r, c, 3.0);
    EXPECT_NEAR(ldi(a, b, LdiConfig{}).loss, oracle::squared_l2(a, b), 1e-12);
  }
}

TEST(Ldi, DimensionMismatch) { EXPECT_THROW(ldi(Vec{1, 2}, Vec{1}, LdiConfig{}), ConfigError); }

TEST(Ldi, KinkGradientIsZero) {
  LdiConfig c;
  c.xi = 0.5;
  c.p = 1;
  EXPECT_EQ(ldi(Vec{1.5}, Vec{1.0}, c).grad[0], 0.0);
}

TEST(Ldi, NonIncreasingInXi) {
  Rng r(10);
  for (int t = 0; t < 300; ++t) {
    const std::size_t c = 2 + r.below(6);
    const Vec a = gradcheck::random_vec(r, c, 2.0), b = gradcheck::random_vec(r, c, 2.0);
    LdiConfig lo, hi;
    lo.xi = r.uniform();
    hi.xi = lo.xi + r.uniform();
    lo.p = hi.p = 1 + static_cast<int>(r.below(3));
    EXPECT_GE(ldi(a, b, lo).loss, ldi(a, b, hi).loss);
  }
}

TEST(Ldi, ZeroInsideTolerance) {
  Rng r(12);
  for (int t = 0; t < 300; ++t) {
    const std::size_t c = 2 + r.below(6);
    const Vec a = gradcheck::random_vec(r, c, 2.0), b = gradcheck::random_vec(r, c, 2.0);
    double maxd = 0;
    for (std::size_t k = 0; k < c; ++k) maxd = std::max(maxd, std::abs(a[k] - b[k]));
    LdiConfig cfg;
    cfg.xi = maxd + r.uniform();
    const auto res = ldi(a, b, cfg);
    EXPECT_EQ(res.loss, 0.0);
    EXPECT_EQ(res.grad, Vec(c, 0.0));
  }
}

TEST(Ldi, SubsetEqualsMaskedFull) {
  Rng r(14);
  for (int t = 0; t < 300; ++t) {
    const std::size_t c = 2 + r.below(6);
    const Vec a = gradcheck::random_vec(r, c, 2.0), b = gradcheck::random_vec(r, c, 2.0);
    LdiConfig sub;
    sub.subset = SubsetMode::top_k;
    sub.top_k = 1 + static_cast<int>(r.below(c));
    sub.xi = r.uniform();
    Vec masked = b;
    const auto keep = select_inhibition_set(b, sub);
    for (std::size_t k = 0; k < c; ++k)
      if (std::find(keep.begin(), keep.end(), static_cast<int>(k)) == keep.end()) masked[k] = a[k];
    LdiConfig full = sub;
    full.subset = SubsetMode::all;
    EXPECT_EQ(ldi(a, b, sub).loss, ldi(a, masked, full).loss);
  }
}

TEST(Ldi, InvalidConfig) {
  LdiConfig c;
  c.xi = -0.1;
  EXPECT_THROW(c.validate(), ConfigError);
  c.xi = 0;
  c.p = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Elodi, AverageOfMembers) {
  const std::vector<Vec> two{{1, 3}, {3, 1}};
  EXPECT_EQ(average_logits(two), (Vec{2, 2}));
  const std::vector<Vec> one{{0.3, -1.2}};
  EXPECT_EQ(average_logits(one), one[0]);
  const std::vector<Vec> four{{1, 0, 4}, {2, 0, 4}, {3, 0, 4}, {6, 0, 4}};
  EXPECT_EQ(average_logits(four), (Vec{3, 0, 4}));
  const std::vector<Vec> ragged{{1, 2}, {1}};
  EXPECT_THROW(average_logits(ragged), ConfigError);
}

TEST(Elodi, IsLdiAgainstAverage) {
  const std::vector<Vec> members{{1, 3, 0}, {3, 1, 0}};
  LdiConfig c;
  c.xi = 0.2;
  const Vec student{0.5, 2.5, 1.0};
  const auto a = elodi(student, members, c);
  const auto b = ldi(student, Vec{2, 2, 0}, c);
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_EQ(a.grad, b.grad);
}

TEST(Combined, Weights) {
  const LossGrad ce{1.0, {1.0, -1.0}}, inh{0.5, {0.0, 2.0}};
  const auto r = combined_objective(ce, inh, 0.8);
  EXPECT_NEAR(r.loss, 0.6, 1e-15);
  EXPECT_NEAR(r.grad[0], 0.2, 1e-15);
  EXPECT_NEAR(r.grad[1], 1.4, 1e-15);
  EXPECT_EQ(combined_objective(ce, inh, 0.0).loss, 1.0);
  EXPECT_EQ(combined_objective(ce, inh, 1.0).loss, 0.5);
  EXPECT_THROW(combined_objective(ce, inh, 1.5), ConfigError);
}

TEST(Legacy, Weights) {
  const LossGrad e{0.2, {1.0}}, l{0.4, {3.0}};
  EXPECT_NEAR(legacy_objective(e, l, 0.5).loss, 0.3, 1e-15);
  EXPECT_EQ(legacy_objective(e, l, 1.0).loss, 0.2);
  EXPECT_EQ(legacy_objective(e, l, 0.0).loss, 0.4);
  EXPECT_EQ(legacy_objective(e, l, 0.0).grad, (Vec{3.0}));
}

TEST(Kd, IdentityIsZero) {
  const Vec v{1.0, -3.0, 2.0};
  EXPECT_NEAR(kd(v, v, 1.0).loss, 0.0, 1e-15);
}

TEST(Kd, MatchesNumericKlOracle) {
  Rng r(3);
  for (int t = 0; t < 50; ++t) {
    Vec a(5), b(5);
    for (double& x : a) x = 20.0 * r.uniform() - 10.0;
    for (double& x : b) x = 20.0 * r.uniform() - 10.0;
    for (double tau : {1.0, 100.0})
      EXPECT_NEAR(kd(a, b, tau).loss, tau * tau * oracle::kl_from_logits(b, a, tau), 1e-8);
  }
}

TEST(Kd, BadTemperature) { EXPECT_THROW(kd(Vec{1}, Vec{1}, 0.0), ConfigError); }

TEST(Fd, Weights) {
  const Vec a{1.0, 0.0}, b{0.5, 0.5};
  EXPECT_DOUBLE_EQ(fd(a, b, false, 1.0, 0.0).loss, 0.5);
  EXPECT_DOUBLE_EQ(fd(a, b, true, 1.0, 1.0).loss, 1.0);
  EXPECT_EQ(fd(a, a, true, 3.0, 7.0).loss, 0.0);
}

TEST(SampleObjective, LegacyEqualWeights) {
  ObjectiveSpec s;
  s.kind = ObjectiveKind::ldi_single;
  s.alpha = 1.0;
  const Vec x{0, 0}, r1{1, 0}, r2{0, 3};
  SampleReferences refs;
  refs.legacy = {r1, r2};
  const auto o = sample_objective(s, x, 0, refs);
  EXPECT_DOUBLE_EQ(o.total.loss, 0.5 * (1.0 + 9.0));
  ASSERT_EQ(o.reference_terms.size(), 2u);
  EXPECT_DOUBLE_EQ(o.reference_terms[0], 1.0);
  EXPECT_DOUBLE_EQ(o.reference_terms[1], 9.0);
}

TEST(SampleObjective, PrefixReference) {
  ObjectiveSpec s;
  s.kind = ObjectiveKind::ldi_single;
  s.alpha = 1.0;
  const Vec x{1, 2, 5}, old{0, 2};
  SampleReferences refs;
  refs.legacy = {old};
  const auto o = sample_objective(s, x, 0, refs);
  EXPECT_DOUBLE_EQ(o.total.loss, 1.0);
  EXPECT_EQ(o.total.grad, (Vec{2.0, 0.0, 0.0}));
}

TEST(SampleObjective, MissingReferenceThrows) {
  ObjectiveSpec s;
  s.kind = ObjectiveKind::elodi;
  EXPECT_THROW(sample_objective(s, Vec{0, 0}, 0, {}), ConfigError);
}

TEST(ObjectiveSpec, Validation) {
  ObjectiveSpec s;
  s.alpha = 1.2;
  EXPECT_THROW(s.validate(), ConfigError);
  s.alpha = 0.5;
  s.lambda = -0.1;
  EXPECT_THROW(s.validate(), ConfigError);
  EXPECT_THROW(parse_objective_kind("nope"), ConfigError);
  for (auto k : {ObjectiveKind::ce_only, ObjectiveKind::ldi_single, ObjectiveKind::elodi,
                 ObjectiveKind::elodi_plus_legacy_ldi, ObjectiveKind::kd, ObjectiveKind::fd})
    EXPECT_EQ(parse_objective_kind(to_string(k)), k);
}

TEST(Gradients, LogitLevel) {
  for (const auto& r : gradcheck::logit_level(20, 99)) {
    EXPECT_GE(r.points, 20) << r.name;
    EXPECT_LT(r.max_rel_error, 1e-6) << r.name;
  }
}

TEST(Gradients, ThroughNetwork) {
  for (Activation act : {Activation::tanh, Activation::relu})
    for (const auto& r : gradcheck::network_level(10, 5, act)) {
      EXPECT_GE(r.points, 10) << r.name;
      EXPECT_LT(r.max_rel_error, 1e-6) << r.name;
    }
}
