#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "oracles.hpp"
#include "pctlab/data.hpp"
#include "pctlab/ensemble.hpp"
#include "pctlab/errors.hpp"
#include "pctlab/model.hpp"
#include "pctlab/rng.hpp"
#include "pctlab/train.hpp"

using namespace pctlab;

namespace {

Matrix random_batch(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng r(seed);
  Matrix x(n, d);
  for (double& v : x.data()) v = r.normal();
  return x;
}

std::vector<double*> parameters(MlpModel& m) {
  std::vector<double*> out;
  for (auto& l : m.layers) {
    for (double& w : l.weight.data()) out.push_back(&w);
    for (double& b : l.bias) out.push_back(&b);
  }
  return out;
}

std::vector<double> flat(const ParamBuffers& g) {
  std::vector<double> out;
  for (const auto& l : g.layers) {
    out.insert(out.end(), l.weight.data().begin(), l.weight.data().end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
  return out;
}

}  // namespace

TEST(Init, Deterministic) {
  const MlpArch a{3, {8, 8}, 4, Activation::relu};
  EXPECT_EQ(init_mlp(a, 5), init_mlp(a, 5));
  EXPECT_NE(parameter_hash(init_mlp(a, 1)), parameter_hash(init_mlp(a, 2)));
}

TEST(Init, HeScale) {
  const auto m = init_mlp({100, {100}, 2, Activation::relu}, 3);
  const auto& w = m.layers[0].weight;
  ASSERT_EQ(w.data().size(), 10000u);
  double s = 0, s2 = 0;
  for (double v : w.data()) {
    s += v;
    s2 += v * v;
  }
  const double n = 10000.0;
  const double sd = std::sqrt(s2 / n - (s / n) * (s / n));
  EXPECT_NEAR(sd, std::sqrt(2.0 / 100.0), 0.2 * std::sqrt(2.0 / 100.0));
  for (double b : m.layers[0].bias) EXPECT_EQ(b, 0.0);
}

TEST(Init, XavierScale) {
  const auto m = init_mlp({100, {100}, 2, Activation::tanh}, 3);
  double s2 = 0;
  for (double v : m.layers[0].weight.data()) s2 += v * v;
  EXPECT_NEAR(std::sqrt(s2 / 10000.0), std::sqrt(2.0 / 200.0), 0.2 * std::sqrt(2.0 / 200.0));
}

TEST(Arch, Validation) {
  EXPECT_THROW((MlpArch{0, {}, 2, Activation::relu}).validate(), ConfigError);
  EXPECT_THROW((MlpArch{2, {0}, 2, Activation::relu}).validate(), ConfigError);
  EXPECT_NO_THROW((MlpArch{2, {}, 2, Activation::relu}).validate());
}

TEST(Forward, ZeroWeights) {
  auto m = init_mlp({3, {5}, 2, Activation::relu}, 1);
  for (double* p : parameters(m)) *p = 0.0;
  const Matrix out = forward_logits(m, random_batch(4, 3, 1));
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(Forward, IdentityLayer) {
  auto m = init_mlp({3, {}, 3, Activation::relu}, 1);
  m.layers[0].weight = Matrix::identity(3);
  const Matrix x = random_batch(5, 3, 2);
  EXPECT_EQ(forward_logits(m, x), x);
}

TEST(Forward, BatchedEqualsPerSample) {
  const auto m = init_mlp({4, {7, 5}, 3, Activation::tanh}, 9);
  const Matrix x = random_batch(13, 4, 3);
  const Matrix batched = forward_logits(m, x);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    Matrix one(1, 4);
    std::copy(x.row(i).begin(), x.row(i).end(), one.row(0).begin());
    const Matrix single = forward_logits(m, one);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(single(0, k), batched(i, k));
  }
}

TEST(Forward, DimensionMismatchThrows) {
  const auto m = init_mlp({3, {4}, 2, Activation::relu}, 1);
  EXPECT_THROW(forward(m, Matrix(2, 4)), ConfigError);
}

TEST(Backward, ZeroUpstream) {
  const auto m = init_mlp({3, {4}, 2, Activation::relu}, 1);
  const auto f = forward(m, random_batch(5, 3, 1));
  for (double v : flat(backward(m, f.cache, Matrix(5, 2)))) EXPECT_EQ(v, 0.0);
}

TEST(Backward, Linear) {
  const auto m = init_mlp({3, {4}, 2, Activation::tanh}, 1);
  const auto f = forward(m, random_batch(5, 3, 1));
  Matrix d = random_batch(5, 2, 7);
  const auto g1 = flat(backward(m, f.cache, d));
  const auto g3 = flat(backward(m, f.cache, 3.0 * d));
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_NEAR(g3[i], 3.0 * g1[i], 1e-12 * (1 + std::abs(g3[i])));
}

TEST(Backward, ShapeMismatchThrows) {
  const auto m = init_mlp({3, {4}, 2, Activation::relu}, 1);
  const auto f = forward(m, random_batch(5, 3, 1));
  EXPECT_THROW(backward(m, f.cache, Matrix(4, 2)), ConfigError);
}

// Loss sum_i <u_i, logits_i> has dL/dlogits = u, so the whole parameter
// gradient can be checked against central differences.
class BackwardFiniteDifference : public ::testing::TestWithParam<Activation> {};

TEST_P(BackwardFiniteDifference, SmallNet) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    MlpModel m = init_mlp({2, {3}, 2, GetParam()}, seed);
    const Matrix x = random_batch(4, 2, seed + 100);
    const Matrix u = random_batch(4, 2, seed + 200);
    auto loss = [&](const MlpModel& mm) {
      const Matrix l = forward_logits(mm, x);
      double s = 0;
      for (std::size_t i = 0; i < l.data().size(); ++i) s += l.data()[i] * u.data()[i];
      return s;
    };
    const auto analytic = flat(backward(m, forward(m, x).cache, u));
    auto params = parameters(m);
    std::vector<double> theta;
    for (double* p : params) theta.push_back(*p);
    const auto numeric = oracle::central_diff(
        [&](const std::vector<double>& t) {
          for (std::size_t i = 0; i < t.size(); ++i) *params[i] = t[i];
          return loss(m);
        },
        theta);
    EXPECT_LT(oracle::relative_error(analytic, numeric), 1e-6) << "seed " << seed;
  }
}

INSTANTIATE_TEST_SUITE_P(Activations, BackwardFiniteDifference,
                         ::testing::Values(Activation::relu, Activation::tanh));

TEST(Sgd, PlainStepWithoutMomentum) {
  auto m = init_mlp({2, {}, 2, Activation::relu}, 1);
  const auto before = m;
  auto g = ParamBuffers::zeros_like(m);
  g.layers[0].weight(0, 1) = 2.0;
  g.layers[0].bias[1] = -1.0;
  auto v = ParamBuffers::zeros_like(m);
  sgd_momentum_step(m, g, v, 0.1, 0.0);
  EXPECT_DOUBLE_EQ(m.layers[0].weight(0, 1), before.layers[0].weight(0, 1) - 0.2);
  EXPECT_DOUBLE_EQ(m.layers[0].bias[1], 0.1);
  EXPECT_EQ(m.layers[0].weight(1, 0), before.layers[0].weight(1, 0));
}

TEST(Sgd, ZeroGradientFixedPoint) {
  auto m = init_mlp({2, {3}, 2, Activation::relu}, 1);
  const auto before = m;
  auto v = ParamBuffers::zeros_like(m);
  sgd_momentum_step(m, ParamBuffers::zeros_like(m), v, 0.1, 0.9);
  EXPECT_EQ(m, before);
}

TEST(Sgd, MomentumRecursion) {
  auto m = init_mlp({1, {}, 1, Activation::relu}, 1);
  auto g = ParamBuffers::zeros_like(m);
  g.layers[0].weight(0, 0) = 0.5;
  auto v = ParamBuffers::zeros_like(m);
  const double w0 = m.layers[0].weight(0, 0);
  sgd_momentum_step(m, g, v, 0.1, 0.9);
  const double w1 = m.layers[0].weight(0, 0);
  sgd_momentum_step(m, g, v, 0.1, 0.9);
  const double w2 = m.layers[0].weight(0, 0);
  EXPECT_NEAR(w0 - w1, 0.1 * 0.5, 1e-15);
  EXPECT_NEAR(w1 - w2, 0.1 * 1.9 * 0.5, 1e-15);
}

TEST(Predict, ArgmaxAndTies) {
  auto m = init_mlp({3, {}, 3, Activation::relu}, 1);
  m.layers[0].weight = Matrix::identity(3);
  const std::vector<Vec> rows{{1, 3, 2}, {2, 2, 0}, {101, 103, 102}};
  const auto p = predict_logits(m, Matrix::from_rows(rows));
  EXPECT_EQ(p.labels, (std::vector<int>{1, 0, 1}));
}

TEST(Train, SeparableBlobsReachLowError) {
  const auto ds = make_blobs(3, 2, 100, 6.0, 1.0, 4);
  TrainSchedule s;
  s.shuffle_seed = 2;
  const auto r = train(init_mlp({2, {16}, 3, Activation::relu}, 2), ds, s, ObjectiveSpec{});
  const auto p = predict_logits(r.model, ds.features);
  int wrong = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) wrong += p.labels[i] != ds.labels[i];
  EXPECT_LT(static_cast<double>(wrong) / static_cast<double>(ds.size()), 0.02);
  ASSERT_EQ(r.history.size(), 30u);
  EXPECT_DOUBLE_EQ(r.history[0].lr, 0.1);
  EXPECT_DOUBLE_EQ(r.history[10].lr, 0.1 * 0.1);
  EXPECT_DOUBLE_EQ(r.history[29].lr, 0.1 * 0.1 * 0.1);
}

TEST(Train, Deterministic) {
  const auto ds = make_blobs(3, 2, 30, 2.0, 1.0, 4);
  TrainSchedule s;
  s.epochs = 5;
  s.shuffle_seed = 8;
  const auto a = train(init_mlp({2, {8}, 3, Activation::relu}, 2), ds, s, ObjectiveSpec{});
  const auto b = train(init_mlp({2, {8}, 3, Activation::relu}, 2), ds, s, ObjectiveSpec{});
  EXPECT_EQ(a.model, b.model);
}

TEST(Train, AlphaZeroMatchesCrossEntropyBitExactly) {
  const auto ds = make_blobs(3, 2, 30, 2.0, 1.0, 4);
  TrainSchedule s;
  s.epochs = 4;
  s.base_lr = 0.02;
  s.shuffle_seed = 8;
  const MlpArch arch{2, {8}, 3, Activation::relu};
  const auto teacher = train_ensemble(arch, ds, s, 2, 50);
  ObjectiveSpec elodi_spec;
  elodi_spec.kind = ObjectiveKind::elodi;
  elodi_spec.alpha = 0.0;
  const auto ce = train(init_mlp(arch, 2), ds, s, ObjectiveSpec{});
  const auto el = train(init_mlp(arch, 2), ds, s, elodi_spec, {&teacher, {}});
  EXPECT_EQ(ce.model, el.model);
}

TEST(Train, MissingTeacherIsConfigError) {
  const auto ds = make_blobs(3, 2, 10, 2.0, 1.0, 4);
  ObjectiveSpec spec;
  spec.kind = ObjectiveKind::elodi;
  EXPECT_THROW(train(init_mlp({2, {}, 3, Activation::relu}, 1), ds, TrainSchedule{}, spec), ConfigError);
  spec.kind = ObjectiveKind::ldi_single;
  EXPECT_THROW(train(init_mlp({2, {}, 3, Activation::relu}, 1), ds, TrainSchedule{}, spec), ConfigError);
}

TEST(Train, ClassMismatchIsConfigError) {
  const auto ds = make_blobs(3, 2, 10, 2.0, 1.0, 4);
  EXPECT_THROW(train(init_mlp({2, {}, 2, Activation::relu}, 1), ds, TrainSchedule{}, ObjectiveSpec{}),
               ConfigError);
}

TEST(Train, DivergenceIsNumericalError) {
  const auto ds = make_blobs(3, 2, 30, 3.0, 1.0, 4);
  TrainSchedule s;
  s.base_lr = 5.0;
  s.epochs = 30;
  const MlpArch arch{2, {8}, 3, Activation::relu};
  const MlpModel ref = init_mlp(arch, 9);
  const ModelSource src(ref);
  ObjectiveSpec spec;
  spec.kind = ObjectiveKind::ldi_single;
  spec.alpha = 1.0;
  EXPECT_THROW(train(init_mlp(arch, 1), ds, s, spec, {nullptr, {&src}}), NumericalError);
}

TEST(Train, ReferencesAreNeverModified) {
  const auto ds = make_blobs(3, 2, 30, 2.0, 1.0, 4);
  TrainSchedule s;
  s.epochs = 3;
  s.base_lr = 0.01;
  const MlpArch arch{2, {8}, 3, Activation::relu};
  const auto teacher = train_ensemble(arch, ds, s, 2, 50);
  const MlpModel old = train(init_mlp(arch, 77), ds, s, ObjectiveSpec{}).model;
  std::vector<std::uint64_t> before;
  for (const auto& mm : teacher.members()) before.push_back(parameter_hash(mm));
  const auto old_hash = parameter_hash(old);
  ObjectiveSpec spec;
  spec.kind = ObjectiveKind::elodi_plus_legacy_ldi;
  const ModelSource old_src(old);
  (void)train(init_mlp(arch, 3), ds, s, spec, {&teacher, {&old_src}});
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(parameter_hash(teacher.members()[i]), before[i]);
  EXPECT_EQ(parameter_hash(old), old_hash);
}

TEST(Checkpoint, RoundTripIsByteStable) {
  const auto m = init_mlp({3, {5, 4}, 2, Activation::tanh}, 12);
  const std::string text = serialize_checkpoint(m, "abc");
  const auto ck = parse_checkpoint(text);
  EXPECT_EQ(ck.model, m);
  EXPECT_EQ(ck.config_hash, "abc");
  EXPECT_EQ(serialize_checkpoint(ck.model, ck.config_hash), text);
}

TEST(Checkpoint, CorruptionIsIntegrityErrorNamingSource) {
  const auto m = init_mlp({2, {3}, 2, Activation::relu}, 1);
  std::string text = serialize_checkpoint(m);
  const auto pos = text.find("layer 0 weight");
  text[text.find('\n', pos) + 3] ^= 1;
  try {
    (void)parse_checkpoint(text, "model_007.ckpt");
    FAIL() << "expected IntegrityError";
  } catch (const IntegrityError& e) {
    EXPECT_NE(std::string(e.what()).find("model_007.ckpt"), std::string::npos);
  }
  EXPECT_THROW(parse_checkpoint("not a checkpoint"), IntegrityError);
  EXPECT_THROW(parse_checkpoint(serialize_checkpoint(m).substr(0, 40)), IntegrityError);
}

TEST(Checkpoint, MissingFileIsIntegrityError) {
  EXPECT_THROW(load_checkpoint(std::filesystem::temp_directory_path() / "pctlab-no-such.ckpt"),
               IntegrityError);
}
