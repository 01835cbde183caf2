#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <sstream>

#include "tempocc/adam.hpp"
#include "tempocc/trainer.hpp"

using namespace tempocc;

namespace {

TrainConfig small_config(std::uint64_t seed = 0) {
  TrainConfig c;
  c.seed = seed;
  c.epochs = 4;
  c.refresh_period = 2;
  c.model.units = {8, 4, 4};
  c.model.dilations = {1, 2, 4};
  return c;
}

TimeSeriesDataset small_data() { return znormalize(synth_two_cluster(6, 16, 1)); }

TimeSeriesDataset two_series(std::size_t m) {
  auto full = znormalize(synth_two_cluster(4, m, 3));
  TimeSeriesDataset d = full;
  d.series = full.series.rows_at({0, 4});
  d.labels = {0, 1};
  return d;
}

TrainConfig reconstruction_only(TrainConfig c) {
  c.loss.use_instance = c.loss.use_cluster = c.loss.use_cd_org = c.loss.use_cd_aug = false;
  c.augmentation.family = {AugmentKind::Jitter};
  c.augmentation.jitter_sigma = 0.0;
  return c;
}

}  // namespace

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  std::vector<Array> params = {Array::vector({1.0, -2.0})};
  auto state = AdamState::for_params(params);
  adam_step(params, {Array::vector({0.0, 0.0})}, state, 0.1);
  EXPECT_EQ(params[0], Array::vector({1.0, -2.0}));
}

TEST(Adam, FirstStepMovesByLearningRate) {
  for (double g : {0.003, 1.0, 250.0}) {
    std::vector<Array> params = {Array::scalar(1.0)};
    auto state = AdamState::for_params(params);
    adam_step(params, {Array::scalar(g)}, state, 0.01);
    EXPECT_NEAR(params[0].item(), 1.0 - 0.01, 1e-6);
  }
}

// Scalar rollout of the textbook update as an oracle. Momentum carries x past
// zero at step 11, so |x| only shrinks monotonically until then.
TEST(Adam, QuadraticRolloutMatchesScalarOracle) {
  std::vector<Array> params = {Array::scalar(1.0)};
  auto state = AdamState::for_params(params);
  double x = 1.0, m = 0.0, v = 0.0, prev = 1.0;
  for (int t = 1; t <= 20; ++t) {
    adam_step(params, {Array::scalar(2.0 * params[0].item())}, state, 0.1);
    const double g = 2.0 * x;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    x -= 0.1 * (m / (1.0 - std::pow(0.9, t))) / (std::sqrt(v / (1.0 - std::pow(0.999, t))) + 1e-8);
    EXPECT_NEAR(params[0].item(), x, 1e-12) << "step " << t;
    if (t <= 11) {
      EXPECT_LT(std::abs(x), prev) << "step " << t;
    }
    prev = std::abs(x);
  }
  EXPECT_LT(params[0].item(), 0.0);
  EXPECT_LT(std::abs(params[0].item()), 0.3);
}

TEST(Adam, GlobalNormClipping) {
  std::vector<Array> grads = {Array::vector({3.0}), Array::vector({4.0})};
  EXPECT_DOUBLE_EQ(clip_global_norm(grads, 1.0), 5.0);
  EXPECT_NEAR(grads[0][0], 0.6, 1e-15);
  EXPECT_NEAR(grads[1][0], 0.8, 1e-15);
  EXPECT_THROW(adam_step(grads, {Array::vector({1.0})}, *std::make_unique<AdamState>(), 0.1), DimensionError);
}

TEST(Train, ZeroEpochsRejected) {
  TrainConfig c = small_config();
  c.epochs = 0;
  EXPECT_THROW(train(small_data(), c), ConfigError);
  Config cfg;
  cfg.set("epochs", "0");
  EXPECT_THROW(cfg.train_config(), ConfigError);
}

TEST(Train, InvalidSetupsRejected) {
  TrainConfig c = small_config();
  c.k = 13;
  EXPECT_THROW(train(small_data(), c), ConfigError);
  c = small_config();
  c.model.dilations = {1, 2, 32};
  EXPECT_THROW(train(small_data(), c), ConfigError);
}

// A 2-series set is memorized by reconstruction alone within 500 steps.
TEST(Train, MemorizesTwoSeries) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TrainConfig c = reconstruction_only(small_config(seed));
    c.epochs = 500;
    c.model.units = {16, 8, 8};
    c.learning_rate = 0.01;
    c.grad_clip = 1.0;
    auto r = train(two_series(16), c);
    EXPECT_LT(r.history.back().recon / (2.0 * 16.0), 1e-2) << "gru seed " << seed;

    c.model.cell = CellType::Tanh;
    c.learning_rate = 5e-3;
    c.grad_clip = 0.0;
    r = train(two_series(16), c);
    EXPECT_LT(r.history.back().recon / (2.0 * 16.0), 1e-2) << "tanh seed " << seed;
  }
}

TEST(Train, BitIdenticalHistoryForSameSeed) {
  auto a = train(small_data(), small_config(3)), b = train(small_data(), small_config(3));
  std::ostringstream ha, hb;
  write_history_csv(ha, a.history);
  write_history_csv(hb, b.history);
  EXPECT_EQ(ha.str(), hb.str());
  for (std::size_t i = 0; i < a.params.size(); ++i) EXPECT_EQ(a.params[i], b.params[i]);
  auto c = train(small_data(), small_config(4));
  EXPECT_NE(c.history.back().total, a.history.back().total);
}

TEST(Train, DisabledTermsHaveZeroColumns) {
  struct Case {
    const char* name;
    bool instance, cluster, cd_org, cd_aug;
  };
  for (const Case& k : {Case{"instance", false, true, true, true}, Case{"cluster", true, false, true, true},
                        Case{"cd", true, true, false, false}, Case{"all", false, false, false, false}}) {
    TrainConfig c = small_config();
    c.loss.use_instance = k.instance;
    c.loss.use_cluster = k.cluster;
    c.loss.use_cd_org = k.cd_org;
    c.loss.use_cd_aug = k.cd_aug;
    auto r = train(small_data(), c);
    for (const auto& h : r.history) {
      if (!k.instance) {
        EXPECT_EQ(h.instance, 0.0) << k.name;
      } else {
        EXPECT_NE(h.instance, 0.0) << k.name;
      }
      if (!k.cluster) {
        EXPECT_EQ(h.cluster, 0.0) << k.name;
      }
      if (!k.cd_org && !k.cd_aug) {
        EXPECT_EQ(h.cd, 0.0) << k.name;
      } else {
        EXPECT_GT(h.cd, 0.0) << k.name;
      }
    }
    if (!k.instance && !k.cluster && !k.cd_org && !k.cd_aug) {
      for (const auto& h : r.history) EXPECT_EQ(h.total, h.recon);
    }
  }
}

TEST(Train, WarmupTrainsReconstructionOnly) {
  TrainConfig c = small_config();
  c.warmup_recon = 2;
  auto r = train(small_data(), c);
  EXPECT_EQ(r.history[0].instance, 0.0);
  EXPECT_EQ(r.history[1].cd, 0.0);
  EXPECT_NE(r.history[2].instance, 0.0);
}

TEST(Train, DetachedIndicatorVariantRuns) {
  TrainConfig c = small_config();
  c.detached_q = true;
  auto r = train(small_data(), c);
  for (const auto& h : r.history) EXPECT_TRUE(std::isfinite(h.total));
}

TEST(Train, IndicatorOrthonormalAfterEveryRefresh) {
  TrainConfig c = small_config();
  c.refresh_period = 1;
  c.epochs = 3;
  auto data = small_data();
  for (std::size_t epochs = 1; epochs <= 3; ++epochs) {
    c.epochs = epochs;
    auto r = train(data, c);
    EXPECT_EQ(r.indicator.refresh_epoch, static_cast<long>(epochs));
    EXPECT_LT(orthonormality_error(r.indicator.q_full), 1e-6);
    EXPECT_LT(orthonormality_error(r.indicator_aug.q_full), 1e-6);
    Array z = encode_all(r.params, data.series);
    double fro = 0;
    for (double v : z.values()) fro += v * v;
    EXPECT_NEAR(captured_trace(z, r.indicator.q_full),
                r.indicator.singular_values[0] * r.indicator.singular_values[0] +
                    r.indicator.singular_values[1] * r.indicator.singular_values[1],
                1e-8 * fro);
  }
}

TEST(Train, CheckpointRoundTripReproducesMetrics) {
  TrainConfig c = small_config();
  auto data = small_data();
  auto r = train(data, c);
  std::stringstream buf;
  write_checkpoint(buf, to_named_arrays(r));
  auto back = from_named_arrays(c.model, read_checkpoint(buf));
  EXPECT_EQ(back.k, r.k);
  for (auto mode : {LabelMode::KMeansOnZ, LabelMode::ArgmaxAbsQ}) {
    auto a = evaluate(r.params, r.indicator, data, mode, r.k, 10, 0);
    auto b = evaluate(back.params, back.indicator, data, mode, back.k, 10, 0);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_EQ(a.nmi, b.nmi);
    EXPECT_EQ(a.ri, b.ri);
  }
}

TEST(Train, SmokeDescentOnSynthetic) {
  auto data = znormalize(synth_two_cluster(25, 64, 0));
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    TrainConfig c;
    c.seed = seed;
    c.epochs = 50;
    auto r = train(data, c);
    EXPECT_LT(r.history[49].total, r.history[0].total) << "seed " << seed;
  }
}

// Random recurrent features already split the two sinusoid frequencies, so an
// untrained encoder followed by k-means is not near chance on this set.
TEST(Evaluate, UntrainedEncoderOnSynthetic) {
  auto data = znormalize(synth_two_cluster(25, 64, 0));
  int separated = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto params = ModelParams::init(ModelSpec{}, seed);
    auto ind = refresh_indicator(encode_all(params, data.series), 2, 0);
    auto e = evaluate(params, ind, data, LabelMode::KMeansOnZ, 2, 10, seed);
    EXPECT_GE(e.nmi, 0.0);
    EXPECT_LE(e.nmi, 1.0);
    separated += e.nmi >= 0.9;
  }
  EXPECT_GE(separated, 4);
}

TEST(Evaluate, PerfectLatentSeparation) {
  Array z = Array::matrix(2, 10);
  Partition truth(10);
  for (std::size_t i = 0; i < 10; ++i) {
    truth[i] = i % 2;
    z(0, i) = i % 2 ? 5.0 : -5.0;
    z(1, i) = 0.01 * static_cast<double>(i);
  }
  auto out = extract_labels(LabelMode::KMeansOnZ, z, refresh_indicator(z, 2), 2, 10, 0);
  EXPECT_EQ(nmi(out.labels, truth), 1.0);
  EXPECT_EQ(rand_index(out.labels, truth), 1.0);
}

TEST(History, CsvLayout) {
  std::ostringstream out;
  write_history_csv(out, {{1.0, 2.0, 3.0, 4.0, 8.0}});
  EXPECT_EQ(out.str(), "epoch,recon,instance,cluster,cd,total\n1,1,2,3,4,8\n");
}
