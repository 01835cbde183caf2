#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <set>
#include <sstream>

#include "support.hpp"
#include "tempocc/checkpoint.hpp"
#include "tempocc/model.hpp"
#include "tempocc/objectives.hpp"

using namespace tempocc;
using tempocc::testing::check_gradients;
using tempocc::testing::random_array;

namespace {

ModelSpec tiny_spec() {
  ModelSpec s;
  s.units = {3, 2, 2};
  s.dilations = {1, 2, 4};
  return s;
}

ModelParams zeroed(ModelParams p) {
  for (auto& a : p.values())
    for (auto& v : a.values()) v = 0.0;
  return p;
}

Array layer_output(const ModelParams& params, const Array& series, std::size_t dilation) {
  ad::Graph g;
  BoundParams p(g, params, false);
  const auto& w = params.layout(0).forward[0];
  auto seq = g.constant(time_major(series, false));
  return dilated_layer(p, params.spec().cell, w, seq, series.rows(), series.cols(), dilation).value();
}

}  // namespace

TEST(Model, LatentDimension) {
  ModelSpec big;
  big.units = {100, 50, 50};
  EXPECT_EQ(big.latent_dim(), 400u);
  EXPECT_EQ(ModelSpec{}.latent_dim(), 220u);
  ModelSpec spec = tiny_spec();
  auto params = ModelParams::init(spec, 0);
  ad::Graph g;
  BoundParams p(g, params);
  EXPECT_EQ(encode(p, Array::matrix(5, 8, 0.5)).shape(), (Shape{14, 5}));
}

TEST(Model, ZeroWeightsAndInputGiveZeroLatent) {
  for (auto cell : {CellType::Gru, CellType::Tanh}) {
    ModelSpec spec = tiny_spec();
    spec.cell = cell;
    auto params = zeroed(ModelParams::init(spec, 3));
    ad::Graph g;
    BoundParams p(g, params);
    auto z = encode(p, Array::matrix(3, 8, 0.0));
    for (double v : z.value().values()) EXPECT_EQ(v, 0.0);
    auto x = decode(p, z, 8);
    EXPECT_EQ(x.shape(), (Shape{3, 8}));
    for (double v : x.value().values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(Model, DecodeOfLengthZeroIsEmpty) {
  auto params = ModelParams::init(tiny_spec(), 0);
  ad::Graph g;
  BoundParams p(g, params);
  auto z = encode(p, Array::matrix(2, 8, 1.0));
  EXPECT_EQ(decode(p, z, 0).value().size(), 0u);
}

TEST(Model, ShortSeriesRejected) {
  auto params = ModelParams::init(tiny_spec(), 0);
  ad::Graph g;
  BoundParams p(g, params);
  EXPECT_THROW(encode(p, Array::matrix(2, 3, 1.0)), ConfigError);
}

TEST(DilatedLayer, ZeroInputZeroBiasStaysZero) {
  ModelSpec spec;
  spec.units = {4};
  spec.dilations = {4};
  auto params = ModelParams::init(spec, 1);
  Array out = layer_output(params, Array::matrix(3, 12, 0.0), 4);
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

// h⁷ of a dilation-4 layer reads x⁷ directly and x³ through h³, nothing else.
TEST(DilatedLayer, DilationFourDependencyProbe) {
  ModelSpec spec;
  spec.units = {4};
  spec.dilations = {4};
  auto params = ModelParams::init(spec, 2);
  std::mt19937_64 rng(5);
  Array x = random_array({1, 8}, rng);
  auto h7 = [&](const Array& s) {
    Array out = layer_output(params, s, 4);
    return out.rows_at({7});
  };
  const Array base = h7(x);
  for (std::size_t t = 0; t < 8; ++t) {
    Array y = x;
    y(0, t) = 0.0;
    const double change = max_abs_diff(h7(y), base);
    if (t == 3 || t == 7) {
      EXPECT_GT(change, 1e-6) << "t=" << t;
    } else {
      EXPECT_EQ(change, 0.0) << "t=" << t;
    }
  }
}

TEST(DilatedLayer, DilationOneIsAPlainRecurrence) {
  ModelSpec spec;
  spec.units = {3};
  spec.dilations = {1};
  spec.cell = CellType::Tanh;
  auto params = ModelParams::init(spec, 4);
  std::mt19937_64 rng(6);
  Array x = random_array({2, 6}, rng);
  Array out = layer_output(params, x, 1);
  const auto& w = params.layout(0).forward[0];
  const Array &wx = params[w.input], &wh = params[w.recurrent], &b = params[w.bias];
  for (std::size_t i = 0; i < 2; ++i) {
    std::vector<double> h(3, 0.0);
    for (std::size_t t = 0; t < 6; ++t) {
      std::vector<double> next(3);
      for (std::size_t j = 0; j < 3; ++j) {
        double a = x(i, t) * wx(0, j) + b(0, j);
        for (std::size_t q = 0; q < 3; ++q) a += h[q] * wh(q, j);
        next[j] = std::tanh(a);
      }
      h = next;
      for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(out(t * 2 + i, j), h[j], 1e-14);
    }
  }
}

TEST(Model, ReconstructionGradientMatchesFiniteDifferences) {
  for (auto cell : {CellType::Gru, CellType::Tanh}) {
    ModelSpec spec = tiny_spec();
    spec.cell = cell;
    auto params = ModelParams::init(spec, 7);
    std::mt19937_64 rng(8);
    for (auto& a : params.values())
      for (auto& v : a.values()) v += 0.1 * std::normal_distribution<double>()(rng);
    Array x = random_array({2, 8}, rng), xa = random_array({2, 8}, rng);
    auto r = check_gradients([&](ad::Graph& g, const std::vector<ad::Var>& leaves) {
      BoundParams p(params, leaves);
      auto z = encode(p, x, 0), za = encode(p, xa, 1);
      return objectives::reconstruction(g.constant(x), decode(p, z, 8, 0), g.constant(xa), decode(p, za, 8, 1));
    }, params.values());
    for (std::size_t i = 0; i < params.size(); ++i) EXPECT_LT(r.rel_error[i], 1e-3) << params.names()[i];
  }
}

TEST(Model, SharedWeightsServeBothViews) {
  ModelSpec spec = tiny_spec();
  auto shared = ModelParams::init(spec, 0);
  EXPECT_EQ(&shared.layout(0), &shared.layout(1));
  ad::Graph g;
  BoundParams p(g, shared);
  std::mt19937_64 rng(9);
  g.backward(ad::sum(ad::square(encode(p, random_array({2, 8}, rng), 1))));
  double norm = 0;
  for (const auto& gr : p.grads())
    for (double v : gr.values()) norm += v * v;
  EXPECT_GT(norm, 0.0);

  spec.shared_weights = false;
  auto separate = ModelParams::init(spec, 0);
  EXPECT_EQ(separate.size(), 2 * shared.size());
  EXPECT_EQ(separate.names()[shared.size()], "view1." + shared.names()[0]);
}

TEST(Model, ParameterNamesAreUniqueAndStable) {
  auto a = ModelParams::init(ModelSpec{}, 0), b = ModelParams::init(ModelSpec{}, 0);
  EXPECT_EQ(a.names(), b.names());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
  std::set<std::string> unique(a.names().begin(), a.names().end());
  EXPECT_EQ(unique.size(), a.size());
}

TEST(Checkpoint, RoundTripIsBitExact) {
  auto params = ModelParams::init(ModelSpec{}, 11);
  std::vector<NamedArray> arrays;
  for (std::size_t i = 0; i < params.size(); ++i) arrays.push_back({params.names()[i], params[i]});
  arrays.push_back({"scalar", Array::scalar(-0.0)});
  std::stringstream buf;
  write_checkpoint(buf, arrays);
  auto back = read_checkpoint(buf);
  ASSERT_EQ(back.size(), arrays.size());
  for (std::size_t i = 0; i < arrays.size(); ++i) {
    EXPECT_EQ(back[i].name, arrays[i].name);
    EXPECT_EQ(back[i].value.shape(), arrays[i].value.shape());
    EXPECT_EQ(std::memcmp(back[i].value.data(), arrays[i].value.data(), arrays[i].value.size() * sizeof(double)), 0);
  }
  std::vector<std::string> names;
  std::vector<Array> values;
  for (std::size_t i = 0; i < params.size(); ++i) {
    names.push_back(back[i].name);
    values.push_back(back[i].value);
  }
  auto restored = ModelParams::from_arrays(ModelSpec{}, names, values);
  for (std::size_t i = 0; i < params.size(); ++i) EXPECT_EQ(restored[i], params[i]);
}

TEST(Checkpoint, CorruptInputRejected) {
  std::stringstream bad("not a checkpoint");
  EXPECT_THROW(read_checkpoint(bad), Error);
  std::stringstream buf;
  write_checkpoint(buf, {{"w", Array::matrix(3, 3, 1.0)}});
  std::string text = buf.str();
  std::stringstream truncated(text.substr(0, text.size() - 5));
  EXPECT_THROW(read_checkpoint(truncated), Error);
  auto params = ModelParams::init(tiny_spec(), 0);
  EXPECT_THROW(ModelParams::from_arrays(ModelSpec{}, params.names(), params.values()), Error);
}

TEST(Model, InvalidSpecRejected) {
  ModelSpec s;
  s.dilations = {1, 2};
  EXPECT_THROW(s.validate(), ConfigError);
  s = ModelSpec{};
  s.units = {0, 3, 3};
  EXPECT_THROW(s.validate(), ConfigError);
  EXPECT_THROW(parse_cell_type("lstm"), ConfigError);
}
