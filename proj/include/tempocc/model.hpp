#pragma once

// Temporal auto-encoder: a bidirectional stack of dilated recurrent layers
// as encoder and a single recurrent layer rolled out autoregressively as
// decoder.
//
// Sequences inside the graph are time-major row blocks: an n-sample batch of
// length m with f features is an [m·n × f] array whose row t·n + i holds
// sample i at step t.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "tempocc/array.hpp"
#include "tempocc/autodiff.hpp"
#include "tempocc/error.hpp"

namespace tempocc {

enum class CellType { Gru, Tanh };

inline const char* to_string(CellType c) { return c == CellType::Gru ? "gru" : "tanh"; }

inline CellType parse_cell_type(const std::string& s) {
  if (s == "gru") return CellType::Gru;
  if (s == "tanh" || s == "rnn") return CellType::Tanh;
  throw ConfigError("unknown cell type '" + s + "'");
}

struct ModelSpec {
  std::vector<std::size_t> units{50, 30, 30};
  std::vector<std::size_t> dilations{1, 4, 16};
  CellType cell = CellType::Gru;
  bool shared_weights = true;  ///< one auto-encoder for both views

  std::size_t layers() const { return units.size(); }
  std::size_t latent_dim() const { return 2 * std::accumulate(units.begin(), units.end(), std::size_t{0}); }
  std::size_t decoder_hidden() const { return units.at(0); }
  std::size_t max_dilation() const {
    std::size_t m = 0;
    for (auto d : dilations) m = std::max(m, d);
    return m;
  }

  void validate() const {
    if (units.empty()) throw ConfigError("model needs at least one layer");
    if (units.size() != dilations.size())
      throw ConfigError("units and dilations must have the same length (" + std::to_string(units.size()) + " vs " +
                        std::to_string(dilations.size()) + ")");
    for (auto u : units)
      if (u == 0) throw ConfigError("layer width must be positive");
    for (auto d : dilations)
      if (d == 0) throw ConfigError("dilation must be positive");
  }
};

/// Index triple of one recurrent cell's weights inside ModelParams.
struct CellWeights {
  std::size_t input = 0;      ///< in×G
  std::size_t recurrent = 0;  ///< h×G
  std::size_t bias = 0;       ///< 1×G
  std::size_t hidden = 0;
};

/// Weights of one auto-encoder copy.
struct AutoEncoderLayout {
  std::vector<CellWeights> forward, backward;  ///< per encoder layer
  CellWeights decoder;
  std::size_t init_weight = 0, init_bias = 0;  ///< latent -> decoder state
  std::size_t out_weight = 0, out_bias = 0;    ///< decoder state -> value
};

/// Every trainable array of the model, in a fixed creation order.
class ModelParams {
 public:
  ModelParams() = default;

  /// Uniform(±1/√fan_in) weights, zero biases; deterministic per seed.
  static ModelParams init(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    ModelParams p;
    p.spec_ = spec;
    std::mt19937_64 rng(seed);
    const std::size_t copies = spec.shared_weights ? 1 : 2;
    for (std::size_t c = 0; c < copies; ++c) p.layouts_.push_back(p.add_copy(c, rng));
    return p;
  }

  /// Rebuilds the layout for `spec` and adopts `values` in creation order.
  static ModelParams from_arrays(const ModelSpec& spec, const std::vector<std::string>& names,
                                 std::vector<Array> values) {
    ModelParams p = init(spec, 0);
    if (names != p.names_) throw Error("checkpoint tensors do not match the model layout");
    for (std::size_t i = 0; i < values.size(); ++i)
      if (values[i].shape() != p.values_[i].shape())
        throw DimensionError("checkpoint tensor " + names[i] + " has shape " + to_string(values[i].shape()) +
                             ", expected " + to_string(p.values_[i].shape()));
    p.values_ = std::move(values);
    return p;
  }

  const ModelSpec& spec() const { return spec_; }
  std::size_t size() const { return values_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<Array>& values() const { return values_; }
  std::vector<Array>& values() { return values_; }
  const Array& operator[](std::size_t i) const { return values_[i]; }
  Array& operator[](std::size_t i) { return values_[i]; }

  /// Layout of the copy serving `view` (0 original, 1 augmented).
  const AutoEncoderLayout& layout(std::size_t view) const { return layouts_.at(spec_.shared_weights ? 0 : view); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
  }

 private:
  std::size_t add(std::string name, Array value) {
    names_.push_back(std::move(name));
    values_.push_back(std::move(value));
    return values_.size() - 1;
  }

  std::size_t add_uniform(std::string name, std::size_t rows, std::size_t cols, std::size_t fan_in,
                          std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    Array a = Array::matrix(rows, cols);
    for (double& v : a.values()) v = u(rng);
    return add(std::move(name), std::move(a));
  }

  CellWeights add_cell(const std::string& prefix, std::size_t in, std::size_t hidden, std::mt19937_64& rng) {
    const std::size_t gates = spec_.cell == CellType::Gru ? 3 * hidden : hidden;
    CellWeights w;
    w.hidden = hidden;
    w.input = add_uniform(prefix + ".wx", in, gates, in, rng);
    w.recurrent = add_uniform(prefix + ".wh", hidden, gates, hidden, rng);
    w.bias = add(prefix + ".b", Array::matrix(1, gates));
    return w;
  }

  AutoEncoderLayout add_copy(std::size_t copy, std::mt19937_64& rng) {
    const std::string root = copy == 0 ? "" : "view" + std::to_string(copy) + ".";
    AutoEncoderLayout l;
    for (const char* dir : {"fw", "bw"}) {
      auto& cells = std::string(dir) == "fw" ? l.forward : l.backward;
      std::size_t in = 1;
      for (std::size_t i = 0; i < spec_.layers(); ++i) {
        cells.push_back(add_cell(root + "enc." + dir + ".l" + std::to_string(i), in, spec_.units[i], rng));
        in = spec_.units[i];
      }
    }
    const std::size_t d = spec_.latent_dim(), h = spec_.decoder_hidden();
    l.init_weight = add_uniform(root + "dec.init.w", d, h, d, rng);
    l.init_bias = add(root + "dec.init.b", Array::matrix(1, h));
    l.decoder = add_cell(root + "dec.cell", 1, h, rng);
    l.out_weight = add_uniform(root + "dec.out.w", h, 1, h, rng);
    l.out_bias = add(root + "dec.out.b", Array::matrix(1, 1));
    return l;
  }

  ModelSpec spec_;
  std::vector<std::string> names_;
  std::vector<Array> values_;
  std::vector<AutoEncoderLayout> layouts_;
};

/// ModelParams placed on a graph, either as trainable leaves or constants.
class BoundParams {
 public:
  BoundParams(ad::Graph& graph, const ModelParams& params, bool trainable = true) : params_(&params) {
    vars_.reserve(params.size());
    for (const auto& v : params.values()) vars_.push_back(trainable ? graph.parameter(v) : graph.constant(v));
  }

  /// Uses existing graph nodes, one per parameter in creation order.
  BoundParams(const ModelParams& params, std::vector<ad::Var> vars) : params_(&params), vars_(std::move(vars)) {
    if (vars_.size() != params.size()) throw DimensionError("BoundParams: one variable per parameter required");
    for (std::size_t i = 0; i < vars_.size(); ++i)
      if (vars_[i].shape() != params[i].shape())
        throw DimensionError("BoundParams: shape mismatch for " + params.names()[i]);
  }

  const ModelParams& params() const { return *params_; }
  const ad::Var& operator[](std::size_t i) const { return vars_[i]; }
  const std::vector<ad::Var>& vars() const { return vars_; }
  ad::Graph& graph() const { return vars_.front().graph(); }

  /// Gradients of every parameter after backward().
  std::vector<Array> grads() const {
    std::vector<Array> out;
    out.reserve(vars_.size());
    for (const auto& v : vars_) out.push_back(v.grad());
    return out;
  }

 private:
  const ModelParams* params_;
  std::vector<ad::Var> vars_;
};

/// One recurrent update on a block of rows: h = Cell(x·Wx + b, h_prev).
/// `xproj` already contains x·Wx + b. A missing h_prev means the zero state.
inline ad::Var cell_step(const BoundParams& p, CellType type, const CellWeights& w, const ad::Var& xproj,
                         const ad::Var* h_prev) {
  using namespace ad;
  const std::size_t h = w.hidden;
  if (type == CellType::Tanh) {
    if (!h_prev) return ad::tanh(xproj);
    return ad::tanh(xproj + matmul(*h_prev, p[w.recurrent]));
  }
  Var xz = slice(xproj, 1, 0, h), xr = slice(xproj, 1, h, h), xn = slice(xproj, 1, 2 * h, h);
  if (!h_prev) {
    // h = (1 - z) ⊙ n with a zero previous state
    Var z = sigmoid(xz);
    Var n = ad::tanh(xn);
    return mul(affine(z, -1.0, 1.0), n);
  }
  Var hh = matmul(*h_prev, p[w.recurrent]);
  Var z = sigmoid(xz + slice(hh, 1, 0, h));
  Var r = sigmoid(xr + slice(hh, 1, h, h));
  Var n = ad::tanh(xn + r * slice(hh, 1, 2 * h, h));
  return n + z * (*h_prev - n);
}

/// One dilated recurrent layer over a time-major sequence [m·n × in]:
/// h_t = Cell(x_t, h_{t-dilation}), with zero state before t = 0.
///
/// Steps whose indices differ by less than the dilation never read each
/// other, so each run of `dilation` consecutive steps is computed as one
/// block of rows.
inline ad::Var dilated_layer(const BoundParams& p, CellType type, const CellWeights& w, const ad::Var& sequence,
                             std::size_t batch, std::size_t steps, std::size_t dilation) {
  using namespace ad;
  Var xproj = matmul(sequence, p[w.input]) + p[w.bias];
  std::vector<Var> blocks;
  for (std::size_t start = 0; start < steps; start += dilation) {
    const std::size_t len = std::min(dilation, steps - start);
    Var xs = slice(xproj, 0, start * batch, len * batch);
    if (blocks.empty()) {
      blocks.push_back(cell_step(p, type, w, xs, nullptr));
    } else {
      Var prev = blocks.back();
      if (len < dilation) prev = slice(prev, 0, 0, len * batch);
      blocks.push_back(cell_step(p, type, w, xs, &prev));
    }
  }
  return blocks.size() == 1 ? blocks.front() : concat(blocks, 0);
}

/// Time-major [m·n × 1] column of an n×m batch, optionally reversed in time.
inline Array time_major(const Array& series, bool reverse) {
  const std::size_t n = series.rows(), m = series.cols();
  Array out = Array::matrix(m * n, 1);
  for (std::size_t t = 0; t < m; ++t)
    for (std::size_t i = 0; i < n; ++i) out[t * n + i] = series(i, reverse ? m - 1 - t : t);
  return out;
}

/// Latent codes Z (d×n) of an n×m batch: the final hidden state of every
/// layer in both directions, concatenated as fw.l0, bw.l0, fw.l1, bw.l1, ...
inline ad::Var encode(const BoundParams& p, const Array& series, std::size_t view = 0) {
  using namespace ad;
  const ModelSpec& spec = p.params().spec();
  const auto& layout = p.params().layout(view);
  const std::size_t n = series.rows(), m = series.cols();
  if (m < spec.max_dilation())
    throw ConfigError("series length " + std::to_string(m) + " is shorter than the largest dilation " +
                      std::to_string(spec.max_dilation()));
  if (n == 0) throw DimensionError("encode of an empty batch");
  ad::Graph& g = p.graph();
  std::vector<Var> finals_fw, finals_bw;
  for (int dir = 0; dir < 2; ++dir) {
    const auto& cells = dir == 0 ? layout.forward : layout.backward;
    Var seq = g.constant(time_major(series, dir == 1));
    for (std::size_t l = 0; l < spec.layers(); ++l) {
      seq = dilated_layer(p, spec.cell, cells[l], seq, n, m, spec.dilations[l]);
      (dir == 0 ? finals_fw : finals_bw).push_back(slice(seq, 0, (m - 1) * n, n));
    }
  }
  std::vector<Var> parts;
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    parts.push_back(finals_fw[l]);
    parts.push_back(finals_bw[l]);
  }
  return transpose(concat(parts, 1));
}

/// Autoregressive reconstruction x̂ (n×m) from Z (d×n). The initial state is
/// a linear projection of z; step 0 reads 0 and step t reads x̂_{t-1}.
inline ad::Var decode(const BoundParams& p, const ad::Var& latents, std::size_t m, std::size_t view = 0) {
  using namespace ad;
  const ModelSpec& spec = p.params().spec();
  const auto& layout = p.params().layout(view);
  if (latents.shape().size() != 2 || latents.shape()[0] != spec.latent_dim())
    throw DimensionError("decode expects latents of shape [" + std::to_string(spec.latent_dim()) + ",n], got " +
                         to_string(latents.shape()));
  const std::size_t n = latents.shape()[1];
  ad::Graph& g = p.graph();
  if (m == 0) return g.constant(Array::matrix(n, 0));
  Var h = matmul(transpose(latents), p[layout.init_weight]) + p[layout.init_bias];
  Var input = g.constant(Array::matrix(n, 1));
  std::vector<Var> outputs;
  outputs.reserve(m);
  for (std::size_t t = 0; t < m; ++t) {
    Var xproj = matmul(input, p[layout.decoder.input]) + p[layout.decoder.bias];
    h = cell_step(p, spec.cell, layout.decoder, xproj, &h);
    input = matmul(h, p[layout.out_weight]) + p[layout.out_bias];
    outputs.push_back(input);
  }
  return concat(outputs, 1);
}

/// Encodes a full dataset (no gradients), in chunks of `chunk` rows.
inline Array encode_all(const ModelParams& params, const Array& series, std::size_t view = 0,
                        std::size_t chunk = 256) {
  const std::size_t n = series.rows(), d = params.spec().latent_dim();
  Array z = Array::matrix(d, n);
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t len = std::min(chunk, n - start);
    std::vector<std::size_t> rows(len);
    std::iota(rows.begin(), rows.end(), start);
    ad::Graph g;
    BoundParams p(g, params, false);
    const Array& part = encode(p, series.rows_at(rows), view).value();
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t c = 0; c < len; ++c) z(r, start + c) = part(r, c);
  }
  return z;
}

}  // namespace tempocc
