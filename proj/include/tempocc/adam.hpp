#pragma once

#include <cmath>
#include <vector>

#include "tempocc/array.hpp"
#include "tempocc/error.hpp"

namespace tempocc {

struct AdamState {
  std::vector<Array> first, second;  ///< moment estimates, one per parameter
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const std::vector<Array>& params) {
    AdamState s;
    for (const auto& p : params) {
      s.first.emplace_back(p.shape(), 0.0);
      s.second.emplace_back(p.shape(), 0.0);
    }
    return s;
  }
};

/// One bias-corrected Adam update of `params` in place.
inline void adam_step(std::vector<Array>& params, const std::vector<Array>& grads, AdamState& state, double lr) {
  if (params.size() != grads.size() || params.size() != state.first.size())
    throw DimensionError("adam_step: parameter, gradient and state counts differ");
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Array& p = params[k];
    const Array& g = grads[k];
    if (g.shape() != p.shape() || state.first[k].shape() != p.shape())
      throw DimensionError("adam_step: shape mismatch for parameter " + std::to_string(k));
    Array& m = state.first[k];
    Array& v = state.second[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1, v_hat = v[i] / c2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

/// Rescales gradients so that their joint L2 norm is at most max_norm.
/// Returns the norm before clipping.
inline double clip_global_norm(std::vector<Array>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (double v : g.values()) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0) {
    const double f = max_norm / norm;
    for (auto& g : grads)
      for (double& v : g.values()) v *= f;
  }
  return norm;
}

}  // namespace tempocc
