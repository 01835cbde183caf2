#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "tempocc/array.hpp"
#include "tempocc/autodiff.hpp"

namespace tempocc::testing {

inline Array random_array(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Array a(shape, 0.0);
  for (auto& v : a.values()) v = u(rng);
  return a;
}

inline Array gaussian_array(Shape shape, std::mt19937_64& rng, double sigma = 1.0) {
  std::normal_distribution<double> n(0.0, sigma);
  Array a(shape, 0.0);
  for (auto& v : a.values()) v = n(rng);
  return a;
}

/// Builds a scalar loss from graph leaves standing for `inputs`.
using LossBuilder = std::function<ad::Var(ad::Graph&, const std::vector<ad::Var>&)>;

struct GradCheck {
  std::vector<Array> analytic, numeric;
  /// Per input: ‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖, floor).
  std::vector<double> rel_error;
  double worst() const { return rel_error.empty() ? 0.0 : *std::max_element(rel_error.begin(), rel_error.end()); }
};

inline double evaluate_loss(const LossBuilder& f, const std::vector<Array>& inputs) {
  ad::Graph g;
  std::vector<ad::Var> leaves;
  for (const auto& a : inputs) leaves.push_back(g.constant(a));
  return f(g, leaves).value().item();
}

/// Central differences with step h against reverse-mode gradients.
inline GradCheck check_gradients(const LossBuilder& f, std::vector<Array> inputs, double h = 1e-5,
                                 double floor = 1e-10) {
  GradCheck out;
  {
    ad::Graph g;
    std::vector<ad::Var> leaves;
    for (const auto& a : inputs) leaves.push_back(g.parameter(a));
    g.backward(f(g, leaves));
    for (const auto& v : leaves) out.analytic.push_back(v.grad());
  }
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    Array num(inputs[t].shape(), 0.0);
    for (std::size_t i = 0; i < inputs[t].size(); ++i) {
      const double keep = inputs[t][i];
      inputs[t][i] = keep + h;
      const double up = evaluate_loss(f, inputs);
      inputs[t][i] = keep - h;
      const double down = evaluate_loss(f, inputs);
      inputs[t][i] = keep;
      num[i] = (up - down) / (2 * h);
    }
    double diff = 0, na = 0, nn = 0;
    for (std::size_t i = 0; i < num.size(); ++i) {
      diff += std::pow(out.analytic[t][i] - num[i], 2);
      na += std::pow(out.analytic[t][i], 2);
      nn += std::pow(num[i], 2);
    }
    out.rel_error.push_back(std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), floor}));
    out.numeric.push_back(std::move(num));
  }
  return out;
}

/// Random n×k matrix with orthonormal columns (Gram–Schmidt on Gaussians).
inline Array random_orthonormal(std::size_t n, std::size_t k, std::mt19937_64& rng) {
  Array q = gaussian_array({n, k}, rng);
  for (std::size_t c = 0; c < k; ++c) {
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t p = 0; p < c; ++p) {
        double dot = 0;
        for (std::size_t r = 0; r < n; ++r) dot += q(r, c) * q(r, p);
        for (std::size_t r = 0; r < n; ++r) q(r, c) -= dot * q(r, p);
      }
    double norm = 0;
    for (std::size_t r = 0; r < n; ++r) norm += q(r, c) * q(r, c);
    norm = std::sqrt(norm);
    for (std::size_t r = 0; r < n; ++r) q(r, c) /= norm;
  }
  return q;
}

}  // namespace tempocc::testing
