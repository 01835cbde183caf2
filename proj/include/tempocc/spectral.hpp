#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "tempocc/array.hpp"
#include "tempocc/autodiff.hpp"
#include "tempocc/error.hpp"
#include "tempocc/svd.hpp"

namespace tempocc {

/// Relaxed cluster indicator of the whole dataset plus the basis that maps
/// latents onto it.
struct ClusterIndicator {
  Array q_full;           ///< N×k, orthonormal columns (right singular vectors of Z)
  Array basis;            ///< d×k, U_k·diag(1/σ_k)
  Array singular_values;  ///< k
  long refresh_epoch = -1;

  std::size_t k() const { return q_full.cols(); }
  bool empty() const { return q_full.size() == 0; }
};

/// Closed-form maximizer of Tr(QᵀZᵀZQ) subject to QᵀQ = I: the top-k right
/// singular vectors of Z (d×N).
inline ClusterIndicator refresh_indicator(const Array& z_full, std::size_t k, long epoch = 0) {
  SvdResult svd = svd_truncated(z_full, k);
  const double smallest = svd.S[k - 1];
  if (!(smallest > 1e-12 * std::max(1.0, svd.S[0])))
    throw NumericError("latent matrix has rank below k=" + std::to_string(k) + "; cannot refresh the indicator");
  ClusterIndicator ind;
  ind.q_full = svd.V;
  ind.basis = svd.U;
  for (std::size_t r = 0; r < ind.basis.rows(); ++r)
    for (std::size_t c = 0; c < k; ++c) ind.basis(r, c) /= svd.S[c];
  ind.singular_values = svd.S;
  ind.refresh_epoch = epoch;
  return ind;
}

/// Q_batch = Z_batchᵀ · basis (n×k), differentiable in Z_batch. On the
/// latents the indicator was fitted to, this reproduces the Q_full rows.
inline ad::Var project_batch(const ClusterIndicator& ind, const ad::Var& z_batch) {
  if (ind.empty()) throw Error("project_batch: indicator has not been computed");
  return ad::matmul(ad::transpose(z_batch), z_batch.graph().constant(ind.basis));
}

/// Nearest matrix with orthonormal columns (polar factor U·Vᵀ) to the rows
/// `idx` of Q_full.
inline Array orthonormal_rows(const Array& q_full, const std::vector<std::size_t>& idx) {
  Array rows = q_full.rows_at(idx);
  const std::size_t k = rows.cols();
  if (k > rows.rows()) throw DimensionError("batch smaller than the number of clusters");
  SvdResult svd = svd_truncated(rows, k);
  return matmul(svd.U, svd.V.transposed());
}

/// Tr(QᵀZᵀZQ) for plain arrays.
inline double captured_trace(const Array& z, const Array& q) {
  Array zq = matmul(z, q);
  double s = 0.0;
  for (double v : zq.values()) s += v * v;
  return s;
}

struct KMeansResult {
  Array centroids;              ///< k×d
  std::vector<int> labels;      ///< N
  double inertia = 0.0;         ///< Σ squared distance to the assigned centroid
  std::vector<double> history;  ///< inertia after each Lloyd iteration of the best restart
};

namespace detail {

inline double squared_distance(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

inline KMeansResult kmeans_once(const Array& x, std::size_t k, std::mt19937_64& rng, std::size_t max_iter) {
  const std::size_t n = x.rows(), d = x.cols();
  KMeansResult res;
  res.centroids = Array::matrix(k, d);

  // k-means++ seeding
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::size_t first = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  std::copy_n(x.data() + first * d, d, res.centroids.data());
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dist[i] = std::min(dist[i], squared_distance(x.data() + i * d, res.centroids.data() + (c - 1) * d, d));
      total += dist[i];
    }
    std::size_t pick = n - 1;
    if (total > 0) {
      const double target = std::uniform_real_distribution<double>(0.0, total)(rng);
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += dist[i];
        if (acc > target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    }
    std::copy_n(x.data() + pick * d, d, res.centroids.data() + c * d);
  }

  // Lloyd iterations
  res.labels.assign(n, -1);
  std::vector<double> sums(k * d);
  std::vector<std::size_t> counts(k);
  for (std::size_t it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        double dd = squared_distance(x.data() + i * d, res.centroids.data() + c * d, d);
        if (dd < best_d) {
          best_d = dd;
          best = static_cast<int>(c);
        }
      }
      if (res.labels[i] != best) changed = true;
      res.labels[i] = best;
    }
    if (!changed) break;
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto c = static_cast<std::size_t>(res.labels[i]);
      ++counts[c];
      for (std::size_t j = 0; j < d; ++j) sums[c * d + j] += x(i, j);
    }
    for (std::size_t c = 0; c < k; ++c)
      if (counts[c] > 0)  // an empty cluster keeps its centroid
        for (std::size_t j = 0; j < d; ++j) res.centroids(c, j) = sums[c * d + j] / static_cast<double>(counts[c]);
    double after = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      after += squared_distance(x.data() + i * d,
                                res.centroids.data() + static_cast<std::size_t>(res.labels[i]) * d, d);
    res.history.push_back(after);
  }
  res.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    res.inertia +=
        squared_distance(x.data() + i * d, res.centroids.data() + static_cast<std::size_t>(res.labels[i]) * d, d);
  return res;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding on the rows of x (N×d). Stops
/// when assignments are stable or after `max_iter` iterations; keeps the
/// lowest-inertia of `restarts` runs.
inline KMeansResult kmeans(const Array& x, std::size_t k, std::uint64_t seed, std::size_t restarts = 10,
                           std::size_t max_iter = 300) {
  if (x.rank() != 2) throw DimensionError("kmeans expects an N×d array");
  if (k == 0 || k > x.rows())
    throw DimensionError("kmeans: k=" + std::to_string(k) + " with " + std::to_string(x.rows()) + " points");
  std::mt19937_64 rng(seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < std::max<std::size_t>(1, restarts); ++r) {
    KMeansResult res = detail::kmeans_once(x, k, rng, max_iter);
    if (res.inertia < best.inertia) best = std::move(res);
  }
  return best;
}

enum class LabelMode { KMeansOnZ, ArgmaxAbsQ };

inline const char* to_string(LabelMode m) { return m == LabelMode::KMeansOnZ ? "kmeans-on-Z" : "argmax-absQ"; }

inline LabelMode parse_label_mode(const std::string& s) {
  if (s == "kmeans-on-Z" || s == "kmeans") return LabelMode::KMeansOnZ;
  if (s == "argmax-absQ" || s == "argmax") return LabelMode::ArgmaxAbsQ;
  throw ConfigError("unknown label readout '" + s + "'");
}

struct LabelReadout {
  std::vector<int> labels;
  bool empty_cluster = false;  ///< argmax mode left some cluster without members
};

/// Hard labels from the trained latents (k-means) or the indicator (argmax |Q|).
inline LabelReadout extract_labels(LabelMode mode, const Array& z_full, const ClusterIndicator& ind, std::size_t k,
                                   std::size_t restarts, std::uint64_t seed) {
  LabelReadout out;
  if (mode == LabelMode::KMeansOnZ) {
    out.labels = kmeans(z_full.transposed(), k, seed, restarts).labels;
    return out;
  }
  if (ind.empty() || ind.k() != k) throw Error("argmax readout needs an indicator with k columns");
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t j = 0; j < ind.q_full.rows(); ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < k; ++i)
      if (std::abs(ind.q_full(j, i)) > std::abs(ind.q_full(j, best))) best = i;
    out.labels.push_back(static_cast<int>(best));
    ++counts[best];
  }
  out.empty_cluster = std::count(counts.begin(), counts.end(), 0) > 0;
  return out;
}

}  // namespace tempocc
