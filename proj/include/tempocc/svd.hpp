#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "tempocc/array.hpp"
#include "tempocc/error.hpp"

namespace tempocc {

/// Rank-k factors of m ≈ U · diag(S) · Vᵀ.
struct SvdResult {
  Array U;  ///< d×k, orthonormal columns
  Array S;  ///< k, non-increasing, non-negative
  Array V;  ///< n×k, orthonormal columns
};

namespace detail {

using Column = std::vector<double>;

inline double dot(const Column& a, const Column& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// One-sided (Hestenes) Jacobi: rotates column pairs of `cols` until they are
// mutually orthogonal, applying the same rotations to `rotations`, which
// starts as the identity. Sweeps visit pairs in a fixed order.
inline void one_sided_jacobi(std::vector<Column>& cols, std::vector<Column>& rotations) {
  constexpr int kMaxSweeps = 100;
  const std::size_t q = cols.size();
  const double tol = std::max(1e-15, static_cast<double>(cols.empty() ? 0 : cols[0].size()) *
                                         std::numeric_limits<double>::epsilon());
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t i = 0; i + 1 < q; ++i) {
      for (std::size_t j = i + 1; j < q; ++j) {
        const double alpha = dot(cols[i], cols[i]);
        const double beta = dot(cols[j], cols[j]);
        const double gamma = dot(cols[i], cols[j]);
        if (alpha == 0.0 || beta == 0.0) continue;
        if (std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        auto rotate = [c, s](Column& a, Column& b) {
          for (std::size_t r = 0; r < a.size(); ++r) {
            const double x = a[r], y = b[r];
            a[r] = c * x - s * y;
            b[r] = s * x + c * y;
          }
        };
        rotate(cols[i], cols[j]);
        rotate(rotations[i], rotations[j]);
        rotated = true;
      }
    }
    if (!rotated) return;
  }
  throw NumericError("SVD: one-sided Jacobi did not converge in 100 sweeps");
}

// Replaces column `c` of `basis` with a unit vector orthogonal to columns
// [0, c), built from the first standard basis vector that survives
// Gram-Schmidt.
inline void complete_column(std::vector<Column>& basis, std::size_t c) {
  const std::size_t dim = basis[c].size();
  for (std::size_t e = 0; e < dim; ++e) {
    Column v(dim, 0.0);
    v[e] = 1.0;
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t j = 0; j < c; ++j) {
        const double p = dot(v, basis[j]);
        for (std::size_t r = 0; r < dim; ++r) v[r] -= p * basis[j][r];
      }
    const double norm = std::sqrt(dot(v, v));
    if (norm > 0.5) {
      for (double& x : v) x /= norm;
      basis[c] = std::move(v);
      return;
    }
  }
  throw NumericError("SVD: cannot complete an orthonormal basis");
}

}  // namespace detail

/// k-truncated singular value decomposition of a rank-2 array.
///
/// Jacobi runs on the smaller Gram dimension. Singular vectors are
/// sign-normalized so that the largest-magnitude entry of every column of
/// V is positive (first such entry on ties); U follows V. Not differentiable.
inline SvdResult svd_truncated(const Array& m, std::size_t k) {
  if (m.rank() != 2) throw DimensionError("svd_truncated needs a rank-2 array, got " + to_string(m.shape()));
  const std::size_t d = m.rows(), n = m.cols();
  if (k == 0 || k > std::min(d, n))
    throw DimensionError("svd_truncated: k=" + std::to_string(k) + " out of range for " + to_string(m.shape()));
  if (!m.all_finite()) throw NumericError("svd_truncated: non-finite input");

  // Orthogonalize the columns of A, where A = m when n <= d and A = mᵀ otherwise.
  const bool swapped = n > d;
  const std::size_t p = swapped ? n : d;  // rows of A
  const std::size_t q = swapped ? d : n;  // columns of A
  std::vector<detail::Column> cols(q, detail::Column(p));
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      if (swapped) cols[r][c] = m(r, c);
      else cols[c][r] = m(r, c);
    }
  std::vector<detail::Column> rot(q, detail::Column(q, 0.0));
  for (std::size_t i = 0; i < q; ++i) rot[i][i] = 1.0;

  detail::one_sided_jacobi(cols, rot);

  std::vector<double> sigma(q);
  for (std::size_t j = 0; j < q; ++j) sigma[j] = std::sqrt(detail::dot(cols[j], cols[j]));
  std::vector<std::size_t> order(q);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sigma[a] > sigma[b]; });

  // A = B·Wᵀ with B = cols; left vectors are B's normalized columns.
  std::vector<detail::Column> left(q), right(q);
  std::vector<double> s(q);
  const double smax = q ? sigma[order[0]] : 0.0;
  const double tiny = std::max(smax * 1e-13, std::numeric_limits<double>::min());
  for (std::size_t j = 0; j < q; ++j) {
    s[j] = sigma[order[j]];
    right[j] = rot[order[j]];
    left[j] = cols[order[j]];
    if (s[j] > tiny) {
      for (double& x : left[j]) x /= s[j];
    } else {
      detail::complete_column(left, j);
    }
  }

  // With A = mᵀ, m = W·Σ·Bᵀ, so the roles of left and right swap.
  const std::vector<detail::Column>& u_cols = swapped ? right : left;
  const std::vector<detail::Column>& v_cols = swapped ? left : right;

  SvdResult out{Array::matrix(d, k), Array({k}), Array::matrix(n, k)};
  for (std::size_t j = 0; j < k; ++j) {
    const auto& v = v_cols[j];
    std::size_t arg = 0;
    for (std::size_t r = 1; r < n; ++r)
      if (std::abs(v[r]) > std::abs(v[arg])) arg = r;
    const double sign = v[arg] < 0 ? -1.0 : 1.0;
    out.S[j] = s[j];
    for (std::size_t r = 0; r < d; ++r) out.U(r, j) = sign * u_cols[j][r];
    for (std::size_t r = 0; r < n; ++r) out.V(r, j) = sign * v[r];
  }
  return out;
}

/// ‖AᵀA − I‖∞ for a matrix with (supposedly) orthonormal columns.
inline double orthonormality_error(const Array& a) {
  Array g = matmul(a.transposed(), a);
  double err = 0.0;
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j) err = std::max(err, std::abs(g(i, j) - (i == j ? 1.0 : 0.0)));
  return err;
}

}  // namespace tempocc
