#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tempocc/error.hpp"

namespace tempocc {

using Partition = std::vector<int>;

namespace detail {

struct Contingency {
  std::map<std::pair<int, int>, std::int64_t> cells;
  std::map<int, std::int64_t> rows, cols;
  std::int64_t total = 0;
};

inline Contingency contingency(const Partition& a, const Partition& b) {
  if (a.size() != b.size())
    throw DimensionError("partitions have different lengths (" + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()) + ")");
  Contingency t;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++t.cells[{a[i], b[i]}];
    ++t.rows[a[i]];
    ++t.cols[b[i]];
  }
  t.total = static_cast<std::int64_t>(a.size());
  return t;
}

inline double entropy(const std::map<int, std::int64_t>& counts, double n) {
  double h = 0.0;
  for (const auto& [label, c] : counts) {
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

inline std::int64_t pairs(std::int64_t n) { return n * (n - 1) / 2; }

}  // namespace detail

/// Normalized mutual information I(a;b)/√(H(a)H(b)). When either partition
/// has zero entropy the score is 1 for identical partitions and 0 otherwise.
inline double nmi(const Partition& pred, const Partition& truth) {
  if (pred.empty()) throw DimensionError("nmi of empty partitions");
  auto t = detail::contingency(pred, truth);
  const double n = static_cast<double>(t.total);
  const double ha = detail::entropy(t.rows, n), hb = detail::entropy(t.cols, n);
  if (t.rows.size() == 1 || t.cols.size() == 1) {
    const bool identical = t.cells.size() == t.rows.size() && t.cells.size() == t.cols.size();
    return identical ? 1.0 : 0.0;
  }
  double mi = 0.0;
  for (const auto& [key, c] : t.cells) {
    const double nij = static_cast<double>(c);
    const double ni = static_cast<double>(t.rows.at(key.first)), nj = static_cast<double>(t.cols.at(key.second));
    mi += nij / n * std::log(n * nij / (ni * nj));
  }
  return std::clamp(mi / std::sqrt(ha * hb), 0.0, 1.0);
}

/// Fraction of sample pairs on which the two partitions agree.
inline double rand_index(const Partition& pred, const Partition& truth) {
  if (pred.size() < 2) throw DimensionError("rand index needs at least two samples");
  auto t = detail::contingency(pred, truth);
  std::int64_t together_both = 0, together_pred = 0, together_truth = 0;
  for (const auto& [key, c] : t.cells) together_both += detail::pairs(c);
  for (const auto& [label, c] : t.rows) together_pred += detail::pairs(c);
  for (const auto& [label, c] : t.cols) together_truth += detail::pairs(c);
  const std::int64_t all = detail::pairs(t.total);
  const std::int64_t apart_both = all - together_pred - together_truth + together_both;
  return static_cast<double>(together_both + apart_both) / static_cast<double>(all);
}

}  // namespace tempocc
