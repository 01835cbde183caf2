#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tempocc/array.hpp"
#include "tempocc/error.hpp"

namespace tempocc {

/// Labeled univariate series of a common length. Labels are dense
/// 0..k_true-1 and are used for evaluation only.
struct TimeSeriesDataset {
  std::string name;
  Array series = Array::matrix(0, 0);  ///< N×m
  std::vector<int> labels;
  std::vector<double> label_values;    ///< original label of each dense class id
  std::vector<std::string> provenance;

  std::size_t size() const { return series.rows(); }
  std::size_t length() const { return series.cols(); }
  std::size_t k_true() const { return label_values.size(); }
  bool empty() const { return size() == 0; }
};

enum class Delimiter { Auto, Tab, Comma };

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line, Delimiter delim) {
  if (delim == Delimiter::Auto) {
    if (line.find('\t') != std::string_view::npos) delim = Delimiter::Tab;
    else if (line.find(',') != std::string_view::npos) delim = Delimiter::Comma;
  }
  std::vector<std::string_view> out;
  if (delim == Delimiter::Auto) {  // whitespace separated
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      std::size_t j = i;
      while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
      if (j > i) out.push_back(line.substr(i, j - i));
      i = j;
    }
    return out;
  }
  const char sep = delim == Delimiter::Tab ? '\t' : ',';
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double parse_number(std::string_view field, std::size_t row) {
  while (!field.empty() && std::isspace(static_cast<unsigned char>(field.front()))) field.remove_prefix(1);
  while (!field.empty() && std::isspace(static_cast<unsigned char>(field.back()))) field.remove_suffix(1);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v))
    throw ParseError("non-numeric field '" + std::string(field) + "'", row);
  return v;
}

// Remaps raw label values to dense ids in ascending order of value.
inline void assign_dense_labels(TimeSeriesDataset& d, const std::vector<double>& raw) {
  std::map<double, int> ids;
  for (double v : raw) ids.emplace(v, 0);
  d.label_values.clear();
  for (auto& [value, id] : ids) {
    id = static_cast<int>(d.label_values.size());
    d.label_values.push_back(value);
  }
  d.labels.clear();
  for (double v : raw) d.labels.push_back(ids.at(v));
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Parses UCR text: one series per line, class label first, then m values.
inline TimeSeriesDataset parse_ucr(std::istream& in, const std::string& name, Delimiter delim = Delimiter::Auto) {
  TimeSeriesDataset d;
  d.name = name;
  std::vector<double> raw_labels, values;
  std::size_t length = 0, row = 0, rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto fields = detail::split_fields(line, delim);
    if (fields.size() < 2) throw ParseError("expected a label followed by values", row);
    if (rows == 0) length = fields.size() - 1;
    else if (fields.size() - 1 != length)
      throw ParseError("series has " + std::to_string(fields.size() - 1) + " values, expected " +
                           std::to_string(length),
                       row);
    raw_labels.push_back(detail::parse_number(fields[0], row));
    for (std::size_t i = 1; i < fields.size(); ++i) values.push_back(detail::parse_number(fields[i], row));
    ++rows;
  }
  if (rows == 0) throw ParseError("empty dataset", row == 0 ? 1 : row);
  d.series = Array({rows, length}, std::move(values));
  detail::assign_dense_labels(d, raw_labels);
  d.provenance.push_back(name);
  return d;
}

inline TimeSeriesDataset load_ucr(const std::string& path, Delimiter delim = Delimiter::Auto) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset file " + path);
  std::string name = path;
  if (auto slash = name.find_last_of('/'); slash != std::string::npos) name = name.substr(slash + 1);
  if (auto dot = name.find_last_of('.'); dot != std::string::npos && dot > 0) name = name.substr(0, dot);
  auto d = parse_ucr(in, name, delim);
  d.provenance = {path};
  return d;
}

/// Writes UCR text with the original label values; values round-trip exactly.
inline void write_ucr(const TimeSeriesDataset& d, std::ostream& out, Delimiter delim = Delimiter::Tab) {
  const char sep = delim == Delimiter::Comma ? ',' : '\t';
  for (std::size_t i = 0; i < d.size(); ++i) {
    out << detail::format_double(d.label_values.at(static_cast<std::size_t>(d.labels[i])));
    for (std::size_t t = 0; t < d.length(); ++t) out << sep << detail::format_double(d.series(i, t));
    out << '\n';
  }
}

inline void save_ucr(const TimeSeriesDataset& d, const std::string& path, Delimiter delim = Delimiter::Tab) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write dataset file " + path);
  write_ucr(d, out, delim);
}

/// Concatenates two splits of the same problem. An empty side is ignored.
inline TimeSeriesDataset merge(const TimeSeriesDataset& train, const TimeSeriesDataset& test) {
  if (test.empty()) return train;
  if (train.empty()) return test;
  if (train.length() != test.length())
    throw DimensionError("cannot merge series of length " + std::to_string(train.length()) + " and " +
                         std::to_string(test.length()));
  if (train.label_values != test.label_values) throw DimensionError("cannot merge datasets with different labels");
  TimeSeriesDataset d;
  d.name = train.name == test.name ? train.name : train.name + "+" + test.name;
  std::vector<double> values = train.series.values();
  values.insert(values.end(), test.series.values().begin(), test.series.values().end());
  d.series = Array({train.size() + test.size(), train.length()}, std::move(values));
  d.labels = train.labels;
  d.labels.insert(d.labels.end(), test.labels.begin(), test.labels.end());
  d.label_values = train.label_values;
  d.provenance = train.provenance;
  d.provenance.insert(d.provenance.end(), test.provenance.begin(), test.provenance.end());
  return d;
}

/// Two sinusoid classes (3 and 7 periods per series) with N(0, 0.1²) noise.
/// Class 0 occupies the first n_per rows.
inline TimeSeriesDataset synth_two_cluster(std::size_t n_per, std::size_t m, std::uint64_t seed) {
  if (n_per < 4) throw Error("synth_two_cluster needs at least 4 series per cluster");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.1);
  TimeSeriesDataset d;
  d.name = "synth_two_cluster";
  d.series = Array::matrix(2 * n_per, m);
  const double freqs[2] = {3.0, 7.0};
  std::vector<double> raw;
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < n_per; ++i) {
      const std::size_t r = c * n_per + i;
      for (std::size_t t = 0; t < m; ++t)
        d.series(r, t) = std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(m) * freqs[c]) +
                         noise(rng);
      raw.push_back(static_cast<double>(c));
    }
  detail::assign_dense_labels(d, raw);
  d.provenance = {"synth_two_cluster(" + std::to_string(n_per) + "," + std::to_string(m) + "," +
                  std::to_string(seed) + ")"};
  return d;
}

/// Per-series z-normalization with population std; constant series become zero.
inline TimeSeriesDataset znormalize(const TimeSeriesDataset& d) {
  TimeSeriesDataset out = d;
  const std::size_t m = d.length();
  for (std::size_t i = 0; i < d.size(); ++i) {
    double mean = 0.0;
    for (std::size_t t = 0; t < m; ++t) mean += d.series(i, t);
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (std::size_t t = 0; t < m; ++t) var += (d.series(i, t) - mean) * (d.series(i, t) - mean);
    const double sd = std::sqrt(var / static_cast<double>(m));
    for (std::size_t t = 0; t < m; ++t)
      out.series(i, t) = sd > 1e-12 * std::max(1.0, std::abs(mean)) ? (d.series(i, t) - mean) / sd : 0.0;
  }
  return out;
}

struct Batch {
  std::vector<std::size_t> indices;
  Array series;  ///< n×m rows of the dataset
};

/// Splits one epoch into mini-batches of size n. A trailing batch with fewer
/// than two series is dropped.
inline std::vector<Batch> batches(const TimeSeriesDataset& d, std::size_t n, std::uint64_t seed, bool shuffle) {
  if (n < 2 || n > d.size())
    throw Error("batch size " + std::to_string(n) + " out of range [2, " + std::to_string(d.size()) + "]");
  std::vector<std::size_t> order(d.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (shuffle) {
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<Batch> out;
  for (std::size_t start = 0; start < order.size(); start += n) {
    const std::size_t len = std::min(n, order.size() - start);
    if (len < 2) break;
    Batch b;
    b.indices.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(start + len));
    b.series = d.series.rows_at(b.indices);
    out.push_back(std::move(b));
  }
  return out;
}

/// Default mini-batch size: half the sample count, rounded up.
inline std::size_t default_batch_size(std::size_t n_samples) { return std::max<std::size_t>(2, (n_samples + 1) / 2); }

}  // namespace tempocc
