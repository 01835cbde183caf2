#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tempocc/array.hpp"
#include "tempocc/error.hpp"

namespace tempocc {

enum class AugmentKind { Jitter, Scaling, SegmentPermute, TimeShift };

inline const char* to_string(AugmentKind k) {
  switch (k) {
    case AugmentKind::Jitter: return "jitter";
    case AugmentKind::Scaling: return "scaling";
    case AugmentKind::SegmentPermute: return "permute";
    case AugmentKind::TimeShift: return "shift";
  }
  return "?";
}

inline AugmentKind parse_augment_kind(const std::string& s) {
  if (s == "jitter") return AugmentKind::Jitter;
  if (s == "scaling") return AugmentKind::Scaling;
  if (s == "permute" || s == "segment-permute") return AugmentKind::SegmentPermute;
  if (s == "shift" || s == "time-shift") return AugmentKind::TimeShift;
  throw ConfigError("unknown augmentation '" + s + "'");
}

/// The family of transforms the augmented view is drawn from.
struct AugmentationSpec {
  std::vector<AugmentKind> family{AugmentKind::Jitter, AugmentKind::Scaling, AugmentKind::SegmentPermute};
  double jitter_sigma = 0.1;
  double scaling_sigma = 0.1;  ///< log-normal σ of the scale factor
  std::size_t permute_parts = 4;
  double shift_max_frac = 0.1;
  bool compose = false;  ///< apply every member in order instead of one at random

  void validate() const {
    if (family.empty()) throw ConfigError("augmentation family is empty");
    if (!(jitter_sigma >= 0)) throw ConfigError("jitter sigma must be >= 0");
    if (!(scaling_sigma >= 0)) throw ConfigError("scaling sigma must be >= 0");
    if (permute_parts < 2) throw ConfigError("segment-permute needs at least 2 parts");
    if (!(shift_max_frac > 0 && shift_max_frac < 0.5)) throw ConfigError("time-shift fraction must be in (0, 0.5)");
  }
};

namespace augment_ops {

inline std::vector<double> jitter(std::span<const double> x, double sigma, std::mt19937_64& rng) {
  std::vector<double> out(x.begin(), x.end());
  if (sigma == 0.0) return out;
  std::normal_distribution<double> noise(0.0, sigma);
  for (double& v : out) v += noise(rng);
  return out;
}

inline std::vector<double> scale(std::span<const double> x, double factor) {
  std::vector<double> out(x.begin(), x.end());
  for (double& v : out) v *= factor;
  return out;
}

inline std::vector<double> scaling(std::span<const double> x, double sigma, std::mt19937_64& rng) {
  std::lognormal_distribution<double> factor(0.0, sigma);
  return scale(x, sigma == 0.0 ? 1.0 : factor(rng));
}

/// Cuts x into `parts` contiguous segments and reorders them at random.
inline std::vector<double> segment_permute(std::span<const double> x, std::size_t parts, std::mt19937_64& rng) {
  parts = std::min(parts, x.size());
  std::vector<std::size_t> bounds(parts + 1);
  for (std::size_t p = 0; p <= parts; ++p) bounds[p] = p * x.size() / parts;
  std::vector<std::size_t> order(parts);
  for (std::size_t p = 0; p < parts; ++p) order[p] = p;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<double> out;
  out.reserve(x.size());
  for (auto p : order) out.insert(out.end(), x.begin() + bounds[p], x.begin() + bounds[p + 1]);
  return out;
}

/// Circular shift by `shift` steps (positive moves values later in time).
inline std::vector<double> roll(std::span<const double> x, long shift) {
  const long m = static_cast<long>(x.size());
  std::vector<double> out(x.size());
  for (long t = 0; t < m; ++t) out[static_cast<std::size_t>(((t + shift) % m + m) % m)] = x[static_cast<std::size_t>(t)];
  return out;
}

inline std::vector<double> time_shift(std::span<const double> x, double max_frac, std::mt19937_64& rng) {
  const long max_shift = static_cast<long>(std::floor(max_frac * static_cast<double>(x.size())));
  std::uniform_int_distribution<long> pick(-max_shift, max_shift);
  return roll(x, pick(rng));
}

inline std::vector<double> apply(AugmentKind kind, std::span<const double> x, const AugmentationSpec& spec,
                                 std::mt19937_64& rng) {
  switch (kind) {
    case AugmentKind::Jitter: return jitter(x, spec.jitter_sigma, rng);
    case AugmentKind::Scaling: return scaling(x, spec.scaling_sigma, rng);
    case AugmentKind::SegmentPermute: return segment_permute(x, spec.permute_parts, rng);
    case AugmentKind::TimeShift: return time_shift(x, spec.shift_max_frac, rng);
  }
  return {x.begin(), x.end()};
}

}  // namespace augment_ops

/// x^a = T(x) with T drawn uniformly from the family (or the whole family
/// composed, when spec.compose is set). Pure given the generator state.
inline std::vector<double> augment(std::span<const double> x, const AugmentationSpec& spec, std::mt19937_64& rng) {
  if (spec.family.empty()) throw ConfigError("augmentation family is empty");
  if (x.size() < 4) throw DimensionError("augment needs series of length >= 4");
  if (spec.compose) {
    std::vector<double> out(x.begin(), x.end());
    for (auto kind : spec.family) out = augment_ops::apply(kind, out, spec, rng);
    return out;
  }
  std::uniform_int_distribution<std::size_t> pick(0, spec.family.size() - 1);
  return augment_ops::apply(spec.family[pick(rng)], x, spec, rng);
}

/// Row-wise augment of an n×m block.
inline Array augment_rows(const Array& series, const AugmentationSpec& spec, std::mt19937_64& rng) {
  Array out(series.shape());
  const std::size_t m = series.cols();
  for (std::size_t i = 0; i < series.rows(); ++i) {
    auto row = augment(std::span<const double>(series.data() + i * m, m), spec, rng);
    std::copy(row.begin(), row.end(), out.data() + i * m);
  }
  return out;
}

}  // namespace tempocc
