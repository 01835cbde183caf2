#pragma once

#include <cstdint>
#include <cstdio>
#include <functional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "tempocc/adam.hpp"
#include "tempocc/augmentation.hpp"
#include "tempocc/autodiff.hpp"
#include "tempocc/checkpoint.hpp"
#include "tempocc/config.hpp"
#include "tempocc/dataset.hpp"
#include "tempocc/metrics.hpp"
#include "tempocc/model.hpp"
#include "tempocc/objectives.hpp"
#include "tempocc/spectral.hpp"

namespace tempocc {

struct TrainResult {
  ModelParams params;
  ClusterIndicator indicator;      ///< original view
  ClusterIndicator indicator_aug;  ///< augmented view
  std::vector<LossBreakdown> history;
  std::size_t k = 0;
};

/// Called after every epoch with its 1-based index and mean loss breakdown.
using EpochCallback = std::function<void(std::size_t, const LossBreakdown&)>;

namespace detail {

// Evaluates one loss term, tagging numeric failures with the term's name.
template <class F>
ad::Var loss_term(const char* name, F&& f) {
  try {
    ad::Var v = f();
    if (!std::isfinite(v.value().item())) throw NumericError("non-finite value");
    return v;
  } catch (const NumericError& e) {
    throw NumericError(std::string(name) + " loss diverged: " + e.what());
  }
}

}  // namespace detail

/// Refits both indicators on the full dataset: the original series and a
/// fresh augmentation of them.
inline void refresh_indicators(TrainResult& state, const TimeSeriesDataset& data, const TrainConfig& cfg,
                               std::mt19937_64& aug_rng, long epoch) {
  Array z = encode_all(state.params, data.series, 0);
  state.indicator = refresh_indicator(z, state.k, epoch);
  Array za = encode_all(state.params, augment_rows(data.series, cfg.augmentation, aug_rng), 1);
  state.indicator_aug = refresh_indicator(za, state.k, epoch);
}

/// Total loss of one mini-batch on the graph holding `p`. `xa` is the
/// augmented view of `series`, `indices` its rows in the full dataset. With
/// `warm`, only the reconstruction term is built.
inline objectives::Total batch_objective(const BoundParams& p, const Array& series,
                                         const std::vector<std::size_t>& indices, const Array& xa,
                                         const TrainResult& state, const TrainConfig& cfg, bool warm = false) {
  ad::Graph& g = p.graph();
  const LossConfig& lc = cfg.loss;
  const std::size_t m = series.cols();
  ad::Var z = encode(p, series, 0);
  ad::Var za = encode(p, xa, 1);

  objectives::LossTerms terms;
  terms.recon = detail::loss_term("reconstruction", [&] {
    return objectives::reconstruction(g.constant(series), decode(p, z, m, 0), g.constant(xa), decode(p, za, m, 1));
  });
  if (lc.use_instance && !warm)
    terms.instance = detail::loss_term(
        "instance", [&] { return objectives::instance_contrastive(z, za, lc.tau_instance, lc.ntxent_standard); });
  if (lc.use_cluster && !warm)
    terms.cluster = detail::loss_term("cluster", [&] {
      ad::Var q = cfg.detached_q ? g.constant(state.indicator.q_full.rows_at(indices))
                                 : project_batch(state.indicator, z);
      ad::Var qa = cfg.detached_q ? g.constant(state.indicator_aug.q_full.rows_at(indices))
                                  : project_batch(state.indicator_aug, za);
      return objectives::cluster_contrastive(q, qa, lc.tau_cluster, lc.ntxent_standard);
    });
  if ((lc.use_cd_org || lc.use_cd_aug) && !warm)
    terms.cd = detail::loss_term("cluster-distribution", [&] {
      std::vector<ad::Var> parts;
      if (lc.use_cd_org) parts.push_back(objectives::kmeans_residual(z, orthonormal_rows(state.indicator.q_full, indices)));
      if (lc.use_cd_aug)
        parts.push_back(objectives::kmeans_residual(za, orthonormal_rows(state.indicator_aug.q_full, indices)));
      ad::Var s = parts.front();
      for (std::size_t i = 1; i < parts.size(); ++i) s = s + parts[i];
      return ad::scale(s, 0.5);
    });
  return objectives::total(terms, lc);
}

/// Joint training: reconstruction of both views, instance and cluster
/// contrast, and the spectral k-means term, with Adam updates per mini-batch
/// and a closed-form indicator refresh every `refresh_period` epochs. The
/// indicators are also fitted once before the first epoch.
inline TrainResult train(const TimeSeriesDataset& data, const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  const std::size_t n_samples = data.size(), m = data.length();
  TrainResult state;
  state.k = cfg.k ? cfg.k : data.k_true();
  if (state.k < 2) throw ConfigError("k must be >= 2");
  if (state.k > n_samples) throw ConfigError("k exceeds the number of series");
  const std::size_t batch = std::min(n_samples, cfg.batch_size ? cfg.batch_size : default_batch_size(n_samples));
  if (batch < state.k) throw ConfigError("batch size must be at least k");
  if (m < cfg.model.max_dilation())
    throw ConfigError("series length " + std::to_string(m) + " is shorter than the largest dilation");

  state.params = ModelParams::init(cfg.model, cfg.seed);
  AdamState adam = AdamState::for_params(state.params.values());
  std::mt19937_64 aug_rng(cfg.seed * 0x9E3779B97F4A7C15ULL + 1);
  refresh_indicators(state, data, cfg, aug_rng, 0);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const bool warm = epoch <= cfg.warmup_recon;
    LossBreakdown sum;
    auto epoch_batches = batches(data, batch, cfg.seed * 1000003ULL + epoch, true);
    for (const Batch& b : epoch_batches) {
      Array xa = augment_rows(b.series, cfg.augmentation, aug_rng);
      ad::Graph g;
      BoundParams p(g, state.params);
      auto total = batch_objective(p, b.series, b.indices, xa, state, cfg, warm);
      if (!std::isfinite(total.breakdown.total)) throw NumericError("total loss is not finite");
      g.backward(total.value);
      std::vector<Array> grads = p.grads();
      for (const auto& gr : grads)
        if (!gr.all_finite()) throw NumericError("non-finite gradient");
      if (cfg.grad_clip > 0) clip_global_norm(grads, cfg.grad_clip);
      adam_step(state.params.values(), grads, adam, cfg.learning_rate);

      sum.recon += total.breakdown.recon;
      sum.instance += total.breakdown.instance;
      sum.cluster += total.breakdown.cluster;
      sum.cd += total.breakdown.cd;
      sum.total += total.breakdown.total;
    }
    const double nb = static_cast<double>(epoch_batches.size());
    LossBreakdown mean{sum.recon / nb, sum.instance / nb, sum.cluster / nb, sum.cd / nb, sum.total / nb};
    state.history.push_back(mean);
    if (epoch % cfg.refresh_period == 0) refresh_indicators(state, data, cfg, aug_rng, static_cast<long>(epoch));
    if (on_epoch) on_epoch(epoch, mean);
  }
  return state;
}

struct Evaluation {
  double nmi = 0.0;
  double ri = 0.0;
  std::vector<int> labels;
  bool empty_cluster = false;
};

inline Evaluation evaluate(const ModelParams& params, const ClusterIndicator& ind, const TimeSeriesDataset& data,
                           LabelMode mode, std::size_t k, std::size_t restarts, std::uint64_t seed) {
  Array z = mode == LabelMode::KMeansOnZ ? encode_all(params, data.series, 0) : Array::matrix(0, 0);
  auto readout = extract_labels(mode, z, ind, k, restarts, seed);
  Evaluation e;
  e.labels = std::move(readout.labels);
  e.empty_cluster = readout.empty_cluster;
  e.nmi = nmi(e.labels, data.labels);
  e.ri = rand_index(e.labels, data.labels);
  return e;
}

inline void write_history_csv(std::ostream& out, const std::vector<LossBreakdown>& history) {
  out << "epoch,recon,instance,cluster,cd,total\n";
  char buf[256];
  for (std::size_t e = 0; e < history.size(); ++e) {
    const auto& h = history[e];
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", e + 1, h.recon, h.instance, h.cluster,
                  h.cd, h.total);
    out << buf;
  }
}

/// Model weights and both indicators as named arrays.
inline std::vector<NamedArray> to_named_arrays(const TrainResult& r) {
  std::vector<NamedArray> out;
  for (std::size_t i = 0; i < r.params.size(); ++i) out.push_back({r.params.names()[i], r.params[i]});
  auto put_indicator = [&](const std::string& prefix, const ClusterIndicator& ind) {
    out.push_back({prefix + ".q_full", ind.q_full});
    out.push_back({prefix + ".basis", ind.basis});
    out.push_back({prefix + ".singular_values", ind.singular_values});
    out.push_back({prefix + ".refresh_epoch", Array::vector({static_cast<double>(ind.refresh_epoch)})});
  };
  put_indicator("indicator", r.indicator);
  put_indicator("indicator_aug", r.indicator_aug);
  return out;
}

inline TrainResult from_named_arrays(const ModelSpec& spec, const std::vector<NamedArray>& arrays) {
  std::vector<std::string> names;
  std::vector<Array> values;
  TrainResult r;
  auto find = [&](const std::string& name) -> const Array& {
    for (const auto& a : arrays)
      if (a.name == name) return a.value;
    throw Error("checkpoint has no tensor '" + name + "'");
  };
  for (const auto& a : arrays) {
    if (a.name.rfind("indicator", 0) == 0) continue;
    names.push_back(a.name);
    values.push_back(a.value);
  }
  r.params = ModelParams::from_arrays(spec, names, std::move(values));
  auto get_indicator = [&](const std::string& prefix) {
    ClusterIndicator ind;
    ind.q_full = find(prefix + ".q_full");
    ind.basis = find(prefix + ".basis");
    ind.singular_values = find(prefix + ".singular_values");
    ind.refresh_epoch = static_cast<long>(find(prefix + ".refresh_epoch").item());
    return ind;
  };
  r.indicator = get_indicator("indicator");
  r.indicator_aug = get_indicator("indicator_aug");
  r.k = r.indicator.k();
  return r;
}

}  // namespace tempocc
