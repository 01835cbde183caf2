#pragma once

#include <cmath>
#include <string>

#include "tempocc/array.hpp"
#include "tempocc/autodiff.hpp"
#include "tempocc/error.hpp"
#include "tempocc/svd.hpp"

namespace tempocc {

struct LossConfig {
  double tau_instance = 0.5;
  double tau_cluster = 1.0;
  double lambda = 0.5;
  bool use_instance = true;
  bool use_cluster = true;
  bool use_cd_org = true;
  bool use_cd_aug = true;
  /// Conventional NT-Xent denominator (self pair excluded, positive included).
  bool ntxent_standard = false;

  void validate() const {
    if (!(tau_instance > 0)) throw ConfigError("tau_instance must be > 0");
    if (!(tau_cluster > 0)) throw ConfigError("tau_cluster must be > 0");
    if (!(lambda >= 0)) throw ConfigError("lambda must be >= 0");
  }
};

/// Values of the four loss terms and their weighted total.
struct LossBreakdown {
  double recon = 0.0;
  double instance = 0.0;
  double cluster = 0.0;
  double cd = 0.0;
  double total = 0.0;
};

/// total = recon + instance + cluster + λ·cd, disabled terms zeroed.
inline LossBreakdown combine(LossBreakdown parts, const LossConfig& cfg) {
  if (!cfg.use_instance) parts.instance = 0.0;
  if (!cfg.use_cluster) parts.cluster = 0.0;
  if (!cfg.use_cd_org && !cfg.use_cd_aug) parts.cd = 0.0;
  parts.total = parts.recon + parts.instance + parts.cluster + cfg.lambda * parts.cd;
  return parts;
}

namespace objectives {

using ad::Var;

/// Mean squared reconstruction error of both views:
/// (1/n)Σ‖x_i − x̂_i‖² + (1/n)Σ‖x^a_i − x̂^a_i‖².
inline Var reconstruction(const Var& x, const Var& x_hat, const Var& xa, const Var& xa_hat) {
  if (x.shape() != x_hat.shape() || xa.shape() != xa_hat.shape() || x.shape() != xa.shape())
    throw DimensionError("reconstruction loss: shape mismatch");
  const double n = static_cast<double>(x.shape().at(0));
  return ad::scale(ad::sum(ad::square(x - x_hat)) + ad::sum(ad::square(xa - xa_hat)), 1.0 / n);
}

/// Spectral k-means residual Tr(ZᵀZ) − Tr(QᵀZᵀZQ) for a fixed Q with
/// orthonormal columns. Gradient with respect to Z is 2Z(I − QQᵀ).
inline Var kmeans_residual(const Var& z, const Array& q) {
  if (z.shape().size() != 2 || q.rank() != 2 || z.shape()[1] != q.rows())
    throw DimensionError("k-means loss: Z " + to_string(z.shape()) + " incompatible with Q " + to_string(q.shape()));
  if (orthonormality_error(q) > 1e-6) throw NumericError("k-means loss: Q columns are not orthonormal");
  Var zq = ad::matmul(z, z.graph().constant(q));
  return ad::sum(ad::square(z)) - ad::sum(ad::square(zq));
}

/// Columns scaled to unit length; a zero column is an error.
inline Var normalize_columns(const Var& a) {
  Var norms = ad::sqrt(ad::sum(ad::square(a), 0));
  for (double v : norms.value().values())
    if (!(v > 0)) throw NumericError("cosine similarity of a zero-norm vector");
  return a / norms;
}

/// Σ_i (ℓ_{a_i} + ℓ_{b_i}) over the columns of two views. For column i of
/// view a, the positive is column i of view b; the denominator sums
/// exp(sim/τ) over every column of a (self included) plus every other
/// column of b. With `standard`, the self term is dropped and the positive
/// is included instead.
inline Var paired_contrastive_sum(const Var& a, const Var& b, double tau, bool standard) {
  if (a.shape() != b.shape() || a.shape().size() != 2)
    throw DimensionError("contrastive loss: views must share a rank-2 shape");
  ad::Graph& g = a.graph();
  const std::size_t c = a.shape()[1];
  Var an = normalize_columns(a), bn = normalize_columns(b);
  Var s_ab = ad::matmul(ad::transpose(an), bn);
  Var s_ba = ad::transpose(s_ab);
  Var s_aa = ad::matmul(ad::transpose(an), an);
  Var s_bb = ad::matmul(ad::transpose(bn), bn);

  Array off = Array::matrix(c, c, 1.0);
  for (std::size_t i = 0; i < c; ++i) off(i, i) = 0.0;
  Var eye = g.constant(Array::identity(c));
  Var same_view_mask = g.constant(standard ? off : Array::matrix(c, c, 1.0));
  Var cross_view_mask = g.constant(standard ? Array::matrix(c, c, 1.0) : off);

  Var positive = ad::sum(s_ab * eye, 1);
  auto side = [&](const Var& same, const Var& cross) {
    Var denom = ad::sum(ad::exp(ad::scale(same, 1.0 / tau)) * same_view_mask, 1) +
                ad::sum(ad::exp(ad::scale(cross, 1.0 / tau)) * cross_view_mask, 1);
    return ad::sum(ad::log(denom) - ad::scale(positive, 1.0 / tau));
  };
  return side(s_aa, s_ab) + side(s_bb, s_ba);
}

/// Instance-level contrastive loss over latents Z, Zᵃ (d×n).
inline Var instance_contrastive(const Var& z, const Var& za, double tau, bool standard = false) {
  const double n = static_cast<double>(z.shape().at(1));
  return ad::scale(paired_contrastive_sum(z, za, tau, standard), 1.0 / (2.0 * n));
}

/// Entropy −Σ P log P of the column masses P_i = Σ_j |q_ji| / Σ_{i'j} |q_ji'|.
inline Var assignment_entropy(const Var& q) {
  Var mass = ad::sum(ad::abs(q), 0);
  Var p = mass / ad::sum(mass);
  return ad::scale(ad::sum(p * ad::log(p)), -1.0);
}

/// Cluster-level contrastive loss over indicators Q, Qᵃ (n×k), minus the
/// entropy of both views' cluster masses.
inline Var cluster_contrastive(const Var& q, const Var& qa, double tau, bool standard = false) {
  const double k = static_cast<double>(q.shape().at(1));
  Var contrast = ad::scale(paired_contrastive_sum(q, qa, tau, standard), 1.0 / (2.0 * k));
  return contrast - (assignment_entropy(q) + assignment_entropy(qa));
}

/// Graph-side terms of one batch; invalid Vars are disabled terms.
struct LossTerms {
  Var recon, instance, cluster, cd;
};

struct Total {
  Var value;
  LossBreakdown breakdown;
};

inline Total total(const LossTerms& t, const LossConfig& cfg) {
  if (!t.recon.valid()) throw Error("reconstruction term is always required");
  LossBreakdown b;
  Var sum = t.recon;
  b.recon = t.recon.value().item();
  if (cfg.use_instance && t.instance.valid()) {
    sum = sum + t.instance;
    b.instance = t.instance.value().item();
  }
  if (cfg.use_cluster && t.cluster.valid()) {
    sum = sum + t.cluster;
    b.cluster = t.cluster.value().item();
  }
  if ((cfg.use_cd_org || cfg.use_cd_aug) && t.cd.valid()) {
    b.cd = t.cd.value().item();
    if (cfg.lambda != 0.0) sum = sum + ad::scale(t.cd, cfg.lambda);
  }
  b.total = sum.value().item();
  return {sum, b};
}

}  // namespace objectives
}  // namespace tempocc
