#pragma once

#include <cmath>
#include <vector>

#include "ctem/common.hpp"
#include "ctem/energy.hpp"

namespace ctem {

// Bounded ratio transform (rho_a - rho_b) / (rho_a + rho_b), equal to
// tanh((log rho_a - log rho_b) / 2) for positive inputs.
inline double modified_ratio(double rho_a, double rho_b) {
  require_numeric(rho_a > 0 && rho_b > 0, "modified_ratio: inputs must be positive");
  return (rho_a - rho_b) / (rho_a + rho_b);
}

inline double tanh_half_diff(double f_a, double f_b) {
  return std::tanh(0.5 * (f_a - f_b));
}

// Squared distance of the bounded transform from the constant target 1.
// Bounded in [0, 4).
inline double ctem_residual(double f_a, double f_b) {
  const double t = tanh_half_diff(f_a, f_b) - 1.0;
  return t * t;
}

// Anchor/comparison pairing at the energy level: pair (b, m) couples
// f_anchor[b] with f_comparison[b*M + m]. Weights default to 1.
struct PairBatch {
  Vec f_anchor;      // B
  Vec f_comparison;  // B * M
  Vec weights;       // B * M, or empty for unit weights

  long anchors() const { return f_anchor.size(); }
  long pairs() const { return f_comparison.size(); }
  int per_anchor() const {
    require(anchors() > 0 && pairs() % anchors() == 0,
            "pair batch: comparison count must be a multiple of the anchor count");
    return static_cast<int>(pairs() / anchors());
  }
  void validate() const {
    (void)per_anchor();
    if (weights.size() != 0) {
      require(weights.size() == pairs(), "pair batch: weight shape mismatch");
      require(weights.minCoeff() >= 0, "pair batch: weights must be nonnegative");
    }
  }
};

// Weighted mean of the residual over all pairs (weights normalized by their sum).
inline double sample_loss(const PairBatch& batch) {
  batch.validate();
  const int m = batch.per_anchor();
  double acc = 0, wsum = 0;
  for (long p = 0; p < batch.pairs(); ++p) {
    const double w = batch.weights.size() ? batch.weights[p] : 1.0;
    acc += w * ctem_residual(batch.f_anchor[p / m], batch.f_comparison[p]);
    wsum += w;
  }
  require_numeric(wsum > 0, "sample_loss: zero total weight");
  return acc / wsum;
}

// Loss together with derivatives with respect to the anchor and comparison
// energies; used to drive backpropagation through any energy model.
struct PairLossGrad {
  double loss = 0;
  Vec d_anchor;      // B
  Vec d_comparison;  // B * M
};

inline PairLossGrad sample_loss_grad(const PairBatch& batch) {
  batch.validate();
  const int m = batch.per_anchor();
  PairLossGrad out;
  out.d_anchor = Vec::Zero(batch.anchors());
  out.d_comparison = Vec::Zero(batch.pairs());
  double acc = 0, wsum = 0;
  for (long p = 0; p < batch.pairs(); ++p) {
    const double w = batch.weights.size() ? batch.weights[p] : 1.0;
    const double r = tanh_half_diff(batch.f_anchor[p / m], batch.f_comparison[p]);
    acc += w * (r - 1.0) * (r - 1.0);
    wsum += w;
    // d residual / d f_a = (r - 1)(1 - r^2); comparison side is the negative.
    const double g = w * (r - 1.0) * (1.0 - r * r);
    out.d_anchor[p / m] += g;
    out.d_comparison[p] = -g;
  }
  require_numeric(wsum > 0, "sample_loss_grad: zero total weight");
  out.loss = acc / wsum;
  out.d_anchor /= wsum;
  out.d_comparison /= wsum;
  return out;
}

// Convenience wrappers evaluating a model over typed batches.

struct ContinuousPairBatch {
  Mat anchors;       // d x B
  Mat comparisons;   // d x (B*M)
  Vec weights;       // optional
};

inline double sample_loss(const MlpEnergy& model, const ContinuousPairBatch& batch) {
  PairBatch pb;
  pb.f_anchor = model.forward(batch.anchors);
  pb.f_comparison = model.forward(batch.comparisons);
  pb.weights = batch.weights;
  return sample_loss(pb);
}

struct DiscretePairBatch {
  std::vector<long> anchors;
  std::vector<long> comparisons;  // B*M, grouped per anchor
  Vec weights;
};

inline double sample_loss(const TabularEnergy& model, const DiscretePairBatch& batch) {
  PairBatch pb;
  pb.f_anchor = Vec(batch.anchors.size());
  pb.f_comparison = Vec(batch.comparisons.size());
  for (size_t i = 0; i < batch.anchors.size(); ++i)
    pb.f_anchor[i] = model.value(batch.anchors[i]);
  for (size_t i = 0; i < batch.comparisons.size(); ++i)
    pb.f_comparison[i] = model.value(batch.comparisons[i]);
  pb.weights = batch.weights;
  return sample_loss(pb);
}

inline void check_probability_vector(const Vec& p, double tol = 1e-9) {
  require_numeric(p.minCoeff() >= 0, "probability vector has negative entries");
  require_numeric(std::abs(p.sum() - 1.0) <= tol, "probability vector does not sum to 1");
}

inline void check_symmetric(const SpMat& omega, double tol = 1e-12) {
  SpMat diff = SpMat(omega.transpose()) - omega;
  double max_abs = 0;
  for (int k = 0; k < diff.outerSize(); ++k)
    for (SpMat::InnerIterator it(diff, k); it; ++it)
      max_abs = std::max(max_abs, std::abs(it.value()));
  require_numeric(max_abs <= tol, "comparison matrix is not symmetric");
}

// Exact finite-space objective: sum_ij p_i w_ij (tanh((f_i - f_j)/2) - 1)^2.
inline double exact_discrete_loss(const Vec& energies, const Vec& p, const SpMat& omega) {
  check_probability_vector(p);
  check_symmetric(omega);
  require(energies.size() == p.size() && omega.rows() == p.size() && omega.cols() == p.size(),
          "exact_discrete_loss: shape mismatch");
  double acc = 0;
  for (int k = 0; k < omega.outerSize(); ++k) {
    for (SpMat::InnerIterator it(omega, k); it; ++it) {
      const long i = it.row(), j = it.col();
      acc += p[i] * it.value() * ctem_residual(energies[i], energies[j]);
    }
  }
  return acc;
}

// Cached edge arrays for fast repeated loss/gradient evaluation over a fixed
// sparse comparison matrix.
struct DiscreteLossWorkspace {
  std::vector<long> src, dst;
  Vec weight;        // p_src * omega_ij per directed stored entry
  double total_weight = 0;

  DiscreteLossWorkspace() = default;
  DiscreteLossWorkspace(const Vec& p, const SpMat& omega) {
    check_probability_vector(p);
    check_symmetric(omega);
    const long nnz = omega.nonZeros();
    src.reserve(nnz);
    dst.reserve(nnz);
    std::vector<double> w;
    w.reserve(nnz);
    for (int k = 0; k < omega.outerSize(); ++k) {
      for (SpMat::InnerIterator it(omega, k); it; ++it) {
        src.push_back(it.row());
        dst.push_back(it.col());
        w.push_back(p[it.row()] * it.value());
      }
    }
    weight = Eigen::Map<Vec>(w.data(), static_cast<long>(w.size()));
    total_weight = weight.sum();
  }

  // Loss (optionally normalized to a weighted mean, keeping it within the
  // residual range) and gradient with respect to the energy vector.
  double loss_grad(const Vec& f, Vec& grad, bool normalized) const {
    grad.setZero();
    const long m = static_cast<long>(src.size());
    double acc = 0;
    for (long e = 0; e < m; ++e) {
      const double w = weight[e];
      if (w == 0.0) continue;
      const double r = std::tanh(0.5 * (f[src[e]] - f[dst[e]]));
      acc += w * (r - 1.0) * (r - 1.0);
      const double g = w * (r - 1.0) * (1.0 - r * r);
      grad[src[e]] += g;
      grad[dst[e]] -= g;
    }
    if (normalized) {
      require_numeric(total_weight > 0, "discrete loss: zero total weight");
      acc /= total_weight;
      grad /= total_weight;
    }
    return acc;
  }

  double loss(const Vec& f, bool normalized) const {
    Vec g(f.size());
    return loss_grad(f, g, normalized);
  }
};

// Density-weighted objective, its sample-only form, and the gap between them.
// The gap J - 2L is independent of the energies whenever omega is symmetric
// and p is strictly positive.
struct OracleLossReport {
  double j = 0;
  double l = 0;
  double c_rho_prime = 0;
};

inline OracleLossReport exact_oracle_loss(const Vec& energies, const Vec& p,
                                          const SpMat& omega) {
  check_probability_vector(p);
  check_symmetric(omega);
  require(energies.size() == p.size(), "exact_oracle_loss: shape mismatch");
  require_numeric(p.minCoeff() > 0,
                  "exact_oracle_loss: requires strictly positive probabilities");
  OracleLossReport rep;
  for (int k = 0; k < omega.outerSize(); ++k) {
    for (SpMat::InnerIterator it(omega, k); it; ++it) {
      const long i = it.row(), j = it.col();
      const double t = tanh_half_diff(energies[i], energies[j]);
      const double r = modified_ratio(p[i], p[j]);
      rep.j += (t - r) * (t - r) * (p[i] + p[j]) * it.value();
      rep.l += p[i] * it.value() * ctem_residual(energies[i], energies[j]);
    }
  }
  rep.c_rho_prime = rep.j - 2.0 * rep.l;
  return rep;
}

// Theta-independent part of the density-weighted objective:
// sum_ij (p_i - p_j)^2 / (p_i + p_j) * w_ij.
inline double oracle_constant(const Vec& p, const SpMat& omega) {
  check_probability_vector(p);
  double acc = 0;
  for (int k = 0; k < omega.outerSize(); ++k) {
    for (SpMat::InnerIterator it(omega, k); it; ++it) {
      const long i = it.row(), j = it.col();
      const double diff = p[i] - p[j];
      acc += diff * diff / (p[i] + p[j]) * it.value();
    }
  }
  return acc;
}

// Marginal of p pushed through a row-stochastic corruption kernel:
// out(z) = sum_z0 p(z0) q(z | z0).
inline Vec corrupted_marginal(const Vec& p, const Mat& q) {
  check_probability_vector(p);
  require(q.rows() == p.size() && q.cols() == p.size(), "corrupted_marginal: shape mismatch");
  require_numeric(q.minCoeff() >= -1e-15, "corrupted_marginal: kernel has negative entries");
  for (long i = 0; i < q.rows(); ++i)
    require_numeric(std::abs(q.row(i).sum() - 1.0) <= 1e-9,
                    "corrupted_marginal: kernel rows must sum to 1");
  return q.transpose() * p;
}

}  // namespace ctem
