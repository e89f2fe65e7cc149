#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "ctem/common.hpp"
#include "ctem/datasets.hpp"
#include "ctem/energy.hpp"
#include "ctem/rng.hpp"

namespace ctem {

// Regular 2-D evaluation grid with trapezoid quadrature weights.
// Node ordering is axis-0 major: flat = i0 * nodes1 + i1.
struct EvalGrid {
  Vec axis0, axis1;
  Vec w0, w1;

  static EvalGrid regular(const Bounds2& bounds, int nodes_per_axis) {
    require(nodes_per_axis >= 2, "eval grid: need at least 2 nodes per axis");
    EvalGrid g;
    auto make_axis = [&](int a, Vec& nodes, Vec& w) {
      const double lo = bounds(a, 0), hi = bounds(a, 1);
      require(hi > lo, "eval grid: degenerate bounds");
      const double dx = (hi - lo) / (nodes_per_axis - 1);
      nodes = Vec(nodes_per_axis);
      w = Vec::Constant(nodes_per_axis, dx);
      for (int i = 0; i < nodes_per_axis; ++i) nodes[i] = lo + i * dx;
      w[0] = w[nodes_per_axis - 1] = 0.5 * dx;
    };
    make_axis(0, g.axis0, g.w0);
    make_axis(1, g.axis1, g.w1);
    return g;
  }

  long nodes() const { return axis0.size() * axis1.size(); }

  Mat node_matrix() const {
    Mat x(2, nodes());
    long k = 0;
    for (long i = 0; i < axis0.size(); ++i)
      for (long j = 0; j < axis1.size(); ++j, ++k) {
        x(0, k) = axis0[i];
        x(1, k) = axis1[j];
      }
    return x;
  }

  Vec weights() const {
    Vec w(nodes());
    long k = 0;
    for (long i = 0; i < axis0.size(); ++i)
      for (long j = 0; j < axis1.size(); ++j, ++k) w[k] = w0[i] * w1[j];
    return w;
  }

  double integral(const Vec& values) const {
    require(values.size() == nodes(), "eval grid: value count mismatch");
    return weights().dot(values);
  }
};

// exp(f - max f), rescaled so the trapezoid integral over the grid equals 1.
inline Vec grid_normalize_values(const Vec& energies, const EvalGrid& grid) {
  require(energies.size() == grid.nodes(), "grid_normalize: value count mismatch");
  const double m = energies.maxCoeff();
  require_numeric(std::isfinite(m), "grid_normalize: all energies are -inf or NaN");
  Vec density = (energies.array() - m).exp();
  const double z = grid.integral(density);
  require_numeric(z > 0 && std::isfinite(z), "grid_normalize: vanishing normalizer");
  return density / z;
}

inline Vec grid_true_density(const Dataset& dataset, const EvalGrid& grid) {
  const Mat nodes = grid.node_matrix();
  Vec density(nodes.cols());
  for (long j = 0; j < nodes.cols(); ++j)
    density[j] = std::exp(dataset.log_density(nodes.col(j)));
  return density;
}

// Trapezoid approximation of the integrated squared difference.
inline double density_mse(const Vec& estimated, const Vec& truth, const EvalGrid& grid) {
  require(estimated.size() == truth.size() && estimated.size() == grid.nodes(),
          "density_mse: grid mismatch");
  return grid.integral((estimated - truth).cwiseAbs2());
}

// Integrated absolute difference on the grid.
inline double density_l1(const Vec& estimated, const Vec& truth, const EvalGrid& grid) {
  require(estimated.size() == truth.size() && estimated.size() == grid.nodes(),
          "density_l1: grid mismatch");
  return grid.integral((estimated - truth).cwiseAbs());
}

// Mean squared score error over test samples (columns).
inline double fisher_divergence(const Mat& estimated_scores, const Mat& true_scores) {
  require(estimated_scores.rows() == true_scores.rows() &&
              estimated_scores.cols() == true_scores.cols(),
          "fisher_divergence: shape mismatch");
  require(estimated_scores.cols() >= 1, "fisher_divergence: empty test set");
  return (estimated_scores - true_scores).colwise().squaredNorm().mean();
}

// Total variation and KL(truth || estimate); the estimate is floored at 1e-12
// per state and renormalized so the divergence stays finite.
inline std::pair<double, double> tv_kl(const Vec& p, const Vec& q) {
  require(p.size() == q.size(), "tv_kl: size mismatch");
  require_numeric(p.minCoeff() >= 0 && q.minCoeff() >= 0, "tv_kl: negative entries");
  require_numeric(std::abs(p.sum() - 1.0) <= 1e-9 && std::abs(q.sum() - 1.0) <= 1e-9,
                  "tv_kl: inputs must sum to 1");
  const double tv = 0.5 * (p - q).cwiseAbs().sum();
  Vec q_floor = q.cwiseMax(1e-12);
  q_floor /= q_floor.sum();
  double kl = 0;
  for (long i = 0; i < p.size(); ++i)
    if (p[i] > 0) kl += p[i] * std::log(p[i] / q_floor[i]);
  return {tv, kl};
}

// Self-normalized importance-sampling estimate of Z = integral of exp(f).
struct ImportanceZ {
  double z = 0;
  double log_z = 0;
  double ess = 0;
  bool low_ess = false;
  long n = 0;
};

inline ImportanceZ importance_z(const std::function<double(const Vec&)>& log_f,
                                const std::function<double(const Vec&)>& log_q,
                                const std::function<Vec(Rng&)>& draw_q, long n,
                                Rng& rng) {
  require(n >= 1, "importance_z: need at least one sample");
  Vec logw(n);
  for (long i = 0; i < n; ++i) {
    const Vec x = draw_q(rng);
    logw[i] = log_f(x) - log_q(x);
  }
  const double lse = log_sum_exp(logw);
  const double lse2 = log_sum_exp((2.0 * logw.array()).matrix());
  ImportanceZ out;
  out.n = n;
  out.log_z = lse - std::log(static_cast<double>(n));
  out.z = std::exp(out.log_z);
  out.ess = std::exp(2.0 * lse - lse2);
  out.low_ess = out.ess < 0.01 * static_cast<double>(n);
  return out;
}

// Normalized probability vector from tabular energies.
inline Vec softmax_probabilities(const Vec& energies) {
  const double m = energies.maxCoeff();
  Vec p = (energies.array() - m).exp();
  return p / p.sum();
}

// Histogram over grid states from recorded sampler visits.
inline Vec visit_histogram(const std::vector<long>& states, long num_states) {
  require(!states.empty(), "visit_histogram: no states");
  Vec h = Vec::Zero(num_states);
  for (long s : states) h[s] += 1.0;
  return h / static_cast<double>(states.size());
}

struct GridDivergences {
  double tv = 0;
  double kl = 0;
};

// Model mass (normalized energies or sample histogram) against a truth grid.
inline GridDivergences divergences_to_truth(const Vec& model_mass,
                                            const QuantizedGrid& truth) {
  const auto [tv, kl] = tv_kl(truth.p_hat, model_mass);
  return {tv, kl};
}

}  // namespace ctem
