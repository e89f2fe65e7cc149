#pragma once

#include <array>
#include <cmath>
#include <deque>
#include <string>
#include <vector>

#include "ctem/common.hpp"
#include "ctem/rng.hpp"
#include "ctem/state_space.hpp"

namespace ctem {

enum class KernelKind {
  spherical,
  gaussian,
  hamming_one,
  uniform_corruption,
  mixed_joint,
  grid4,
};

inline std::string to_string(KernelKind k) {
  switch (k) {
    case KernelKind::spherical: return "spherical";
    case KernelKind::gaussian: return "gaussian";
    case KernelKind::hamming_one: return "hamming_one";
    case KernelKind::uniform_corruption: return "uniform_corruption";
    case KernelKind::mixed_joint: return "mixed_joint";
    case KernelKind::grid4: return "grid4";
  }
  return "unknown";
}

inline KernelKind kernel_from_string(const std::string& s) {
  for (KernelKind k : {KernelKind::spherical, KernelKind::gaussian, KernelKind::hamming_one,
                       KernelKind::uniform_corruption, KernelKind::mixed_joint, KernelKind::grid4}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown kernel kind: " + s);
}

// Symmetric comparison rule with its scale parameters. The grid4 kind is the
// 4-neighbor lattice graph; the default weight is the symmetric indicator, and
// the row-normalized variant is available for sensitivity studies (its matrix
// is row-stochastic but not symmetric at the boundary).
struct ComparisonKernel {
  KernelKind kind = KernelKind::gaussian;
  double epsilon = 0.0;  // spherical / gaussian / mixed_joint
  double alpha = 0.0;    // uniform_corruption
  int num_labels = 0;    // mixed_joint K
  bool grid_row_normalized = false;

  static ComparisonKernel spherical(double eps) {
    require(eps > 0, "spherical kernel: epsilon must be positive");
    return {KernelKind::spherical, eps, 0, 0, false};
  }
  static ComparisonKernel gaussian(double eps) {
    require(eps > 0, "gaussian kernel: epsilon must be positive");
    return {KernelKind::gaussian, eps, 0, 0, false};
  }
  static ComparisonKernel hamming_one() { return {KernelKind::hamming_one, 0, 0, 0, false}; }
  static ComparisonKernel uniform_corruption(double alpha) {
    require(alpha >= 0 && alpha <= 1, "uniform corruption: alpha must lie in [0,1]");
    return {KernelKind::uniform_corruption, 0, alpha, 0, false};
  }
  static ComparisonKernel mixed_joint(double eps, int num_labels) {
    require(eps > 0, "mixed_joint kernel: epsilon must be positive");
    require(num_labels >= 2, "mixed_joint kernel: K must be >= 2");
    return {KernelKind::mixed_joint, eps, 0, num_labels, false};
  }
  static ComparisonKernel grid4(bool row_normalized = false) {
    return {KernelKind::grid4, 0, 0, 0, row_normalized};
  }
};

// z - 2 eps u with u uniform on the unit sphere; |z~ - z| = 2 eps exactly.
inline Vec sample_spherical(const Vec& z, double eps, Rng& rng) {
  require(eps > 0, "sample_spherical: epsilon must be positive");
  require(z.size() >= 1, "sample_spherical: empty state");
  return z - 2.0 * eps * rng.unit_vector(static_cast<int>(z.size()));
}

// z - 2 eps xi with xi ~ N(0, I); increments are N(0, 4 eps^2 I).
inline Vec sample_gaussian(const Vec& z, double eps, Rng& rng) {
  require(eps > 0, "sample_gaussian: epsilon must be positive");
  return z - 2.0 * eps * rng.normal_vector(static_cast<int>(z.size()));
}

// Uniform coordinate, uniform replacement value != current symbol.
inline DiscreteState sample_hamming_one(const DiscreteState& z, int alphabet, Rng& rng) {
  require(alphabet >= 2, "sample_hamming_one: alphabet must be >= 2 (no neighbor otherwise)");
  require(!z.empty(), "sample_hamming_one: empty state");
  DiscreteState out = z;
  const size_t coord = rng.uniform_index(z.size());
  int v = static_cast<int>(rng.uniform_index(alphabet - 1));
  if (v >= out[coord]) ++v;
  out[coord] = v;
  return out;
}

// Keeps z with probability 1 - alpha, else redraws uniformly over V^L.
inline DiscreteState sample_uniform_corruption(const DiscreteState& z, int alphabet,
                                               double alpha, Rng& rng) {
  require(alpha >= 0 && alpha <= 1, "sample_uniform_corruption: alpha in [0,1]");
  if (!rng.bernoulli(alpha)) return z;
  DiscreteState out(z.size());
  for (auto& v : out) v = static_cast<int>(rng.uniform_index(alphabet));
  return out;
}

struct MixedState {
  Vec x;
  int label = 0;
};

// Perturbs both coordinates at once: sphere move on x, nonzero cyclic label shift for y.
inline MixedState sample_mixed_joint(const Vec& x, int label, double eps, int num_labels,
                                     Rng& rng) {
  require(num_labels >= 2, "sample_mixed_joint: K must be >= 2");
  MixedState out;
  out.x = sample_spherical(x, eps, rng);
  const int shift = 1 + static_cast<int>(rng.uniform_index(num_labels - 1));
  out.label = (label + shift) % num_labels;
  return out;
}

// Uniform draw among the 4-neighbors of a grid cell; returns the neighbor's
// flat index and the local degree (the importance weight for the indicator
// kernel, since unnormalized rows sum to the degree).
inline std::pair<long, int> sample_grid4_neighbor(long flat, int bins, Rng& rng) {
  const int i0 = static_cast<int>(flat / bins);
  const int i1 = static_cast<int>(flat % bins);
  std::array<long, 4> nbrs;
  int deg = 0;
  if (i0 > 0) nbrs[deg++] = flat - bins;
  if (i0 < bins - 1) nbrs[deg++] = flat + bins;
  if (i1 > 0) nbrs[deg++] = flat - 1;
  if (i1 < bins - 1) nbrs[deg++] = flat + 1;
  const long pick = nbrs[rng.uniform_index(deg)];
  return {pick, deg};
}

// Surface area of the unit sphere S^{d-1}.
inline double unit_sphere_area(int d) {
  return 2.0 * std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d);
}

// Pointwise kernel weight for the continuous kinds; used by symmetry checks.
// The spherical weight is the surface factor on the shell |z - z~| = 2 eps.
inline double kernel_weight(const ComparisonKernel& kernel, const Vec& z, const Vec& zt) {
  const int d = static_cast<int>(z.size());
  switch (kernel.kind) {
    case KernelKind::gaussian: {
      const double e2 = kernel.epsilon * kernel.epsilon;
      return std::pow(8.0 * kPi * e2, -0.5 * d) *
             std::exp(-(z - zt).squaredNorm() / (8.0 * e2));
    }
    case KernelKind::spherical: {
      const double r = (z - zt).norm();
      if (std::abs(r - 2.0 * kernel.epsilon) > 1e-9) return 0.0;
      return 1.0 / (unit_sphere_area(d) * std::pow(2.0 * kernel.epsilon, d - 1));
    }
    default:
      throw ConfigError("kernel_weight: continuous kinds only");
  }
}

inline double mixed_joint_weight(const ComparisonKernel& kernel, const MixedState& a,
                                 const MixedState& b) {
  require(kernel.kind == KernelKind::mixed_joint, "mixed_joint_weight: wrong kind");
  if (a.label == b.label) return 0.0;
  const double sphere =
      kernel_weight(ComparisonKernel::spherical(kernel.epsilon), a.x, b.x);
  return sphere / static_cast<double>(kernel.num_labels - 1);
}

// 4-neighbor lattice matrix over rows x cols cells (flat index i0 * cols + i1).
// The default weight is the symmetric indicator; the row-normalized variant
// divides by the local degree and is not symmetric at the boundary.
inline SpMat grid4_matrix(int rows, int cols, bool row_normalized) {
  require(rows >= 1 && cols >= 1, "grid4_matrix: grid sides must be >= 1");
  const long n = static_cast<long>(rows) * cols;
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(4 * n);
  for (long s = 0; s < n; ++s) {
    const int i0 = static_cast<int>(s / cols);
    const int i1 = static_cast<int>(s % cols);
    std::array<long, 4> nbrs;
    int deg = 0;
    if (i0 > 0) nbrs[deg++] = s - cols;
    if (i0 < rows - 1) nbrs[deg++] = s + cols;
    if (i1 > 0) nbrs[deg++] = s - 1;
    if (i1 < cols - 1) nbrs[deg++] = s + 1;
    const double w = row_normalized ? 1.0 / deg : 1.0;
    for (int k = 0; k < deg; ++k) trips.emplace_back(s, nbrs[k], w);
  }
  SpMat m(n, n);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

inline SpMat grid4_matrix(int bins, bool row_normalized) {
  return grid4_matrix(bins, bins, row_normalized);
}

constexpr long kDefaultStateCap = 100000;
// Dense matrix kinds are additionally capped to keep entry counts bounded.
constexpr long kDenseStateCap = 2048;

// Explicit comparison matrix on an enumerable space.
inline SpMat kernel_matrix(const ComparisonKernel& kernel, const StateSpace& space,
                           long cap = kDefaultStateCap) {
  switch (kernel.kind) {
    case KernelKind::spherical:
    case KernelKind::gaussian:
    case KernelKind::mixed_joint:
      throw ConfigError("kernel_matrix: continuous kernels have no explicit matrix");
    default:
      break;
  }
  require(space.kind == SpaceKind::discrete, "kernel_matrix: discrete spaces only");
  const long long count = space.state_count();
  require(count > 0 && count <= cap, "kernel_matrix: state count over cap");

  if (kernel.kind == KernelKind::hamming_one) {
    const double w = 1.0 / (static_cast<double>(space.length) * (space.alphabet - 1));
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<size_t>(count) * space.length * (space.alphabet - 1));
    for (long long s = 0; s < count; ++s) {
      DiscreteState z = index_to_state(s, space.alphabet, space.length);
      for (int i = 0; i < space.length; ++i) {
        const int orig = z[i];
        for (int v = 0; v < space.alphabet; ++v) {
          if (v == orig) continue;
          z[i] = v;
          trips.emplace_back(s, state_to_index(z, space.alphabet), w);
        }
        z[i] = orig;
      }
    }
    SpMat m(count, count);
    m.setFromTriplets(trips.begin(), trips.end());
    return m;
  }

  if (kernel.kind == KernelKind::uniform_corruption) {
    require(count <= kDenseStateCap, "kernel_matrix: state count over cap for dense kind");
    const double off = kernel.alpha / static_cast<double>(count);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<size_t>(count) * count);
    for (long long i = 0; i < count; ++i)
      for (long long j = 0; j < count; ++j)
        trips.emplace_back(i, j, off + (i == j ? 1.0 - kernel.alpha : 0.0));
    SpMat m(count, count);
    m.setFromTriplets(trips.begin(), trips.end());
    return m;
  }

  // grid4: a quantized 2-D grid presented as Discrete(bins, 2).
  require(space.length == 2, "grid4 kernel requires Discrete(bins, 2)");
  return grid4_matrix(space.alphabet, kernel.grid_row_normalized);
}

// Component label per state for the graph with edges on nonzero weights.
inline std::vector<int> connected_components(const SpMat& omega) {
  const long n = omega.rows();
  std::vector<int> label(n, -1);
  int comp = 0;
  std::deque<long> queue;
  for (long s = 0; s < n; ++s) {
    if (label[s] >= 0) continue;
    label[s] = comp;
    queue.push_back(s);
    while (!queue.empty()) {
      const long u = queue.front();
      queue.pop_front();
      for (SpMat::InnerIterator it(omega, u); it; ++it) {
        if (it.value() != 0.0 && label[it.index()] < 0) {
          label[it.index()] = comp;
          queue.push_back(it.index());
        }
      }
    }
    ++comp;
  }
  return label;
}

inline bool graph_connected(const SpMat& omega) {
  const auto labels = connected_components(omega);
  for (int l : labels)
    if (l != 0) return false;
  return true;
}

}  // namespace ctem
