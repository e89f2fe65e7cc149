#pragma once

#include <cstdint>
#include <vector>

#include "ctem/common.hpp"

namespace ctem {

enum class SpaceKind { continuous, discrete, mixed };
enum class ReferenceMeasure { lebesgue, counting, product };

// Domain descriptor: a Euclidean block, a finite product alphabet, or both.
struct StateSpace {
  SpaceKind kind = SpaceKind::continuous;
  ReferenceMeasure reference_measure = ReferenceMeasure::lebesgue;
  int dim = 0;         // continuous dimension (continuous / mixed)
  int alphabet = 0;    // |V| (discrete)
  int length = 0;      // L (discrete)
  int num_labels = 0;  // K (mixed)

  static StateSpace continuous(int d) {
    StateSpace s;
    s.kind = SpaceKind::continuous;
    s.reference_measure = ReferenceMeasure::lebesgue;
    s.dim = d;
    s.validate();
    return s;
  }

  static StateSpace discrete(int alphabet, int length) {
    StateSpace s;
    s.kind = SpaceKind::discrete;
    s.reference_measure = ReferenceMeasure::counting;
    s.alphabet = alphabet;
    s.length = length;
    s.validate();
    return s;
  }

  static StateSpace mixed(int d, int num_labels) {
    StateSpace s;
    s.kind = SpaceKind::mixed;
    s.reference_measure = ReferenceMeasure::product;
    s.dim = d;
    s.num_labels = num_labels;
    s.validate();
    return s;
  }

  void validate() const {
    switch (kind) {
      case SpaceKind::continuous:
        require(reference_measure == ReferenceMeasure::lebesgue,
                "continuous space requires the Lebesgue reference measure");
        require(dim >= 1, "continuous dimension must be positive");
        break;
      case SpaceKind::discrete:
        require(reference_measure == ReferenceMeasure::counting,
                "discrete space requires the counting reference measure");
        require(alphabet >= 2, "discrete alphabet size must be >= 2");
        require(length >= 1, "discrete length must be >= 1");
        break;
      case SpaceKind::mixed:
        require(reference_measure == ReferenceMeasure::product,
                "mixed space requires the product reference measure");
        require(dim >= 1, "mixed continuous dimension must be positive");
        require(num_labels >= 2, "mixed label count must be >= 2");
        break;
    }
  }

  // |V|^L, saturating at a sentinel when it overflows a signed 64-bit count.
  long long state_count() const {
    require(kind == SpaceKind::discrete, "state_count: discrete spaces only");
    long long count = 1;
    for (int i = 0; i < length; ++i) {
      if (count > (1LL << 62) / alphabet) return -1;  // too large to enumerate
      count *= alphabet;
    }
    return count;
  }

  bool enumerable(long long cap) const {
    if (kind != SpaceKind::discrete) return false;
    const long long count = state_count();
    return count > 0 && count <= cap;
  }
};

using DiscreteState = std::vector<int>;

inline int hamming_distance(const DiscreteState& a, const DiscreteState& b) {
  require(a.size() == b.size(), "hamming_distance: length mismatch");
  int d = 0;
  for (size_t i = 0; i < a.size(); ++i) d += (a[i] != b[i]) ? 1 : 0;
  return d;
}

// Mixed-radix flat index with coordinate 0 most significant, so a quantized
// 2-D grid cell (i0, i1) maps to i0 * bins + i1.
inline long long state_to_index(const DiscreteState& z, int alphabet) {
  long long idx = 0;
  for (size_t i = 0; i < z.size(); ++i) {
    require(z[i] >= 0 && z[i] < alphabet, "state_to_index: symbol out of range");
    idx = idx * alphabet + z[i];
  }
  return idx;
}

inline DiscreteState index_to_state(long long idx, int alphabet, int length) {
  require(idx >= 0, "index_to_state: negative index");
  DiscreteState z(length);
  for (int i = length - 1; i >= 0; --i) {
    z[i] = static_cast<int>(idx % alphabet);
    idx /= alphabet;
  }
  require(idx == 0, "index_to_state: index out of range");
  return z;
}

}  // namespace ctem
