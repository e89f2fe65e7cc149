#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "ctem/common.hpp"
#include "ctem/rng.hpp"
#include "ctem/state_space.hpp"

namespace ctem {

enum class DatasetName {
  spiral,
  two_gaussian,
  banana,
  two_rings,
  gmm,
  moons_grid,
  swissroll_grid,
  eight_gaussians_grid,
  mixed_ring_gmm,
  custom_tabular,
};

inline std::string to_string(DatasetName name) {
  switch (name) {
    case DatasetName::spiral: return "spiral";
    case DatasetName::two_gaussian: return "two_gaussian";
    case DatasetName::banana: return "banana";
    case DatasetName::two_rings: return "two_rings";
    case DatasetName::gmm: return "gmm";
    case DatasetName::moons_grid: return "moons_grid";
    case DatasetName::swissroll_grid: return "swissroll_grid";
    case DatasetName::eight_gaussians_grid: return "eight_gaussians_grid";
    case DatasetName::mixed_ring_gmm: return "mixed_ring_gmm";
    case DatasetName::custom_tabular: return "custom_tabular";
  }
  return "unknown";
}

inline DatasetName dataset_from_string(const std::string& s) {
  for (DatasetName n :
       {DatasetName::spiral, DatasetName::two_gaussian, DatasetName::banana,
        DatasetName::two_rings, DatasetName::gmm, DatasetName::moons_grid,
        DatasetName::swissroll_grid, DatasetName::eight_gaussians_grid,
        DatasetName::mixed_ring_gmm, DatasetName::custom_tabular}) {
    if (to_string(n) == s) return n;
  }
  throw ConfigError("unknown dataset name: " + s);
}

// Quantization grid descriptor. Bounds may be frozen from a sample draw.
struct GridSpec {
  int bins_per_axis = 91;
  Bounds2 bounds = Bounds2::Zero();
  bool has_bounds = false;
};

struct DatasetSpec {
  DatasetName name = DatasetName::two_gaussian;
  long n_train = 1000;
  int dim = 2;              // ambient dimension for gmm
  int num_labels = 16;      // K for mixed_ring_gmm
  double separation = 2.0;  // s: ring radius in units of component std
  double mixed_sigma = 1.0;
  double spiral_noise = 0.1;
  double ring_noise = 0.1;
  std::optional<GridSpec> grid;
  std::vector<double> tabular_p;

  void validate() const {
    require(n_train >= 1, "dataset: n_train must be >= 1");
    switch (name) {
      case DatasetName::gmm:
        require(dim >= 4, "gmm: dimension must be >= 4 (four axis-aligned modes)");
        break;
      case DatasetName::mixed_ring_gmm:
        require(num_labels >= 2, "mixed_ring_gmm: K must be >= 2");
        require(separation > 0 && mixed_sigma > 0, "mixed_ring_gmm: s and sigma must be positive");
        break;
      case DatasetName::custom_tabular: {
        require(!tabular_p.empty(), "custom_tabular: probability vector required");
        double sum = 0;
        for (double p : tabular_p) {
          require(p >= 0, "custom_tabular: probabilities must be nonnegative");
          sum += p;
        }
        require(std::abs(sum - 1.0) <= 1e-9, "custom_tabular: probabilities must sum to 1");
        break;
      }
      default:
        break;
    }
  }

  // Space of the generator output. Quantized variants emit continuous points
  // that are binned afterwards; see quantized_space().
  StateSpace space() const {
    switch (name) {
      case DatasetName::gmm:
        return StateSpace::continuous(dim);
      case DatasetName::mixed_ring_gmm:
        return StateSpace::mixed(2, num_labels);
      case DatasetName::custom_tabular:
        return StateSpace::discrete(static_cast<int>(tabular_p.size()), 1);
      default:
        return StateSpace::continuous(2);
    }
  }

  bool is_grid_dataset() const {
    return name == DatasetName::moons_grid || name == DatasetName::swissroll_grid ||
           name == DatasetName::eight_gaussians_grid;
  }

  StateSpace quantized_space() const {
    require(is_grid_dataset(), "quantized_space: not a grid dataset");
    const int bins = grid ? grid->bins_per_axis : 91;
    return StateSpace::discrete(bins, 2);
  }
};

struct MixedBatch {
  Mat x;        // 2 x n
  IVec labels;  // n
};

// Normalized per-cell empirical mass on a rectangular 2-D grid.
// Flat index is axis-0 major: flat = i0 * bins + i1.
struct QuantizedGrid {
  int bins = 91;
  Bounds2 bounds = Bounds2::Zero();
  Vec counts;
  Vec p_hat;
  long n = 0;

  long states() const { return static_cast<long>(bins) * bins; }
  long flat_index(int i0, int i1) const { return static_cast<long>(i0) * bins + i1; }
  std::pair<int, int> cell(long flat) const {
    return {static_cast<int>(flat / bins), static_cast<int>(flat % bins)};
  }
  // Center coordinates of a cell.
  Vec cell_center(long flat) const {
    const auto [i0, i1] = cell(flat);
    Vec c(2);
    c[0] = bounds(0, 0) + (i0 + 0.5) * (bounds(0, 1) - bounds(0, 0)) / bins;
    c[1] = bounds(1, 0) + (i1 + 0.5) * (bounds(1, 1) - bounds(1, 0)) / bins;
    return c;
  }
};

// Per-axis bounds padded by `pad` times the data range, then frozen.
inline GridSpec frozen_bounds_from(const Mat& samples, int bins, double pad = 0.05) {
  require(samples.cols() >= 1 && samples.rows() == 2, "frozen_bounds_from: need 2 x n samples");
  GridSpec g;
  g.bins_per_axis = bins;
  for (int a = 0; a < 2; ++a) {
    const double lo = samples.row(a).minCoeff();
    const double hi = samples.row(a).maxCoeff();
    const double range = hi - lo;
    g.bounds(a, 0) = lo - pad * range;
    g.bounds(a, 1) = hi + pad * range;
  }
  g.has_bounds = true;
  return g;
}

// Bins samples into the grid; points outside the bounds land in boundary cells.
inline QuantizedGrid quantize(const Mat& samples, const GridSpec& grid) {
  require(samples.cols() >= 1, "quantize: empty sample set");
  require(grid.has_bounds, "quantize: grid bounds not set");
  const int bins = grid.bins_per_axis;
  require(bins >= 1, "quantize: bins_per_axis must be >= 1");
  QuantizedGrid q;
  q.bins = bins;
  q.bounds = grid.bounds;
  q.n = samples.cols();
  q.counts = Vec::Zero(q.states());
  std::array<double, 2> width{};
  for (int a = 0; a < 2; ++a) {
    width[a] = grid.bounds(a, 1) - grid.bounds(a, 0);
    require(width[a] > 0, "quantize: degenerate bounds");
  }
  for (long j = 0; j < samples.cols(); ++j) {
    int idx[2];
    for (int a = 0; a < 2; ++a) {
      const double t = (samples(a, j) - grid.bounds(a, 0)) / width[a];
      int i = static_cast<int>(std::floor(t * bins));
      i = std::max(0, std::min(bins - 1, i));
      idx[a] = i;
    }
    q.counts[q.flat_index(idx[0], idx[1])] += 1.0;
  }
  q.p_hat = q.counts / static_cast<double>(q.n);
  return q;
}

// Per-coordinate sample standard deviation (unbiased), averaged over axes.
inline double mean_coordinate_std(const Mat& samples) {
  const long n = samples.cols();
  require(n >= 2, "mean_coordinate_std: need at least 2 samples");
  double acc = 0;
  for (long a = 0; a < samples.rows(); ++a) {
    const double mean = samples.row(a).mean();
    const double ss = (samples.row(a).array() - mean).square().sum();
    acc += std::sqrt(ss / static_cast<double>(n - 1));
  }
  return acc / static_cast<double>(samples.rows());
}

namespace detail {

// log density and score of an isotropic Gaussian mixture.
inline double mixture_log_density(const Mat& means, const Vec& log_weights,
                                  double sigma, const Vec& x) {
  const int k = static_cast<int>(means.cols());
  Vec terms(k);
  for (int i = 0; i < k; ++i)
    terms[i] = log_weights[i] + gaussian_log_pdf(x, means.col(i), sigma);
  return log_sum_exp(terms);
}

inline Vec mixture_score(const Mat& means, const Vec& log_weights, double sigma,
                         const Vec& x) {
  const int k = static_cast<int>(means.cols());
  Vec terms(k);
  for (int i = 0; i < k; ++i)
    terms[i] = log_weights[i] + gaussian_log_pdf(x, means.col(i), sigma);
  const double lse = log_sum_exp(terms);
  Vec score = Vec::Zero(x.size());
  for (int i = 0; i < k; ++i) {
    const double gamma = std::exp(terms[i] - lse);
    score += gamma * (means.col(i) - x) / (sigma * sigma);
  }
  return score;
}

}  // namespace detail

// A dataset spec bound to a seed. Construction resolves any per-seed
// parameters (the mixed-space label prior), so densities are well defined.
class Dataset {
 public:
  Dataset(DatasetSpec spec, std::uint64_t seed) : spec_(std::move(spec)), seed_(seed) {
    spec_.validate();
    if (spec_.name == DatasetName::mixed_ring_gmm) {
      Rng rng = Rng::substream(seed_, "mixed_prior");
      const int k = spec_.num_labels;
      prior_ = Vec(k);
      for (int y = 0; y < k; ++y) prior_[y] = rng.uniform(1.0, 1.5);
      prior_ /= prior_.sum();
      means_ = Mat(2, k);
      const double radius = spec_.separation * spec_.mixed_sigma;
      for (int y = 0; y < k; ++y) {
        means_(0, y) = radius * std::cos(2.0 * kPi * y / k);
        means_(1, y) = radius * std::sin(2.0 * kPi * y / k);
      }
    }
    if (spec_.name == DatasetName::eight_gaussians_grid) {
      means_ = Mat(2, 8);
      for (int m = 0; m < 8; ++m) {
        means_(0, m) = 2.0 * std::cos(2.0 * kPi * m / 8);
        means_(1, m) = 2.0 * std::sin(2.0 * kPi * m / 8);
      }
    }
  }

  const DatasetSpec& spec() const { return spec_; }
  std::uint64_t seed() const { return seed_; }

  // i.i.d. continuous draws, one column per sample.
  Mat sample(long n, Rng& rng) const {
    const StateSpace space = spec_.space();
    require(space.kind == SpaceKind::continuous, "sample: continuous datasets only");
    Mat x(space.dim, n);
    for (long j = 0; j < n; ++j) x.col(j) = draw_continuous(rng);
    return x;
  }

  MixedBatch sample_mixed(long n, Rng& rng) const {
    require(spec_.name == DatasetName::mixed_ring_gmm, "sample_mixed: mixed datasets only");
    MixedBatch b;
    b.x = Mat(2, n);
    b.labels = IVec(n);
    for (long j = 0; j < n; ++j) {
      const int y = draw_label(rng);
      b.labels[j] = y;
      b.x.col(j) = means_.col(y) + spec_.mixed_sigma * rng.normal_vector(2);
    }
    return b;
  }

  std::vector<long> sample_states(long n, Rng& rng) const {
    require(spec_.name == DatasetName::custom_tabular, "sample_states: tabular datasets only");
    std::vector<long> out(n);
    for (long j = 0; j < n; ++j) {
      const double u = rng.uniform();
      double acc = 0;
      long pick = static_cast<long>(spec_.tabular_p.size()) - 1;
      for (size_t i = 0; i < spec_.tabular_p.size(); ++i) {
        acc += spec_.tabular_p[i];
        if (u < acc) {
          pick = static_cast<long>(i);
          break;
        }
      }
      out[j] = pick;
    }
    return out;
  }

  bool has_density() const {
    switch (spec_.name) {
      case DatasetName::spiral:
      case DatasetName::moons_grid:
      case DatasetName::swissroll_grid:
        return false;
      default:
        return true;
    }
  }

  bool has_score() const { return has_density() && spec_.name != DatasetName::custom_tabular; }

  double log_density(const Vec& x) const {
    require(has_density(), "log_density unavailable for " + to_string(spec_.name));
    switch (spec_.name) {
      case DatasetName::two_gaussian: {
        Mat means(2, 2);
        means.col(0) << 1, 1;
        means.col(1) << -1, -1;
        return detail::mixture_log_density(means, Vec::Constant(2, std::log(0.5)), 1.0, x);
      }
      case DatasetName::banana: {
        const double mid = 0.5 * (x[0] * x[0] - 4.0);
        return gaussian_log_pdf_1d(x[0], 0.0, 2.0) + gaussian_log_pdf_1d(x[1], mid, 1.0);
      }
      case DatasetName::two_rings:
        return rings_log_density(x);
      case DatasetName::gmm: {
        Mat means = Mat::Zero(spec_.dim, 4);
        for (int m = 0; m < 4; ++m) means(m, m) = 3.0;
        return detail::mixture_log_density(means, Vec::Constant(4, std::log(0.25)), 1.0, x);
      }
      case DatasetName::eight_gaussians_grid:
        return detail::mixture_log_density(means_, Vec::Constant(8, std::log(0.125)), 0.1, x);
      case DatasetName::custom_tabular:
        throw ConfigError("log_density: use state_log_mass for tabular datasets");
      default:
        throw ConfigError("log_density unavailable");
    }
  }

  Vec score(const Vec& x) const {
    require(has_score(), "score unavailable for " + to_string(spec_.name));
    switch (spec_.name) {
      case DatasetName::two_gaussian: {
        Mat means(2, 2);
        means.col(0) << 1, 1;
        means.col(1) << -1, -1;
        return detail::mixture_score(means, Vec::Constant(2, std::log(0.5)), 1.0, x);
      }
      case DatasetName::banana: {
        Vec s(2);
        const double mid = 0.5 * (x[0] * x[0] - 4.0);
        s[0] = -x[0] / 4.0 + (x[1] - mid) * x[0];
        s[1] = -(x[1] - mid);
        return s;
      }
      case DatasetName::two_rings:
        return rings_score(x);
      case DatasetName::gmm: {
        Mat means = Mat::Zero(spec_.dim, 4);
        for (int m = 0; m < 4; ++m) means(m, m) = 3.0;
        return detail::mixture_score(means, Vec::Constant(4, std::log(0.25)), 1.0, x);
      }
      case DatasetName::eight_gaussians_grid:
        return detail::mixture_score(means_, Vec::Constant(8, std::log(0.125)), 0.1, x);
      default:
        throw ConfigError("score unavailable");
    }
  }

  double state_log_mass(long state) const {
    require(spec_.name == DatasetName::custom_tabular, "state_log_mass: tabular only");
    const double p = spec_.tabular_p.at(static_cast<size_t>(state));
    require_numeric(p > 0, "state_log_mass: zero-mass state");
    return std::log(p);
  }

  // Mixed-space accessors.
  const Vec& label_prior() const {
    require(spec_.name == DatasetName::mixed_ring_gmm, "label_prior: mixed datasets only");
    return prior_;
  }
  const Mat& label_means() const { return means_; }

  double mixed_log_density(const Vec& x, int label) const {
    require(spec_.name == DatasetName::mixed_ring_gmm, "mixed_log_density: mixed datasets only");
    require(label >= 0 && label < spec_.num_labels, "mixed_log_density: label out of range");
    return std::log(prior_[label]) + gaussian_log_pdf(x, means_.col(label), spec_.mixed_sigma);
  }

  double mixed_marginal_log_density(const Vec& x) const {
    require(spec_.name == DatasetName::mixed_ring_gmm, "mixed datasets only");
    return detail::mixture_log_density(means_, prior_.array().log().matrix(),
                                       spec_.mixed_sigma, x);
  }

 private:
  Vec draw_continuous(Rng& rng) const {
    switch (spec_.name) {
      case DatasetName::spiral: {
        const double phi = rng.uniform(0.0, 4.0 * kPi);
        const double r = phi * (2.0 / (4.0 * kPi));
        Vec x(2);
        x[0] = r * std::cos(phi) + spec_.spiral_noise * rng.normal();
        x[1] = r * std::sin(phi) + spec_.spiral_noise * rng.normal();
        return x;
      }
      case DatasetName::two_gaussian: {
        const bool first = rng.bernoulli(0.5);
        Vec mu = first ? Vec::Constant(2, 1.0) : Vec::Constant(2, -1.0);
        return mu + rng.normal_vector(2);
      }
      case DatasetName::banana: {
        Vec x(2);
        x[0] = 2.0 * rng.normal();
        x[1] = 0.5 * (x[0] * x[0] - 4.0) + rng.normal();
        return x;
      }
      case DatasetName::two_rings: {
        const double radius = rng.bernoulli(0.5) ? 1.0 : 2.0;
        const double theta = rng.uniform(0.0, 2.0 * kPi);
        const double r = radius + spec_.ring_noise * rng.normal();
        Vec x(2);
        x[0] = r * std::cos(theta);
        x[1] = r * std::sin(theta);
        return x;
      }
      case DatasetName::gmm: {
        const int mode = static_cast<int>(rng.uniform_index(4));
        Vec x = rng.normal_vector(spec_.dim);
        x[mode] += 3.0;
        return x;
      }
      case DatasetName::moons_grid: {
        const bool outer = rng.bernoulli(0.5);
        const double t = rng.uniform(0.0, kPi);
        Vec x(2);
        if (outer) {
          x[0] = std::cos(t);
          x[1] = std::sin(t);
        } else {
          x[0] = 1.0 - std::cos(t);
          x[1] = 1.0 - std::sin(t) - 0.5;
        }
        x[0] += 0.05 * rng.normal();
        x[1] += 0.05 * rng.normal();
        return x;
      }
      case DatasetName::swissroll_grid: {
        const double t = 1.5 * kPi * (1.0 + 2.0 * rng.uniform());
        Vec x(2);
        x[0] = t * std::cos(t) + 0.5 * rng.normal();
        x[1] = t * std::sin(t) + 0.5 * rng.normal();
        return x;
      }
      case DatasetName::eight_gaussians_grid: {
        const int mode = static_cast<int>(rng.uniform_index(8));
        return means_.col(mode) + 0.1 * rng.normal_vector(2);
      }
      default:
        throw ConfigError("draw_continuous: not a continuous dataset");
    }
  }

  int draw_label(Rng& rng) const {
    const double u = rng.uniform();
    double acc = 0;
    for (int y = 0; y < spec_.num_labels; ++y) {
      acc += prior_[y];
      if (u < acc) return y;
    }
    return spec_.num_labels - 1;
  }

  // x = r (cos t, sin t), t uniform, r ~ N(radius_k, ring_noise), equal mixture.
  // Cartesian density: p(x) = sum_k 0.5 (f_k(|x|) + f_k(-|x|)) / (2 pi |x|).
  double rings_log_density(const Vec& x) const {
    const double rho = std::max(x.norm(), 1e-300);
    const double s = spec_.ring_noise;
    Vec terms(4);
    int i = 0;
    for (double radius : {1.0, 2.0}) {
      terms[i++] = std::log(0.5) + gaussian_log_pdf_1d(rho, radius, s);
      terms[i++] = std::log(0.5) + gaussian_log_pdf_1d(-rho, radius, s);
    }
    return log_sum_exp(terms) - std::log(2.0 * kPi * rho);
  }

  Vec rings_score(const Vec& x) const {
    const double rho = std::max(x.norm(), 1e-300);
    const double s2 = spec_.ring_noise * spec_.ring_noise;
    Vec terms(4);
    Vec dterm(4);  // d/drho of each term's log, term order as above
    int i = 0;
    for (double radius : {1.0, 2.0}) {
      terms[i] = std::log(0.5) + gaussian_log_pdf_1d(rho, radius, spec_.ring_noise);
      dterm[i] = -(rho - radius) / s2;
      ++i;
      terms[i] = std::log(0.5) + gaussian_log_pdf_1d(-rho, radius, spec_.ring_noise);
      dterm[i] = -(rho + radius) / s2;
      ++i;
    }
    const double lse = log_sum_exp(terms);
    double dlog = 0;
    for (int k = 0; k < 4; ++k) dlog += std::exp(terms[k] - lse) * dterm[k];
    dlog -= 1.0 / rho;
    return (dlog / rho) * x;
  }

  DatasetSpec spec_;
  std::uint64_t seed_ = 0;
  Vec prior_;   // mixed label prior, resolved per seed
  Mat means_;   // mixed/eight-gaussian component means
};

// Draws the spec's n_train continuous samples for (spec, seed).
inline Mat generate(const DatasetSpec& spec, std::uint64_t seed) {
  Dataset ds(spec, seed);
  Rng rng = Rng::substream(seed, "data");
  return ds.sample(spec.n_train, rng);
}

inline MixedBatch generate_mixed(const DatasetSpec& spec, std::uint64_t seed) {
  Dataset ds(spec, seed);
  Rng rng = Rng::substream(seed, "data");
  return ds.sample_mixed(spec.n_train, rng);
}

// Binary 8x8 glyph patterns with i.i.d. pixel flips; the reduced stand-in for
// binary-image experiments. States are {0,1}^64.
struct BinaryPatternDataset {
  int side = 8;
  double flip_prob = 0.05;

  int length() const { return side * side; }

  // Four prototypes: border box, plus, diagonal cross, filled half.
  std::vector<DiscreteState> prototypes() const {
    const int s = side;
    std::vector<DiscreteState> protos;
    DiscreteState box(s * s, 0), plus(s * s, 0), cross(s * s, 0), half(s * s, 0);
    for (int r = 0; r < s; ++r) {
      for (int c = 0; c < s; ++c) {
        const int i = r * s + c;
        if (r == 0 || c == 0 || r == s - 1 || c == s - 1) box[i] = 1;
        if (r == s / 2 || c == s / 2) plus[i] = 1;
        if (r == c || r == s - 1 - c) cross[i] = 1;
        if (c < s / 2) half[i] = 1;
      }
    }
    protos.push_back(box);
    protos.push_back(plus);
    protos.push_back(cross);
    protos.push_back(half);
    return protos;
  }

  std::vector<DiscreteState> sample(long n, Rng& rng) const {
    const auto protos = prototypes();
    std::vector<DiscreteState> out;
    out.reserve(n);
    for (long j = 0; j < n; ++j) {
      DiscreteState z = protos[rng.uniform_index(protos.size())];
      for (auto& bit : z)
        if (rng.bernoulli(flip_prob)) bit = 1 - bit;
      out.push_back(std::move(z));
    }
    return out;
  }

  Vec pixel_mean(const std::vector<DiscreteState>& states) const {
    Vec m = Vec::Zero(length());
    for (const auto& z : states)
      for (int i = 0; i < length(); ++i) m[i] += z[i];
    return m / static_cast<double>(states.size());
  }
};

}  // namespace ctem
