#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ctem/common.hpp"
#include "ctem/rng.hpp"
#include "ctem/state_space.hpp"
#include "ctem/threading.hpp"

namespace ctem {

// Scalar potential: linear -> SiLU stacks with a linear scalar head.
// Inputs are encoded feature columns; continuous coordinates enter raw,
// discrete coordinates one-hot (raw 0/1 for binary alphabets), labels one-hot,
// and noise-conditional models append log(sigma) as the last feature.
struct MlpSpec {
  int input_dim = 2;
  std::vector<int> hidden = {128, 128, 128};
  bool noise_conditional = false;

  int feature_dim() const { return input_dim + (noise_conditional ? 1 : 0); }

  void validate() const {
    require(input_dim >= 1, "mlp: input_dim must be >= 1");
    for (int w : hidden) require(w >= 1, "mlp: hidden widths must be >= 1");
  }
};

class MlpEnergy {
 public:
  MlpEnergy() = default;

  explicit MlpEnergy(MlpSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    int in = spec_.feature_dim();
    for (int w : spec_.hidden) {
      weights_.emplace_back(Mat::Zero(w, in));
      biases_.emplace_back(Vec::Zero(w));
      in = w;
    }
    weights_.emplace_back(Mat::Zero(1, in));
    biases_.emplace_back(Vec::Zero(1));
  }

  // Kaiming-style fan-in scaling: W ~ U(+-sqrt(6/fan_in)), biases zero.
  static MlpEnergy initialized(MlpSpec spec, std::uint64_t seed) {
    MlpEnergy m(std::move(spec));
    Rng rng = Rng::substream(seed, "mlp_init");
    for (auto& w : m.weights_) {
      const double bound = std::sqrt(6.0 / static_cast<double>(w.cols()));
      for (long j = 0; j < w.cols(); ++j)
        for (long i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(-bound, bound);
    }
    return m;
  }

  const MlpSpec& spec() const { return spec_; }
  int num_layers() const { return static_cast<int>(weights_.size()); }
  const Mat& weight(int l) const { return weights_[l]; }
  const Vec& bias(int l) const { return biases_[l]; }

  long param_count() const {
    long n = 0;
    for (size_t l = 0; l < weights_.size(); ++l)
      n += weights_[l].size() + biases_[l].size();
    return n;
  }

  // Flattening order: per layer, W column-major then b.
  Vec params() const {
    Vec out(param_count());
    long pos = 0;
    for (size_t l = 0; l < weights_.size(); ++l) {
      std::copy(weights_[l].data(), weights_[l].data() + weights_[l].size(), out.data() + pos);
      pos += weights_[l].size();
      std::copy(biases_[l].data(), biases_[l].data() + biases_[l].size(), out.data() + pos);
      pos += biases_[l].size();
    }
    return out;
  }

  void set_params(const Vec& p) {
    require(p.size() == param_count(), "set_params: size mismatch");
    long pos = 0;
    for (size_t l = 0; l < weights_.size(); ++l) {
      std::copy(p.data() + pos, p.data() + pos + weights_[l].size(), weights_[l].data());
      pos += weights_[l].size();
      std::copy(p.data() + pos, p.data() + pos + biases_[l].size(), biases_[l].data());
      pos += biases_[l].size();
    }
  }

  // Stored forward pass: pre-activations Z, sigmoids S, activations A.
  struct Trace {
    std::vector<Mat> z, s, a;  // per hidden layer
  };

  // X: feature_dim x n. Returns one energy per column.
  Vec forward(const Mat& X, Trace* trace = nullptr) const {
    require(X.rows() == spec_.feature_dim(), "forward: feature dimension mismatch");
    const int hidden_layers = num_layers() - 1;
    Mat a = X;
    if (trace) {
      trace->z.resize(hidden_layers);
      trace->s.resize(hidden_layers);
      trace->a.resize(hidden_layers);
    }
    for (int l = 0; l < hidden_layers; ++l) {
      Mat z = weights_[l] * a;
      z.colwise() += biases_[l];
      Mat s = (1.0 / (1.0 + (-z.array()).exp())).matrix();
      a = (z.array() * s.array()).matrix();
      if (trace) {
        trace->z[l] = std::move(z);
        trace->s[l] = std::move(s);
        trace->a[l] = a;
      }
    }
    Vec f = (weights_.back() * a).transpose().col(0);
    f.array() += biases_.back()[0];
    return f;
  }

  double value(const Vec& x) const { return forward(x)[0]; }

  // Backward for parameters: given dL/df per column, returns the flat gradient.
  // Requires the trace from forward(X, &trace).
  Vec backward_params(const Mat& X, const Trace& trace, const Vec& dloss_df) const {
    const int hidden_layers = num_layers() - 1;
    require(static_cast<int>(trace.a.size()) == hidden_layers, "backward: bad trace");
    require(dloss_df.size() == X.cols(), "backward: dloss_df size mismatch");
    std::vector<Mat> grad_w(weights_.size());
    std::vector<Vec> grad_b(biases_.size());

    // Output layer.
    const Mat& last_act = hidden_layers > 0 ? trace.a.back() : X;
    Eigen::RowVectorXd delta_out = dloss_df.transpose();
    grad_w.back() = delta_out * last_act.transpose();
    grad_b.back() = Vec::Constant(1, delta_out.sum());

    Mat delta = weights_.back().transpose() * delta_out;  // width x n
    for (int l = hidden_layers - 1; l >= 0; --l) {
      // d silu(z) = s (1 + z (1 - s))
      delta.array() *=
          trace.s[l].array() * (1.0 + trace.z[l].array() * (1.0 - trace.s[l].array()));
      const Mat& prev = (l == 0) ? X : trace.a[l - 1];
      grad_w[l] = delta * prev.transpose();
      grad_b[l] = delta.rowwise().sum();
      if (l > 0) delta = (weights_[l].transpose() * delta).eval();
    }

    Vec flat(param_count());
    long pos = 0;
    for (size_t l = 0; l < weights_.size(); ++l) {
      std::copy(grad_w[l].data(), grad_w[l].data() + grad_w[l].size(), flat.data() + pos);
      pos += grad_w[l].size();
      std::copy(grad_b[l].data(), grad_b[l].data() + grad_b[l].size(), flat.data() + pos);
      pos += grad_b[l].size();
    }
    return flat;
  }

  // d f / d input for every column (all feature rows, including any noise row).
  Mat input_gradients(const Mat& X) const {
    Trace trace;
    forward(X, &trace);
    const int hidden_layers = num_layers() - 1;
    Mat delta = weights_.back().transpose() * Eigen::RowVectorXd::Ones(X.cols());
    for (int l = hidden_layers - 1; l >= 0; --l) {
      delta.array() *=
          trace.s[l].array() * (1.0 + trace.z[l].array() * (1.0 - trace.s[l].array()));
      delta = (weights_[l].transpose() * delta).eval();
    }
    return delta;
  }

  bool params_finite() const {
    for (size_t l = 0; l < weights_.size(); ++l)
      if (!weights_[l].allFinite() || !biases_[l].allFinite()) return false;
    return true;
  }

 private:
  MlpSpec spec_;
  std::vector<Mat> weights_;
  std::vector<Vec> biases_;
};

// Chunked batch helpers. Chunk boundaries are fixed (kBatchChunks), and
// per-chunk partials reduce in chunk order, so results do not depend on the
// worker count.
inline Vec forward_chunked(const MlpEnergy& model, const Mat& X) {
  const auto chunks = fixed_chunks(X.cols(), kBatchChunks);
  Vec f(X.cols());
  parallel_chunks(static_cast<int>(chunks.size()), [&](int c) {
    const auto& r = chunks[c];
    if (r.size() == 0) return;
    f.segment(r.begin, r.size()) = model.forward(X.middleCols(r.begin, r.size()));
  });
  return f;
}

inline Mat input_gradients_chunked(const MlpEnergy& model, const Mat& X) {
  const auto chunks = fixed_chunks(X.cols(), kBatchChunks);
  Mat g(X.rows(), X.cols());
  parallel_chunks(static_cast<int>(chunks.size()), [&](int c) {
    const auto& r = chunks[c];
    if (r.size() == 0) return;
    g.middleCols(r.begin, r.size()) =
        model.input_gradients(X.middleCols(r.begin, r.size()));
  });
  return g;
}

// Fixed quadratic head f(x) = -||x||^2 / 2, whose normalized density is the
// standard Gaussian; a closed-form target for sampler and metric checks.
struct QuadraticEnergy {
  double value(const Vec& x) const { return -0.5 * x.squaredNorm(); }
  Vec forward(const Mat& X) const {
    return (-0.5 * X.colwise().squaredNorm()).transpose();
  }
  Mat input_gradients(const Mat& X) const { return -X; }
};

// Free per-state energy vector on an enumerable space.
class TabularEnergy {
 public:
  TabularEnergy() = default;
  explicit TabularEnergy(long num_states) : energies_(Vec::Zero(num_states)) {}
  explicit TabularEnergy(Vec energies) : energies_(std::move(energies)) {}

  long num_states() const { return energies_.size(); }
  double value(long state) const { return energies_[state]; }
  Vec& energies() { return energies_; }
  const Vec& energies() const { return energies_; }

  void clamp(double lo, double hi) {
    energies_ = energies_.cwiseMax(lo).cwiseMin(hi);
  }

  bool params_finite() const { return energies_.allFinite(); }

 private:
  Vec energies_;
};

// Feature encodings shared by training, sampling, and evaluation.

// One-hot per coordinate for |V| > 2; raw 0/1 features for binary alphabets.
inline int discrete_feature_dim(int alphabet, int length) {
  return alphabet == 2 ? length : length * alphabet;
}

inline void encode_discrete_into(const DiscreteState& z, int alphabet, Mat& X, long col) {
  if (alphabet == 2) {
    for (size_t i = 0; i < z.size(); ++i) X(static_cast<long>(i), col) = z[i];
  } else {
    for (size_t i = 0; i < z.size(); ++i)
      X(static_cast<long>(i) * alphabet + z[i], col) = 1.0;
  }
}

inline Mat encode_discrete_batch(const std::vector<DiscreteState>& states, int alphabet) {
  require(!states.empty(), "encode_discrete_batch: empty batch");
  const int length = static_cast<int>(states[0].size());
  Mat X = Mat::Zero(discrete_feature_dim(alphabet, length), states.size());
  for (size_t j = 0; j < states.size(); ++j)
    encode_discrete_into(states[j], alphabet, X, static_cast<long>(j));
  return X;
}

inline int mixed_feature_dim(int d, int num_labels) { return d + num_labels; }

inline void encode_mixed_into(const Vec& x, int label, int num_labels, Mat& X, long col) {
  X.col(col).setZero();
  X.col(col).head(x.size()) = x;
  X(x.size() + label, col) = 1.0;
}

// Noise-conditional feature: log sigma in the final row (sigma > 0 required).
inline void set_noise_feature(Mat& X, double sigma) {
  require(sigma > 0, "noise feature requires sigma > 0");
  X.row(X.rows() - 1).setConstant(std::log(sigma));
}

// Adam with standard bias correction; moments match the flat parameter vector.
struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamState {
 public:
  AdamState() = default;
  AdamState(long n, AdamConfig cfg)
      : cfg_(cfg), m_(Vec::Zero(n)), v_(Vec::Zero(n)) {}

  long step_count() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

  void step(Vec& params, const Vec& grads) {
    require(params.size() == m_.size(), "adam: parameter shape mismatch");
    require(grads.size() == m_.size(), "adam: gradient shape mismatch");
    ++t_;
    m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grads;
    v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grads.cwiseProduct(grads);
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    params.array() -=
        cfg_.lr * (m_.array() / bc1) / ((v_.array() / bc2).sqrt() + cfg_.eps);
  }

 private:
  AdamConfig cfg_;
  Vec m_, v_;
  long t_ = 0;
};

}  // namespace ctem
