#pragma once

#include <chrono>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "ctem/common.hpp"
#include "ctem/datasets.hpp"
#include "ctem/energy.hpp"
#include "ctem/kernels.hpp"
#include "ctem/objectives.hpp"
#include "ctem/rng.hpp"
#include "ctem/threading.hpp"

namespace ctem {

// Ascending log-spaced noise levels.
struct NoiseSchedule {
  int count = 13;
  double sigma_min = 0.005;
  double sigma_max = 1.5;

  void validate() const {
    require(count >= 1, "noise schedule: count must be >= 1");
    require(sigma_min > 0 && sigma_max >= sigma_min,
            "noise schedule: need 0 < sigma_min <= sigma_max");
  }

  Vec levels() const {
    validate();
    Vec v(count);
    if (count == 1) {
      v[0] = sigma_min;
      return v;
    }
    const double l0 = std::log(sigma_min), l1 = std::log(sigma_max);
    for (int i = 0; i < count; ++i)
      v[i] = std::exp(l0 + (l1 - l0) * i / (count - 1));
    return v;
  }
};

// Comparison scale: either an absolute epsilon or c times the mean
// per-coordinate sample standard deviation.
struct EpsilonRule {
  double absolute = 0;
  double c = 0;

  static EpsilonRule abs_value(double eps) { return {eps, 0}; }
  static EpsilonRule scaled(double c) { return {0, c}; }

  double resolve(double sigma_bar) const {
    const double eps = absolute > 0 ? absolute : c * sigma_bar;
    require(eps > 0, "epsilon rule resolves to a non-positive scale");
    return eps;
  }
};

struct TrainConfig {
  long batch = 256;
  int comparisons = 4;  // M per anchor
  long steps = 15000;
  double lr = 1e-4;
  long eval_every = 500;
  double grad_clip = 0;  // 0 disables clipping
  bool antithetic = true;

  void validate() const {
    require(batch >= 1 && comparisons >= 1 && steps >= 0, "train: B, M >= 1 and steps >= 0");
    require(lr > 0, "train: learning rate must be positive");
    require(eval_every >= 1, "train: eval_every must be >= 1");
  }
};

struct TrainReport {
  std::vector<double> loss_trace;  // one entry per step
  double wall_seconds = 0;
  std::uint64_t seed = 0;
  double sigma_bar = 0;
  double epsilon = 0;
  long steps = 0;

  double mean_loss(long from, long count) const {
    require(from >= 0 && from + count <= static_cast<long>(loss_trace.size()),
            "mean_loss: window out of range");
    double acc = 0;
    for (long i = from; i < from + count; ++i) acc += loss_trace[i];
    return acc / static_cast<double>(count);
  }
};

// Full experiment description for one training run.
struct RunConfig {
  std::string name = "run";
  DatasetSpec dataset;
  std::vector<int> hidden = {128, 128, 128};
  ComparisonKernel kernel = ComparisonKernel::gaussian(1.0);
  EpsilonRule eps = EpsilonRule::scaled(0.75);
  TrainConfig train;
  NoiseSchedule schedule;
  std::uint64_t seed = 0;
};

namespace detail {

// Loss and flat parameter gradient for a concatenated [anchors | comparisons]
// feature batch. Forward and backward run over fixed column chunks; chunk
// partials reduce in order, so results do not depend on the worker count.
struct StepResult {
  double loss = 0;
  Vec grad;
};

inline StepResult mlp_pair_step(const MlpEnergy& model, const Mat& features, long anchors,
                                const Vec& weights) {
  const long total = features.cols();
  const long pairs = total - anchors;
  const auto chunks = fixed_chunks(total, kBatchChunks);
  const int nchunks = static_cast<int>(chunks.size());

  std::vector<MlpEnergy::Trace> traces(nchunks);
  Vec f(total);
  parallel_chunks(nchunks, [&](int c) {
    const auto& r = chunks[c];
    if (r.size() == 0) return;
    f.segment(r.begin, r.size()) =
        model.forward(features.middleCols(r.begin, r.size()), &traces[c]);
  });

  PairBatch pb;
  pb.f_anchor = f.head(anchors);
  pb.f_comparison = f.tail(pairs);
  pb.weights = weights;
  const PairLossGrad pg = sample_loss_grad(pb);

  Vec dldf(total);
  dldf.head(anchors) = pg.d_anchor;
  dldf.tail(pairs) = pg.d_comparison;

  std::vector<Vec> partials(nchunks);
  parallel_chunks(nchunks, [&](int c) {
    const auto& r = chunks[c];
    if (r.size() == 0) return;
    partials[c] = model.backward_params(features.middleCols(r.begin, r.size()), traces[c],
                                        dldf.segment(r.begin, r.size()));
  });

  StepResult out;
  out.loss = pg.loss;
  out.grad = Vec::Zero(model.param_count());
  for (int c = 0; c < nchunks; ++c)
    if (partials[c].size()) out.grad += partials[c];
  return out;
}

inline void clip_gradient(Vec& grad, double max_norm) {
  if (max_norm <= 0) return;
  const double n = grad.norm();
  if (n > max_norm) grad *= max_norm / n;
}

}  // namespace detail

struct ContinuousTrainResult {
  MlpEnergy model;
  TrainReport report;
  Mat train_data;  // d x n, for baselines and evaluation boxes
};

// Minibatch training with spherical or Gaussian comparisons (antithetic pairs).
inline ContinuousTrainResult train_continuous(const RunConfig& config) {
  config.train.validate();
  const Dataset dataset(config.dataset, config.seed);
  const StateSpace space = config.dataset.space();
  require(space.kind == SpaceKind::continuous, "train_continuous: continuous datasets only");
  require(config.kernel.kind == KernelKind::spherical ||
              config.kernel.kind == KernelKind::gaussian,
          "train_continuous: kernel must be spherical or gaussian");
  const auto t0 = std::chrono::steady_clock::now();

  Rng data_rng = Rng::substream(config.seed, "data");
  const Mat data = dataset.sample(config.dataset.n_train, data_rng);
  const int d = space.dim;
  const double sigma_bar = mean_coordinate_std(data);
  const double eps = config.eps.resolve(sigma_bar);

  MlpEnergy model = MlpEnergy::initialized({d, config.hidden, false}, config.seed);
  Vec params = model.params();
  AdamState adam(params.size(), {config.train.lr});

  const long batch = config.train.batch;
  const int m = config.train.comparisons;
  const long n = data.cols();
  const bool spherical = config.kernel.kind == KernelKind::spherical;

  Rng train_rng = Rng::substream(config.seed, "train");
  TrainReport report;
  report.seed = config.seed;
  report.sigma_bar = sigma_bar;
  report.epsilon = eps;
  report.steps = config.train.steps;
  report.loss_trace.reserve(config.train.steps);

  Mat features(d, batch + batch * m);
  for (long step = 0; step < config.train.steps; ++step) {
    for (long b = 0; b < batch; ++b) {
      const Vec z = data.col(train_rng.uniform_index(n));
      features.col(b) = z;
      const int fresh = config.train.antithetic ? (m + 1) / 2 : m;
      for (int k = 0; k < fresh; ++k) {
        const Vec u = spherical ? train_rng.unit_vector(d) : train_rng.normal_vector(d);
        features.col(batch + b * m + k) = z - 2.0 * eps * u;
        const int mirror = fresh + k;
        if (config.train.antithetic && mirror < m)
          features.col(batch + b * m + mirror) = z + 2.0 * eps * u;
      }
    }
    auto step_result = detail::mlp_pair_step(model, features, batch, Vec());
    require_numeric(std::isfinite(step_result.loss),
                    "train_continuous: non-finite loss at step " + std::to_string(step));
    detail::clip_gradient(step_result.grad, config.train.grad_clip);
    adam.step(params, step_result.grad);
    model.set_params(params);
    require_numeric(model.params_finite(),
                    "train_continuous: non-finite parameters at step " + std::to_string(step));
    report.loss_trace.push_back(step_result.loss);
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(model), std::move(report), data};
}

constexpr double kTabularEnergyClamp = 30.0;

// Exact full-batch minimization of the finite-space objective under a fixed
// comparison matrix; the descended loss is the weighted mean residual.
inline TabularEnergy minimize_exact_discrete(const Vec& p, const SpMat& omega,
                                             AdamConfig adam_config, long iters,
                                             TrainReport* report = nullptr,
                                             double clamp = kTabularEnergyClamp) {
  DiscreteLossWorkspace ws(p, omega);
  TabularEnergy model(p.size());
  AdamState adam(p.size(), adam_config);
  Vec grad(p.size());
  if (report) report->loss_trace.reserve(iters);
  for (long it = 0; it < iters; ++it) {
    const double loss = ws.loss_grad(model.energies(), grad, /*normalized=*/true);
    require_numeric(std::isfinite(loss),
                    "discrete training: non-finite loss at step " + std::to_string(it));
    adam.step(model.energies(), grad);
    model.clamp(-clamp, clamp);
    if (report) report->loss_trace.push_back(loss);
  }
  return model;
}

struct DiscreteTrainResult {
  TabularEnergy model;
  QuantizedGrid grid;
  SpMat omega;
  TrainReport report;
};

// Quantized-grid pipeline: draw, bin, then full-batch exact training whenever
// the state count fits the explicit-matrix cap (sampled pairs otherwise).
inline DiscreteTrainResult train_discrete_tabular(const RunConfig& config,
                                                  long state_cap = kDefaultStateCap) {
  config.train.validate();
  require(config.dataset.is_grid_dataset(),
          "train_discrete_tabular: expects a quantized grid dataset");
  const auto t0 = std::chrono::steady_clock::now();

  const Dataset dataset(config.dataset, config.seed);
  Rng data_rng = Rng::substream(config.seed, "data");
  const Mat data = dataset.sample(config.dataset.n_train, data_rng);
  const int bins = config.dataset.grid ? config.dataset.grid->bins_per_axis : 91;
  GridSpec grid_spec = (config.dataset.grid && config.dataset.grid->has_bounds)
                           ? *config.dataset.grid
                           : frozen_bounds_from(data, bins);
  QuantizedGrid grid = quantize(data, grid_spec);

  require(config.kernel.kind == KernelKind::grid4 ||
              config.kernel.kind == KernelKind::hamming_one,
          "train_discrete_tabular: kernel must be grid4 or hamming_one");
  const StateSpace space = StateSpace::discrete(bins, 2);
  const SpMat omega = config.kernel.kind == KernelKind::grid4
                          ? grid4_matrix(bins, config.kernel.grid_row_normalized)
                          : kernel_matrix(config.kernel, space, state_cap);

  DiscreteTrainResult out;
  out.grid = grid;
  out.omega = omega;
  out.report.seed = config.seed;
  out.report.steps = config.train.steps;

  if (grid.states() <= state_cap && !config.kernel.grid_row_normalized) {
    out.model = minimize_exact_discrete(grid.p_hat, omega, {config.train.lr},
                                        config.train.steps, &out.report);
  } else {
    // Sampled objective: anchors from the data states, comparisons from the
    // row sampler; indicator-kernel draws carry the local degree as weight.
    std::vector<long> data_states(data.cols());
    for (long j = 0; j < data.cols(); ++j) {
      int i0 = std::clamp(static_cast<int>(std::floor(
                   (data(0, j) - grid.bounds(0, 0)) /
                   (grid.bounds(0, 1) - grid.bounds(0, 0)) * bins)), 0, bins - 1);
      int i1 = std::clamp(static_cast<int>(std::floor(
                   (data(1, j) - grid.bounds(1, 0)) /
                   (grid.bounds(1, 1) - grid.bounds(1, 0)) * bins)), 0, bins - 1);
      data_states[j] = grid.flat_index(i0, i1);
    }
    TabularEnergy model(grid.states());
    AdamState adam(grid.states(), {config.train.lr});
    Rng train_rng = Rng::substream(config.seed, "train");
    const long batch = config.train.batch;
    const int m = config.train.comparisons;
    Vec grad(grid.states());
    out.report.loss_trace.reserve(config.train.steps);
    for (long step = 0; step < config.train.steps; ++step) {
      grad.setZero();
      double loss = 0, wsum = 0;
      for (long b = 0; b < batch; ++b) {
        const long anchor = data_states[train_rng.uniform_index(data_states.size())];
        for (int k = 0; k < m; ++k) {
          long comparison;
          double weight = 1.0;
          if (config.kernel.kind == KernelKind::grid4) {
            auto [nbr, deg] = sample_grid4_neighbor(anchor, bins, train_rng);
            comparison = nbr;
            if (!config.kernel.grid_row_normalized) weight = deg;
          } else {
            DiscreteState z = index_to_state(anchor, bins, 2);
            comparison = state_to_index(sample_hamming_one(z, bins, train_rng), bins);
          }
          const double r = tanh_half_diff(model.value(anchor), model.value(comparison));
          loss += weight * (r - 1.0) * (r - 1.0);
          const double g = weight * (r - 1.0) * (1.0 - r * r);
          grad[anchor] += g;
          grad[comparison] -= g;
          wsum += weight;
        }
      }
      loss /= wsum;
      grad /= wsum;
      require_numeric(std::isfinite(loss),
                      "discrete training: non-finite loss at step " + std::to_string(step));
      adam.step(model.energies(), grad);
      model.clamp(-kTabularEnergyClamp, kTabularEnergyClamp);
      out.report.loss_trace.push_back(loss);
    }
    out.model = std::move(model);
  }

  out.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// Per-coordinate uniform-replacement corruption at rate sigma: each coordinate
// is independently resampled uniformly over V with probability 1 - exp(-sigma),
// giving flip probability (1 - exp(-sigma)) (1 - 1/|V|). sigma = 0 is identity.
inline DiscreteState corrupt_uniform_rate(const DiscreteState& z, int alphabet, double sigma,
                                          Rng& rng) {
  require(sigma >= 0, "corrupt_uniform_rate: sigma must be >= 0");
  const double a = 1.0 - std::exp(-sigma);
  DiscreteState out = z;
  for (auto& v : out)
    if (rng.bernoulli(a)) v = static_cast<int>(rng.uniform_index(alphabet));
  return out;
}

// Explicit corruption matrix q(z | z0) for small enumerable spaces.
inline Mat uniform_rate_corruption_matrix(int alphabet, int length, double sigma) {
  const double a = 1.0 - std::exp(-sigma);
  Mat per_coord = Mat::Constant(alphabet, alphabet, a / alphabet);
  per_coord.diagonal().array() += 1.0 - a;
  const long long count = StateSpace::discrete(alphabet, length).state_count();
  require(count > 0 && count <= kDenseStateCap, "corruption matrix: space too large");
  Mat q = Mat::Ones(1, 1);
  for (int i = 0; i < length; ++i) {
    Mat next(q.rows() * alphabet, q.cols() * alphabet);
    for (long r = 0; r < q.rows(); ++r)
      for (long c = 0; c < q.cols(); ++c)
        next.block(r * alphabet, c * alphabet, alphabet, alphabet) = q(r, c) * per_coord;
    q = std::move(next);
  }
  return q;
}

struct NoiseConditionalTrainResult {
  MlpEnergy model;
  TrainReport report;
  std::vector<DiscreteState> train_states;
  Vec levels;
  // Per-level validation losses at each evaluation: eval index -> level -> loss.
  std::vector<Vec> per_level_validation;
};

// Noise-conditional binary-pattern training: sample a level, corrupt the
// anchors, compare via Hamming-one moves, and descend the conditional loss.
inline NoiseConditionalTrainResult train_noise_conditional(
    const BinaryPatternDataset& patterns, const RunConfig& config) {
  config.train.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const int length = patterns.length();
  const int alphabet = 2;
  const Vec levels = config.schedule.levels();

  Rng data_rng = Rng::substream(config.seed, "data");
  const auto train_states = patterns.sample(config.dataset.n_train, data_rng);
  Rng val_rng = Rng::substream(config.seed, "validation");
  const auto val_states = patterns.sample(256, val_rng);

  MlpSpec mspec{discrete_feature_dim(alphabet, length), config.hidden, true};
  MlpEnergy model = MlpEnergy::initialized(mspec, config.seed);
  Vec params = model.params();
  AdamState adam(params.size(), {config.train.lr});

  const long batch = config.train.batch;
  const int m = config.train.comparisons;
  Rng train_rng = Rng::substream(config.seed, "train");

  NoiseConditionalTrainResult out;
  out.levels = levels;
  out.report.seed = config.seed;
  out.report.steps = config.train.steps;
  out.train_states = train_states;

  // Validation loss per level with draws that repeat identically across
  // evaluations, so successive values are comparable.
  const auto validation_losses = [&]() {
    Vec losses(levels.size());
    for (int l = 0; l < levels.size(); ++l) {
      Rng vrng = Rng::substream(config.seed, "val_draws_level_" + std::to_string(l));
      const long vb = static_cast<long>(val_states.size());
      Mat features(mspec.feature_dim(), vb + vb * m);
      features.setZero();
      for (long b = 0; b < vb; ++b) {
        const DiscreteState zs = corrupt_uniform_rate(val_states[b], alphabet, levels[l], vrng);
        encode_discrete_into(zs, alphabet, features, b);
        for (int k = 0; k < m; ++k)
          encode_discrete_into(sample_hamming_one(zs, alphabet, vrng), alphabet, features,
                               vb + b * m + k);
      }
      set_noise_feature(features, levels[l]);
      PairBatch pb;
      Vec f = forward_chunked(model, features);
      pb.f_anchor = f.head(vb);
      pb.f_comparison = f.tail(vb * m);
      losses[l] = sample_loss(pb);
    }
    return losses;
  };

  out.per_level_validation.push_back(validation_losses());

  Mat features(mspec.feature_dim(), batch + batch * m);
  for (long step = 0; step < config.train.steps; ++step) {
    features.setZero();
    const int level = static_cast<int>(train_rng.uniform_index(levels.size()));
    const double sigma = levels[level];
    for (long b = 0; b < batch; ++b) {
      const DiscreteState& z0 = train_states[train_rng.uniform_index(train_states.size())];
      const DiscreteState zs = corrupt_uniform_rate(z0, alphabet, sigma, train_rng);
      encode_discrete_into(zs, alphabet, features, b);
      for (int k = 0; k < m; ++k)
        encode_discrete_into(sample_hamming_one(zs, alphabet, train_rng), alphabet, features,
                             batch + b * m + k);
    }
    set_noise_feature(features, sigma);
    auto step_result = detail::mlp_pair_step(model, features, batch, Vec());
    require_numeric(std::isfinite(step_result.loss),
                    "train_noise_conditional: non-finite loss at step " + std::to_string(step));
    detail::clip_gradient(step_result.grad, config.train.grad_clip);
    adam.step(params, step_result.grad);
    model.set_params(params);
    out.report.loss_trace.push_back(step_result.loss);
    if ((step + 1) % config.train.eval_every == 0)
      out.per_level_validation.push_back(validation_losses());
  }
  if (config.train.steps % config.train.eval_every != 0)
    out.per_level_validation.push_back(validation_losses());

  out.model = std::move(model);
  out.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

struct MixedTrainResult {
  MlpEnergy model;
  TrainReport report;
  MixedBatch train_data;
};

// Joint-kernel training on a mixed continuous-discrete product space.
inline MixedTrainResult train_mixed(const RunConfig& config) {
  config.train.validate();
  require(config.dataset.name == DatasetName::mixed_ring_gmm,
          "train_mixed: expects the mixed ring dataset");
  require(config.kernel.kind == KernelKind::mixed_joint,
          "train_mixed: kernel must be mixed_joint");
  const auto t0 = std::chrono::steady_clock::now();

  const Dataset dataset(config.dataset, config.seed);
  Rng data_rng = Rng::substream(config.seed, "data");
  const MixedBatch data = dataset.sample_mixed(config.dataset.n_train, data_rng);
  const int k = config.dataset.num_labels;
  const int d = 2;
  const double sigma_bar = mean_coordinate_std(data.x);
  const double eps = config.eps.resolve(sigma_bar);

  MlpSpec mspec{mixed_feature_dim(d, k), config.hidden, false};
  MlpEnergy model = MlpEnergy::initialized(mspec, config.seed);
  Vec params = model.params();
  AdamState adam(params.size(), {config.train.lr});

  const long batch = config.train.batch;
  const int m = config.train.comparisons;
  const long n = data.x.cols();
  Rng train_rng = Rng::substream(config.seed, "train");

  MixedTrainResult out;
  out.report.seed = config.seed;
  out.report.sigma_bar = sigma_bar;
  out.report.epsilon = eps;
  out.report.steps = config.train.steps;
  out.train_data = data;

  Mat features(mspec.feature_dim(), batch + batch * m);
  for (long step = 0; step < config.train.steps; ++step) {
    for (long b = 0; b < batch; ++b) {
      const long j = train_rng.uniform_index(n);
      const Vec x = data.x.col(j);
      const int y = data.labels[j];
      encode_mixed_into(x, y, k, features, b);
      for (int c = 0; c < m; ++c) {
        const MixedState tilt = sample_mixed_joint(x, y, eps, k, train_rng);
        encode_mixed_into(tilt.x, tilt.label, k, features, batch + b * m + c);
      }
    }
    auto step_result = detail::mlp_pair_step(model, features, batch, Vec());
    require_numeric(std::isfinite(step_result.loss),
                    "train_mixed: non-finite loss at step " + std::to_string(step));
    detail::clip_gradient(step_result.grad, config.train.grad_clip);
    adam.step(params, step_result.grad);
    model.set_params(params);
    out.report.loss_trace.push_back(step_result.loss);
  }

  out.model = std::move(model);
  out.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace ctem
