#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ctem/common.hpp"
#include "ctem/energy.hpp"
#include "ctem/rng.hpp"
#include "ctem/state_space.hpp"
#include "ctem/threading.hpp"

namespace ctem {

struct LangevinConfig {
  int chains = 1000;
  long steps = 2000;
  double step_size = 5e-3;
  double init_std = 2.0;
  std::uint64_t seed = 0;
  double divergence_norm = 1e6;

  void validate() const {
    require(chains >= 1 && steps >= 0, "langevin: chains and steps must be >= 1/0");
    require(step_size > 0, "langevin: step size must be positive");
  }
};

struct LangevinResult {
  Mat samples;       // d x chains, final states
  int diverged = 0;  // chains flagged and frozen after exceeding the norm bound
};

// Unadjusted Langevin dynamics x <- x + eta grad f(x) + sqrt(2 eta) xi.
// grad_fn evaluates input gradients for a column batch. Noise is drawn from
// per-chain streams, so results are independent of evaluation order.
template <class GradFn>
LangevinResult langevin(int dim, GradFn&& grad_fn, const LangevinConfig& config) {
  config.validate();
  std::vector<Rng> chain_rng;
  chain_rng.reserve(config.chains);
  for (int c = 0; c < config.chains; ++c)
    chain_rng.push_back(Rng::substream(config.seed, "langevin_chain_" + std::to_string(c)));

  Mat x(dim, config.chains);
  for (int c = 0; c < config.chains; ++c)
    x.col(c) = config.init_std * chain_rng[c].normal_vector(dim);

  std::vector<bool> diverged(config.chains, false);
  const double noise_scale = std::sqrt(2.0 * config.step_size);
  for (long step = 0; step < config.steps; ++step) {
    const Mat g = grad_fn(x);
    for (int c = 0; c < config.chains; ++c) {
      if (diverged[c]) continue;
      x.col(c) += config.step_size * g.col(c) +
                  noise_scale * chain_rng[c].normal_vector(dim);
      if (x.col(c).norm() > config.divergence_norm) diverged[c] = true;
    }
  }

  LangevinResult out;
  out.samples = std::move(x);
  for (bool d : diverged) out.diverged += d ? 1 : 0;
  return out;
}

inline LangevinResult langevin(const MlpEnergy& model, const LangevinConfig& config) {
  require(!model.spec().noise_conditional,
          "langevin: use a fixed-noise wrapper for conditional models");
  const int dim = model.spec().input_dim;
  return langevin(dim, [&](const Mat& x) { return input_gradients_chunked(model, x); },
                  config);
}

struct MhConfig {
  int chains = 1;
  long steps = 100000;
  long record_last = 0;  // per-chain trailing visits to record (0: finals only)
  std::uint64_t seed = 0;

  void validate() const {
    require(chains >= 1 && steps >= 0, "mh: chains and steps must be >= 1/0");
    require(record_last <= steps, "mh: record_last exceeds steps");
  }
};

struct MhResult {
  std::vector<long> final_states;
  std::vector<long> recorded;  // flat state per recorded visit
  double acceptance_rate = 0;
};

// Metropolis-Hastings with the uniform Hamming-one proposal (symmetric on
// product spaces), targeting exp(f) for a per-state energy.
inline MhResult mh_discrete(const std::function<double(long)>& energy,
                            const StateSpace& space, const MhConfig& config) {
  config.validate();
  space.validate();
  require(space.kind == SpaceKind::discrete, "mh_discrete: discrete spaces only");

  MhResult out;
  out.final_states.resize(config.chains);
  out.recorded.reserve(static_cast<size_t>(config.chains) * config.record_last);
  long accepted = 0, proposed = 0;

  std::vector<std::vector<long>> per_chain_recorded(config.chains);
  std::vector<long> per_chain_accepted(config.chains, 0);
  const auto chunk_work = [&](int c) {
    Rng rng = Rng::substream(config.seed, "mh_chain_" + std::to_string(c));
    DiscreteState z(space.length);
    for (auto& v : z) v = static_cast<int>(rng.uniform_index(space.alphabet));
    long idx = state_to_index(z, space.alphabet);
    double f = energy(idx);
    long local_accepted = 0;
    auto& rec = per_chain_recorded[c];
    rec.reserve(config.record_last);
    for (long step = 0; step < config.steps; ++step) {
      // Propose a uniform Hamming-one move.
      const size_t coord = rng.uniform_index(space.length);
      int v = static_cast<int>(rng.uniform_index(space.alphabet - 1));
      if (v >= z[coord]) ++v;
      const int old = z[coord];
      z[coord] = v;
      const long idx_new = state_to_index(z, space.alphabet);
      const double f_new = energy(idx_new);
      const double log_u = std::log(std::max(rng.uniform(), 1e-300));
      if (log_u < f_new - f) {
        idx = idx_new;
        f = f_new;
        ++local_accepted;
      } else {
        z[coord] = old;
      }
      if (step >= config.steps - config.record_last) rec.push_back(idx);
    }
    out.final_states[c] = idx;
    per_chain_accepted[c] = local_accepted;
  };

  parallel_chunks(config.chains, chunk_work);
  for (int c = 0; c < config.chains; ++c) {
    accepted += per_chain_accepted[c];
    proposed += config.steps;
    out.recorded.insert(out.recorded.end(), per_chain_recorded[c].begin(),
                        per_chain_recorded[c].end());
  }
  out.acceptance_rate = proposed > 0 ? static_cast<double>(accepted) / proposed : 0.0;
  return out;
}

struct ReverseMhConfig {
  int chains = 256;
  int steps_per_level = 40;
  std::uint64_t seed = 0;

  void validate() const {
    require(chains >= 1 && steps_per_level >= 1, "reverse mh: counts must be >= 1");
  }
};

// Annealed Metropolis-Hastings for noise-conditional energies: chains start
// uniform on V^L and anneal through the schedule from the largest noise level
// down, running steps_per_level Hamming-one MH sweeps against f(.; sigma).
// energy_batch(states, sigma) evaluates energies for a batch of states.
inline std::vector<DiscreteState> reverse_time_mh(
    const std::function<Vec(const std::vector<DiscreteState>&, double)>& energy_batch,
    const StateSpace& space, const std::vector<double>& schedule_desc,
    const ReverseMhConfig& config) {
  config.validate();
  space.validate();
  require(space.kind == SpaceKind::discrete, "reverse_time_mh: discrete spaces only");
  require(!schedule_desc.empty(), "reverse_time_mh: empty noise schedule");
  for (size_t i = 1; i < schedule_desc.size(); ++i)
    require(schedule_desc[i] <= schedule_desc[i - 1],
            "reverse_time_mh: schedule must be descending");

  std::vector<Rng> chain_rng;
  chain_rng.reserve(config.chains);
  for (int c = 0; c < config.chains; ++c)
    chain_rng.push_back(Rng::substream(config.seed, "rtmh_chain_" + std::to_string(c)));

  std::vector<DiscreteState> states(config.chains, DiscreteState(space.length));
  for (int c = 0; c < config.chains; ++c)
    for (auto& v : states[c]) v = static_cast<int>(chain_rng[c].uniform_index(space.alphabet));

  std::vector<DiscreteState> proposals(config.chains);
  for (double sigma : schedule_desc) {
    Vec f = energy_batch(states, sigma);
    for (int step = 0; step < config.steps_per_level; ++step) {
      std::vector<int> coord(config.chains), old_value(config.chains);
      for (int c = 0; c < config.chains; ++c) {
        Rng& rng = chain_rng[c];
        const int i = static_cast<int>(rng.uniform_index(space.length));
        int v = static_cast<int>(rng.uniform_index(space.alphabet - 1));
        if (v >= states[c][i]) ++v;
        proposals[c] = states[c];
        proposals[c][i] = v;
        coord[c] = i;
        old_value[c] = states[c][i];
      }
      const Vec f_new = energy_batch(proposals, sigma);
      for (int c = 0; c < config.chains; ++c) {
        const double log_u = std::log(std::max(chain_rng[c].uniform(), 1e-300));
        if (log_u < f_new[c] - f[c]) {
          states[c] = proposals[c];
          f[c] = f_new[c];
        }
      }
    }
  }
  return states;
}

}  // namespace ctem
