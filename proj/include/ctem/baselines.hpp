#pragma once

#include <cmath>
#include <vector>

#include "ctem/common.hpp"
#include "ctem/datasets.hpp"
#include "ctem/threading.hpp"

namespace ctem {

// Isotropic Gaussian-kernel density estimate with a scalar bandwidth.
class KdeModel {
 public:
  KdeModel() = default;
  KdeModel(Mat samples, double h) : samples_(std::move(samples)), h_(h) {
    require(h_ > 0, "kde: bandwidth must be positive");
    require(samples_.cols() >= 1, "kde: empty sample set");
  }

  double bandwidth() const { return h_; }
  const Mat& samples() const { return samples_; }

  // log (1/n) sum_i N(z; x_i, h^2 I) via log-sum-exp.
  double log_density(const Vec& z) const {
    const long n = samples_.cols();
    const double d = static_cast<double>(samples_.rows());
    Vec sq = (samples_.colwise() - z).colwise().squaredNorm().transpose();
    Vec args = -sq / (2.0 * h_ * h_);
    return log_sum_exp(args) - std::log(static_cast<double>(n)) -
           0.5 * d * std::log(2.0 * kPi * h_ * h_);
  }

  Vec log_density_batch(const Mat& queries) const {
    Vec out(queries.cols());
    const auto chunks = fixed_chunks(queries.cols(), kBatchChunks);
    parallel_chunks(static_cast<int>(chunks.size()), [&](int c) {
      const auto& r = chunks[c];
      for (long j = r.begin; j < r.end; ++j) out[j] = log_density(queries.col(j));
    });
    return out;
  }

  // Analytic score of the estimate: sum of kernel gradients over the density.
  Vec score(const Vec& z) const {
    Vec sq = (samples_.colwise() - z).colwise().squaredNorm().transpose();
    Vec args = -sq / (2.0 * h_ * h_);
    const double lse = log_sum_exp(args);
    Vec gamma = (args.array() - lse).exp();
    return (samples_.colwise() - z) * gamma / (h_ * h_);
  }

  Mat score_batch(const Mat& queries) const {
    Mat out(queries.rows(), queries.cols());
    const auto chunks = fixed_chunks(queries.cols(), kBatchChunks);
    parallel_chunks(static_cast<int>(chunks.size()), [&](int c) {
      const auto& r = chunks[c];
      for (long j = r.begin; j < r.end; ++j) out.col(j) = score(queries.col(j));
    });
    return out;
  }

 private:
  Mat samples_;
  double h_ = 1.0;
};

// Rule-of-thumb bandwidth 0.9 * sigma_bar * n^(-1/(d+4)).
inline double silverman_bandwidth(double sigma_bar, long n, int d) {
  require(sigma_bar > 0, "silverman: sigma_bar must be positive");
  require(n >= 2 && d >= 1, "silverman: need n >= 2 and d >= 1");
  return 0.9 * sigma_bar * std::pow(static_cast<double>(n), -1.0 / (d + 4));
}

inline KdeModel silverman_fit(const Mat& samples) {
  const double sigma_bar = mean_coordinate_std(samples);
  require_numeric(sigma_bar > 0, "silverman_fit: zero-variance data");
  return KdeModel(samples, silverman_bandwidth(sigma_bar, samples.cols(),
                                               static_cast<int>(samples.rows())));
}

namespace detail {

// Held-out log-likelihood of queries under a KDE fitted on `train`.
inline double heldout_loglik(const Mat& train, const Mat& queries, double h) {
  const long n = train.cols();
  const double d = static_cast<double>(train.rows());
  const double log_norm =
      -std::log(static_cast<double>(n)) - 0.5 * d * std::log(2.0 * kPi * h * h);
  // ||x_i - z_j||^2 via the inner-product expansion.
  Vec tn = train.colwise().squaredNorm().transpose();
  Vec qn = queries.colwise().squaredNorm().transpose();
  Mat sq = -2.0 * (queries.transpose() * train);
  sq.colwise() += qn;
  sq.rowwise() += tn.transpose();
  Mat args = -sq / (2.0 * h * h);
  double ll = 0;
  for (long j = 0; j < args.rows(); ++j) {
    const double m = args.row(j).maxCoeff();
    ll += m + std::log((args.row(j).array() - m).exp().sum()) + log_norm;
  }
  return ll;
}

// Leave-one-out log-likelihood from the full pairwise table.
inline double loo_loglik(const Mat& samples, double h) {
  const long n = samples.cols();
  const double d = static_cast<double>(samples.rows());
  const double log_norm =
      -std::log(static_cast<double>(n - 1)) - 0.5 * d * std::log(2.0 * kPi * h * h);
  Vec sn = samples.colwise().squaredNorm().transpose();
  Mat sq = -2.0 * (samples.transpose() * samples);
  sq.colwise() += sn;
  sq.rowwise() += sn.transpose();
  Mat args = -sq / (2.0 * h * h);
  args.diagonal().setConstant(-std::numeric_limits<double>::infinity());
  double ll = 0;
  for (long i = 0; i < n; ++i) {
    const double m = args.row(i).maxCoeff();
    if (!std::isfinite(m)) return -std::numeric_limits<double>::infinity();
    double s = 0;
    for (long j = 0; j < n; ++j)
      if (j != i) s += std::exp(args(i, j) - m);
    ll += m + std::log(s) + log_norm;
  }
  return ll;
}

}  // namespace detail

// Bandwidth selection by held-out likelihood: leave-one-out for n <= 500 and
// 5-fold cross-validation otherwise. Candidates are 20 log-spaced points over
// [0.1, 10] times the rule-of-thumb value, plus the rule-of-thumb value itself
// so the selection can never fall below it on its own data.
inline KdeModel cv_fit(const Mat& samples) {
  const long n = samples.cols();
  require(n >= 5, "cv_fit: need at least 5 samples");
  const double h_rot = silverman_bandwidth(mean_coordinate_std(samples), n,
                                           static_cast<int>(samples.rows()));
  std::vector<double> candidates;
  for (int k = 0; k < 20; ++k)
    candidates.push_back(0.1 * h_rot * std::pow(100.0, k / 19.0));
  candidates.push_back(h_rot);

  std::vector<double> scores(candidates.size(),
                             -std::numeric_limits<double>::infinity());
  if (n <= 500) {
    const auto chunks = fixed_chunks(static_cast<long>(candidates.size()), kBatchChunks);
    parallel_chunks(static_cast<int>(chunks.size()), [&](int c) {
      for (long k = chunks[c].begin; k < chunks[c].end; ++k)
        scores[k] = detail::loo_loglik(samples, candidates[k]);
    });
  } else {
    constexpr int kFolds = 5;
    for (int fold = 0; fold < kFolds; ++fold) {
      std::vector<long> held, rest;
      for (long i = 0; i < n; ++i) (i % kFolds == fold ? held : rest).push_back(i);
      Mat train(samples.rows(), rest.size()), queries(samples.rows(), held.size());
      for (size_t i = 0; i < rest.size(); ++i) train.col(i) = samples.col(rest[i]);
      for (size_t i = 0; i < held.size(); ++i) queries.col(i) = samples.col(held[i]);
      const auto chunks = fixed_chunks(static_cast<long>(candidates.size()), kBatchChunks);
      parallel_chunks(static_cast<int>(chunks.size()), [&](int c) {
        for (long k = chunks[c].begin; k < chunks[c].end; ++k) {
          const double ll = detail::heldout_loglik(train, queries, candidates[k]);
          if (fold == 0) scores[k] = ll;
          else scores[k] += ll;
        }
      });
    }
  }

  size_t best = 0;
  for (size_t k = 1; k < candidates.size(); ++k)
    if (scores[k] > scores[best]) best = k;
  require_numeric(std::isfinite(scores[best]), "cv_fit: all candidate likelihoods are -inf");
  return KdeModel(samples, candidates[best]);
}

// Index of the selected candidate on the 20-point grid (20 means the appended
// rule-of-thumb value); exposed for diagnostics.
inline int cv_selected_index(const KdeModel& model) {
  const double h_rot = silverman_bandwidth(mean_coordinate_std(model.samples()),
                                           model.samples().cols(),
                                           static_cast<int>(model.samples().rows()));
  for (int k = 0; k < 20; ++k) {
    const double cand = 0.1 * h_rot * std::pow(100.0, k / 19.0);
    if (std::abs(cand - model.bandwidth()) <= 1e-12 * cand) return k;
  }
  return 20;
}

// Discrete comparison anchor: the empirical grid mass itself.
inline Vec histogram_baseline(const QuantizedGrid& grid) {
  require(grid.n >= 1, "histogram_baseline: grid not fitted");
  return grid.p_hat;
}

}  // namespace ctem
