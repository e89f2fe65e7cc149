#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <stdexcept>
#include <string>

namespace ctem {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using IVec = Eigen::VectorXi;
using SpMat = Eigen::SparseMatrix<double>;
using Bounds2 = Eigen::Matrix<double, 2, 2>;  // row per axis: [lo, hi]

constexpr double kPi = 3.14159265358979323846;

// Invalid experiment, dataset, or model description.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical contract violation at runtime (domain error, NaN, divergence).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ConfigError(msg);
}

inline void require_numeric(bool cond, const std::string& msg) {
  if (!cond) throw NumericError(msg);
}

// log N(x; mu, sigma^2 I) for isotropic Gaussians.
inline double gaussian_log_pdf(const Vec& x, const Vec& mu, double sigma) {
  const double d = static_cast<double>(x.size());
  return -0.5 * d * std::log(2.0 * kPi * sigma * sigma)
         - (x - mu).squaredNorm() / (2.0 * sigma * sigma);
}

inline double gaussian_log_pdf_1d(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return -0.5 * std::log(2.0 * kPi) - std::log(sigma) - 0.5 * z * z;
}

// Numerically stable log(sum(exp(v))).
inline double log_sum_exp(const Vec& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace ctem
