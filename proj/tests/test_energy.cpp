#include <catch_amalgamated.hpp>
#include <cmath>

#include "ctem/energy.hpp"
#include "ctem/objectives.hpp"

using namespace ctem;

namespace {

// CTEM pair loss of a model on a fixed feature batch; the scalar function
// used by the finite-difference gradient oracle.
double batch_loss(const MlpEnergy& model, const Mat& features, long anchors) {
  PairBatch pb;
  const Vec f = model.forward(features);
  pb.f_anchor = f.head(anchors);
  pb.f_comparison = f.tail(features.cols() - anchors);
  return sample_loss(pb);
}

Mat random_features(Rng& rng, int dim, long cols) {
  Mat x(dim, cols);
  for (long j = 0; j < cols; ++j) x.col(j) = rng.normal_vector(dim);
  return x;
}

}  // namespace

TEST_CASE("zero-initialized model outputs zero") {
  MlpEnergy model(MlpSpec{3, {8, 8}, false});
  Rng rng(1);
  const Mat x = random_features(rng, 3, 5);
  REQUIRE(model.forward(x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single linear layer computes the inner product") {
  MlpEnergy model(MlpSpec{3, {}, false});
  Vec params = model.params();
  REQUIRE(params.size() == 4);  // w (3) + bias
  params << 0.5, -1.0, 2.0, 0.0;
  model.set_params(params);
  Vec z(3);
  z << 1.0, 2.0, 3.0;
  REQUIRE(model.value(z) == Catch::Approx(0.5 - 2.0 + 6.0));
  // Gradient with respect to the input is the weight vector itself.
  const Mat g = model.input_gradients(z);
  REQUIRE((g.col(0) - params.head(3)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("tabular energy is a lookup") {
  TabularEnergy tab(4);
  tab.energies() << 0.0, 1.5, -2.0, 7.0;
  REQUIRE(tab.value(2) == -2.0);
  REQUIRE(tab.param_count() == 4);
}

TEST_CASE("parameter count matches the closed form") {
  MlpSpec spec{2, {128, 128, 128}, false};
  MlpEnergy model(spec);
  const long expected = (2 * 128 + 128) + (128 * 128 + 128) * 2 + (128 + 1);
  REQUIRE(model.param_count() == expected);
}

TEST_CASE("constant loss has zero parameter gradient") {
  MlpEnergy model = MlpEnergy::initialized(MlpSpec{2, {8}, false}, 3);
  Rng rng(3);
  const Mat x = random_features(rng, 2, 6);
  MlpEnergy::Trace trace;
  model.forward(x, &trace);
  const Vec grad = model.backward_params(x, trace, Vec::Zero(6));
  REQUIRE(grad.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("quadratic head gradient is minus the input") {
  QuadraticEnergy q;
  Rng rng(4);
  const Mat x = random_features(rng, 3, 4);
  REQUIRE((q.input_gradients(x) + x).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(q.value(x.col(0)) == Catch::Approx(-0.5 * x.col(0).squaredNorm()));
}

TEST_CASE("parameter gradients match central finite differences") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    MlpEnergy model = MlpEnergy::initialized(MlpSpec{2, {16}, false}, seed);
    Rng rng(100 + seed);
    const long anchors = 4;
    const Mat features = random_features(rng, 2, anchors * 3);

    MlpEnergy::Trace trace;
    const Vec f = model.forward(features, &trace);
    PairBatch pb;
    pb.f_anchor = f.head(anchors);
    pb.f_comparison = f.tail(features.cols() - anchors);
    const PairLossGrad pg = sample_loss_grad(pb);
    Vec dldf(features.cols());
    dldf.head(anchors) = pg.d_anchor;
    dldf.tail(features.cols() - anchors) = pg.d_comparison;
    const Vec analytic = model.backward_params(features, trace, dldf);

    Vec params = model.params();
    const double h = 1e-5;
    double max_rel = 0;
    for (long i = 0; i < params.size(); ++i) {
      Vec p = params;
      p[i] += h;
      model.set_params(p);
      const double up = batch_loss(model, features, anchors);
      p[i] -= 2 * h;
      model.set_params(p);
      const double down = batch_loss(model, features, anchors);
      const double numeric = (up - down) / (2 * h);
      const double scale = std::max({1e-8, std::abs(numeric), std::abs(analytic[i])});
      max_rel = std::max(max_rel, std::abs(numeric - analytic[i]) / scale);
      model.set_params(params);
    }
    REQUIRE(max_rel <= 1e-5);
  }
}

TEST_CASE("input gradients match central finite differences") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    MlpEnergy model = MlpEnergy::initialized(MlpSpec{3, {16, 16}, false}, 50 + seed);
    Rng rng(200 + seed);
    const Mat x = random_features(rng, 3, 8);
    const Mat analytic = model.input_gradients(x);
    const double h = 1e-5;
    for (long j = 0; j < x.cols(); ++j) {
      for (int i = 0; i < 3; ++i) {
        Vec xp = x.col(j), xm = x.col(j);
        xp[i] += h;
        xm[i] -= h;
        const double numeric = (model.value(xp) - model.value(xm)) / (2 * h);
        const double scale = std::max({1e-8, std::abs(numeric), std::abs(analytic(i, j))});
        REQUIRE(std::abs(numeric - analytic(i, j)) / scale <= 1e-5);
      }
    }
  }
}

TEST_CASE("chunked evaluation is identical to direct evaluation") {
  MlpEnergy model = MlpEnergy::initialized(MlpSpec{2, {32, 32}, false}, 7);
  Rng rng(7);
  const Mat x = random_features(rng, 2, 300);
  REQUIRE((model.forward(x) - forward_chunked(model, x)).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((model.input_gradients(x) - input_gradients_chunked(model, x))
              .cwiseAbs()
              .maxCoeff() == 0.0);
}

TEST_CASE("adam with zero gradients leaves parameters unchanged") {
  Vec params = Vec::LinSpaced(5, -1.0, 1.0);
  const Vec before = params;
  AdamState adam(5, {1e-2});
  adam.step(params, Vec::Zero(5));
  REQUIRE(adam.step_count() == 1);
  REQUIRE((params - before).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adam matches a reference implementation") {
  // Plain textbook update carried alongside.
  const AdamConfig cfg{1e-2, 0.9, 0.999, 1e-8};
  Rng rng(11);
  Vec params = rng.normal_vector(6);
  Vec ref_params = params;
  Vec m = Vec::Zero(6), v = Vec::Zero(6);
  AdamState adam(6, cfg);
  for (int t = 1; t <= 25; ++t) {
    const Vec g = rng.normal_vector(6);
    adam.step(params, g);
    m = cfg.beta1 * m + (1 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1 - cfg.beta2) * g.cwiseProduct(g);
    const Vec m_hat = m / (1 - std::pow(cfg.beta1, t));
    const Vec v_hat = v / (1 - std::pow(cfg.beta2, t));
    for (int i = 0; i < 6; ++i) ref_params[i] -= cfg.lr * m_hat[i] / (std::sqrt(v_hat[i]) + cfg.eps);
    REQUIRE((params - ref_params).cwiseAbs().maxCoeff() < 1e-14);
  }
  // First step with constant gradient: the update magnitude is lr * g/(|g|+eps).
  Vec p = Vec::Zero(3);
  AdamState a2(3, cfg);
  Vec g(3);
  g << 0.5, -2.0, 1e-3;
  a2.step(p, g);
  for (int i = 0; i < 3; ++i)
    REQUIRE(p[i] == Catch::Approx(-cfg.lr * g[i] / (std::abs(g[i]) + cfg.eps)).epsilon(1e-12));
  REQUIRE_THROWS_AS(a2.step(p, Vec::Zero(5)), ConfigError);
}

TEST_CASE("initialization is deterministic and fan-in scaled") {
  const MlpSpec spec{256, {256}, false};
  MlpEnergy a = MlpEnergy::initialized(spec, 21);
  MlpEnergy b = MlpEnergy::initialized(spec, 21);
  REQUIRE((a.params() - b.params()).cwiseAbs().maxCoeff() == 0.0);
  MlpEnergy c = MlpEnergy::initialized(spec, 22);
  REQUIRE((a.params() - c.params()).cwiseAbs().maxCoeff() > 0.0);

  // First-layer weight variance should be close to 2 / fan_in.
  const Mat& w = a.weight(0);
  const double var = (w.array() - w.mean()).square().sum() / (w.size() - 1);
  REQUIRE(var == Catch::Approx(2.0 / 256).epsilon(0.10));

  TabularEnergy tab(10);
  REQUIRE(tab.energies().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward has no cross-sample state") {
  MlpEnergy model = MlpEnergy::initialized(MlpSpec{2, {16}, false}, 31);
  Rng rng(31);
  const Mat x = random_features(rng, 2, 10);
  const Vec batched = model.forward(x);
  for (long j = 0; j < x.cols(); ++j)
    REQUIRE(batched[j] == model.value(x.col(j)));
}

TEST_CASE("constant energy shift leaves residuals unchanged") {
  TabularEnergy tab(6);
  Rng rng(41);
  for (long i = 0; i < 6; ++i) tab.energies()[i] = rng.normal();
  const double c = 13.7;
  for (long i = 0; i < 6; ++i) {
    for (long j = 0; j < 6; ++j) {
      const double base = ctem_residual(tab.value(i), tab.value(j));
      const double shifted = ctem_residual(tab.value(i) + c, tab.value(j) + c);
      REQUIRE(std::abs(base - shifted) <= 1e-15);
    }
  }
}

TEST_CASE("dimension mismatch is rejected") {
  MlpEnergy model(MlpSpec{3, {4}, false});
  REQUIRE_THROWS_AS(model.forward(Mat::Zero(2, 5)), ConfigError);
  REQUIRE_THROWS_AS(model.set_params(Vec::Zero(3)), ConfigError);
}
