#include <catch_amalgamated.hpp>
#include <cmath>

#include "ctem/datasets.hpp"
#include "ctem/metrics.hpp"

using namespace ctem;

namespace {

// Central finite difference of the log density; the independent check for
// every analytic score.
Vec fd_score(const Dataset& ds, const Vec& x, double h = 1e-6) {
  Vec g(x.size());
  for (long i = 0; i < x.size(); ++i) {
    Vec xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (ds.log_density(xp) - ds.log_density(xm)) / (2 * h);
  }
  return g;
}

DatasetSpec spec_named(DatasetName name, long n) {
  DatasetSpec s;
  s.name = name;
  s.n_train = n;
  return s;
}

}  // namespace

TEST_CASE("state space invariants") {
  StateSpace c = StateSpace::continuous(2);
  REQUIRE(c.reference_measure == ReferenceMeasure::lebesgue);
  StateSpace d = StateSpace::discrete(91, 2);
  REQUIRE(d.reference_measure == ReferenceMeasure::counting);
  REQUIRE(d.state_count() == 8281);
  REQUIRE(d.enumerable(100000));
  StateSpace m = StateSpace::mixed(2, 16);
  REQUIRE(m.reference_measure == ReferenceMeasure::product);
  REQUIRE_THROWS_AS(StateSpace::discrete(1, 4), ConfigError);
  REQUIRE_THROWS_AS(StateSpace::mixed(2, 1), ConfigError);
  REQUIRE_FALSE(StateSpace::discrete(2, 784).enumerable(100000));
}

TEST_CASE("flat index is a bijection") {
  const int alphabet = 5, length = 3;
  const long long count = StateSpace::discrete(alphabet, length).state_count();
  for (long long i = 0; i < count; ++i) {
    const DiscreteState z = index_to_state(i, alphabet, length);
    REQUIRE(state_to_index(z, alphabet) == i);
  }
  // Grid convention: cell (i0, i1) -> i0 * bins + i1.
  REQUIRE(state_to_index({3, 7}, 91) == 3 * 91 + 7);
}

TEST_CASE("two_gaussian sample mean is near the origin") {
  const Mat x = generate(spec_named(DatasetName::two_gaussian, 100000), 1);
  REQUIRE(std::abs(x.row(0).mean()) < 0.02);
  REQUIRE(std::abs(x.row(1).mean()) < 0.02);
}

TEST_CASE("banana second coordinate is centered") {
  const Mat x = generate(spec_named(DatasetName::banana, 100000), 2);
  REQUIRE(std::abs(x.row(1).mean()) < 0.05);
}

TEST_CASE("eight gaussians occupy at least eight grid cells") {
  DatasetSpec spec = spec_named(DatasetName::eight_gaussians_grid, 20000);
  const Mat x = generate(spec, 3);
  const QuantizedGrid q = quantize(x, frozen_bounds_from(x, 91));
  REQUIRE(q.p_hat.sum() == Catch::Approx(1.0).margin(1e-12));
  int heavy = 0;
  for (long i = 0; i < q.p_hat.size(); ++i)
    if (q.p_hat[i] >= 0.01) ++heavy;
  REQUIRE(heavy >= 8);
}

TEST_CASE("generation is deterministic per seed") {
  DatasetSpec spec = spec_named(DatasetName::two_rings, 500);
  const Mat a = generate(spec, 9);
  const Mat b = generate(spec, 9);
  REQUIRE((a - b).cwiseAbs().maxCoeff() == 0.0);
  const Mat c = generate(spec, 10);
  REQUIRE((a - c).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("two_gaussian log density closed form") {
  Dataset ds(spec_named(DatasetName::two_gaussian, 10), 0);
  Vec z(2);
  z << 1, 1;
  const double expected = std::log(0.5 / (2 * kPi) + 0.5 * std::exp(-4.0) / (2 * kPi));
  REQUIRE(ds.log_density(z) == Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("gmm log density matches a directly evaluated mixture") {
  DatasetSpec spec = spec_named(DatasetName::gmm, 10);
  spec.dim = 10;
  Dataset ds(spec, 0);
  Vec z = Vec::Zero(10);
  z[0] = 3.0;
  // Four-term mixture evaluated from scratch.
  double sum = 0;
  for (int mode = 0; mode < 4; ++mode) {
    Vec mu = Vec::Zero(10);
    mu[mode] = 3.0;
    sum += 0.25 * std::exp(-0.5 * (z - mu).squaredNorm()) /
           std::pow(2 * kPi, 5.0);
  }
  REQUIRE(ds.log_density(z) == Catch::Approx(std::log(sum)).epsilon(1e-10));
  // The on-mode component dominates.
  const double dominant = std::log(0.25) - 5.0 * std::log(2 * kPi);
  REQUIRE(ds.log_density(z) >= dominant);
  REQUIRE(ds.log_density(z) <= dominant + 0.01);
}

TEST_CASE("mixed ring density at a component mean") {
  DatasetSpec spec = spec_named(DatasetName::mixed_ring_gmm, 10);
  Dataset ds(spec, 4);
  const Vec pi = ds.label_prior();
  REQUIRE(pi.sum() == Catch::Approx(1.0).margin(1e-12));
  for (int y : {0, 5, 15}) {
    const Vec mu = ds.label_means().col(y);
    const double expected = std::log(pi[y]) - std::log(2 * kPi);
    REQUIRE(ds.mixed_log_density(mu, y) == Catch::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("two_gaussian score vanishes at the origin") {
  Dataset ds(spec_named(DatasetName::two_gaussian, 10), 0);
  const Vec s = ds.score(Vec::Zero(2));
  REQUIRE(s.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("scores match finite differences of the log density") {
  std::vector<DatasetSpec> specs;
  specs.push_back(spec_named(DatasetName::two_gaussian, 10));
  specs.push_back(spec_named(DatasetName::banana, 10));
  specs.push_back(spec_named(DatasetName::two_rings, 10));
  specs.push_back(spec_named(DatasetName::eight_gaussians_grid, 10));
  DatasetSpec gmm = spec_named(DatasetName::gmm, 10);
  gmm.dim = 10;
  specs.push_back(gmm);

  for (const auto& spec : specs) {
    Dataset ds(spec, 0);
    Rng rng = Rng::substream(17, "score_check_" + to_string(spec.name));
    const Mat pts = ds.sample(20, rng);
    for (long j = 0; j < pts.cols(); ++j) {
      const Vec analytic = ds.score(pts.col(j));
      const Vec numeric = fd_score(ds, pts.col(j));
      const double scale = std::max(1.0, analytic.norm());
      REQUIRE((analytic - numeric).norm() / scale < 1e-6);
    }
  }
}

TEST_CASE("closed-form densities integrate to one on a fine grid") {
  for (DatasetName name : {DatasetName::two_gaussian, DatasetName::banana,
                           DatasetName::two_rings, DatasetName::eight_gaussians_grid}) {
    Dataset ds(spec_named(name, 20000), 5);
    Rng rng = Rng::substream(5, "mass_check");
    const Mat x = ds.sample(20000, rng);
    Bounds2 bounds;
    for (int a = 0; a < 2; ++a) {
      const double lo = x.row(a).minCoeff(), hi = x.row(a).maxCoeff();
      const double pad = 0.25 * (hi - lo);
      bounds(a, 0) = lo - pad;
      bounds(a, 1) = hi + pad;
    }
    const EvalGrid grid = EvalGrid::regular(bounds, 400);
    const Vec density = grid_true_density(ds, grid);
    REQUIRE(grid.integral(density) == Catch::Approx(1.0).margin(0.01));
  }
}

TEST_CASE("density oracles are finite at generated samples") {
  for (DatasetName name : {DatasetName::two_gaussian, DatasetName::banana,
                           DatasetName::two_rings, DatasetName::eight_gaussians_grid}) {
    Dataset ds(spec_named(name, 200), 11);
    Rng rng = Rng::substream(11, "finite_check");
    const Mat x = ds.sample(200, rng);
    for (long j = 0; j < x.cols(); ++j) REQUIRE(std::isfinite(ds.log_density(x.col(j))));
  }
}

TEST_CASE("spiral has no density oracle") {
  Dataset ds(spec_named(DatasetName::spiral, 10), 0);
  REQUIRE_FALSE(ds.has_density());
  REQUIRE_FALSE(ds.has_score());
  REQUIRE_THROWS(ds.log_density(Vec::Zero(2)));
  // Samples stay near the two-turn radius envelope.
  Rng rng = Rng::substream(0, "spiral");
  const Mat x = ds.sample(2000, rng);
  REQUIRE(x.colwise().norm().maxCoeff() < 2.8);
}

TEST_CASE("invalid dataset parameters are rejected") {
  DatasetSpec bad = spec_named(DatasetName::mixed_ring_gmm, 10);
  bad.num_labels = 1;
  REQUIRE_THROWS_AS(Dataset(bad, 0), ConfigError);
  DatasetSpec tab = spec_named(DatasetName::custom_tabular, 10);
  tab.tabular_p = {0.5, 0.4};  // does not sum to 1
  REQUIRE_THROWS_AS(Dataset(tab, 0), ConfigError);
  REQUIRE_THROWS_AS(dataset_from_string("mnist"), ConfigError);
}

TEST_CASE("quantize puts single samples in single cells") {
  GridSpec g;
  g.bins_per_axis = 9;
  g.bounds << -1, 1, -1, 1;
  g.has_bounds = true;
  Mat one(2, 1);
  one << 0.0, 0.0;
  QuantizedGrid q = quantize(one, g);
  REQUIRE(q.p_hat.maxCoeff() == 1.0);
  REQUIRE(q.p_hat.sum() == 1.0);

  Mat two(2, 2);
  two << 0.01, 0.02, 0.01, 0.02;
  q = quantize(two, g);
  REQUIRE(q.p_hat.maxCoeff() == 1.0);

  Mat empty(2, 0);
  REQUIRE_THROWS(quantize(empty, g));
}

TEST_CASE("quantize of uniform samples concentrates at the cell mass") {
  GridSpec g;
  g.bins_per_axis = 10;
  g.bounds << 0, 1, 0, 1;
  g.has_bounds = true;
  Rng rng(123);
  const long n = 1000000;
  Mat x(2, n);
  for (long j = 0; j < n; ++j) {
    x(0, j) = rng.uniform();
    x(1, j) = rng.uniform();
  }
  const QuantizedGrid q = quantize(x, g);
  const double expected = 1.0 / 100.0;
  // Binomial std of a cell's mass is about sqrt(p(1-p)/n) ~ 1e-4.
  REQUIRE((q.p_hat.array() - expected).abs().maxCoeff() < 5e-4);
  // Points outside the bounds clamp to boundary cells.
  Mat outside(2, 1);
  outside << -3.0, 7.0;
  const QuantizedGrid qo = quantize(outside, g);
  REQUIRE(qo.p_hat[qo.flat_index(0, 9)] == 1.0);
}

TEST_CASE("custom tabular sampling follows the mass vector") {
  DatasetSpec tab = spec_named(DatasetName::custom_tabular, 10);
  tab.tabular_p = {0.7, 0.2, 0.1};
  Dataset ds(tab, 0);
  Rng rng = Rng::substream(2, "tab");
  const auto states = ds.sample_states(100000, rng);
  Vec hist = Vec::Zero(3);
  for (long s : states) hist[s] += 1.0;
  hist /= static_cast<double>(states.size());
  REQUIRE(hist[0] == Catch::Approx(0.7).margin(0.01));
  REQUIRE(hist[2] == Catch::Approx(0.1).margin(0.01));
  REQUIRE(ds.state_log_mass(1) == Catch::Approx(std::log(0.2)));
}
