#include <catch_amalgamated.hpp>
#include <cmath>
#include <map>

#include "ctem/kernels.hpp"

using namespace ctem;

TEST_CASE("spherical comparisons sit on the 2-eps shell") {
  Rng rng(1);
  for (int d : {1, 2, 3, 7}) {
    const double eps = 0.35;
    const Vec z = rng.normal_vector(d);
    for (int i = 0; i < 50; ++i) {
      const Vec zt = sample_spherical(z, eps, rng);
      REQUIRE(std::abs((zt - z).norm() - 2 * eps) < 1e-12);
    }
  }
}

TEST_CASE("spherical comparisons in 1-D hit both points evenly") {
  Rng rng(2);
  const Vec z = Vec::Constant(1, 0.3);
  int plus = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const Vec zt = sample_spherical(z, 0.5, rng);
    const double delta = zt[0] - z[0];
    REQUIRE((std::abs(delta - 1.0) < 1e-12 || std::abs(delta + 1.0) < 1e-12));
    if (delta > 0) ++plus;
  }
  REQUIRE(std::abs(plus / static_cast<double>(n) - 0.5) < 0.01);
}

TEST_CASE("spherical directions have zero mean in 3-D") {
  Rng rng(3);
  const Vec z = Vec::Zero(3);
  Vec mean = Vec::Zero(3);
  const int n = 100000;
  for (int i = 0; i < n; ++i) mean += sample_spherical(z, 0.5, rng) - z;
  mean /= n;
  REQUIRE(mean.cwiseAbs().maxCoeff() < 0.01);
}

TEST_CASE("gaussian comparison increments match their moments") {
  Rng rng(4);
  {
    const int d = 2;
    const double eps = 0.3;
    const Vec z = Vec::Zero(d);
    double acc = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) acc += (sample_gaussian(z, eps, rng) - z).squaredNorm();
    REQUIRE(acc / n == Catch::Approx(4 * eps * eps * d).epsilon(0.02));
  }
  {
    const int d = 10;
    const double eps = 0.3;
    const Vec z = Vec::Zero(d);
    const int n = 100000;
    Mat inc(d, n);
    for (int i = 0; i < n; ++i) inc.col(i) = sample_gaussian(z, eps, rng) - z;
    for (int a = 0; a < d; ++a) {
      const double var = inc.row(a).array().square().mean();
      REQUIRE(var == Catch::Approx(4 * eps * eps).epsilon(0.02));
    }
  }
  // Tiny scales stay finite.
  Rng rng2(5);
  const Vec zt = sample_gaussian(Vec::Ones(3), 1e-8, rng2);
  REQUIRE(zt.allFinite());
  REQUIRE_THROWS_AS(sample_gaussian(Vec::Ones(3), 0.0, rng2), ConfigError);
}

TEST_CASE("hamming-one moves change exactly one coordinate") {
  Rng rng(6);
  {
    const DiscreteState z{0};
    REQUIRE(sample_hamming_one(z, 2, rng) == DiscreteState{1});
  }
  {
    DiscreteState z(784, 0);
    for (int i = 0; i < 20; ++i) {
      const DiscreteState zt = sample_hamming_one(z, 2, rng);
      REQUIRE(hamming_distance(z, zt) == 1);
    }
  }
  {
    // |V|=3, L=2: every state has 4 neighbors, each drawn uniformly.
    const DiscreteState z{1, 2};
    std::map<long, int> freq;
    const int n = 10000;
    for (int i = 0; i < n; ++i) freq[state_to_index(sample_hamming_one(z, 3, rng), 3)]++;
    REQUIRE(freq.size() == 4);
    for (const auto& [state, count] : freq)
      REQUIRE(count / static_cast<double>(n) == Catch::Approx(0.25).margin(0.01));
  }
  REQUIRE_THROWS_AS(sample_hamming_one(DiscreteState{0}, 1, rng), ConfigError);
}

TEST_CASE("uniform corruption keeps or redraws the state") {
  Rng rng(7);
  const DiscreteState z{1, 0, 1};
  for (int i = 0; i < 100; ++i) REQUIRE(sample_uniform_corruption(z, 2, 0.0, rng) == z);

  const DiscreteState z1{0};
  int same = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i)
    if (sample_uniform_corruption(z1, 2, 1.0, rng) == z1) ++same;
  REQUIRE(same / static_cast<double>(n) == Catch::Approx(0.5).margin(0.01));

  same = 0;
  for (int i = 0; i < n; ++i)
    if (sample_uniform_corruption(z1, 2, 0.3, rng) == z1) ++same;
  REQUIRE(same / static_cast<double>(n) == Catch::Approx(0.85).margin(0.01));
}

TEST_CASE("mixed joint comparisons shift the label and move on the shell") {
  Rng rng(8);
  const Vec x = Vec::Ones(2);
  {
    for (int i = 0; i < 50; ++i) {
      const MixedState t = sample_mixed_joint(x, 1, 0.2, 2, rng);
      REQUIRE(t.label == 0);
      REQUIRE(std::abs((t.x - x).norm() - 0.4) < 1e-12);
    }
  }
  {
    const int k = 16;
    std::map<int, int> freq;
    const int n = 100000;
    for (int i = 0; i < n; ++i) freq[sample_mixed_joint(x, 3, 0.2, k, rng).label]++;
    REQUIRE(freq.count(3) == 0);
    REQUIRE(freq.size() == 15);
    for (const auto& [label, count] : freq)
      REQUIRE(count / static_cast<double>(n) == Catch::Approx(1.0 / 15).margin(0.005));
  }
  REQUIRE_THROWS_AS(sample_mixed_joint(x, 0, 0.2, 1, rng), ConfigError);
}

TEST_CASE("hamming-one matrix on two bits") {
  const StateSpace space = StateSpace::discrete(2, 2);
  const SpMat m = kernel_matrix(ComparisonKernel::hamming_one(), space);
  REQUIRE(m.rows() == 4);
  Mat dense = Mat(m);
  for (long i = 0; i < 4; ++i) {
    for (long j = 0; j < 4; ++j) {
      const int dh = hamming_distance(index_to_state(i, 2, 2), index_to_state(j, 2, 2));
      REQUIRE(dense(i, j) == (dh == 1 ? 0.5 : 0.0));
    }
    REQUIRE(dense.row(i).sum() == Catch::Approx(1.0));
  }
}

TEST_CASE("uniform corruption matrix at full rate is flat") {
  const StateSpace space = StateSpace::discrete(2, 2);
  const Mat m = Mat(kernel_matrix(ComparisonKernel::uniform_corruption(1.0), space));
  REQUIRE((m.array() - 0.25).abs().maxCoeff() == 0.0);
}

TEST_CASE("row-normalized lattice rows at corners") {
  const SpMat m = grid4_matrix(3, /*row_normalized=*/true);
  const Mat dense = Mat(m);
  // Corner cell (0,0) has two neighbors, each with weight 0.5.
  REQUIRE(dense.row(0).sum() == Catch::Approx(1.0));
  int nonzero = 0;
  for (long j = 0; j < 9; ++j)
    if (dense(0, j) != 0) {
      ++nonzero;
      REQUIRE(dense(0, j) == 0.5);
    }
  REQUIRE(nonzero == 2);
  // Interior cell has four neighbors of 0.25.
  REQUIRE(dense(4, 1) == 0.25);
}

TEST_CASE("matrix kinds are symmetric; normalized lattice is not") {
  auto max_asym = [](const SpMat& m) {
    const Mat d = Mat(m) - Mat(m).transpose();
    return d.cwiseAbs().maxCoeff();
  };
  REQUIRE(max_asym(kernel_matrix(ComparisonKernel::hamming_one(),
                                 StateSpace::discrete(3, 3))) == 0.0);
  REQUIRE(max_asym(kernel_matrix(ComparisonKernel::uniform_corruption(0.4),
                                 StateSpace::discrete(2, 3))) == 0.0);
  REQUIRE(max_asym(grid4_matrix(5, false)) == 0.0);
  REQUIRE(max_asym(grid4_matrix(5, true)) > 0.0);
}

TEST_CASE("kernel matrix caps and unsupported kinds") {
  REQUIRE_THROWS_AS(kernel_matrix(ComparisonKernel::gaussian(0.1),
                                  StateSpace::discrete(2, 2)),
                    ConfigError);
  REQUIRE_THROWS_AS(kernel_matrix(ComparisonKernel::hamming_one(),
                                  StateSpace::discrete(2, 30)),
                    ConfigError);
  REQUIRE_THROWS_AS(kernel_matrix(ComparisonKernel::hamming_one(),
                                  StateSpace::discrete(10, 4), /*cap=*/1000),
                    ConfigError);
}

TEST_CASE("continuous kernel weights are symmetric in their arguments") {
  Rng rng(9);
  const auto gaussian = ComparisonKernel::gaussian(0.37);
  for (int i = 0; i < 100; ++i) {
    const Vec a = rng.normal_vector(3), b = rng.normal_vector(3);
    const double ab = kernel_weight(gaussian, a, b);
    const double ba = kernel_weight(gaussian, b, a);
    REQUIRE(std::abs(ab - ba) <= 1e-12 * std::abs(ab));
  }
  const auto spherical = ComparisonKernel::spherical(0.5);
  for (int i = 0; i < 100; ++i) {
    const Vec a = rng.normal_vector(3);
    const Vec b = sample_spherical(a, 0.5, rng);
    const double ab = kernel_weight(spherical, a, b);
    const double ba = kernel_weight(spherical, b, a);
    REQUIRE(ab > 0);
    REQUIRE(ab == ba);
  }
  const auto joint = ComparisonKernel::mixed_joint(0.5, 8);
  for (int i = 0; i < 100; ++i) {
    MixedState a{rng.normal_vector(2), static_cast<int>(rng.uniform_index(8))};
    MixedState b = sample_mixed_joint(a.x, a.label, 0.5, 8, rng);
    REQUIRE(mixed_joint_weight(joint, a, b) == mixed_joint_weight(joint, b, a));
    REQUIRE(mixed_joint_weight(joint, a, b) > 0);
    REQUIRE(mixed_joint_weight(joint, a, a) == 0.0);
  }
}

TEST_CASE("lattice comparison graphs are connected") {
  for (auto [r, c] : {std::pair{3, 3}, {1, 7}, {5, 2}, {11, 11}}) {
    REQUIRE(graph_connected(grid4_matrix(r, c, false)));
  }
  // Two blocks with no bridging edges are two components.
  SpMat two(4, 4);
  std::vector<Eigen::Triplet<double>> t{{0, 1, 1.0}, {1, 0, 1.0}, {2, 3, 1.0}, {3, 2, 1.0}};
  two.setFromTriplets(t.begin(), t.end());
  REQUIRE_FALSE(graph_connected(two));
  const auto labels = connected_components(two);
  REQUIRE(labels[0] == labels[1]);
  REQUIRE(labels[2] == labels[3]);
  REQUIRE(labels[0] != labels[2]);
}
