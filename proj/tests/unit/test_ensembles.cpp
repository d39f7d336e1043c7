#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include <lyaprnn/ensembles.hpp>
#include <lyaprnn/estimator.hpp>
#include <lyaprnn/features.hpp>

using namespace lyaprnn;

TEST_CASE("one-dimensional orthogonal init is plus or minus the gain") {
  const Mat m = init_orthogonal(1, 2.0, {5, 0});
  REQUIRE(std::abs(m(0, 0)) == Catch::Approx(2.0).margin(1e-14));
}

TEST_CASE("orthogonal init satisfies M^T M = g^2 I") {
  for (const int n : {2, 7, 32}) {
    const double g = 1.7;
    const Mat m = init_orthogonal(n, g, {static_cast<std::uint64_t>(n), 3});
    const Mat gram = m.transpose() * m - g * g * Mat::Identity(n, n);
    REQUIRE(gram.cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("orthogonal gain drives a linear network at exactly ln(gain)") {
  // Identity activation, V = g * Haar: every exponent is ln(g).
  const int n = 8;
  const double g = std::sqrt(500.0);
  CellParams cell;
  cell.arch = Arch::vanilla;
  cell.n_hidden = n;
  cell.n_input = n;
  cell.nonlinearity = Nonlinearity::identity;
  cell.V = init_orthogonal(n, g, {17, 0});
  cell.U = Mat::Identity(n, n);
  cell.b = Vec::Zero(n);
  EstimatorConfig cfg;
  cfg.T = 25;
  cfg.batch_size = 1;
  const Mat x = init_gaussian(25, n, 0.6, {17, 1});
  const Vec lambda =
      run_sequence({cell}, cfg, x, zero_state({cell})).lambda;
  for (Index i = 0; i < lambda.size(); ++i) {
    REQUIRE(lambda(i) == Catch::Approx(std::log(g)).margin(1e-10));
  }
  REQUIRE(std::log(g) == Catch::Approx(3.107).margin(5e-4));
}

TEST_CASE("uniform init with zero half-width is the zero matrix") {
  REQUIRE(init_uniform(4, 5, 0.0, {1, 1}).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("uniform init has the moments of the uniform law") {
  const int n = 1000;  // 10^6 samples
  const double p = 0.08;
  const Mat m = init_uniform(n, n, p, {99, 0});
  const double count = static_cast<double>(n) * n;
  const double mean = m.sum() / count;
  const double var = m.array().square().sum() / count - mean * mean;
  const double target_var = p * p / 3.0;
  // 3 standard errors: SE(mean) = sqrt(var/count), SE(var) ~ var*sqrt(2/count)
  // (fourth-moment factor for the uniform law is below the Gaussian's 2).
  REQUIRE(std::abs(mean) < 3.0 * std::sqrt(target_var / count));
  REQUIRE(std::abs(var - target_var) <
          3.0 * target_var * std::sqrt(2.0 / count));
  REQUIRE(target_var == Catch::Approx(0.002133).margin(1e-6));
  REQUIRE(m.cwiseAbs().maxCoeff() < p);
}

TEST_CASE("gaussian init with zero variance is the zero matrix") {
  REQUIRE(init_gaussian(3, 6, 0.0, {1, 2}).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gaussian init has the requested variance") {
  const int n = 1000;
  const double sigma2 = 0.6;
  const Mat m = init_gaussian(n, n, sigma2, {99, 1});
  const double count = static_cast<double>(n) * n;
  const double mean = m.sum() / count;
  const double var = m.array().square().sum() / count - mean * mean;
  REQUIRE(std::abs(mean) < 3.0 * std::sqrt(sigma2 / count));
  REQUIRE(std::abs(var - sigma2) < 3.0 * sigma2 * std::sqrt(2.0 / count));
}

TEST_CASE("generators are bitwise reproducible given seed and stream") {
  REQUIRE(init_orthogonal(6, 2.0, {7, 3}) == init_orthogonal(6, 2.0, {7, 3}));
  REQUIRE(init_uniform(4, 4, 0.5, {7, 3}) == init_uniform(4, 4, 0.5, {7, 3}));
  REQUIRE(init_gaussian(4, 4, 1.0, {7, 3}) == init_gaussian(4, 4, 1.0, {7, 3}));
  REQUIRE(init_gaussian(4, 4, 1.0, {7, 3}) != init_gaussian(4, 4, 1.0, {7, 4}));
}

TEST_CASE("input generator fills one stream per batch index") {
  const auto batch = gen_inputs(10, 3, 0.6, 4, {21, 100});
  REQUIRE(batch.size() == 4);
  for (const Mat& m : batch) {
    REQUIRE(m.rows() == 10);
    REQUIRE(m.cols() == 3);
  }
  REQUIRE(batch[2] == init_gaussian(10, 3, 0.6, {21, 102}));
  REQUIRE(batch[0] != batch[1]);
}

TEST_CASE("zero input variance produces the autonomous case") {
  const auto batch = gen_inputs(5, 2, 0.0, 2, {1, 0});
  for (const Mat& m : batch) REQUIRE(m.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("initial-state generator randomizes h and zeroes the lstm cell") {
  CellParams lstm;
  lstm.arch = Arch::lstm;
  lstm.n_hidden = 6;
  lstm.n_input = 2;
  const auto states = gen_initial_states({lstm}, 1.0, 3, {5, 200});
  REQUIRE(states.size() == 3);
  for (const NetState& s : states) {
    REQUIRE(s.size() == 1);
    REQUIRE(s[0].h.size() == 6);
    REQUIRE(s[0].h.cwiseAbs().maxCoeff() > 0.0);
    REQUIRE(s[0].c.size() == 6);
    REQUIRE(s[0].c.cwiseAbs().maxCoeff() == 0.0);
  }
  REQUIRE(states[0][0].h != states[1][0].h);
}

TEST_CASE("zero state variance produces zero states") {
  const auto states = gen_initial_states(4, 0.0, 2, {5, 0});
  for (const NetState& s : states) {
    REQUIRE(s[0].h.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("stable networks contract trajectories to a random sink") {
  // Two different initial conditions under the same weak-gain network and the
  // same input converge to the same driven trajectory.
  const int n = 32;
  CellParams cell;
  cell.arch = Arch::vanilla;
  cell.n_hidden = n;
  cell.n_input = n;
  cell.nonlinearity = Nonlinearity::tanh;
  cell.V = init_orthogonal(n, std::sqrt(1.0 / 500.0), {31, 0});
  cell.U = Mat::Identity(n, n);
  cell.b = Vec::Zero(n);
  const std::vector<CellParams> cells{cell};
  const Mat x = init_gaussian(100, n, 0.6, {31, 1});
  auto states = gen_initial_states(cells, 1.0, 2, {31, 2});
  for (int t = 0; t < 100; ++t) {
    for (auto& s : states) s = step_stack(cells, s, x.row(t).transpose());
  }
  REQUIRE((states[0][0].h - states[1][0].h).norm() < 1e-3);
}

TEST_CASE("make_cell reproduces the documented vanilla layout") {
  const InitSpec init{InitSpec::Kind::orthogonal, 4.0};
  const CellParams cell =
      make_cell(Arch::vanilla, 5, 5, Nonlinearity::tanh, init, {11, 0});
  REQUIRE(cell.V == init_orthogonal(5, 2.0, {11, 0}));
  REQUIRE((cell.U - Mat::Identity(5, 5)).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(cell.b.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("make_cell assigns one stream pair per gate") {
  const InitSpec init{InitSpec::Kind::uniform, 0.08};
  const CellParams cell =
      make_cell(Arch::lstm, 4, 3, Nonlinearity::tanh, init, {11, 0});
  REQUIRE(cell.gates.size() == 4);
  // Gate g draws W from stream 2g and U from stream 2g+1.
  REQUIRE(cell.gates[2].W == init_uniform(4, 3, 0.08, {11, 4}));
  REQUIRE(cell.gates[2].U == init_uniform(4, 4, 0.08, {11, 5}));
  REQUIRE(cell.gates[2].b.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("make_cell rejects non-square vanilla input coupling") {
  const InitSpec init{InitSpec::Kind::uniform, 0.5};
  REQUIRE_THROWS_AS(
      make_cell(Arch::vanilla, 4, 3, Nonlinearity::tanh, init, {1, 0}),
      DimensionError);
}

TEST_CASE("make_cell rejects orthogonal init of rectangular gates") {
  const InitSpec init{InitSpec::Kind::orthogonal, 1.0};
  REQUIRE_THROWS_AS(
      make_cell(Arch::gru, 4, 3, Nonlinearity::tanh, init, {1, 0}),
      DimensionError);
}

TEST_CASE("wider uniform lstm initialization spreads the spectrum more") {
  // Frozen ordering from a calibration run: the exponent variance of a
  // uniform(0.5) lstm exceeds that of a uniform(0.04) one, batch-averaged.
  const auto spectrum_variance = [](double p) {
    const InitSpec init{InitSpec::Kind::uniform, p};
    const std::vector<CellParams> cells{
        make_cell(Arch::lstm, 32, 32, Nonlinearity::tanh, init, {3, 0})};
    EstimatorConfig cfg;
    cfg.T = 100;
    cfg.batch_size = 3;
    const auto inputs = gen_inputs(100, 32, 0.6, 3, {3, 1000});
    const auto states = gen_initial_states(cells, 1.0, 3, {3, 2000});
    const SpectrumResult r = run_batch(cells, cfg, inputs, states);
    return summarize(r.mean, kDefaultMarginalTol).lambda_variance;
  };
  REQUIRE(spectrum_variance(0.04) < spectrum_variance(0.5));
}
