#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "lyaprnn/cells.hpp"
#include "lyaprnn/ensembles.hpp"
#include "lyaprnn/estimator.hpp"
#include "lyaprnn/features.hpp"
#include "lyaprnn/io.hpp"
#include "lyaprnn/oracle.hpp"

namespace lyaprnn {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace detail {

/// Entrywise deviation relative to scale max(1, |a|, |b|): an absolute bound
/// for small entries (where central differences bottom out near eps^2) and a
/// relative one for large entries.
inline double max_rel_error(const Mat& a, const Mat& b) {
  double worst = 0.0;
  for (Index r = 0; r < a.rows(); ++r) {
    for (Index c = 0; c < a.cols(); ++c) {
      const double scale =
          std::max({1.0, std::abs(a(r, c)), std::abs(b(r, c))});
      worst = std::max(worst, std::abs(a(r, c) - b(r, c)) / scale);
    }
  }
  return worst;
}

// Built directly (not via make_cell) so every matrix, including the vanilla
// input weights, is dense random.
inline CellParams random_check_cell(Arch arch, int n, int n_in,
                                    std::uint64_t seed) {
  Rng r({seed, 0});
  const auto fill = [&r](Index rows, Index cols) {
    return fill_matrix(rows, cols, [&r] { return r.uniform(-0.5, 0.5); });
  };
  CellParams cell;
  cell.arch = arch;
  cell.n_hidden = n;
  cell.n_input = n_in;
  cell.nonlinearity = Nonlinearity::tanh;
  if (arch == Arch::vanilla) {
    cell.V = fill(n, n);
    cell.U = fill(n, n_in);
    cell.b = fill(n, 1).col(0);
  } else {
    cell.gates.resize(cell.gate_count());
    for (auto& g : cell.gates) {
      g.U = fill(n, n);
      g.W = fill(n, n_in);
      g.b = fill(n, 1).col(0);
    }
  }
  return cell;
}

inline LayerState random_check_state(Arch arch, int n, std::uint64_t seed) {
  Rng r({seed, 900});
  LayerState s;
  s.h = Vec(n);
  for (int i = 0; i < n; ++i) s.h(i) = r.normal();
  if (arch == Arch::lstm) {
    s.c = Vec(n);
    for (int i = 0; i < n; ++i) s.c(i) = r.normal();
  }
  return s;
}

inline CheckResult check_jacobian_fd(Arch arch) {
  CheckResult res{std::string("jacobian-fd-") + to_string(arch), true, ""};
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const int n = 4;
    const int n_in = 3;
    const CellParams cell = random_check_cell(arch, n, n_in, seed);
    const LayerState state = random_check_state(arch, n, seed);
    Rng rx({seed, 901});
    Vec x(n_in);
    for (int i = 0; i < n_in; ++i) x(i) = rx.normal();
    worst = std::max(worst, max_rel_error(jacobian_state(cell, state, x),
                                          finite_difference_jacobian(cell, state, x)));
    worst = std::max(worst,
                     max_rel_error(jacobian_input(cell, state, x),
                                   finite_difference_input_jacobian(cell, state, x)));
  }
  res.passed = worst < 1e-5;
  res.detail = "max deviation " + format_double(worst) + " (bound 1e-05)";
  return res;
}

}  // namespace detail

/// Built-in validation suite behind the CLI's `check` command. Each check is
/// named and self-contained; `inject_fault` corrupts the expected constant of
/// the analytic-spectrum check so harnesses can verify failure reporting.
inline std::vector<CheckResult> run_self_checks(bool inject_fault = false) {
  std::vector<CheckResult> checks;

  checks.push_back(detail::check_jacobian_fd(Arch::vanilla));
  checks.push_back(detail::check_jacobian_fd(Arch::lstm));
  checks.push_back(detail::check_jacobian_fd(Arch::gru));

  // Shared small driven tanh system. The input drive is kept gentle: a hard
  // drive saturates tanh, widens the exponent spread and makes the one-shot
  // 50-step product (t_on = 50) too ill-conditioned to reproduce the
  // telescoping identity at the 1e-8 level in double precision.
  const int n = 6;
  CellParams cell;
  cell.arch = Arch::vanilla;
  cell.n_hidden = n;
  cell.n_input = n;
  cell.nonlinearity = Nonlinearity::tanh;
  cell.V = init_orthogonal(n, 1.0, {42, 0});
  cell.U = Mat::Identity(n, n);
  cell.b = Vec::Zero(n);
  const std::vector<CellParams> cells{cell};
  const Mat x_seq = init_gaussian(50, n, 0.04, {42, 1});
  const NetState h0 = zero_state(cells);

  {
    CheckResult res{"telescoping-qr", true, ""};
    EstimatorConfig cfg;
    cfg.T = 50;
    cfg.batch_size = 1;
    Vec reference;
    double worst = 0.0;
    for (const int t_on : {1, 5, 10, 25, 50}) {
      cfg.t_on = t_on;
      const Vec gamma = run_sequence(cells, cfg, x_seq, h0).lambda * cfg.T;
      if (reference.size() == 0) {
        reference = gamma;
      } else {
        worst = std::max(worst, (gamma - reference).cwiseAbs().maxCoeff());
      }
    }
    const Vec oracle_gamma =
        oracle::product_qr_exponents(oracle::jacobian_sequence(cells, x_seq, h0, 50)) *
        50.0;
    worst = std::max(worst, (oracle_gamma - reference).cwiseAbs().maxCoeff());
    res.passed = worst < 1e-8;
    res.detail = "max gamma deviation " + format_double(worst) + " (bound 1e-08)";
    checks.push_back(res);
  }

  {
    CheckResult res{"volume-identity", true, ""};
    EstimatorConfig cfg;
    cfg.T = 50;
    cfg.batch_size = 1;
    const Vec lambda = run_sequence(cells, cfg, x_seq, h0).lambda;
    double logdet_rate = 0.0;
    for (const Mat& J : oracle::jacobian_sequence(cells, x_seq, h0, 50)) {
      logdet_rate += log_abs_det(J);
    }
    logdet_rate /= 50.0;
    const double dev = std::abs(lambda.sum() - logdet_rate);
    res.passed = dev < 1e-8;
    res.detail = "deviation " + format_double(dev) + " (bound 1e-08)";
    checks.push_back(res);
  }

  {
    CheckResult res{"linear-analytic-spectrum", true, ""};
    CellParams lin;
    lin.arch = Arch::vanilla;
    lin.n_hidden = 5;
    lin.n_input = 5;
    lin.nonlinearity = Nonlinearity::identity;
    lin.V = init_orthogonal(5, 0.5, {7, 0});
    lin.U = Mat::Identity(5, 5);
    lin.b = Vec::Zero(5);
    const std::vector<CellParams> lin_cells{lin};
    EstimatorConfig cfg;
    cfg.T = 30;
    cfg.batch_size = 1;
    const Mat xs = init_gaussian(30, 5, 1.0, {7, 1});
    const Vec lambda = run_sequence(lin_cells, cfg, xs, zero_state(lin_cells)).lambda;
    double expected = std::log(0.5);
    if (inject_fault) expected += 1e-3;  // harness hook: forces this check red
    const double dev = (lambda.array() - expected).abs().maxCoeff();
    res.passed = dev < 1e-10;
    res.detail = "max |lambda - ln(gain)| = " + format_double(dev) +
                 " (bound 1e-10)";
    checks.push_back(res);
  }

  return checks;
}

}  // namespace lyaprnn
