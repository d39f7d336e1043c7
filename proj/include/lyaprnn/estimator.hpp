#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "lyaprnn/cells.hpp"
#include "lyaprnn/errors.hpp"
#include "lyaprnn/linalg.hpp"

namespace lyaprnn {

/// What to do when a tangent direction is annihilated (R_ii == 0, i.e. the
/// Jacobian is exactly rank-deficient, which tanh saturation can produce):
/// `error` throws NumericalError; `clamp` records kClampedLogExpansion.
enum class DegeneratePolicy { error, clamp };

/// Stand-in log-expansion for an exactly zero R_ii under DegeneratePolicy::clamp
/// (just below log of the smallest positive double, so clamped directions are
/// unambiguous in output).
inline constexpr double kClampedLogExpansion = -745.0;

inline const char* to_string(DegeneratePolicy p) {
  return p == DegeneratePolicy::error ? "error" : "clamp";
}

struct EstimatorConfig {
  int T = 100;            // accumulation steps per sequence
  int warmup_steps = 0;   // discarded steps before accumulation
  int t_on = 1;           // steps between QR re-orthonormalizations
  int batch_size = 10;    // number of input sequences
  std::uint64_t seed = 0; // echoed into results; generators draw from it
  int k_exponents = 0;    // tangent vectors tracked; 0 = full hidden dimension
  DegeneratePolicy degenerate_policy = DegeneratePolicy::error;

  int resolved_k(int n_total) const {
    return k_exponents == 0 ? n_total : k_exponents;
  }

  void validate(int n_total) const {
    if (T < 1) throw DimensionError("config: T must be >= 1");
    if (warmup_steps < 0) throw DimensionError("config: warmup_steps must be >= 0");
    if (t_on < 1 || t_on > T) {
      throw DimensionError("config: t_on must be in [1, T]");
    }
    if (batch_size < 1) throw DimensionError("config: batch_size must be >= 1");
    const int k = resolved_k(n_total);
    if (k < 1 || k > n_total) {
      throw DimensionError("config: k_exponents must be in [1, " +
                           std::to_string(n_total) + "]");
    }
  }
};

/// Orthonormal tangent vectors plus accumulated log expansions.
struct TangentBasis {
  Mat Q;                       // n_total x k, column-orthonormal after each QR
  Vec gamma;                   // k accumulated log R_ii
  long steps_accumulated = 0;  // accumulation steps folded into gamma's clock
  int steps_since_qr = 0;      // propagation steps since the last QR
};

/// Identity-column basis: Q = first k columns of I, gamma = 0.
inline TangentBasis make_tangent_basis(int n_total, int k) {
  TangentBasis b;
  b.Q = Mat::Identity(n_total, n_total).leftCols(k);
  b.gamma = Vec::Zero(k);
  return b;
}

/// One running-estimate sample: lambda_i(t) = gamma_i(t) / t at accumulation
/// step t (samples exist only at orthonormalization steps).
struct TracePoint {
  long t = 0;
  Vec lambda;
};
using Trace = std::vector<TracePoint>;

struct SequenceResult {
  Vec lambda;
  Trace trace;
};

/// Batch spectrum: per-sequence exponents (row j = sequence j), their
/// index-wise mean and population std, per-sequence traces, and run metadata.
struct SpectrumResult {
  Mat per_sequence;           // batch x k
  Vec mean;                   // k
  Vec std;                    // k
  std::vector<Trace> traces;  // one per sequence
  EstimatorConfig config;
  std::string cell_fingerprint;
};

/// Unconditionally re-orthonormalizes basis.Q (non-negative-diagonal QR) and,
/// when `accumulate` is set, adds log R_ii into gamma, applying the degenerate
/// policy to exact zeros. Resets the t_on cadence counter.
inline void orthonormalize(TangentBasis& basis, DegeneratePolicy policy,
                           bool accumulate) {
  auto qr = qr_positive(basis.Q);
  basis.Q = std::move(qr.Q);
  basis.steps_since_qr = 0;
  if (!accumulate) return;
  for (Index i = 0; i < basis.gamma.size(); ++i) {
    const double r = qr.R(i, i);
    if (r > 0.0 && std::isfinite(r)) {
      basis.gamma(i) += std::log(r);
    } else if (r == 0.0) {
      if (policy == DegeneratePolicy::error) {
        throw NumericalError(
            "degenerate expansion: tangent direction " + std::to_string(i + 1) +
            " was annihilated (R_ii = 0); rerun with the clamp policy or fewer "
            "tracked exponents");
      }
      basis.gamma(i) += kClampedLogExpansion;
    } else {
      throw NumericalError("non-finite tangent expansion at direction " +
                           std::to_string(i + 1));
    }
  }
}

/// Advances state and tangent basis one step: Q <- J(state, x) Q, state
/// advances via the same (state, x), and on the t_on cadence the basis is
/// re-orthonormalized (log expansions recorded only when `accumulate`).
/// Returns true when an accumulating QR happened (a trace sample point).
inline bool propagate_step(const std::vector<CellParams>& cells, NetState& state,
                           TangentBasis& basis, const Vec& x,
                           const EstimatorConfig& config, bool accumulate) {
  auto [next, J] = step_with_jacobian(cells, state, x);
  state = std::move(next);
  basis.Q = J * basis.Q;
  basis.steps_since_qr += 1;
  if (accumulate) basis.steps_accumulated += 1;
  if (basis.steps_since_qr == config.t_on) {
    orthonormalize(basis, config.degenerate_policy, accumulate);
    return accumulate;
  }
  return false;
}

/// Runs warmup + T accumulation steps on one input sequence.
///
/// Warmup propagates state and Q on the same t_on cadence but discards log
/// expansions, and ends with a flush QR if steps are pending so accumulation
/// always starts from an orthonormal basis. Accumulation ends with a flush QR
/// at t = T when T is not a multiple of t_on, so gamma always covers exactly
/// T steps. lambda = gamma / T.
inline SequenceResult run_sequence(const std::vector<CellParams>& cells,
                                   const EstimatorConfig& config,
                                   const Mat& x_seq, const NetState& h0) {
  const int n_total = total_hidden(cells);
  config.validate(n_total);
  detail::check_stack(cells, h0);
  const long needed = static_cast<long>(config.warmup_steps) + config.T;
  if (x_seq.rows() < needed) {
    throw DimensionError("input sequence has " + std::to_string(x_seq.rows()) +
                         " rows but warmup + T = " + std::to_string(needed) +
                         " are required");
  }
  if (x_seq.cols() != cells.front().n_input) {
    throw DimensionError("input dimension " + std::to_string(x_seq.cols()) +
                         " does not match the network's n_input " +
                         std::to_string(cells.front().n_input));
  }

  NetState state = h0;
  TangentBasis basis = make_tangent_basis(n_total, config.resolved_k(n_total));

  long row = 0;
  for (int t = 0; t < config.warmup_steps; ++t, ++row) {
    propagate_step(cells, state, basis, x_seq.row(row).transpose(), config,
                   /*accumulate=*/false);
  }
  if (basis.steps_since_qr > 0) {
    orthonormalize(basis, config.degenerate_policy, /*accumulate=*/false);
  }

  SequenceResult result;
  for (int t = 0; t < config.T; ++t, ++row) {
    const bool sampled = propagate_step(cells, state, basis,
                                        x_seq.row(row).transpose(), config,
                                        /*accumulate=*/true);
    if (sampled) {
      result.trace.push_back(
          {basis.steps_accumulated,
           basis.gamma / static_cast<double>(basis.steps_accumulated)});
    }
  }
  if (basis.steps_since_qr > 0) {
    orthonormalize(basis, config.degenerate_policy, /*accumulate=*/true);
    result.trace.push_back(
        {basis.steps_accumulated,
         basis.gamma / static_cast<double>(basis.steps_accumulated)});
  }
  result.lambda = basis.gamma / static_cast<double>(config.T);
  return result;
}

namespace detail {

template <typename E>
[[noreturn]] inline void rethrow_annotated(const E& e, int sequence_index) {
  throw E("sequence " + std::to_string(sequence_index + 1) + ": " + e.what());
}

}  // namespace detail

/// Runs run_sequence for each of config.batch_size sequences and reduces.
///
/// Sequences are independent; with n_threads > 1 they run concurrently, but
/// per-sequence results land in index-order slots and the mean/std reduction
/// is a fixed-order serial loop, so the result is bitwise identical for every
/// thread count. Errors are annotated with the 1-based sequence index.
inline SpectrumResult run_batch(const std::vector<CellParams>& cells,
                                const EstimatorConfig& config,
                                const std::vector<Mat>& inputs,
                                const std::vector<NetState>& initial_states,
                                int n_threads = 1) {
  const int n_total = total_hidden(cells);
  config.validate(n_total);
  const int B = config.batch_size;
  if (static_cast<int>(inputs.size()) != B) {
    throw DimensionError("run_batch: expected " + std::to_string(B) +
                         " input sequences, got " +
                         std::to_string(inputs.size()));
  }
  if (static_cast<int>(initial_states.size()) != B) {
    throw DimensionError("run_batch: expected " + std::to_string(B) +
                         " initial states, got " +
                         std::to_string(initial_states.size()));
  }

  std::vector<SequenceResult> results(static_cast<std::size_t>(B));
  std::vector<std::exception_ptr> failures(static_cast<std::size_t>(B));

  auto run_one = [&](int j) {
    try {
      results[static_cast<std::size_t>(j)] =
          run_sequence(cells, config, inputs[static_cast<std::size_t>(j)],
                       initial_states[static_cast<std::size_t>(j)]);
    } catch (...) {
      failures[static_cast<std::size_t>(j)] = std::current_exception();
    }
  };

  if (n_threads <= 1 || B == 1) {
    for (int j = 0; j < B; ++j) run_one(j);
  } else {
    std::atomic<int> next{0};
    auto worker = [&] {
      for (int j = next.fetch_add(1); j < B; j = next.fetch_add(1)) run_one(j);
    };
    std::vector<std::thread> pool;
    const int nt = std::min(n_threads, B);
    pool.reserve(static_cast<std::size_t>(nt));
    for (int i = 0; i < nt; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (int j = 0; j < B; ++j) {
    if (!failures[static_cast<std::size_t>(j)]) continue;
    try {
      std::rethrow_exception(failures[static_cast<std::size_t>(j)]);
    } catch (const DimensionError& e) {
      detail::rethrow_annotated(e, j);
    } catch (const NumericalError& e) {
      detail::rethrow_annotated(e, j);
    } catch (const Error& e) {
      detail::rethrow_annotated(e, j);
    } catch (const std::exception& e) {
      throw Error("sequence " + std::to_string(j + 1) + ": " + e.what());
    }
  }

  const int k = config.resolved_k(n_total);
  SpectrumResult out;
  out.config = config;
  out.cell_fingerprint = cell_fingerprint(cells);
  out.per_sequence = Mat(B, k);
  out.traces.reserve(static_cast<std::size_t>(B));
  for (int j = 0; j < B; ++j) {
    out.per_sequence.row(j) = results[static_cast<std::size_t>(j)].lambda.transpose();
    out.traces.push_back(std::move(results[static_cast<std::size_t>(j)].trace));
  }
  // Fixed-order reductions (index-wise; exponents are never re-sorted).
  out.mean = Vec::Zero(k);
  for (int j = 0; j < B; ++j) out.mean += out.per_sequence.row(j).transpose();
  out.mean /= static_cast<double>(B);
  out.std = Vec::Zero(k);
  for (int j = 0; j < B; ++j) {
    const Vec d = out.per_sequence.row(j).transpose() - out.mean;
    out.std += d.cwiseProduct(d);
  }
  out.std = (out.std / static_cast<double>(B)).cwiseSqrt();
  return out;
}

/// Per-exponent deviations of the running estimates from the final one:
/// point t carries |lambda_i(t) - lambda_i(T)|, on the trace's own
/// (ascending) time grid.
inline Trace convergence_report(const Trace& trace) {
  if (trace.empty()) throw DimensionError("convergence_report: empty trace");
  const Vec& final_lambda = trace.back().lambda;
  Trace report;
  report.reserve(trace.size());
  for (const auto& point : trace) {
    report.push_back({point.t, (point.lambda - final_lambda).cwiseAbs()});
  }
  return report;
}

}  // namespace lyaprnn
