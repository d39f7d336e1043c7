#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "lyaprnn/cells.hpp"
#include "lyaprnn/linalg.hpp"
#include "lyaprnn/rng.hpp"

namespace lyaprnn {

namespace detail {

/// Fills row-major (row by row, left to right); the fill order is part of the
/// reproducibility contract.
template <typename Draw>
inline Mat fill_matrix(Index rows, Index cols, Draw&& draw) {
  Mat m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) m(r, c) = draw();
  }
  return m;
}

}  // namespace detail

/// gain * Q with Q Haar-uniform orthogonal, sampled as the sign-corrected QR
/// of a standard Gaussian matrix (the R-diagonal sign fix is what makes the
/// distribution Haar). Every singular value of the result equals `gain`.
inline Mat init_orthogonal(int n, double gain, RngSpec rng) {
  if (n < 1) throw DimensionError("init_orthogonal: n must be >= 1");
  if (!(gain > 0.0)) throw NumericalError("init_orthogonal: gain must be > 0");
  Rng r(rng);
  const Mat g = detail::fill_matrix(n, n, [&] { return r.normal(); });
  return gain * qr_positive(g).Q;
}

/// i.i.d. entries uniform on [-p, p].
inline Mat init_uniform(int rows, int cols, double p, RngSpec rng) {
  if (p < 0.0) throw NumericalError("init_uniform: p must be >= 0");
  Rng r(rng);
  return detail::fill_matrix(rows, cols, [&] { return r.uniform(-p, p); });
}

/// i.i.d. entries N(0, sigma2).
inline Mat init_gaussian(int rows, int cols, double sigma2, RngSpec rng) {
  if (sigma2 < 0.0) throw NumericalError("init_gaussian: sigma2 must be >= 0");
  Rng r(rng);
  return detail::fill_matrix(rows, cols, [&] { return r.normal(sigma2); });
}

/// `batch` i.i.d. Gaussian input sequences, each t_total x n_in; sequence j
/// draws from stream base.stream + j.
inline std::vector<Mat> gen_inputs(int t_total, int n_in, double sigma2_x,
                                   int batch, RngSpec base) {
  if (t_total < 1 || n_in < 1 || batch < 1) {
    throw DimensionError("gen_inputs: t_total, n_in and batch must be >= 1");
  }
  std::vector<Mat> out;
  out.reserve(static_cast<std::size_t>(batch));
  for (int j = 0; j < batch; ++j) {
    out.push_back(init_gaussian(t_total, n_in, sigma2_x,
                                {base.seed, base.stream + static_cast<std::uint64_t>(j)}));
  }
  return out;
}

/// `count` initial states for a stack: h ~ N(0, sigma2_h0) per layer (layers
/// filled bottom-up within one stream), c = 0 for lstm layers. State j draws
/// from stream base.stream + j.
inline std::vector<NetState> gen_initial_states(
    const std::vector<CellParams>& cells, double sigma2_h0, int count,
    RngSpec base) {
  if (cells.empty()) throw DimensionError("gen_initial_states: empty stack");
  if (count < 1) throw DimensionError("gen_initial_states: count must be >= 1");
  std::vector<NetState> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int j = 0; j < count; ++j) {
    Rng r({base.seed, base.stream + static_cast<std::uint64_t>(j)});
    NetState s;
    s.reserve(cells.size());
    for (const auto& cell : cells) {
      LayerState ls;
      ls.h = Vec(cell.n_hidden);
      for (int i = 0; i < cell.n_hidden; ++i) ls.h(i) = r.normal(sigma2_h0);
      if (cell.arch == Arch::lstm) ls.c = Vec::Zero(cell.n_hidden);
      s.push_back(std::move(ls));
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// Single-layer convenience overload: `count` states of one n-dimensional
/// layer (c = 0 when arch is lstm).
inline std::vector<NetState> gen_initial_states(int n, double sigma2_h0,
                                                int count, RngSpec base,
                                                Arch arch = Arch::vanilla) {
  CellParams proto;
  proto.arch = arch;
  proto.n_hidden = n;
  proto.n_input = 1;
  return gen_initial_states(std::vector<CellParams>{proto}, sigma2_h0, count,
                            base);
}

/// How `make_cell` draws each weight matrix. `value` is the squared gain for
/// `orthogonal` (the matrix is sqrt(value) * Haar), the half-width for
/// `uniform`, and the per-entry variance for `gaussian`.
struct InitSpec {
  enum class Kind { orthogonal, uniform, gaussian };
  Kind kind = Kind::orthogonal;
  double value = 1.0;
};

/// Builds one randomly initialized layer the way the CLI's `simulate` does
/// (documented in README "Reproducibility"):
///   vanilla: V <- draw (stream base.stream + 0), U = I (requires
///            n_in == n_hidden), b = 0
///   lstm/gru: gate g (in kLstmGateNames / kGruGateNames order) draws
///            W_g from stream base.stream + 2g, U_g from base.stream + 2g + 1;
///            all biases 0; `orthogonal` requires n_in == n_hidden
inline CellParams make_cell(Arch arch, int n, int n_in, Nonlinearity nl,
                            const InitSpec& init, RngSpec base) {
  auto draw = [&](int rows, int cols, std::uint64_t stream) -> Mat {
    const RngSpec spec{base.seed, base.stream + stream};
    switch (init.kind) {
      case InitSpec::Kind::orthogonal:
        if (rows != cols) {
          throw DimensionError(
              "orthogonal initialization requires a square matrix (got " +
              std::to_string(rows) + "x" + std::to_string(cols) + ")");
        }
        return init_orthogonal(rows, std::sqrt(init.value), spec);
      case InitSpec::Kind::uniform:
        return init_uniform(rows, cols, init.value, spec);
      case InitSpec::Kind::gaussian:
        return init_gaussian(rows, cols, init.value, spec);
    }
    throw Error("make_cell: unknown init kind");
  };

  CellParams cell;
  cell.arch = arch;
  cell.n_hidden = n;
  cell.n_input = n_in;
  if (arch == Arch::vanilla) {
    cell.nonlinearity = nl;
    if (n_in != n) {
      throw DimensionError(
          "vanilla simulate uses U = I, which requires n_in == n (got n=" +
          std::to_string(n) + ", n_in=" + std::to_string(n_in) + ")");
    }
    cell.V = draw(n, n, 0);
    cell.U = Mat::Identity(n, n_in);
    cell.b = Vec::Zero(n);
  } else {
    const int gc = arch == Arch::lstm ? 4 : 3;
    cell.gates.resize(static_cast<std::size_t>(gc));
    for (int g = 0; g < gc; ++g) {
      cell.gates[static_cast<std::size_t>(g)].W =
          draw(n, n_in, static_cast<std::uint64_t>(2 * g));
      cell.gates[static_cast<std::size_t>(g)].U =
          draw(n, n, static_cast<std::uint64_t>(2 * g + 1));
      cell.gates[static_cast<std::size_t>(g)].b = Vec::Zero(n);
    }
  }
  cell.validate();
  return cell;
}

}  // namespace lyaprnn
