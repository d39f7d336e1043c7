#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lyaprnn/errors.hpp"
#include "lyaprnn/linalg.hpp"

namespace lyaprnn {

enum class Arch { vanilla, lstm, gru };
enum class Nonlinearity { tanh, identity };

inline const char* to_string(Arch a) {
  switch (a) {
    case Arch::vanilla: return "vanilla";
    case Arch::lstm: return "lstm";
    case Arch::gru: return "gru";
  }
  return "?";
}

inline const char* to_string(Nonlinearity nl) {
  return nl == Nonlinearity::tanh ? "tanh" : "identity";
}

/// One gate's parameter triplet: W (n x n_in, input), U (n x n, recurrent),
/// b (n, bias).
struct GateParams {
  Mat W;
  Mat U;
  Vec b;
};

/// Gate order inside CellParams::gates.
inline constexpr std::array<const char*, 4> kLstmGateNames{"f", "i", "o", "c"};
inline constexpr std::array<const char*, 3> kGruGateNames{"z", "r", "c"};

/// Optional linear readout (y = W h + b). Carried through serialization for
/// completeness; spectrum estimation never uses it.
struct Readout {
  Mat W;
  Vec b;
};

/// Parameters of one recurrent layer.
///
/// vanilla: h' = phi(V h + U x + b)
/// lstm   : gates g in {f,i,o}: g = sigmoid(W_g x + U_g h + b_g),
///          candidate u = tanh(W_c x + U_c h + b_c),
///          c' = f.c + i.u,  h' = o.tanh(c')
/// gru    : z = sigmoid(W_z x + U_z h + b_z), r = sigmoid(W_r x + U_r h + b_r),
///          candidate u = tanh(W_c x + U_c (r.h) + b_c),
///          h' = z.h + (1-z).u
/// ('.' is the elementwise product; gate order in `gates` follows
/// kLstmGateNames / kGruGateNames.)
struct CellParams {
  Arch arch = Arch::vanilla;
  int n_hidden = 0;
  int n_input = 0;

  // vanilla only
  Nonlinearity nonlinearity = Nonlinearity::tanh;
  Mat V;
  Mat U;
  Vec b;

  // lstm/gru only
  std::vector<GateParams> gates;

  std::optional<Readout> readout;

  int gate_count() const {
    return arch == Arch::lstm ? static_cast<int>(kLstmGateNames.size())
         : arch == Arch::gru  ? static_cast<int>(kGruGateNames.size())
                              : 0;
  }

  const char* gate_name(int g) const {
    return arch == Arch::lstm ? kLstmGateNames[static_cast<std::size_t>(g)]
                              : kGruGateNames[static_cast<std::size_t>(g)];
  }

  /// Checks all dimensions and entry finiteness; throws DimensionError or
  /// NumericalError naming the offending matrix. `context` prefixes messages
  /// (e.g. "layer 2").
  void validate(const std::string& context = {}) const {
    const std::string at = context.empty() ? std::string() : context + " ";
    auto expect = [&](const Mat& m, const char* name, Index rows, Index cols) {
      if (m.rows() != rows || m.cols() != cols) {
        throw DimensionError(at + "matrix " + name + ": expected " +
                             std::to_string(rows) + "x" + std::to_string(cols) +
                             ", got " + std::to_string(m.rows()) + "x" +
                             std::to_string(m.cols()));
      }
      if (!m.allFinite()) {
        throw NumericalError(at + "matrix " + name + " has non-finite entries");
      }
    };
    if (n_hidden <= 0 || n_input <= 0) {
      throw DimensionError(at + "n_hidden and n_input must be positive");
    }
    const Index n = n_hidden;
    const Index m = n_input;
    if (arch == Arch::vanilla) {
      expect(V, "V", n, n);
      expect(U, "U", n, m);
      expect(b, "b", n, 1);
    } else {
      if (static_cast<int>(gates.size()) != gate_count()) {
        throw DimensionError(at + "expected " + std::to_string(gate_count()) +
                             " gates, got " + std::to_string(gates.size()));
      }
      for (int g = 0; g < gate_count(); ++g) {
        const std::string wn = std::string("W_") + gate_name(g);
        const std::string un = std::string("U_") + gate_name(g);
        const std::string bn = std::string("b_") + gate_name(g);
        expect(gates[g].W, wn.c_str(), n, m);
        expect(gates[g].U, un.c_str(), n, n);
        expect(gates[g].b, bn.c_str(), n, 1);
      }
    }
    if (readout) {
      if (readout->W.cols() != n) {
        throw DimensionError(at + "matrix readout.W: expected " +
                             std::to_string(readout->W.rows()) + "x" +
                             std::to_string(n) + ", got " +
                             std::to_string(readout->W.rows()) + "x" +
                             std::to_string(readout->W.cols()));
      }
      if (readout->b.size() != readout->W.rows()) {
        throw DimensionError(at + "readout.b: expected size " +
                             std::to_string(readout->W.rows()) + ", got " +
                             std::to_string(readout->b.size()));
      }
    }
  }
};

/// Hidden state of one layer: h always; c only for lstm.
struct LayerState {
  Vec h;
  Vec c;
};

/// Hidden state of a (possibly single-layer) stack, bottom layer first.
using NetState = std::vector<LayerState>;

/// Total hidden dimension of a stack.
inline int total_hidden(const std::vector<CellParams>& cells) {
  int n = 0;
  for (const auto& c : cells) n += c.n_hidden;
  return n;
}

/// Zero state matching a stack (h = 0 per layer; c = 0 for lstm layers).
inline NetState zero_state(const std::vector<CellParams>& cells) {
  NetState s;
  s.reserve(cells.size());
  for (const auto& c : cells) {
    LayerState ls;
    ls.h = Vec::Zero(c.n_hidden);
    if (c.arch == Arch::lstm) ls.c = Vec::Zero(c.n_hidden);
    s.push_back(std::move(ls));
  }
  return s;
}

namespace detail {

inline Vec sigmoid(const Vec& y) {
  return (1.0 + (-y.array()).exp()).inverse().matrix();
}

inline void check_layer_args(const CellParams& cell, const LayerState& s,
                             const Vec& x) {
  if (s.h.size() != cell.n_hidden) {
    throw DimensionError(std::string("matrix ") +
                         (cell.arch == Arch::vanilla ? "V" : "U_*") +
                         ": expected state h of size " +
                         std::to_string(cell.n_hidden) + ", got " +
                         std::to_string(s.h.size()));
  }
  if (x.size() != cell.n_input) {
    throw DimensionError(std::string("matrix ") +
                         (cell.arch == Arch::vanilla ? "U" : "W_*") +
                         ": expected input x of size " +
                         std::to_string(cell.n_input) + ", got " +
                         std::to_string(x.size()));
  }
  if (cell.arch == Arch::lstm && s.c.size() != cell.n_hidden) {
    throw DimensionError("lstm state: expected cell vector c of size " +
                         std::to_string(cell.n_hidden) + ", got " +
                         std::to_string(s.c.size()));
  }
}

struct LstmParts {
  Vec f, i, o, u;  // gate activations and tanh candidate
  Vec c_new, tc;   // updated cell vector and tanh(c_new)
};

inline LstmParts lstm_parts(const CellParams& cell, const LayerState& s,
                            const Vec& x) {
  const GateParams& gf = cell.gates[0];
  const GateParams& gi = cell.gates[1];
  const GateParams& go = cell.gates[2];
  const GateParams& gc = cell.gates[3];
  LstmParts p;
  p.f = sigmoid(gf.W * x + gf.U * s.h + gf.b);
  p.i = sigmoid(gi.W * x + gi.U * s.h + gi.b);
  p.o = sigmoid(go.W * x + go.U * s.h + go.b);
  p.u = (gc.W * x + gc.U * s.h + gc.b).array().tanh().matrix();
  p.c_new = (p.f.array() * s.c.array() + p.i.array() * p.u.array()).matrix();
  p.tc = p.c_new.array().tanh().matrix();
  return p;
}

/// d h' / d v for the LSTM, where v is h (pass the U_* matrices) or x (pass
/// the W_* matrices); c enters as the pre-update cell vector.
inline Mat lstm_jacobian(const LstmParts& p, const Vec& c_prev, const Mat& Mf,
                         const Mat& Mi, const Mat& Mo, const Mat& Mc) {
  const auto f = p.f.array();
  const auto i = p.i.array();
  const auto o = p.o.array();
  const auto u = p.u.array();
  const auto tc = p.tc.array();
  Mat dc = (c_prev.array() * f * (1.0 - f)).matrix().asDiagonal() * Mf;
  dc += (u * i * (1.0 - i)).matrix().asDiagonal() * Mi;
  dc += (i * (1.0 - u.square())).matrix().asDiagonal() * Mc;
  Mat J = (tc * o * (1.0 - o)).matrix().asDiagonal() * Mo;
  J += (o * (1.0 - tc.square())).matrix().asDiagonal() * dc;
  return J;
}

struct GruParts {
  Vec z, r, u;  // update gate, reset gate, tanh candidate
  Vec h_new;
};

inline GruParts gru_parts(const CellParams& cell, const LayerState& s,
                          const Vec& x) {
  const GateParams& gz = cell.gates[0];
  const GateParams& gr = cell.gates[1];
  const GateParams& gc = cell.gates[2];
  GruParts p;
  p.z = sigmoid(gz.W * x + gz.U * s.h + gz.b);
  p.r = sigmoid(gr.W * x + gr.U * s.h + gr.b);
  p.u = (gc.W * x + gc.U * (p.r.array() * s.h.array()).matrix() + gc.b)
            .array()
            .tanh()
            .matrix();
  p.h_new = (p.z.array() * s.h.array() + (1.0 - p.z.array()) * p.u.array())
                .matrix();
  return p;
}

inline Vec vanilla_preactivation(const CellParams& cell, const LayerState& s,
                                 const Vec& x) {
  return cell.V * s.h + cell.U * x + cell.b;
}

inline Vec apply_phi(Nonlinearity nl, const Vec& a) {
  return nl == Nonlinearity::tanh ? Vec(a.array().tanh().matrix()) : a;
}

/// phi'(a), computed from the activation for tanh (1 - tanh^2).
inline Vec phi_prime(Nonlinearity nl, const Vec& a) {
  if (nl == Nonlinearity::identity) return Vec::Ones(a.size());
  return (1.0 - a.array().tanh().square()).matrix();
}

}  // namespace detail

/// Advances one layer by one time step. Pure function of its arguments.
inline LayerState step(const CellParams& cell, const LayerState& state,
                       const Vec& x) {
  detail::check_layer_args(cell, state, x);
  switch (cell.arch) {
    case Arch::vanilla: {
      const Vec a = detail::vanilla_preactivation(cell, state, x);
      return {detail::apply_phi(cell.nonlinearity, a), Vec()};
    }
    case Arch::lstm: {
      auto p = detail::lstm_parts(cell, state, x);
      return {(p.o.array() * p.tc.array()).matrix(), std::move(p.c_new)};
    }
    case Arch::gru: {
      auto p = detail::gru_parts(cell, state, x);
      return {std::move(p.h_new), Vec()};
    }
  }
  throw Error("step: unknown architecture");
}

/// d h_next / d h, evaluated at the pre-update (state, x). For the LSTM the
/// pre-update cell vector is treated as a trajectory-supplied constant, so the
/// layer contributes exactly n_hidden exponents.
inline Mat jacobian_state(const CellParams& cell, const LayerState& state,
                          const Vec& x) {
  detail::check_layer_args(cell, state, x);
  switch (cell.arch) {
    case Arch::vanilla: {
      const Vec a = detail::vanilla_preactivation(cell, state, x);
      return detail::phi_prime(cell.nonlinearity, a).asDiagonal() * cell.V;
    }
    case Arch::lstm: {
      const auto p = detail::lstm_parts(cell, state, x);
      return detail::lstm_jacobian(p, state.c, cell.gates[0].U,
                                   cell.gates[1].U, cell.gates[2].U,
                                   cell.gates[3].U);
    }
    case Arch::gru: {
      const auto p = detail::gru_parts(cell, state, x);
      const auto z = p.z.array();
      const auto r = p.r.array();
      const auto u = p.u.array();
      const auto h = state.h.array();
      const Mat& Uz = cell.gates[0].U;
      const Mat& Ur = cell.gates[1].U;
      const Mat& Uc = cell.gates[2].U;
      // d(r.h)/dh = diag(r) + diag(h . r') Ur with r' = r(1-r)
      Mat drh = Mat(r.matrix().asDiagonal());
      drh += (h * r * (1.0 - r)).matrix().asDiagonal() * Ur;
      Mat du = (1.0 - u.square()).matrix().asDiagonal() * (Uc * drh);
      Mat J = Mat(z.matrix().asDiagonal());
      J += ((h - u) * z * (1.0 - z)).matrix().asDiagonal() * Uz;
      J += (1.0 - z).matrix().asDiagonal() * du;
      return J;
    }
  }
  throw Error("jacobian_state: unknown architecture");
}

/// d h_next / d x, evaluated at the pre-update (state, x).
inline Mat jacobian_input(const CellParams& cell, const LayerState& state,
                          const Vec& x) {
  detail::check_layer_args(cell, state, x);
  switch (cell.arch) {
    case Arch::vanilla: {
      const Vec a = detail::vanilla_preactivation(cell, state, x);
      return detail::phi_prime(cell.nonlinearity, a).asDiagonal() * cell.U;
    }
    case Arch::lstm: {
      const auto p = detail::lstm_parts(cell, state, x);
      return detail::lstm_jacobian(p, state.c, cell.gates[0].W,
                                   cell.gates[1].W, cell.gates[2].W,
                                   cell.gates[3].W);
    }
    case Arch::gru: {
      const auto p = detail::gru_parts(cell, state, x);
      const auto z = p.z.array();
      const auto r = p.r.array();
      const auto u = p.u.array();
      const auto h = state.h.array();
      const Mat& Wz = cell.gates[0].W;
      const Mat& Wr = cell.gates[1].W;
      const Mat& Wc = cell.gates[2].W;
      Mat dcand_arg = Wc + cell.gates[2].U * ((h * r * (1.0 - r)).matrix().asDiagonal() * Wr);
      Mat J = ((h - u) * z * (1.0 - z)).matrix().asDiagonal() * Wz;
      J += ((1.0 - z) * (1.0 - u.square())).matrix().asDiagonal() * dcand_arg;
      return J;
    }
  }
  throw Error("jacobian_input: unknown architecture");
}

namespace detail {

inline void check_stack(const std::vector<CellParams>& cells,
                        const NetState& state) {
  if (cells.empty()) throw DimensionError("empty cell stack");
  if (state.size() != cells.size()) {
    throw DimensionError("state has " + std::to_string(state.size()) +
                         " layers but the stack has " +
                         std::to_string(cells.size()));
  }
  for (std::size_t k = 1; k < cells.size(); ++k) {
    if (cells[k].n_input != cells[k - 1].n_hidden) {
      throw DimensionError("layer " + std::to_string(k + 1) + " expects input " +
                           std::to_string(cells[k].n_input) + " but layer " +
                           std::to_string(k) + " outputs " +
                           std::to_string(cells[k - 1].n_hidden));
    }
  }
}

}  // namespace detail

/// Advances a whole stack one time step; layer k >= 2 consumes the freshly
/// updated output of layer k-1 within the same step.
inline NetState step_stack(const std::vector<CellParams>& cells,
                           const NetState& state, const Vec& x) {
  detail::check_stack(cells, state);
  NetState next;
  next.reserve(cells.size());
  const Vec* layer_in = &x;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    next.push_back(step(cells[k], state[k], *layer_in));
    layer_in = &next.back().h;
  }
  return next;
}

/// Advances the stack one step and returns the Jacobian of the full stacked
/// hidden state, evaluated at the pre-update (state, x). The Jacobian is block
/// lower-triangular: diagonal blocks are each layer's state Jacobian, block
/// (k, j < k) is the layer-k input Jacobian composed with the blocks of the
/// row below, built bottom-up so each input Jacobian is multiplied in once.
inline std::pair<NetState, Mat> step_with_jacobian(
    const std::vector<CellParams>& cells, const NetState& state, const Vec& x) {
  detail::check_stack(cells, state);
  const int n_total = total_hidden(cells);
  Mat J = Mat::Zero(n_total, n_total);
  NetState next;
  next.reserve(cells.size());

  std::vector<int> offset(cells.size(), 0);
  for (std::size_t k = 1; k < cells.size(); ++k) {
    offset[k] = offset[k - 1] + cells[k - 1].n_hidden;
  }

  const Vec* layer_in = &x;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const int nk = cells[k].n_hidden;
    J.block(offset[k], offset[k], nk, nk) =
        jacobian_state(cells[k], state[k], *layer_in);
    if (k > 0) {
      const Mat Jin = jacobian_input(cells[k], state[k], *layer_in);
      const int below = cells[k - 1].n_hidden;
      // Row k-1 spans columns 0 .. offset[k-1]+below; multiply it in wholesale.
      J.block(offset[k], 0, nk, offset[k - 1] + below) =
          Jin * J.block(offset[k - 1], 0, below, offset[k - 1] + below);
    }
    next.push_back(step(cells[k], state[k], *layer_in));
    layer_in = &next.back().h;
  }
  return {std::move(next), std::move(J)};
}

/// Jacobian of the stacked hidden state at (state, x); see step_with_jacobian.
inline Mat stacked_jacobian(const std::vector<CellParams>& cells,
                            const NetState& state, const Vec& x) {
  return step_with_jacobian(cells, state, x).second;
}

/// Central-difference approximation of jacobian_state: column j is
/// (step(h + eps e_j) - step(h - eps e_j)) / (2 eps), h perturbed only (the
/// lstm cell vector stays fixed, matching jacobian_state's contract).
inline Mat finite_difference_jacobian(const CellParams& cell,
                                      const LayerState& state, const Vec& x,
                                      double eps = 1e-5) {
  detail::check_layer_args(cell, state, x);
  const int n = cell.n_hidden;
  Mat J(n, n);
  for (int j = 0; j < n; ++j) {
    LayerState plus = state;
    LayerState minus = state;
    plus.h(j) += eps;
    minus.h(j) -= eps;
    J.col(j) = (step(cell, plus, x).h - step(cell, minus, x).h) / (2.0 * eps);
  }
  return J;
}

/// Central-difference approximation of jacobian_input (x perturbed).
inline Mat finite_difference_input_jacobian(const CellParams& cell,
                                            const LayerState& state,
                                            const Vec& x, double eps = 1e-5) {
  detail::check_layer_args(cell, state, x);
  const int n = cell.n_hidden;
  const int m = cell.n_input;
  Mat J(n, m);
  for (int j = 0; j < m; ++j) {
    Vec plus = x;
    Vec minus = x;
    plus(j) += eps;
    minus(j) -= eps;
    J.col(j) = (step(cell, state, plus).h - step(cell, state, minus).h) /
               (2.0 * eps);
  }
  return J;
}

/// Central-difference approximation of stacked_jacobian: the concatenated
/// hidden vector (all layers' h) is perturbed; lstm cell vectors stay fixed.
inline Mat finite_difference_jacobian(const std::vector<CellParams>& cells,
                                      const NetState& state, const Vec& x,
                                      double eps = 1e-5) {
  detail::check_stack(cells, state);
  const int n_total = total_hidden(cells);
  auto flatten = [&](const NetState& s) {
    Vec v(n_total);
    int at = 0;
    for (const auto& layer : s) {
      v.segment(at, layer.h.size()) = layer.h;
      at += static_cast<int>(layer.h.size());
    }
    return v;
  };
  auto perturbed = [&](int j, double delta) {
    NetState s = state;
    int at = 0;
    for (auto& layer : s) {
      const int nk = static_cast<int>(layer.h.size());
      if (j < at + nk) {
        layer.h(j - at) += delta;
        break;
      }
      at += nk;
    }
    return s;
  };
  Mat J(n_total, n_total);
  for (int j = 0; j < n_total; ++j) {
    const Vec hp = flatten(step_stack(cells, perturbed(j, eps), x));
    const Vec hm = flatten(step_stack(cells, perturbed(j, -eps), x));
    J.col(j) = (hp - hm) / (2.0 * eps);
  }
  return J;
}

namespace detail {

inline std::uint64_t fnv1a_bytes(std::uint64_t h, const unsigned char* p,
                                 std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ull;
  }
  return h;
}

inline std::uint64_t fnv1a_u64(std::uint64_t h, std::uint64_t v) {
  // Fed least-significant byte first so the hash is endianness-independent.
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  return fnv1a_bytes(h, bytes, 8);
}

inline std::uint64_t fnv1a_double(std::uint64_t h, double d) {
  return fnv1a_u64(h, std::bit_cast<std::uint64_t>(d));
}

inline std::uint64_t fnv1a_mat(std::uint64_t h, const Mat& m) {
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) h = fnv1a_double(h, m(r, c));
  }
  return h;
}

}  // namespace detail

/// Order-sensitive FNV-1a fingerprint of a cell stack (architecture, sizes,
/// and the exact bit patterns of every weight), echoed into spectrum files so
/// results can be matched to the network that produced them.
inline std::string cell_fingerprint(const std::vector<CellParams>& cells) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (const auto& cell : cells) {
    h = detail::fnv1a_u64(h, static_cast<std::uint64_t>(cell.arch));
    h = detail::fnv1a_u64(h, static_cast<std::uint64_t>(cell.n_hidden));
    h = detail::fnv1a_u64(h, static_cast<std::uint64_t>(cell.n_input));
    if (cell.arch == Arch::vanilla) {
      h = detail::fnv1a_u64(h, static_cast<std::uint64_t>(cell.nonlinearity));
      h = detail::fnv1a_mat(h, cell.V);
      h = detail::fnv1a_mat(h, cell.U);
      h = detail::fnv1a_mat(h, cell.b);
    } else {
      for (const auto& g : cell.gates) {
        h = detail::fnv1a_mat(h, g.W);
        h = detail::fnv1a_mat(h, g.U);
        h = detail::fnv1a_mat(h, g.b);
      }
    }
  }
  char buf[17];
  static const char* hex = "0123456789abcdef";
  for (int i = 0; i < 16; ++i) {
    buf[i] = hex[(h >> (60 - 4 * i)) & 0xF];
  }
  buf[16] = '\0';
  return std::string("fnv1a:") + buf;
}

}  // namespace lyaprnn
