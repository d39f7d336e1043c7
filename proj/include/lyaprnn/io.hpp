#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lyaprnn/cells.hpp"
#include "lyaprnn/errors.hpp"
#include "lyaprnn/estimator.hpp"

namespace lyaprnn {

/// Shortest decimal form that parses back to the identical double (the basis
/// of the byte-stable round-trip guarantee of every text format here).
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline constexpr int kFormatVersion = 1;

enum class SpectrumFormat { structured, tabular };

namespace detail {

using json = nlohmann::json;

inline json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json vec_to_json(const Vec& v) {
  json arr = json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

inline const json& field(const json& j, const char* name,
                         const std::string& where) {
  const auto it = j.find(name);
  if (it == j.end()) {
    throw ParseError(where + ": missing field '" + name + "'");
  }
  return *it;
}

inline double number_from_json(const json& j, const std::string& where) {
  if (!j.is_number()) {
    throw ParseError(where + ": expected a number, got " +
                     std::string(j.type_name()));
  }
  return j.get<double>();
}

inline Mat mat_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    throw ParseError(where + ": expected a non-empty array of rows");
  }
  const std::size_t rows = j.size();
  const std::size_t cols = j.front().size();
  Mat m(static_cast<Index>(rows), static_cast<Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    const json& row = j[r];
    if (!row.is_array() || row.size() != cols) {
      throw ParseError(where + ": row " + std::to_string(r + 1) +
                       " is ragged (expected " + std::to_string(cols) +
                       " values)");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Index>(r), static_cast<Index>(c)) =
          number_from_json(row[c], where + ", row " + std::to_string(r + 1));
    }
  }
  return m;
}

inline Vec vec_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) {
    throw ParseError(where + ": expected an array of numbers");
  }
  Vec v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Index>(i)) =
        number_from_json(j[i], where + ", entry " + std::to_string(i + 1));
  }
  return v;
}

inline json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << contents;
  if (!out) throw IoError("failed to write " + path);
}

inline void check_format_version(const json& j, const std::string& path) {
  const json& v = field(j, "format_version", path);
  if (!v.is_number_integer() || v.get<int>() != kFormatVersion) {
    throw ParseError(path + ": unsupported format_version " + v.dump() +
                     " (supported: " + std::to_string(kFormatVersion) + ")");
  }
}

inline Arch arch_from_string(const std::string& s, const std::string& where) {
  if (s == "vanilla") return Arch::vanilla;
  if (s == "lstm") return Arch::lstm;
  if (s == "gru") return Arch::gru;
  throw ParseError(where + ": unknown arch '" + s + "'");
}

}  // namespace detail

/// Serializes a validated layer stack (plus optional readout, carried on the
/// last layer) to the weights format documented in docs/file-formats.md and
/// docs/weights-file.schema.json. Deterministic bytes: sorted keys, shortest
/// round-trip float form, trailing newline.
inline void save_weights(const std::vector<CellParams>& cells,
                         const std::string& path) {
  if (cells.empty()) throw DimensionError("save_weights: empty stack");
  for (std::size_t k = 0; k < cells.size(); ++k) {
    cells[k].validate("layer " + std::to_string(k + 1));
  }
  detail::json doc;
  doc["format_version"] = kFormatVersion;
  doc["arch"] = to_string(cells.front().arch);
  detail::json layers = detail::json::array();
  for (const auto& cell : cells) {
    if (cell.arch != cells.front().arch) {
      throw DimensionError("save_weights: mixed architectures in one stack");
    }
    detail::json layer;
    layer["n_hidden"] = cell.n_hidden;
    layer["n_input"] = cell.n_input;
    if (cell.arch == Arch::vanilla) {
      layer["nonlinearity"] = to_string(cell.nonlinearity);
      layer["V"] = detail::mat_to_json(cell.V);
      layer["U"] = detail::mat_to_json(cell.U);
      layer["b"] = detail::vec_to_json(cell.b);
    } else {
      for (int g = 0; g < cell.gate_count(); ++g) {
        const auto& gp = cell.gates[static_cast<std::size_t>(g)];
        layer[std::string("W_") + cell.gate_name(g)] = detail::mat_to_json(gp.W);
        layer[std::string("U_") + cell.gate_name(g)] = detail::mat_to_json(gp.U);
        layer[std::string("b_") + cell.gate_name(g)] = detail::vec_to_json(gp.b);
      }
    }
    layers.push_back(std::move(layer));
  }
  doc["layers"] = std::move(layers);
  if (cells.back().readout) {
    doc["readout"] = {{"W", detail::mat_to_json(cells.back().readout->W)},
                      {"b", detail::vec_to_json(cells.back().readout->b)}};
  }
  detail::write_file(path, doc.dump(2) + "\n");
}

/// Loads and fully validates a weights file; throws IoError, ParseError (with
/// path/field context), DimensionError (naming the matrix), or NumericalError.
inline std::vector<CellParams> load_weights(const std::string& path) {
  const detail::json doc = detail::parse_file(path);
  detail::check_format_version(doc, path);
  const detail::json& arch_field = detail::field(doc, "arch", path);
  if (!arch_field.is_string()) throw ParseError(path + ": 'arch' must be a string");
  const Arch arch = detail::arch_from_string(arch_field.get<std::string>(), path);
  const detail::json& layers = detail::field(doc, "layers", path);
  if (!layers.is_array() || layers.empty()) {
    throw ParseError(path + ": 'layers' must be a non-empty array");
  }

  std::vector<CellParams> cells;
  cells.reserve(layers.size());
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const std::string where = path + ": layer " + std::to_string(k + 1);
    const detail::json& layer = layers[k];
    if (!layer.is_object()) throw ParseError(where + ": expected an object");
    CellParams cell;
    cell.arch = arch;
    const detail::json& nh = detail::field(layer, "n_hidden", where);
    const detail::json& ni = detail::field(layer, "n_input", where);
    if (!nh.is_number_integer() || !ni.is_number_integer()) {
      throw ParseError(where + ": n_hidden and n_input must be integers");
    }
    cell.n_hidden = nh.get<int>();
    cell.n_input = ni.get<int>();
    if (arch == Arch::vanilla) {
      const detail::json& nl = detail::field(layer, "nonlinearity", where);
      if (!nl.is_string()) {
        throw ParseError(where + ": 'nonlinearity' must be a string");
      }
      const std::string nls = nl.get<std::string>();
      if (nls == "tanh") {
        cell.nonlinearity = Nonlinearity::tanh;
      } else if (nls == "identity") {
        cell.nonlinearity = Nonlinearity::identity;
      } else {
        throw ParseError(where + ": unknown nonlinearity '" + nls + "'");
      }
      cell.V = detail::mat_from_json(detail::field(layer, "V", where),
                                     where + ", matrix V");
      cell.U = detail::mat_from_json(detail::field(layer, "U", where),
                                     where + ", matrix U");
      cell.b = detail::vec_from_json(detail::field(layer, "b", where),
                                     where + ", vector b");
    } else {
      cell.gates.resize(static_cast<std::size_t>(cell.gate_count()));
      for (int g = 0; g < cell.gate_count(); ++g) {
        auto& gp = cell.gates[static_cast<std::size_t>(g)];
        const std::string wn = std::string("W_") + cell.gate_name(g);
        const std::string un = std::string("U_") + cell.gate_name(g);
        const std::string bn = std::string("b_") + cell.gate_name(g);
        gp.W = detail::mat_from_json(detail::field(layer, wn.c_str(), where),
                                     where + ", matrix " + wn);
        gp.U = detail::mat_from_json(detail::field(layer, un.c_str(), where),
                                     where + ", matrix " + un);
        gp.b = detail::vec_from_json(detail::field(layer, bn.c_str(), where),
                                     where + ", vector " + bn);
      }
    }
    cell.validate(path + ": layer " + std::to_string(k + 1));
    cells.push_back(std::move(cell));
  }

  if (const auto it = doc.find("readout"); it != doc.end()) {
    Readout ro;
    ro.W = detail::mat_from_json(detail::field(*it, "W", path + ": readout"),
                                 path + ": readout matrix W");
    ro.b = detail::vec_from_json(detail::field(*it, "b", path + ": readout"),
                                 path + ": readout vector b");
    cells.back().readout = std::move(ro);
    cells.back().validate(path + ": layer " + std::to_string(cells.size()));
  }

  for (std::size_t k = 1; k < cells.size(); ++k) {
    if (cells[k].n_input != cells[k - 1].n_hidden) {
      throw DimensionError(path + ": layer " + std::to_string(k + 1) +
                           " expects input " + std::to_string(cells[k].n_input) +
                           " but layer " + std::to_string(k) + " outputs " +
                           std::to_string(cells[k - 1].n_hidden));
    }
  }
  return cells;
}

namespace detail {

inline json config_to_json(const EstimatorConfig& c, int resolved_k) {
  json j;
  j["T"] = c.T;
  j["warmup_steps"] = c.warmup_steps;
  j["t_on"] = c.t_on;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["k_exponents"] = resolved_k;
  j["degenerate_policy"] = to_string(c.degenerate_policy);
  return j;
}

inline EstimatorConfig config_from_json(const json& j, const std::string& where) {
  EstimatorConfig c;
  c.T = field(j, "T", where).get<int>();
  c.warmup_steps = field(j, "warmup_steps", where).get<int>();
  c.t_on = field(j, "t_on", where).get<int>();
  c.batch_size = field(j, "batch_size", where).get<int>();
  c.seed = field(j, "seed", where).get<std::uint64_t>();
  c.k_exponents = field(j, "k_exponents", where).get<int>();
  const std::string policy =
      field(j, "degenerate_policy", where).get<std::string>();
  if (policy == "error") {
    c.degenerate_policy = DegeneratePolicy::error;
  } else if (policy == "clamp") {
    c.degenerate_policy = DegeneratePolicy::clamp;
  } else {
    throw ParseError(where + ": unknown degenerate_policy '" + policy + "'");
  }
  return c;
}

/// Index-wise mean of the per-sequence traces (all share one time grid).
inline Trace mean_trace(const SpectrumResult& result) {
  Trace mean;
  if (result.traces.empty()) return mean;
  const Trace& first = result.traces.front();
  mean.reserve(first.size());
  for (std::size_t s = 0; s < first.size(); ++s) {
    Vec acc = Vec::Zero(first[s].lambda.size());
    for (const Trace& tr : result.traces) acc += tr[s].lambda;
    mean.push_back(
        {first[s].t, acc / static_cast<double>(result.traces.size())});
  }
  return mean;
}

}  // namespace detail

/// Writes a spectrum file. `structured` is the canonical JSON document
/// (docs/spectrum-file.schema.json): config echo, cell fingerprint,
/// per-sequence spectra, mean, std, per-sequence traces. `tabular` is the
/// plot-ready CSV `t,lambda_1,...` whose rows are the batch-mean running
/// estimates; its final row (t = T) is the batch-mean spectrum.
inline void save_spectrum(const SpectrumResult& result, const std::string& path,
                          SpectrumFormat format = SpectrumFormat::structured) {
  if (format == SpectrumFormat::structured) {
    detail::json doc;
    doc["format_version"] = kFormatVersion;
    doc["cell_fingerprint"] = result.cell_fingerprint;
    doc["config"] = detail::config_to_json(
        result.config, static_cast<int>(result.mean.size()));
    doc["per_sequence"] = detail::mat_to_json(result.per_sequence);
    doc["mean"] = detail::vec_to_json(result.mean);
    doc["std"] = detail::vec_to_json(result.std);
    detail::json traces = detail::json::array();
    for (const Trace& tr : result.traces) {
      detail::json jt;
      detail::json times = detail::json::array();
      detail::json lambdas = detail::json::array();
      for (const TracePoint& p : tr) {
        times.push_back(p.t);
        lambdas.push_back(detail::vec_to_json(p.lambda));
      }
      jt["t"] = std::move(times);
      jt["lambda"] = std::move(lambdas);
      traces.push_back(std::move(jt));
    }
    doc["traces"] = std::move(traces);
    detail::write_file(path, doc.dump(2) + "\n");
    return;
  }

  // Tabular: header + batch-mean trace rows.
  std::string out = "t";
  for (Index i = 0; i < result.mean.size(); ++i) {
    out += ",lambda_" + std::to_string(i + 1);
  }
  out += "\n";
  const Trace mean = detail::mean_trace(result);
  for (const TracePoint& p : mean) {
    out += std::to_string(p.t);
    for (Index i = 0; i < p.lambda.size(); ++i) {
      out += "," + format_double(p.lambda(i));
    }
    out += "\n";
  }
  if (mean.empty()) {
    out += std::to_string(result.config.T);
    for (Index i = 0; i < result.mean.size(); ++i) {
      out += "," + format_double(result.mean(i));
    }
    out += "\n";
  }
  detail::write_file(path, out);
}

/// Loads a structured spectrum file (the canonical JSON form).
inline SpectrumResult load_spectrum(const std::string& path) {
  const detail::json doc = detail::parse_file(path);
  detail::check_format_version(doc, path);
  SpectrumResult r;
  const detail::json& fp = detail::field(doc, "cell_fingerprint", path);
  if (!fp.is_string()) {
    throw ParseError(path + ": 'cell_fingerprint' must be a string");
  }
  r.cell_fingerprint = fp.get<std::string>();
  r.config = detail::config_from_json(detail::field(doc, "config", path),
                                      path + ": config");
  r.per_sequence = detail::mat_from_json(
      detail::field(doc, "per_sequence", path), path + ": per_sequence");
  r.mean = detail::vec_from_json(detail::field(doc, "mean", path),
                                 path + ": mean");
  r.std = detail::vec_from_json(detail::field(doc, "std", path), path + ": std");
  const detail::json& traces = detail::field(doc, "traces", path);
  if (!traces.is_array()) throw ParseError(path + ": 'traces' must be an array");
  for (std::size_t j = 0; j < traces.size(); ++j) {
    const std::string where = path + ": trace " + std::to_string(j + 1);
    const detail::json& jt = traces[j];
    const detail::json& times = detail::field(jt, "t", where);
    const detail::json& lambdas = detail::field(jt, "lambda", where);
    if (!times.is_array() || !lambdas.is_array() ||
        times.size() != lambdas.size()) {
      throw ParseError(where + ": 't' and 'lambda' must be equal-length arrays");
    }
    Trace tr;
    tr.reserve(times.size());
    for (std::size_t s = 0; s < times.size(); ++s) {
      TracePoint p;
      if (!times[s].is_number_integer()) {
        throw ParseError(where + ": t entries must be integers");
      }
      p.t = times[s].get<long>();
      p.lambda = detail::vec_from_json(
          lambdas[s], where + ", sample " + std::to_string(s + 1));
      tr.push_back(std::move(p));
    }
    r.traces.push_back(std::move(tr));
  }
  if (r.mean.size() != r.per_sequence.cols() ||
      r.std.size() != r.per_sequence.cols()) {
    throw DimensionError(path +
                         ": mean/std length does not match per_sequence width");
  }
  return r;
}

/// Writes input sequences: one comma-separated row of decimal floats per time
/// step, one blank line between sequences, newline-terminated.
inline void save_sequences(const std::vector<Mat>& sequences,
                           const std::string& path) {
  if (sequences.empty()) throw DimensionError("save_sequences: empty batch");
  std::string out;
  for (std::size_t b = 0; b < sequences.size(); ++b) {
    if (b > 0) out += "\n";
    const Mat& m = sequences[b];
    for (Index r = 0; r < m.rows(); ++r) {
      for (Index c = 0; c < m.cols(); ++c) {
        if (c > 0) out += ",";
        out += format_double(m(r, c));
      }
      out += "\n";
    }
  }
  detail::write_file(path, out);
}

/// Loads input sequences from the blank-line-separated tabular format. All
/// rows across all blocks must have one fixed width (n_in); violations name
/// the line, block, and row.
inline std::vector<Mat> load_sequences(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<Mat> out;
  std::vector<std::vector<double>> block;
  Index width = -1;
  std::string line;
  long line_no = 0;

  auto flush_block = [&] {
    if (block.empty()) return;
    Mat m(static_cast<Index>(block.size()), width);
    for (std::size_t r = 0; r < block.size(); ++r) {
      for (Index c = 0; c < width; ++c) m(static_cast<Index>(r), c) = block[r][static_cast<std::size_t>(c)];
    }
    out.push_back(std::move(m));
    block.clear();
  };

  while (std::getline(in, line)) {
    ++line_no;
    // Trim trailing carriage return so files from any platform load.
    if (!line.empty() && line.back() == '\r') line.pop_back();
    bool blank = true;
    for (const char ch : line) {
      if (ch != ' ' && ch != '\t') { blank = false; break; }
    }
    if (blank) {
      flush_block();
      continue;
    }
    std::vector<double> row;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (true) {
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      double v = 0.0;
      const auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc()) {
        throw ParseError(path + ":line " + std::to_string(line_no) +
                         ": cannot parse value " + std::to_string(row.size() + 1) +
                         " (block " + std::to_string(out.size() + 1) + ", row " +
                         std::to_string(block.size() + 1) + ")");
      }
      row.push_back(v);
      p = res.ptr;
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      if (p == end) break;
      if (*p != ',') {
        throw ParseError(path + ":line " + std::to_string(line_no) +
                         ": expected ',' after value " +
                         std::to_string(row.size()) + " (block " +
                         std::to_string(out.size() + 1) + ", row " +
                         std::to_string(block.size() + 1) + ")");
      }
      ++p;
    }
    if (width < 0) width = static_cast<Index>(row.size());
    if (static_cast<Index>(row.size()) != width) {
      throw ParseError(path + ":line " + std::to_string(line_no) + ": row has " +
                       std::to_string(row.size()) + " values but width " +
                       std::to_string(width) + " was established (block " +
                       std::to_string(out.size() + 1) + ", row " +
                       std::to_string(block.size() + 1) + ")");
    }
    block.push_back(std::move(row));
  }
  flush_block();
  if (out.empty()) throw ParseError(path + ": no sequences found");
  return out;
}

}  // namespace lyaprnn
