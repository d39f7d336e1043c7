#pragma once

#include <cmath>
#include <string>

#include "lyaprnn/errors.hpp"
#include "lyaprnn/linalg.hpp"

namespace lyaprnn {

enum class Regime { stable, marginal, chaotic };

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::stable: return "stable";
    case Regime::marginal: return "marginal";
    case Regime::chaotic: return "chaotic";
  }
  return "?";
}

/// Summary statistics of one spectrum (units: nats per step).
struct SpectrumFeatures {
  double lambda_max = 0.0;
  double lambda_mean = 0.0;
  double lambda_variance = 0.0;  // population variance over entries
  Regime regime = Regime::stable;
};

inline constexpr double kDefaultMarginalTol = 0.05;

/// lambda_max is the max over entries (not the first entry, which finite-time
/// estimates may leave out of order); variance is the population variance.
/// regime: chaotic if lambda_max > marginal_tol, stable if < -marginal_tol,
/// marginal otherwise.
inline SpectrumFeatures summarize(const Vec& spectrum,
                                  double marginal_tol = kDefaultMarginalTol) {
  if (spectrum.size() == 0) throw DimensionError("summarize: empty spectrum");
  if (marginal_tol < 0.0) {
    throw DimensionError("summarize: marginal_tol must be >= 0");
  }
  SpectrumFeatures f;
  f.lambda_max = spectrum.maxCoeff();
  f.lambda_mean = spectrum.mean();
  f.lambda_variance =
      (spectrum.array() - f.lambda_mean).square().sum() /
      static_cast<double>(spectrum.size());
  f.regime = f.lambda_max > marginal_tol    ? Regime::chaotic
             : f.lambda_max < -marginal_tol ? Regime::stable
                                            : Regime::marginal;
  return f;
}

/// Root-mean-square difference over exponent index:
/// sqrt((1/k) sum_i (a_i - b_i)^2).
inline double rms_distance(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) {
    throw DimensionError("rms_distance: spectra have lengths " +
                         std::to_string(a.size()) + " and " +
                         std::to_string(b.size()));
  }
  if (a.size() == 0) throw DimensionError("rms_distance: empty spectra");
  return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

/// mean(a) - mean(b).
inline double mean_difference(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) {
    throw DimensionError("mean_difference: spectra have lengths " +
                         std::to_string(a.size()) + " and " +
                         std::to_string(b.size()));
  }
  if (a.size() == 0) throw DimensionError("mean_difference: empty spectra");
  return a.mean() - b.mean();
}

}  // namespace lyaprnn
