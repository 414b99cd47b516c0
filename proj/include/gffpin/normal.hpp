#pragma once

#include <cmath>
#include <numbers>
#include <utility>

#include "gffpin/rng.hpp"

namespace gffpin {

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

/// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Upper tail P(Z > x).
inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

/// log P(Z > x), finite for every finite x.
double log_normal_sf(double x);

/// Inverse of the standard normal CDF (Wichura AS241, relative error ~1e-16).
double normal_quantile(double p);

inline double log_add_exp(double x, double y) {
  if (x < y) std::swap(x, y);
  if (y == -INFINITY) return x;
  return x + std::log1p(std::exp(y - x));
}

/// Region masses of N(mean, 1) relative to the well [-a, a].
struct WellMasses {
  double log_inside;
  double log_outside;
};

WellMasses well_masses(double mean, double a);

/// Standard normal conditioned on Z > lo, given mass = P(Z > lo).
///
/// Inverse-CDF when the mass is at least 1e-12, exponential-proposal rejection otherwise.
double sample_upper_tail(double lo, double mass, CounterStream& rng);

/// Standard normal conditioned on lo <= Z <= hi.
double sample_interval(double lo, double hi, CounterStream& rng);

/// Smallest region mass sampled by inverse CDF; below it the tail samplers reject.
inline constexpr double kInverseCdfMassFloor = 1e-12;

}  // namespace gffpin
