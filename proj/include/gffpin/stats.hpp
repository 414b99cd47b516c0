#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace gffpin {

struct MeanError {
  double mean = 0.0;
  double error = 0.0;
};

/// Smallest block count for which an error bar is reported at all.
inline constexpr std::size_t kMinBlocks = 8;

/// Mean and batch-means standard error with `blocks` equal blocks (the tail that does
/// not fill a block is dropped from the error, not from the mean). Throws
/// StatisticsGuardError when blocks < kMinBlocks or the series is shorter than blocks.
MeanError batch_means(std::span<const double> series, std::size_t blocks = 32);

/// Integrated autocorrelation time, Sokal's self-consistent window with c = 6.
/// Returns 0.5 for an uncorrelated (or constant) series.
double integrated_autocorrelation_time(std::span<const double> series);

double sample_mean(std::span<const double> x);

/// Unbiased sample variance and the standard error of that variance under approximate
/// normality, sqrt(2 / (n - 1)) * var.
MeanError sample_variance(std::span<const double> x);

/// Jackknife over equal blocks of `series` for the statistic log(mean(series)).
MeanError jackknife_log_mean(std::span<const double> block_sums, std::span<const double> block_counts);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_error = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};

/// Least squares y ~ intercept + slope x (or y ~ slope x through the origin).
/// R^2 is always measured against the centered total sum of squares.
LinearFit fit_line(std::span<const double> x, std::span<const double> y, bool through_origin = false);

/// Gauss-Legendre nodes and weights on [lo, hi].
struct Quadrature {
  std::vector<double> nodes;
  std::vector<double> weights;
};
Quadrature gauss_legendre(int n, double lo = 0.0, double hi = 1.0);

}  // namespace gffpin
