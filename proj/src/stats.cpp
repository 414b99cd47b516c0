#include "gffpin/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "gffpin/error.hpp"

namespace gffpin {

double sample_mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

MeanError batch_means(std::span<const double> series, std::size_t blocks) {
  if (blocks < kMinBlocks) throw StatisticsGuardError("batch means need at least 8 blocks");
  if (series.size() < blocks)
    throw StatisticsGuardError("series of length " + std::to_string(series.size()) + " cannot fill " +
                               std::to_string(blocks) + " blocks");
  const std::size_t len = series.size() / blocks;
  std::vector<double> means(blocks);
  for (std::size_t b = 0; b < blocks; ++b) means[b] = sample_mean(series.subspan(b * len, len));
  const double grand = sample_mean(means);
  double ss = 0.0;
  for (double m : means) ss += (m - grand) * (m - grand);
  return {sample_mean(series), std::sqrt(ss / static_cast<double>(blocks * (blocks - 1)))};
}

double integrated_autocorrelation_time(std::span<const double> series) {
  const std::size_t n = series.size();
  if (n < 4) return 0.5;
  const double mean = sample_mean(series);
  double c0 = 0.0;
  for (double v : series) c0 += (v - mean) * (v - mean);
  c0 /= static_cast<double>(n);
  // A series that is constant up to rounding has no meaningful correlation.
  double scale = 0.0;
  for (double v : series) scale = std::max(scale, std::fabs(v));
  if (c0 <= 1e-24 * scale * scale) return 0.5;
  double tau = 0.5;
  for (std::size_t t = 1; t < n / 2; ++t) {
    double ct = 0.0;
    for (std::size_t i = 0; i + t < n; ++i) ct += (series[i] - mean) * (series[i + t] - mean);
    tau += ct / (static_cast<double>(n) * c0);
    if (static_cast<double>(t) >= 6.0 * tau) break;
  }
  return std::max(tau, 0.5);
}

MeanError sample_variance(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 2) throw StatisticsGuardError("variance needs at least two samples");
  const double mean = sample_mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double var = ss / static_cast<double>(n - 1);
  return {var, var * std::sqrt(2.0 / static_cast<double>(n - 1))};
}

MeanError jackknife_log_mean(std::span<const double> block_sums, std::span<const double> block_counts) {
  const std::size_t b = block_sums.size();
  if (b < kMinBlocks || block_counts.size() != b) throw StatisticsGuardError("jackknife needs at least 8 blocks");
  const double total = std::accumulate(block_sums.begin(), block_sums.end(), 0.0);
  const double count = std::accumulate(block_counts.begin(), block_counts.end(), 0.0);
  const double full = std::log(total / count);
  std::vector<double> loo(b);
  for (std::size_t i = 0; i < b; ++i) loo[i] = std::log((total - block_sums[i]) / (count - block_counts[i]));
  const double mean = sample_mean(loo);
  double ss = 0.0;
  for (double v : loo) ss += (v - mean) * (v - mean);
  return {full, std::sqrt(ss * static_cast<double>(b - 1) / static_cast<double>(b))};
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y, bool through_origin) {
  const std::size_t n = x.size();
  if (n != y.size()) throw ConfigError("fit_line: x and y differ in length");
  if (n < 2) throw StatisticsGuardError("fit_line needs at least two points");
  LinearFit fit;
  fit.points = n;
  const double my = sample_mean(y);
  if (through_origin) {
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sxx += x[i] * x[i];
      sxy += x[i] * y[i];
    }
    if (sxx <= 0.0) throw StatisticsGuardError("fit_line: degenerate abscissae");
    fit.slope = sxy / sxx;
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) rss += std::pow(y[i] - fit.slope * x[i], 2);
    fit.slope_error = std::sqrt(rss / static_cast<double>(n - 1) / sxx);
    double tss = 0.0;
    for (double v : y) tss += (v - my) * (v - my);
    fit.r2 = tss > 0.0 ? 1.0 - rss / tss : 1.0;
    return fit;
  }
  const double mx = sample_mean(x);
  double sxx = 0.0, sxy = 0.0, tss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    tss += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0) throw StatisticsGuardError("fit_line: degenerate abscissae");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) rss += std::pow(y[i] - fit.intercept - fit.slope * x[i], 2);
  fit.slope_error = n > 2 ? std::sqrt(rss / static_cast<double>(n - 2) / sxx) : 0.0;
  fit.r2 = tss > 0.0 ? 1.0 - rss / tss : 1.0;
  return fit;
}

Quadrature gauss_legendre(int n, double lo, double hi) {
  if (n < 1) throw ConfigError("Gauss-Legendre needs at least one node");
  Quadrature q;
  q.nodes.resize(n);
  q.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::fabs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
    q.nodes[i] = mid - half * x;
    q.nodes[n - 1 - i] = mid + half * x;
    q.weights[i] = q.weights[n - 1 - i] = half * w;
  }
  return q;
}

}  // namespace gffpin
