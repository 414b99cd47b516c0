#include "gffpin/normal.hpp"

#include <algorithm>

namespace gffpin {

double log_normal_sf(double x) {
  if (x < 30.0) return std::log(normal_sf(x));
  // Asymptotic Mills-ratio series; truncation error below 2e-12 relative for x >= 30.
  const double z = 1.0 / (x * x);
  const double series = 1.0 - z * (1.0 - z * (3.0 - z * (15.0 - z * 105.0)));
  return -0.5 * x * x - std::log(x) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
}

double normal_quantile(double p) {
  if (p <= 0.0) return -INFINITY;
  if (p >= 1.0) return INFINITY;
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num =
        (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r + 6.7265770927008700853e+4) * r +
             4.5921953931549871457e+4) * r + 1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
          1.3314166789178437745e+2) * r + 3.3871328727963666080e+0);
    const double den =
        (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r + 3.9307895800092710610e+4) * r +
             2.1213794301586595867e+4) * r + 5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
          4.2313330701600911252e+1) * r + 1.0);
    return q * num / den;
  }
  double r = std::sqrt(-std::log(q < 0.0 ? p : 1.0 - p));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    const double num =
        (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r + 2.41780725177450611770e-1) * r +
             1.27045825245236838258e+0) * r + 3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
          4.63033784615654529590e+0) * r + 1.42343711074968357734e+0);
    const double den =
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r + 1.51986665636164571966e-2) * r +
             1.48103976427480074590e-1) * r + 6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
          2.05319162663775882187e+0) * r + 1.0);
    val = num / den;
  } else {
    r -= 5.0;
    const double num =
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 1.24266094738807843860e-3) * r +
             2.65321895265761230930e-2) * r + 2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
          5.46378491116411436990e+0) * r + 6.65790464350110377720e+0);
    const double den =
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r + 1.84631831751005468180e-5) * r +
             7.86869131145613259100e-4) * r + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
          5.99832206555887937690e-1) * r + 1.0);
    val = num / den;
  }
  return q < 0.0 ? -val : val;
}

WellMasses well_masses(double mean, double a) {
  const double m = std::fabs(mean);
  const double log_right = log_normal_sf(a - m);
  const double log_left = log_normal_sf(a + m);
  double log_inside;
  if (m < a) {
    log_inside = std::log1p(-(std::exp(log_right) + std::exp(log_left)));
  } else {
    const double log_near = log_normal_sf(m - a);
    log_inside = log_near + std::log1p(-std::exp(log_left - log_near));
  }
  return {log_inside, log_add_exp(log_right, log_left)};
}

namespace {

// Robert (1995) optimal exponential proposal for Z > lo, lo > 0.
double reject_tail(double lo, CounterStream& rng) {
  const double alpha = 0.5 * (lo + std::sqrt(lo * lo + 4.0));
  for (;;) {
    const double z = lo - std::log(rng.uniform()) / alpha;
    const double t = z - alpha;
    if (rng.uniform() <= std::exp(-0.5 * t * t)) return z;
  }
}

// Z in [lo, hi] with 0 <= lo and a tiny mass.
double reject_interval(double lo, double hi, CounterStream& rng) {
  if ((hi - lo) * lo < 1.0) {
    for (;;) {
      const double z = lo + (hi - lo) * rng.uniform();
      if (rng.uniform() <= std::exp(-0.5 * (z * z - lo * lo))) return z;
    }
  }
  for (;;) {
    const double z = reject_tail(lo, rng);
    if (z <= hi) return z;
  }
}

}  // namespace

double sample_upper_tail(double lo, double mass, CounterStream& rng) {
  if (mass >= kInverseCdfMassFloor) return -normal_quantile(rng.uniform() * mass);
  return reject_tail(lo, rng);
}

double sample_interval(double lo, double hi, CounterStream& rng) {
  if (hi <= 0.0) return -sample_interval(-hi, -lo, rng);
  if (lo >= 0.0) {
    const double s_lo = normal_sf(lo);
    const double s_hi = normal_sf(hi);
    const double mass = s_lo - s_hi;
    if (mass >= kInverseCdfMassFloor) {
      const double x = -normal_quantile(s_hi + rng.uniform() * mass);
      return std::clamp(x, lo, hi);
    }
    return reject_interval(lo, hi, rng);
  }
  const double c_lo = normal_cdf(lo);
  const double mass = normal_cdf(hi) - c_lo;
  if (mass < kInverseCdfMassFloor) return lo + (hi - lo) * rng.uniform();
  return std::clamp(normal_quantile(c_lo + rng.uniform() * mass), lo, hi);
}

}  // namespace gffpin
