#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gffpin/lattice.hpp"

namespace gffpin {

enum class LawKind { bernoulli, gaussian, two_point, constant };

/// Law of a single disorder variable e_x. Every variant except `constant` has mean 0 and
/// variance 1; `constant` is the homogeneous case e_x = 0.
class DisorderLaw {
 public:
  static DisorderLaw bernoulli() { return DisorderLaw(LawKind::bernoulli, 0.5, -1.0, 1.0); }
  static DisorderLaw gaussian() { return DisorderLaw(LawKind::gaussian, 0.0, 0.0, 0.0); }
  static DisorderLaw constant() { return DisorderLaw(LawKind::constant, 0.0, 0.0, 0.0); }
  /// P(e = v_minus) = p, P(e = v_plus) = 1 - p; rejected unless mean 0 and variance 1.
  static DisorderLaw two_point(double p, double v_minus, double v_plus);
  /// Two-point law with P(e = v_minus) = p and the values fixed by the moment constraints.
  static DisorderLaw two_point(double p);

  /// Parses "bernoulli", "gaussian", "constant"; two_point needs its parameters.
  static DisorderLaw from_name(const std::string& name, double p = 0.5);

  LawKind kind() const { return kind_; }
  double p() const { return p_; }
  double v_minus() const { return v_minus_; }
  double v_plus() const { return v_plus_; }
  std::string name() const;

  /// Draw from a uniform in (0, 1).
  double draw(double u) const;

  /// log E exp(b e); throws AssumptionViolation when it is not finite.
  double log_mgf(double b) const;

  bool operator==(const DisorderLaw&) const = default;

 private:
  DisorderLaw(LawKind kind, double p, double vm, double vp) : kind_(kind), p_(p), v_minus_(vm), v_plus_(vp) {}

  LawKind kind_;
  double p_;
  double v_minus_;
  double v_plus_;
};

/// Square-well parameters at unit inverse temperature: well [-a, a], rewards b*e_x + h.
struct PinningParams {
  double a = 1.0;
  double b = 0.0;
  double h = 0.0;

  void validate() const;
  bool operator==(const PinningParams&) const = default;
};

/// Strength of the homogeneous model equal in law to the annealed one: log E exp(b e_0 + h).
struct AnnealedStrength {
  double ell;
};

/// A frozen disorder realization on a box: site-ordered rewards w_x = b e_x + h.
struct EnvironmentRealization {
  DisorderLaw law = DisorderLaw::constant();
  PinningParams params;
  std::uint64_t seed = 0;
  int d = 1;
  int n = 1;
  std::vector<double> rewards;
};

EnvironmentRealization sample_environment(const DisorderLaw& law, const PinningParams& params, const Box& box,
                                          std::uint64_t seed);

/// Every site carries the same reward; used for the homogeneous and annealed models.
EnvironmentRealization homogeneous_environment(const Box& box, double a, double reward);

AnnealedStrength annealed_strength(const DisorderLaw& law, const PinningParams& params);

/// gamma_x = exp(w_x - ell).
std::vector<double> tilt_factors(const EnvironmentRealization& env, AnnealedStrength ell);

/// Text format: a comment line, a JSON header line, then one reward per line (%.17g).
void write_environment(std::ostream& out, const EnvironmentRealization& env);
EnvironmentRealization read_environment(std::istream& in);
void save_environment(const std::string& path, const EnvironmentRealization& env);
EnvironmentRealization load_environment(const std::string& path);

}  // namespace gffpin
