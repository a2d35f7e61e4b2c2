#pragma once

// Two-input Takagi-Sugeno-Kang inference: piecewise-linear memberships,
// product t-norm firing, weighted-average defuzzification.

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fuzzclear {

enum class MfShape { Triangle, Trapezoid, CrispBelow, CrispAtOrAbove };

class MembershipFunction {
 public:
  static MembershipFunction triangle(double a, double b, double c);
  static MembershipFunction trapezoid(double a, double b, double c, double d);
  /// 1 for x < t, 0 otherwise.
  static MembershipFunction crisp_below(double t);
  /// 1 for x >= t, 0 otherwise.
  static MembershipFunction crisp_at_or_above(double t);

  /// Builds from a shape name ("triangle", "trapezoid", "crisp_below",
  /// "crisp_at_or_above") and its parameter list.
  static MembershipFunction from_params(const std::string& shape,
                                        const std::vector<double>& params);

  double operator()(double x) const;

  MfShape shape() const { return shape_; }
  std::vector<double> params() const;
  std::string shape_name() const;

  /// Largest |dμ/dx| over the support; 0 for crisp shapes.
  double max_slope() const;

 private:
  MembershipFunction(MfShape shape, std::array<double, 4> p) : shape_(shape), p_(p) {}

  MfShape shape_;
  std::array<double, 4> p_;
};

/// Free-function form of mf(x); NaN maps to 0.
double evaluate_mf(const MembershipFunction& mf, double x);

struct Term {
  std::string label;
  MembershipFunction mf;
};

struct InputVariable {
  std::string name;
  double lo = 0.0;
  double hi = 1.0;
  std::vector<Term> terms;
  // Consequents see x / consequent_scale (e.g. meters -> kilometers).
  double consequent_scale = 1.0;
};

/// y = c0 + reciprocal / max(x1, kReciprocalGuard) + c1 * x1 + c2 * x2,
/// evaluated on consequent-scaled inputs.
struct Consequent {
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double reciprocal = 0.0;

  static constexpr double kReciprocalGuard = 1e-3;

  static Consequent constant(double c) { return {c, 0.0, 0.0, 0.0}; }
  double operator()(double x1, double x2) const;
};

/// Antecedent labels refer to terms of the first and second input. An empty
/// optional is a wildcard (membership 1 over the whole domain).
struct TskRule {
  std::optional<std::string> first;
  std::optional<std::string> second;
  Consequent consequent;
};

class RuleBaseHole : public std::runtime_error {
 public:
  RuleBaseHole(double x1, double x2);
  double x1;
  double x2;
};

struct InferenceDetail {
  double x1 = 0.0;  // clamped inputs
  double x2 = 0.0;
  std::vector<double> weights;      // per rule
  std::vector<double> consequents;  // per rule
  double total_weight = 0.0;
  double raw = 0.0;     // weighted average before output clamp
  double output = 0.0;  // clamped to the output range
};

class TskSystem {
 public:
  TskSystem(std::string name, InputVariable first, InputVariable second,
            std::vector<TskRule> rules, double out_lo, double out_hi);

  double infer(double x1, double x2) const;
  InferenceDetail infer_detail(double x1, double x2) const;
  std::vector<double> firing_strengths(double x1, double x2) const;

  /// Copy with one membership function replaced. Throws std::out_of_range
  /// for an unknown variable or label.
  TskSystem with_membership(const std::string& variable, const std::string& label,
                            const MembershipFunction& mf) const;

  const std::string& name() const { return name_; }
  const InputVariable& first() const { return inputs_[0]; }
  const InputVariable& second() const { return inputs_[1]; }
  const std::vector<TskRule>& rules() const { return rules_; }
  double out_lo() const { return out_lo_; }
  double out_hi() const { return out_hi_; }

 private:
  struct ResolvedRule {
    int first = -1;  // -1 = wildcard
    int second = -1;
    Consequent consequent;
  };

  void resolve();

  std::string name_;
  std::array<InputVariable, 2> inputs_;
  std::vector<TskRule> rules_;
  std::vector<ResolvedRule> resolved_;
  double out_lo_;
  double out_hi_;
};

}  // namespace fuzzclear
