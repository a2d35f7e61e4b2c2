#include "fuzzclear/fuzzy_engine.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fuzzclear {

namespace {

void require_finite(std::initializer_list<double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument(std::string(what) + ": parameters must be finite");
    }
  }
}

}  // namespace

MembershipFunction MembershipFunction::triangle(double a, double b, double c) {
  require_finite({a, b, c}, "triangle");
  if (!(a <= b && b <= c)) {
    std::ostringstream os;
    os << "triangle(" << a << ", " << b << ", " << c << "): requires a <= b <= c";
    throw std::invalid_argument(os.str());
  }
  return {MfShape::Triangle, {a, b, c, 0.0}};
}

MembershipFunction MembershipFunction::trapezoid(double a, double b, double c, double d) {
  require_finite({a, b, c, d}, "trapezoid");
  if (!(a <= b && b <= c && c <= d)) {
    std::ostringstream os;
    os << "trapezoid(" << a << ", " << b << ", " << c << ", " << d
       << "): requires a <= b <= c <= d";
    throw std::invalid_argument(os.str());
  }
  return {MfShape::Trapezoid, {a, b, c, d}};
}

MembershipFunction MembershipFunction::crisp_below(double t) {
  require_finite({t}, "crisp_below");
  return {MfShape::CrispBelow, {t, 0.0, 0.0, 0.0}};
}

MembershipFunction MembershipFunction::crisp_at_or_above(double t) {
  require_finite({t}, "crisp_at_or_above");
  return {MfShape::CrispAtOrAbove, {t, 0.0, 0.0, 0.0}};
}

MembershipFunction MembershipFunction::from_params(const std::string& shape,
                                                   const std::vector<double>& p) {
  auto expect = [&](std::size_t n) {
    if (p.size() != n) {
      throw std::invalid_argument(shape + " expects " + std::to_string(n) +
                                  " parameters, got " + std::to_string(p.size()));
    }
  };
  if (shape == "triangle") {
    expect(3);
    return triangle(p[0], p[1], p[2]);
  }
  if (shape == "trapezoid") {
    expect(4);
    return trapezoid(p[0], p[1], p[2], p[3]);
  }
  if (shape == "crisp_below") {
    expect(1);
    return crisp_below(p[0]);
  }
  if (shape == "crisp_at_or_above") {
    expect(1);
    return crisp_at_or_above(p[0]);
  }
  throw std::invalid_argument("unknown membership shape '" + shape + "'");
}

double MembershipFunction::operator()(double x) const {
  if (std::isnan(x)) return 0.0;
  const auto [a, b, c, d] = p_;
  switch (shape_) {
    case MfShape::Triangle:
      if (x < a || x > c) return 0.0;
      if (x < b) return (x - a) / (b - a);
      if (x > b) return (c - x) / (c - b);
      return 1.0;
    case MfShape::Trapezoid:
      if (x < a || x > d) return 0.0;
      if (x < b) return (x - a) / (b - a);
      if (x <= c) return 1.0;
      return (d - x) / (d - c);
    case MfShape::CrispBelow:
      return x < a ? 1.0 : 0.0;
    case MfShape::CrispAtOrAbove:
      return x >= a ? 1.0 : 0.0;
  }
  return 0.0;
}

std::vector<double> MembershipFunction::params() const {
  switch (shape_) {
    case MfShape::Triangle:
      return {p_[0], p_[1], p_[2]};
    case MfShape::Trapezoid:
      return {p_[0], p_[1], p_[2], p_[3]};
    default:
      return {p_[0]};
  }
}

std::string MembershipFunction::shape_name() const {
  switch (shape_) {
    case MfShape::Triangle: return "triangle";
    case MfShape::Trapezoid: return "trapezoid";
    case MfShape::CrispBelow: return "crisp_below";
    case MfShape::CrispAtOrAbove: return "crisp_at_or_above";
  }
  return {};
}

double MembershipFunction::max_slope() const {
  auto inv = [](double w) { return w > 0.0 ? 1.0 / w : 0.0; };
  switch (shape_) {
    case MfShape::Triangle:
      return std::max(inv(p_[1] - p_[0]), inv(p_[2] - p_[1]));
    case MfShape::Trapezoid:
      return std::max(inv(p_[1] - p_[0]), inv(p_[3] - p_[2]));
    default:
      return 0.0;
  }
}

double evaluate_mf(const MembershipFunction& mf, double x) { return mf(x); }

double Consequent::operator()(double x1, double x2) const {
  double y = c0 + c1 * x1 + c2 * x2;
  if (reciprocal != 0.0) y += reciprocal / std::max(x1, kReciprocalGuard);
  return y;
}

RuleBaseHole::RuleBaseHole(double x1_, double x2_)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << "rule-base hole: no rule fires at (" << x1_ << ", " << x2_ << ")";
        return os.str();
      }()),
      x1(x1_),
      x2(x2_) {}

TskSystem::TskSystem(std::string name, InputVariable first, InputVariable second,
                     std::vector<TskRule> rules, double out_lo, double out_hi)
    : name_(std::move(name)),
      inputs_{std::move(first), std::move(second)},
      rules_(std::move(rules)),
      out_lo_(out_lo),
      out_hi_(out_hi) {
  if (!(out_lo_ <= out_hi_)) {
    throw std::invalid_argument(name_ + ": output range must satisfy lo <= hi");
  }
  for (const auto& in : inputs_) {
    if (!(in.lo < in.hi)) throw std::invalid_argument(name_ + "." + in.name + ": empty domain");
    if (!(in.consequent_scale > 0.0)) {
      throw std::invalid_argument(name_ + "." + in.name + ": consequent scale must be positive");
    }
  }
  if (rules_.empty()) throw std::invalid_argument(name_ + ": no rules");
  resolve();
}

void TskSystem::resolve() {
  auto index_of = [this](int input, const std::optional<std::string>& label) {
    if (!label) return -1;
    const auto& terms = inputs_[input].terms;
    for (std::size_t i = 0; i < terms.size(); ++i) {
      if (terms[i].label == *label) return static_cast<int>(i);
    }
    throw std::invalid_argument(name_ + ": rule references unknown term '" + *label +
                                "' of input '" + inputs_[input].name + "'");
  };
  resolved_.clear();
  resolved_.reserve(rules_.size());
  for (const auto& r : rules_) {
    resolved_.push_back({index_of(0, r.first), index_of(1, r.second), r.consequent});
  }
}

InferenceDetail TskSystem::infer_detail(double x1, double x2) const {
  if (std::isnan(x1) || std::isnan(x2)) {
    throw std::invalid_argument(name_ + ": NaN input");
  }
  InferenceDetail out;
  out.x1 = std::clamp(x1, inputs_[0].lo, inputs_[0].hi);
  out.x2 = std::clamp(x2, inputs_[1].lo, inputs_[1].hi);

  std::array<std::vector<double>, 2> mu;
  for (int i = 0; i < 2; ++i) {
    const double x = i == 0 ? out.x1 : out.x2;
    for (const auto& t : inputs_[i].terms) mu[i].push_back(t.mf(x));
  }
  const double s1 = out.x1 / inputs_[0].consequent_scale;
  const double s2 = out.x2 / inputs_[1].consequent_scale;

  double num = 0.0;
  out.weights.reserve(resolved_.size());
  out.consequents.reserve(resolved_.size());
  for (const auto& r : resolved_) {
    const double w = (r.first < 0 ? 1.0 : mu[0][r.first]) * (r.second < 0 ? 1.0 : mu[1][r.second]);
    const double y = r.consequent(s1, s2);
    out.weights.push_back(w);
    out.consequents.push_back(y);
    if (w > 0.0) {
      num += w * y;
      out.total_weight += w;
    }
  }
  if (!(out.total_weight > 0.0)) throw RuleBaseHole(out.x1, out.x2);
  out.raw = num / out.total_weight;
  out.output = std::clamp(out.raw, out_lo_, out_hi_);
  return out;
}

double TskSystem::infer(double x1, double x2) const { return infer_detail(x1, x2).output; }

std::vector<double> TskSystem::firing_strengths(double x1, double x2) const {
  return infer_detail(x1, x2).weights;
}

TskSystem TskSystem::with_membership(const std::string& variable, const std::string& label,
                                     const MembershipFunction& mf) const {
  TskSystem copy = *this;
  for (auto& in : copy.inputs_) {
    if (in.name != variable) continue;
    for (auto& t : in.terms) {
      if (t.label == label) {
        t.mf = mf;
        return copy;
      }
    }
    throw std::out_of_range(name_ + "." + variable + ": no term labelled '" + label + "'");
  }
  throw std::out_of_range(name_ + ": no input variable '" + variable + "'");
}

}  // namespace fuzzclear
