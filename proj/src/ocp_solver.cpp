#include "fuzzclear/ocp_solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>

#include <Eigen/Dense>

namespace fuzzclear {

namespace {

struct InterpPoint {
  int j = 0;         // left node
  double frac = 0.0; // weight of node j + 1
};

InterpPoint locate(int n_nodes, double s) {
  if (n_nodes <= 1) return {0, 0.0};
  const double u = std::clamp(s, 0.0, 1.0) * (n_nodes - 1);
  const int j = std::min(static_cast<int>(std::floor(u)), n_nodes - 2);
  return {j, u - j};
}

Vec3 interpolate(const ControlNodes& nodes, const InterpPoint& at) {
  if (nodes.size() == 1) return nodes.front();
  return (1.0 - at.frac) * nodes[at.j] + at.frac * nodes[at.j + 1];
}

Vec3 clamp_ball(const Vec3& a, double a_max) {
  const double n = a.norm();
  return n > a_max ? Vec3(a * (a_max / n)) : a;
}

// Transpose of the clamp Jacobian applied to g.
Vec3 clamp_ball_vjp(const Vec3& raw, double a_max, const Vec3& g) {
  const double n = raw.norm();
  if (n <= a_max) return g;
  const Vec3 u = raw / n;
  return (a_max / n) * (g - u * u.dot(g));
}

double project_tf(const OcpProblem& p, double tf) { return std::clamp(tf, p.t_min, p.t_max); }

bool all_finite(const AircraftState& s) {
  return s.position.allFinite() && s.velocity.allFinite();
}

AircraftState rk4_step(const AircraftState& x, double h, const Vec3& a0, const Vec3& am,
                       const Vec3& a1) {
  // f(p, v) = (v, a(t)); stages written out for the double integrator.
  const Vec3 k1p = x.velocity;
  const Vec3 k1v = a0;
  const Vec3 k2p = x.velocity + 0.5 * h * k1v;
  const Vec3 k2v = am;
  const Vec3 k3p = x.velocity + 0.5 * h * k2v;
  const Vec3 k3v = am;
  const Vec3 k4p = x.velocity + h * k3v;
  const Vec3 k4v = a1;
  AircraftState out;
  out.position = x.position + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
  out.velocity = x.velocity + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
  return out;
}

double hinge(double x) { return x > 0.0 ? x : 0.0; }

// Pointwise bound violation, squared hinges; adds d/dv into grad when given.
double bounds_violation(const AircraftModel& m, const Vec3& v, Vec3* grad) {
  const double speed = v.norm();
  const double over = hinge(speed - m.v_max);
  const double under = hinge(m.v_min - speed);
  const double vert = hinge(std::abs(v.z()) - m.climb_rate_max);
  if (grad) {
    if (speed > 0.0) *grad += (2.0 * over - 2.0 * under) * (v / speed);
    if (vert > 0.0) grad->z() += 2.0 * vert * (v.z() > 0.0 ? 1.0 : -1.0);
  }
  return over * over + under * under + vert * vert;
}

// First-order model of every penalty term at z. Each hinge argument q_i
// (zone depth, speed over/under bound, climb-rate excess) is linearized
// whether or not it is currently violated, so a step model sees the walls it
// is about to hit. Penalty term i contributes weight_i * max(0, q_i)^2 and
// the terminal term wTerminal * |e|^2.
struct Linearization {
  Eigen::MatrixXd jac;  // rows dq_i/dz
  Eigen::VectorXd q;
  Eigen::VectorXd weight;
  // For velocity hinges, dq/dv . (v - v0); NaN for zone rows.
  Eigen::VectorXd velocity_excess;
  Eigen::Matrix<double, 3, Eigen::Dynamic> terminal_jac;
  Vec3 terminal = Vec3::Zero();
  // Curvature of the violated speed-ceiling hinges, 2 w q nabla^2 |v|. The
  // ceiling is convex in v, so dropping this would make the model overrate
  // steps that slide along it.
  Eigen::MatrixXd curvature;
};

Linearization linearize(const OcpProblem& problem, const DecisionVector& z) {
  const AircraftModel& m = problem.model;
  const int n = problem.grid.integration_steps;
  const int nodes = static_cast<int>(z.controls.size());
  const int dim = 3 * nodes + 1;
  const int col_tf = 3 * nodes;
  const double tf = project_tf(problem, z.t_final);
  const double h = tf / n;

  using Sens = Eigen::Matrix<double, 3, Eigen::Dynamic>;
  // d(clamped control sample)/dz
  auto control_sens = [&](double s, Vec3* value) {
    const InterpPoint at = locate(nodes, s);
    const Vec3 raw = interpolate(z.controls, at);
    *value = clamp_ball(raw, m.a_max);
    Eigen::Matrix3d jc = Eigen::Matrix3d::Identity();
    const double nr = raw.norm();
    if (nr > m.a_max) {
      const Vec3 u = raw / nr;
      jc = (m.a_max / nr) * (Eigen::Matrix3d::Identity() - u * u.transpose());
    }
    Sens c = Sens::Zero(3, dim);
    c.middleCols<3>(3 * at.j) += (nodes == 1 ? 1.0 : 1.0 - at.frac) * jc;
    if (nodes > 1) c.middleCols<3>(3 * (at.j + 1)) += at.frac * jc;
    return c;
  };

  const Eigen::Index rows = static_cast<Eigen::Index>(problem.zones.size() + 3) * (n + 1);
  Linearization lin;
  lin.jac.setZero(rows, dim);
  lin.q.setZero(rows);
  lin.weight.setZero(rows);
  lin.curvature.setZero(dim, dim);
  Eigen::Index r = 0;
  lin.velocity_excess.setConstant(rows, std::numeric_limits<double>::quiet_NaN());
  auto add = [&](double q, const Eigen::RowVectorXd& row, double w) {
    lin.q(r) = q;
    lin.jac.row(r) = row;
    lin.weight(r) = w;
    ++r;
  };

  Vec3 p = problem.initial.position, v = problem.initial.velocity;
  Sens sp = Sens::Zero(3, dim), sv = Sens::Zero(3, dim);
  Vec3 a0;
  Sens c0 = control_sens(0.0, &a0);
  const double wo = problem.weights.obstacle * h, wb = problem.weights.bounds * h;
  for (int k = 0;; ++k) {
    const double t = k * h;
    for (const auto& zone : problem.zones) {
      const Vec3 e = p - zone.center_at(t);
      const double d = e.norm();
      if (d <= 0.0) {
        add(zone.radius, Eigen::RowVectorXd::Zero(dim), wo);
        continue;
      }
      Eigen::RowVectorXd row = (-1.0 / d) * (e.transpose() * sp);
      row(col_tf) += e.dot(zone.velocity) * (static_cast<double>(k) / n) / d;
      add(zone.radius - d, row, wo);
    }
    const double speed = v.norm();
    Eigen::RowVectorXd ds = Eigen::RowVectorXd::Zero(dim);
    if (speed > 0.0) ds = (v.transpose() / speed) * sv;
    const Vec3 dv = v - problem.initial.velocity;
    const double along = speed > 0.0 ? v.dot(dv) / speed : 0.0;
    lin.velocity_excess(r) = along;
    add(speed - m.v_max, ds, wb);
    if (speed > m.v_max) {
      // nabla^2 |v| = (t1 t1' + t2 t2') / |v| with t1, t2 orthonormal to v.
      const Vec3 u = v / speed;
      const Vec3 t1 = u.cross(std::abs(u.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY()).normalized();
      const Vec3 t2 = u.cross(t1);
      Eigen::Matrix<double, Eigen::Dynamic, 2> f(dim, 2);
      f.col(0) = sv.transpose() * t1;
      f.col(1) = sv.transpose() * t2;
      lin.curvature.selfadjointView<Eigen::Lower>().rankUpdate(f, 2.0 * wb * (speed - m.v_max) / speed);
    }
    lin.velocity_excess(r) = -along;
    add(m.v_min - speed, -ds, wb);
    const double sz = v.z() >= 0.0 ? 1.0 : -1.0;
    lin.velocity_excess(r) = sz * dv.z();
    add(std::abs(v.z()) - m.climb_rate_max, sz * sv.row(2), wb);
    if (k == n) break;

    Vec3 am, a1;
    const Sens cm = control_sens((k + 0.5) / n, &am);
    const Sens c1 = control_sens((k + 1.0) / n, &a1);
    Sens sp_next = sp + h * sv + (h * h / 6.0) * (c0 + 2.0 * cm);
    sp_next.col(col_tf) += v / n + (h / (3.0 * n)) * (a0 + 2.0 * am);
    Sens sv_next = sv + (h / 6.0) * (c0 + 4.0 * cm + c1);
    sv_next.col(col_tf) += (a0 + 4.0 * am + a1) / (6.0 * n);
    p = p + h * v + (h * h / 6.0) * (a0 + 2.0 * am);
    v = v + (h / 6.0) * (a0 + 4.0 * am + a1);
    sp = std::move(sp_next);
    sv = std::move(sv_next);
    a0 = a1;
    c0 = c1;
  }
  lin.terminal = p - problem.goal;
  lin.terminal_jac = sp;
  lin.curvature = lin.curvature.selfadjointView<Eigen::Lower>();
  return lin;
}

// Minimizes the convex piecewise-quadratic step model
//   m(d) = g'd + sum_i w_i [q+_i(d)^2 - q+_i(0)^2 - 2 q+_i(0) K_i d]
//        + wT |K_T d|^2 + 1/2 d'C d + mu/2 |d|^2,   q+_i(d) = max(0, q_i + K_i d)
// by semismooth Newton. Its gradient at d = 0 equals g.
struct StepModel {
  const Eigen::MatrixXd& K;
  const Eigen::VectorXd& q;
  const Eigen::VectorXd& w;
  const Eigen::MatrixXd& KT;
  const Eigen::MatrixXd& C;
  double w_terminal;
  const Eigen::VectorXd& g;

  // m at d, given kd = K d and td = K_T d.
  double value(const Eigen::VectorXd& d, const Eigen::VectorXd& kd, const Eigen::VectorXd& td,
               double mu) const {
    double out = g.dot(d) + w_terminal * td.squaredNorm() + 0.5 * d.dot(C * d) +
                 0.5 * mu * d.squaredNorm();
    for (Eigen::Index i = 0; i < q.size(); ++i) {
      // q+(d)^2 - q+(0)^2 - 2 q+(0) kd without cancellation.
      const double q1 = q(i) + kd(i);
      double term;
      if (q(i) > 0.0) {
        term = kd(i) * kd(i) - (q1 < 0.0 ? q1 * q1 : 0.0);
      } else {
        term = q1 > 0.0 ? q1 * q1 : 0.0;
      }
      out += w(i) * term;
    }
    return out;
  }
  double value(const Eigen::VectorXd& d, double mu) const {
    return value(d, K * d, KT * d, mu);
  }

  Eigen::VectorXd minimize(double mu, int max_iterations) const {
    const Eigen::Index dim = g.size();
    Eigen::VectorXd d = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd kd = Eigen::VectorXd::Zero(q.size());
    Eigen::VectorXd td = Eigen::VectorXd::Zero(KT.rows());
    // Lower triangle of the model Hessian without damping; hinge rows are
    // added and removed as the active set at d changes.
    Eigen::MatrixXd gram = C;
    gram.selfadjointView<Eigen::Lower>().rankUpdate(KT.transpose(), 2.0 * w_terminal);
    std::vector<char> in_set(static_cast<std::size_t>(q.size()), 0);
    auto toggle = [&](const std::vector<Eigen::Index>& rows, double sign) {
      if (rows.empty()) return;
      Eigen::MatrixXd A(dim, static_cast<Eigen::Index>(rows.size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        A.col(static_cast<Eigen::Index>(r)) = std::sqrt(2.0 * w(rows[r])) * K.row(rows[r]).transpose();
      }
      gram.selfadjointView<Eigen::Lower>().rankUpdate(A, sign);
    };
    double val = 0.0;
    Eigen::VectorXd coef(q.size());
    for (int it = 0; it < max_iterations; ++it) {
      std::vector<Eigen::Index> added, removed;
      for (Eigen::Index i = 0; i < q.size(); ++i) {
        const double q1 = q(i) + kd(i);
        coef(i) = 2.0 * w(i) * (hinge(q1) - hinge(q(i)));
        const char now = q1 > 0.0;
        if (now != in_set[static_cast<std::size_t>(i)]) (now ? added : removed).push_back(i);
        in_set[static_cast<std::size_t>(i)] = now;
      }
      toggle(added, 1.0);
      toggle(removed, -1.0);
      Eigen::VectorXd grad = g + mu * d;
      grad.noalias() += C * d;
      grad.noalias() += (2.0 * w_terminal) * (KT.transpose() * td);
      grad.noalias() += K.transpose() * coef;

      if (grad.norm() <= 1e-10 * g.norm()) break;

      Eigen::MatrixXd H = gram;
      H.diagonal().array() += mu;
      Eigen::LDLT<Eigen::MatrixXd, Eigen::Lower> ldlt(H);
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) break;
      const Eigen::VectorXd step = ldlt.solve(-grad);
      const double slope = grad.dot(step);
      if (!step.allFinite() || !(slope < 0.0)) break;
      const Eigen::VectorXd ks = K * step;
      const Eigen::VectorXd ts = KT * step;
      double t = 1.0;
      bool moved = false;
      for (int b = 0; b < 30; ++b, t *= 0.5) {
        const Eigen::VectorXd dt = d + t * step;
        const Eigen::VectorXd kdt = kd + t * ks;
        const Eigen::VectorXd tdt = td + t * ts;
        const double trial = value(dt, kdt, tdt, mu);
        if (trial <= val + 1e-4 * t * slope) {
          // Even a tiny move matters: it can activate a stiff row and
          // change the Newton matrix of the next pass.
          moved = trial < val;
          d = dt;
          kd = kdt;
          td = tdt;
          val = trial;
          break;
        }
      }
      if (!moved) break;
    }
    return d;
  }
};

}  // namespace

void AircraftModel::validate() const {
  if (!(a_max > 0 && v_max > 0 && v_min > 0 && climb_rate_max > 0)) {
    throw std::invalid_argument("aircraft model bounds must be strictly positive");
  }
  if (!(v_min < v_max)) throw std::invalid_argument("aircraft model requires v_min < v_max");
}

void OcpProblem::validate() const {
  model.validate();
  if (!(t_min > 0.0 && t_min < t_max)) {
    throw std::invalid_argument("final-time bounds must satisfy 0 < t_min < t_max");
  }
  if (grid.control_nodes < 1) throw std::invalid_argument("need at least one control node");
  if (grid.integration_steps < grid.control_nodes) {
    throw std::invalid_argument("integration_steps must be >= control_nodes");
  }
  if (!(weights.obstacle >= 0 && weights.terminal >= 0 && weights.bounds >= 0)) {
    throw std::invalid_argument("cost weights must be non-negative");
  }
  if (!all_finite(initial) || !goal.allFinite()) {
    throw std::invalid_argument("initial state and goal must be finite");
  }
  for (const auto& z : zones) {
    if (!(z.radius > 0.0)) throw std::invalid_argument("zone radius must be positive");
    if (!z.center.allFinite() || !z.velocity.allFinite()) {
      throw std::invalid_argument("zone center and velocity must be finite");
    }
  }
}

Eigen::VectorXd DecisionVector::flatten() const {
  Eigen::VectorXd z(3 * controls.size() + 1);
  for (std::size_t i = 0; i < controls.size(); ++i) z.segment<3>(3 * i) = controls[i];
  z(z.size() - 1) = t_final;
  return z;
}

DecisionVector DecisionVector::unflatten(const Eigen::VectorXd& z) {
  if (z.size() < 4 || (z.size() - 1) % 3 != 0) {
    throw std::invalid_argument("decision vector length must be 3 * nodes + 1");
  }
  DecisionVector out;
  const auto n = (z.size() - 1) / 3;
  out.controls.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) out.controls[i] = z.segment<3>(3 * i);
  out.t_final = z(z.size() - 1);
  return out;
}

Vec3 control_at(const ControlNodes& nodes, double s, double a_max) {
  return clamp_ball(interpolate(nodes, locate(static_cast<int>(nodes.size()), s)), a_max);
}

Trajectory integrate(const AircraftModel& model, const AircraftState& initial,
                     const ControlNodes& controls, double t_final, int n_steps) {
  if (!(t_final > 0.0)) throw std::invalid_argument("integrate: t_final must be positive");
  if (n_steps < 1) throw std::invalid_argument("integrate: need at least one step");
  if (controls.empty()) throw std::invalid_argument("integrate: no control nodes");

  const double h = t_final / n_steps;
  const double n = n_steps;
  Trajectory traj;
  traj.reserve(n_steps + 1);
  traj.push_back(initial);
  Vec3 a0 = control_at(controls, 0.0, model.a_max);
  for (int k = 0; k < n_steps; ++k) {
    const Vec3 am = control_at(controls, (k + 0.5) / n, model.a_max);
    const Vec3 a1 = control_at(controls, (k + 1) / n, model.a_max);
    AircraftState next = rk4_step(traj.back(), h, a0, am, a1);
    if (!all_finite(next)) {
      throw DivergenceError("state became non-finite at step " + std::to_string(k + 1));
    }
    traj.push_back(next);
    a0 = a1;
  }
  return traj;
}

CostBreakdown evaluate_cost(const OcpProblem& problem, const DecisionVector& z,
                            const Trajectory& traj) {
  const double tf = project_tf(problem, z.t_final);
  const int n = static_cast<int>(traj.size()) - 1;
  const double h = tf / n;

  CostBreakdown c;
  c.time = tf;
  double obstacle = 0.0;
  double bounds = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double t = k * h;
    for (const auto& zone : problem.zones) {
      const double viol = hinge(zone.radius - (traj[k].position - zone.center_at(t)).norm());
      obstacle += h * viol * viol;
    }
    bounds += h * bounds_violation(problem.model, traj[k].velocity, nullptr);
  }
  c.obstacle = problem.weights.obstacle * obstacle;
  c.bounds = problem.weights.bounds * bounds;
  c.terminal = problem.weights.terminal * (traj.back().position - problem.goal).squaredNorm();
  c.total = c.time + c.obstacle + c.terminal + c.bounds;
  return c;
}

CostBreakdown evaluate_cost(const OcpProblem& problem, const DecisionVector& z) {
  const double tf = project_tf(problem, z.t_final);
  const Trajectory traj = integrate(problem.model, problem.initial, z.controls, tf,
                                    problem.grid.integration_steps);
  return evaluate_cost(problem, z, traj);
}

Eigen::VectorXd gradient(const OcpProblem& problem, const DecisionVector& z) {
  const AircraftModel& m = problem.model;
  const int n = problem.grid.integration_steps;
  const int nodes = static_cast<int>(z.controls.size());
  const double tf = project_tf(problem, z.t_final);
  const double h = tf / n;
  const double wo = problem.weights.obstacle;
  const double wb = problem.weights.bounds;

  // Control samples at step starts (A) and midpoints (M).
  std::vector<InterpPoint> at_a(n + 1), at_m(n);
  std::vector<Vec3> raw_a(n + 1), raw_m(n), A(n + 1), M(n);
  for (int k = 0; k <= n; ++k) {
    at_a[k] = locate(nodes, static_cast<double>(k) / n);
    raw_a[k] = interpolate(z.controls, at_a[k]);
    A[k] = clamp_ball(raw_a[k], m.a_max);
  }
  for (int k = 0; k < n; ++k) {
    at_m[k] = locate(nodes, (k + 0.5) / n);
    raw_m[k] = interpolate(z.controls, at_m[k]);
    M[k] = clamp_ball(raw_m[k], m.a_max);
  }

  // Forward pass, RK4 in closed form for the double integrator.
  std::vector<Vec3> p(n + 1), v(n + 1);
  p[0] = problem.initial.position;
  v[0] = problem.initial.velocity;
  for (int k = 0; k < n; ++k) {
    p[k + 1] = p[k] + h * v[k] + (h * h / 6.0) * (A[k] + 2.0 * M[k]);
    v[k + 1] = v[k] + (h / 6.0) * (A[k] + 4.0 * M[k] + A[k + 1]);
  }

  // Direct partials of the running and terminal terms.
  std::vector<Vec3> gp(n + 1, Vec3::Zero()), gv(n + 1, Vec3::Zero());
  double dtf = 1.0;
  for (int k = 0; k <= n; ++k) {
    const double t = k * h;
    for (const auto& zone : problem.zones) {
      const Vec3 e = p[k] - zone.center_at(t);
      const double d = e.norm();
      const double viol = hinge(zone.radius - d);
      if (viol <= 0.0) continue;
      dtf += wo * h * viol * viol / tf;
      if (d > 0.0) {
        gp[k] += (-2.0 * wo * h * viol / d) * e;
        dtf += 2.0 * wo * h * viol * e.dot(zone.velocity) / d * (static_cast<double>(k) / n);
      }
    }
    Vec3 gb = Vec3::Zero();
    const double b = bounds_violation(m, v[k], &gb);
    dtf += wb * h * b / tf;
    gv[k] += wb * h * gb;
  }
  gp[n] += 2.0 * problem.weights.terminal * (p[n] - problem.goal);

  // Reverse sweep.
  std::vector<Vec3> gA(n + 1, Vec3::Zero()), gM(n, Vec3::Zero());
  Vec3 lp = gp[n];
  Vec3 lv = gv[n];
  double dh = 0.0;
  for (int k = n - 1; k >= 0; --k) {
    gA[k] += (h * h / 6.0) * lp + (h / 6.0) * lv;
    gM[k] += (h * h / 3.0) * lp + (2.0 * h / 3.0) * lv;
    gA[k + 1] += (h / 6.0) * lv;
    dh += v[k].dot(lp) + (h / 3.0) * (A[k] + 2.0 * M[k]).dot(lp) +
          (A[k] + 4.0 * M[k] + A[k + 1]).dot(lv) / 6.0;
    const Vec3 lp_next = lp;
    lp = gp[k] + lp_next;
    lv = gv[k] + h * lp_next + lv;
  }
  dtf += dh / n;

  Eigen::VectorXd g = Eigen::VectorXd::Zero(3 * nodes + 1);
  auto scatter = [&](const InterpPoint& at, const Vec3& raw, const Vec3& g_clamped) {
    const Vec3 gr = clamp_ball_vjp(raw, m.a_max, g_clamped);
    g.segment<3>(3 * at.j) += (nodes == 1 ? 1.0 : 1.0 - at.frac) * gr;
    if (nodes > 1) g.segment<3>(3 * (at.j + 1)) += at.frac * gr;
  };
  for (int k = 0; k <= n; ++k) scatter(at_a[k], raw_a[k], gA[k]);
  for (int k = 0; k < n; ++k) scatter(at_m[k], raw_m[k], gM[k]);
  g(3 * nodes) = dtf;
  return g;
}

Eigen::VectorXd gradient_fd(const OcpProblem& problem, const DecisionVector& z, double rel_step) {
  const Eigen::VectorXd x = z.flatten();
  Eigen::VectorXd g(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double step = rel_step * (1.0 + std::abs(x(j)));
    Eigen::VectorXd xp = x, xm = x;
    xp(j) += step;
    xm(j) -= step;
    const double fp = evaluate_cost(problem, DecisionVector::unflatten(xp)).total;
    const double fm = evaluate_cost(problem, DecisionVector::unflatten(xm)).total;
    g(j) = (fp - fm) / (2.0 * step);
  }
  return g;
}

DecisionVector cold_start(const OcpProblem& problem) {
  DecisionVector z;
  z.controls.assign(problem.grid.control_nodes, Vec3::Zero());
  const double v0 = problem.initial.velocity.norm();
  const double cruise = v0 > 0.0 ? v0 : 0.5 * problem.model.v_max;
  z.t_final = project_tf(problem, (problem.goal - problem.initial.position).norm() / cruise);
  return z;
}

DecisionVector time_shift(const DecisionVector& z, double elapsed, double t_floor) {
  DecisionVector out;
  out.t_final = std::max(z.t_final - elapsed, t_floor);
  const int nodes = static_cast<int>(z.controls.size());
  out.controls.resize(nodes);
  for (int j = 0; j < nodes; ++j) {
    const double t_new = nodes > 1 ? j * out.t_final / (nodes - 1) : 0.0;
    const double s_old = (elapsed + t_new) / z.t_final;
    out.controls[j] = interpolate(z.controls, locate(nodes, s_old));
  }
  return out;
}

std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::Stalled: return "stalled";
    case SolveStatus::MaxIterations: return "max_iterations";
    case SolveStatus::LineSearchFailure: return "line_search_failure";
    case SolveStatus::Failed: return "failed";
  }
  return "unknown";
}

OcpSolution solve(const OcpProblem& problem, const std::optional<DecisionVector>& warm_start,
                  const SolverOptions& opt) {
  using Clock = std::chrono::steady_clock;
  const auto started = Clock::now();
  problem.validate();

  OcpSolution sol;
  auto finish = [&](OcpSolution& s) -> OcpSolution& {
    s.wall_time = std::chrono::duration<double>(Clock::now() - started).count();
    return s;
  };

  DecisionVector z0 = warm_start ? *warm_start : cold_start(problem);
  if (static_cast<int>(z0.controls.size()) != problem.grid.control_nodes) {
    throw std::invalid_argument("warm start has " + std::to_string(z0.controls.size()) +
                                " control nodes, problem expects " +
                                std::to_string(problem.grid.control_nodes));
  }
  const Eigen::Index it = 3 * problem.grid.control_nodes;
  const Eigen::Index n = it + 1;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // The optimizer works on y = (b, tF) with a = b (T0 / tF)^2. Unclamped,
  // the endpoint is p0 + v0 tF + tF^2 W a = p0 + v0 tF + T0^2 W b, so the
  // terminal residual is linear in y and the minimum-time valley is straight.
  const double t_ref = project_tf(problem, z0.t_final);
  // Node bound in y: |b_j| <= beta tF^2.
  const double beta = problem.model.a_max / (t_ref * t_ref);
  auto to_decision = [&](const Eigen::VectorXd& y) {
    Eigen::VectorXd z = y;
    const double r = t_ref / y(it);
    z.head(it) *= r * r;
    return DecisionVector::unflatten(z);
  };
  // dz/dy
  auto jacobian = [&](const Eigen::VectorXd& y) {
    const double r = t_ref / y(it);
    Eigen::MatrixXd T = Eigen::MatrixXd::Identity(n, n);
    T.topLeftCorner(it, it) *= r * r;
    T.col(it).head(it) = (-2.0 * r * r / y(it)) * y.head(it);
    return T;
  };

  auto cost = [&](const Eigen::VectorXd& y) {
    try {
      const double f = evaluate_cost(problem, to_decision(y)).total;
      return std::isfinite(f) ? f : kInf;
    } catch (const DivergenceError&) {
      return kInf;
    }
  };
  auto grad = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd {
    return jacobian(y).transpose() * gradient(problem, to_decision(y));
  };
  // Feasible set: tF in [t_min, t_max] and every node inside the aMax ball.
  // Interpolation between in-ball nodes stays in the ball, so the radial
  // clamp is inactive along the iterates.
  auto project = [&](Eigen::VectorXd& y) {
    y(it) = project_tf(problem, y(it));
    const double b_max = beta * y(it) * y(it);
    for (Eigen::Index j = 0; j < it; j += 3) {
      const double nrm = y.segment<3>(j).norm();
      if (nrm > b_max) y.segment<3>(j) *= b_max / nrm;
    }
  };

  // Orthonormal basis of the directions left free at y: the null space of
  // the normals of active bounds that the descent direction pushes against.
  // A node on its ball has normal (u_j, -2 beta tF) in the (b_j, tF) slots.
  auto free_basis = [&](const Eigen::VectorXd& y, const Eigen::VectorXd& g) -> Eigen::MatrixXd {
    std::vector<Eigen::VectorXd> normals;
    const double tf = y(it);
    const double b_max = beta * tf * tf;
    for (Eigen::Index j = 0; j < it; j += 3) {
      const double nrm = y.segment<3>(j).norm();
      if (nrm < b_max * (1.0 - 1e-9) || nrm == 0.0) continue;
      Eigen::VectorXd nj = Eigen::VectorXd::Zero(n);
      nj.segment<3>(j) = y.segment<3>(j) / nrm;
      nj(it) = -2.0 * beta * tf;
      if (g.dot(nj) < 0.0) normals.push_back(std::move(nj));
    }
    if ((tf <= problem.t_min && g(it) > 0.0) || (tf >= problem.t_max && g(it) < 0.0)) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
      e(it) = 1.0;
      normals.push_back(std::move(e));
    }
    if (normals.empty()) return Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd N(n, static_cast<Eigen::Index>(normals.size()));
    for (std::size_t c = 0; c < normals.size(); ++c) N.col(static_cast<Eigen::Index>(c)) = normals[c];
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(N);
    const Eigen::Index rank = qr.rank();
    const Eigen::MatrixXd full = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
    return full.rightCols(n - rank);
  };

  Eigen::VectorXd x = z0.flatten();
  x(it) = t_ref;
  project(x);
  double f = cost(x);
  Eigen::VectorXd g = grad(x);
  if (!std::isfinite(f) || !g.allFinite()) {
    sol.decision = to_decision(x);
    sol.status = SolveStatus::Failed;
    sol.diagnostic = "initial guess is not finite (diverging integration or cost)";
    return finish(sol);
  }

  struct Model {
    Eigen::MatrixXd jac, terminal_jac, curvature;
    Eigen::VectorXd q, weight;
  };
  auto model_at = [&](const Eigen::VectorXd& y, const Eigen::VectorXd& gy) {
    const Linearization lin = linearize(problem, to_decision(y));
    // Right-multiplication by dz/dy without forming it.
    const double r2 = (t_ref / y(it)) * (t_ref / y(it));
    const Eigen::VectorXd tcol = (-2.0 * r2 / y(it)) * y.head(it);
    auto to_y = [&](const Eigen::MatrixXd& jz) {
      Eigen::MatrixXd jy(jz.rows(), n);
      jy.leftCols(it) = r2 * jz.leftCols(it);
      jy.col(it) = jz.col(it) + jz.leftCols(it) * tcol;
      return jy;
    };
    const Eigen::MatrixXd cy = to_y(lin.curvature);
    Model out{to_y(lin.jac), to_y(lin.terminal_jac), to_y(cy.transpose()), lin.q, lin.weight};
    // Second-order terms in tF for violated hinges. Velocities are
    // v0 + (T0^2 / tF) L b, so d2v/dtF2 = 2 (v - v0) / tF^2 and
    // d2v/dtF db = -(dv/db) / tF; weights are proportional to tF.
    const double tf = y(it);
    Eigen::VectorXd cross = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < out.q.size(); ++i) {
      if (!(out.q(i) > 0.0)) continue;
      const double lam = 2.0 * out.weight(i) * out.q(i);
      cross += (lam / tf) * out.jac.row(i).transpose();
      if (std::isnan(lin.velocity_excess(i))) continue;
      out.curvature(it, it) += lam * 2.0 * lin.velocity_excess(i) / (tf * tf);
      const Eigen::VectorXd tb = (-lam / tf) * out.jac.row(i).head(it).transpose();
      out.curvature.col(it).head(it) += tb;
      out.curvature.row(it).head(it) += tb.transpose();
    }
    out.curvature.col(it) += cross;
    out.curvature.row(it) += cross.transpose();
    // Node bounds enter the step model as stiff hinges on their
    // linearization, so steps do not lean on the projection.
    const Eigen::Index rows = out.q.size();
    const Eigen::Index nb = it / 3;
    out.jac.conservativeResize(rows + nb, Eigen::NoChange);
    out.q.conservativeResize(rows + nb);
    out.weight.conservativeResize(rows + nb);
    out.jac.bottomRows(nb).setZero();
    for (Eigen::Index j = 0; j < nb; ++j) {
      const Vec3 b = y.segment<3>(3 * j);
      const double nrm = b.norm();
      out.q(rows + j) = nrm - beta * tf * tf;
      out.weight(rows + j) = opt.bound_model_weight;
      if (nrm > 0.0) out.jac.row(rows + j).segment<3>(3 * j) = (b / nrm).transpose();
      out.jac(rows + j, it) = -2.0 * beta * tf;
      // Curvature of a ball the gradient presses against, scaled by its
      // estimated multiplier, so steps along the sphere are not overrated.
      if (nrm > 0.0 && out.q(rows + j) > -1e-6 * beta * tf * tf) {
        const Vec3 u = b / nrm;
        const double lam = -gy.segment<3>(3 * j).dot(u);
        if (lam > 0.0) {
          out.curvature.block<3, 3>(3 * j, 3 * j) +=
              (lam / nrm) * (Eigen::Matrix3d::Identity() - u * u.transpose());
        }
      }
    }
    const Eigen::Index last = rows + nb;
    out.jac.conservativeResize(last + 2, Eigen::NoChange);
    out.q.conservativeResize(last + 2);
    out.weight.conservativeResize(last + 2);
    out.jac.bottomRows(2).setZero();
    out.q(last) = problem.t_min - tf;
    out.jac(last, it) = -1.0;
    out.q(last + 1) = tf - problem.t_max;
    out.jac(last + 1, it) = 1.0;
    out.weight.tail(2).setConstant(opt.bound_model_weight);
    return out;
  };

  Model model = model_at(x, g);
  double mu = warm_start ? opt.warm_start_damping : opt.initial_damping;
  std::deque<double> history{f};
  SolveStatus status = SolveStatus::MaxIterations;
  int iter = 0;

  for (; iter < opt.max_iterations; ++iter) {
    const Eigen::MatrixXd Q = free_basis(x, g);
    const Eigen::VectorXd gr = Q.transpose() * g;
    if (gr.norm() <= opt.gradient_tolerance * (1.0 + std::abs(f))) {
      status = SolveStatus::Converged;
      break;
    }
    StepModel step_model{model.jac,       model.q, model.weight, model.terminal_jac,
                         model.curvature, problem.weights.terminal, g};

    bool accepted = false;
    Eigen::VectorXd xt;
    double ft = f;
    double alpha = 1.0;
    double predicted = 0.0;
    for (int attempt = 0; attempt < opt.max_backtracks && !accepted; ++attempt) {
      const Eigen::VectorXd d = step_model.minimize(mu, opt.model_iterations);
      predicted = -step_model.value(d, 0.0);
      if (!(g.dot(d) < 0.0)) {
        mu = std::max(mu * 10.0, 1e-8);
        if (mu > opt.max_damping) break;
        continue;
      }
      alpha = 1.0;
      for (int b = 0; b < 4; ++b, alpha *= 0.5) {
        xt = x + alpha * d;
        project(xt);
        const Eigen::VectorXd s = xt - x;
        if (s.lpNorm<Eigen::Infinity>() == 0.0) break;
        ft = cost(xt);
        if (ft <= f + opt.armijo * g.dot(s) && ft <= f) {
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        mu = std::max(mu * 10.0, 1e-8);
        if (mu > opt.max_damping) break;
      }
    }
    if (!accepted) {
      status = SolveStatus::LineSearchFailure;
      break;
    }
    const double ratio = predicted > 0.0 ? (f - ft) / predicted : 0.0;
    if (alpha == 1.0 && ratio > 0.75) {
      mu /= 4.0;
    } else if (alpha < 1.0 || ratio < 0.25) {
      mu *= 4.0;
    }
    mu = std::clamp(mu, opt.min_damping, opt.max_damping);

    const Eigen::VectorXd gt = grad(xt);
    if (!gt.allFinite()) {
      status = SolveStatus::LineSearchFailure;
      break;
    }
    Model next = model_at(xt, gt);
    const Eigen::VectorXd s = xt - x;
    x = xt;
    f = ft;
    g = gt;
    model = std::move(next);

    history.push_back(f);
    if (static_cast<int>(history.size()) > opt.stall_window + 1) history.pop_front();
    if (static_cast<int>(history.size()) == opt.stall_window + 1 &&
        history.front() - f <= opt.stall_tolerance * (1.0 + std::abs(f))) {
      ++iter;
      status = SolveStatus::Stalled;
      break;
    }
  }

  sol.decision = to_decision(x);
  sol.iterations = iter;
  sol.status = status;
  sol.converged = status == SolveStatus::Converged || status == SolveStatus::Stalled;
  try {
    sol.trajectory = integrate(problem.model, problem.initial, sol.decision.controls,
                               sol.decision.t_final, problem.grid.integration_steps);
    sol.cost = evaluate_cost(problem, sol.decision, sol.trajectory);
  } catch (const DivergenceError& e) {
    sol.status = SolveStatus::Failed;
    sol.converged = false;
    sol.diagnostic = e.what();
  }
  if (sol.diagnostic.empty()) sol.diagnostic = std::string(to_string(sol.status));
  return finish(sol);
}

std::vector<double> min_separation(const OcpSolution& solution, const std::vector<Zone>& zones) {
  std::vector<double> out;
  out.reserve(zones.size());
  const int n = static_cast<int>(solution.trajectory.size()) - 1;
  const double h = n > 0 ? solution.t_final() / n : 0.0;
  for (const auto& zone : zones) {
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= n; ++k) {
      best = std::min(best, (solution.trajectory[k].position - zone.center_at(k * h)).norm());
    }
    out.push_back(best);
  }
  return out;
}

AircraftState state_at(const AircraftModel& model, const OcpSolution& sol, double t) {
  const int n = static_cast<int>(sol.trajectory.size()) - 1;
  if (n < 1) throw std::invalid_argument("state_at: solution has no trajectory");
  const double tf = sol.t_final();
  t = std::clamp(t, 0.0, tf);
  const double h = tf / n;
  const int k = std::min(static_cast<int>(std::floor(t / h)), n - 1);
  const double tau = t - k * h;
  if (tau <= 0.0) return sol.trajectory[k];
  const auto& u = sol.controls();
  return rk4_step(sol.trajectory[k], tau, control_at(u, (k * h) / tf, model.a_max),
                  control_at(u, (k * h + 0.5 * tau) / tf, model.a_max),
                  control_at(u, t / tf, model.a_max));
}

}  // namespace fuzzclear
