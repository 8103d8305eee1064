#include "ctnet/pontryagin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ctnet {

BoxSet::BoxSet(double am, double aM, double bm, double bM)
    : a_min(am), a_max(aM), b_min(bm), b_max(bM) {
  if (!(a_min < a_max) || !(b_min < b_max))
    throw std::invalid_argument("box bounds must satisfy min < max");
}

double BoxSet::clamp_a(double a) const { return std::clamp(a, a_min, a_max); }
double BoxSet::clamp_b(double b) const { return std::clamp(b, b_min, b_max); }

double hamiltonian(const std::vector<GridFunction>& states,
                   const std::vector<GridFunction>& costates, const GridFunction& a,
                   const Kernel& b, const Activation& sigma) {
  if (states.size() != costates.size() || states.empty())
    throw std::invalid_argument("hamiltonian: state/co-state count mismatch");
  const auto& w = a.grid->weights();
  double acc = 0.0;
  for (size_t j = 0; j < states.size(); ++j) {
    const GridFunction bf = apply_kernel(b, states[j]);
    for (Eigen::Index k = 0; k < w.size(); ++k)
      acc += sigma(a.values(k) - bf.values(k)) * costates[j].values(k) * w(k);
  }
  return acc;
}

double pointwise_objective(const std::vector<GridFunction>& states,
                           const Eigen::VectorXd& r, double a,
                           const Eigen::VectorXd& b, const Activation& sigma) {
  const auto& w = states.front().grid->weights();
  double acc = 0.0;
  for (size_t j = 0; j < states.size(); ++j) {
    const double inner = (b.array() * states[j].values.array() * w.array()).sum();
    acc += sigma(a - inner) * r(static_cast<Eigen::Index>(j));
  }
  return acc;
}

namespace {

struct Point {
  double a;
  Eigen::VectorXd b;
};

// value and gradient of T_{F,r} at (a, b)
double objective_grad(const std::vector<GridFunction>& states, const Eigen::VectorXd& r,
                      const Point& p, const Activation& sigma, double& grad_a,
                      Eigen::VectorXd& grad_b) {
  const auto& w = states.front().grid->weights();
  double value = 0.0;
  grad_a = 0.0;
  grad_b.setZero(p.b.size());
  for (size_t j = 0; j < states.size(); ++j) {
    const auto& f = states[j].values;
    const double inner = (p.b.array() * f.array() * w.array()).sum();
    const double rj = r(static_cast<Eigen::Index>(j));
    const double xi = p.a - inner;
    value += sigma(xi) * rj;
    const double lam = sigma.deriv(xi) * rj;
    grad_a += lam;
    grad_b.array() -= lam * f.array() * w.array();
  }
  return value;
}

Point project(const Point& p, const BoxSet& box) {
  Point q;
  q.a = box.clamp_a(p.a);
  q.b = p.b.cwiseMax(box.b_min).cwiseMin(box.b_max);
  return q;
}

// projected gradient descent with backtracking from a single start
Point descend(const std::vector<GridFunction>& states, const Eigen::VectorXd& r,
              Point p, const BoxSet& box, const Activation& sigma, double& value) {
  double ga;
  Eigen::VectorXd gb;
  value = objective_grad(states, r, p, sigma, ga, gb);
  double tau = 1.0;
  for (int it = 0; it < 200; ++it) {
    Point cand = project({p.a - tau * ga, p.b - tau * gb}, box);
    double ca;
    Eigen::VectorXd cb;
    const double cv = objective_grad(states, r, cand, sigma, ca, cb);
    if (cv <= value - 1e-14) {
      p = std::move(cand);
      value = cv;
      ga = ca;
      gb = std::move(cb);
      tau = std::min(tau * 1.5, 1e6);
    } else {
      tau *= 0.5;
      if (tau < 1e-12) break;
    }
  }
  return p;
}

// coordinate sweeps trying the box bounds on every coordinate; since the
// objective is monotone in each b_l for fixed rest away from sign changes,
// this snaps solutions onto the corners the gradient path may undershoot
void corner_polish(const std::vector<GridFunction>& states, const Eigen::VectorXd& r,
                   Point& p, const BoxSet& box, const Activation& sigma,
                   double& value) {
  const Eigen::Index m = p.b.size();
  for (int sweep = 0; sweep < 5; ++sweep) {
    bool changed = false;
    for (const double cand : {box.a_min, box.a_max}) {
      Point q = p;
      q.a = cand;
      const double qv = pointwise_objective(states, r, q.a, q.b, sigma);
      if (qv < value - 1e-14) {
        p = q;
        value = qv;
        changed = true;
      }
    }
    for (Eigen::Index l = 0; l < m; ++l)
      for (const double cand : {box.b_min, box.b_max}) {
        if (p.b(l) == cand) continue;
        Point q = p;
        q.b(l) = cand;
        const double qv = pointwise_objective(states, r, q.a, q.b, sigma);
        if (qv < value - 1e-14) {
          p = q;
          value = qv;
          changed = true;
        }
      }
    if (!changed) break;
  }
}

// lexicographic preference for the lower corner among near-equal minima
bool prefer(const Point& cand, double cand_value, const Point& best,
            double best_value) {
  if (cand_value < best_value - 1e-12) return true;
  if (cand_value > best_value + 1e-12) return false;
  if (cand.a != best.a) return cand.a < best.a;
  for (Eigen::Index l = 0; l < cand.b.size(); ++l)
    if (cand.b(l) != best.b(l)) return cand.b(l) < best.b(l);
  return false;
}

}  // namespace

ArgminResult argmin_T(const std::vector<GridFunction>& states, const Eigen::VectorXd& r,
                      const BoxSet& box, const Activation& sigma,
                      std::mt19937_64& rng) {
  if (states.empty() || r.size() != static_cast<Eigen::Index>(states.size()))
    throw std::invalid_argument("argmin_T: need one co-state value per datum");
  const Eigen::Index m = states.front().grid->size();

  std::vector<Point> starts;
  for (const double a0 : {box.a_min, box.a_max})
    for (const double b0 : {box.b_min, box.b_max})
      starts.push_back({a0, Eigen::VectorXd::Constant(m, b0)});
  std::uniform_real_distribution<double> ua(box.a_min, box.a_max);
  std::uniform_real_distribution<double> ub(box.b_min, box.b_max);
  for (int k = 0; k < 4; ++k) {
    Point p;
    p.a = ua(rng);
    p.b.resize(m);
    for (Eigen::Index l = 0; l < m; ++l) p.b(l) = ub(rng);
    starts.push_back(std::move(p));
  }

  Point best;
  double best_value = std::numeric_limits<double>::infinity();
  for (auto& s : starts) {
    double v;
    Point p = descend(states, r, s, box, sigma, v);
    corner_polish(states, r, p, box, sigma, v);
    if (prefer(p, v, best, best_value)) {
      best = std::move(p);
      best_value = v;
    }
  }
  return {best.a, std::move(best.b), best_value};
}

BangBangControl bang_bang_control(const GridFunction& f, const GridFunction& r,
                                  const BoxSet& box) {
  require_same_grid(f, r);
  const Eigen::Index m = f.grid->size();
  BangBangControl out;
  out.a = GridFunction::zero(f.grid);
  out.b = Kernel::zero(f.grid, f.grid);
  out.a_flagged.assign(static_cast<size_t>(m), false);
  out.b_flagged.setConstant(m, m, false);
  for (Eigen::Index k = 0; k < m; ++k) {
    const double rk = r.values(k);
    if (rk > 0.0)
      out.a.values(k) = box.a_min;
    else if (rk < 0.0)
      out.a.values(k) = box.a_max;
    else {
      out.a.values(k) = box.a_min;
      out.a_flagged[static_cast<size_t>(k)] = true;
    }
    for (Eigen::Index l = 0; l < m; ++l) {
      const double s = rk * f.values(l);
      if (s > 0.0)
        out.b.values(k, l) = box.b_max;
      else if (s < 0.0)
        out.b.values(k, l) = box.b_min;
      else {
        out.b.values(k, l) = box.b_min;
        out.b_flagged(k, l) = true;
      }
    }
  }
  return out;
}

namespace {

double sup_change(const ControlPath& x, const ControlPath& y) {
  double m = 0.0;
  for (size_t s = 0; s < x.a_path.size(); ++s) {
    m = std::max(m, (x.a_path[s].values - y.a_path[s].values).cwiseAbs().maxCoeff());
    m = std::max(m, (x.b_path[s].values - y.b_path[s].values).cwiseAbs().maxCoeff());
  }
  return m;
}

}  // namespace

PontryaginState solve_msa(const TrainingSet& data, const Classifier& cls,
                          const Predictor& h, const BoxSet& box,
                          ControlPath init, const Activation& sigma,
                          const MsaOptions& opt) {
  if (opt.relax <= 0.0 || opt.relax > 1.0)
    throw std::invalid_argument("msa relaxation must lie in (0, 1]");
  const int N = data.size();
  const Eigen::Index m = init.grid()->size();
  std::mt19937_64 rng(opt.seed);

  PontryaginState st;
  st.ctrl = std::move(init);
  double prev_loss = std::numeric_limits<double>::infinity();
  int rising = 0;

  for (int sweep = 0; sweep < opt.sweeps; ++sweep) {
    st.forward = solve_forward_euler(data.initial, st.ctrl, sigma);
    const auto terminal =
        adjoint_terminal(st.forward.terminal(), cls, h, data.targets);
    st.co = solve_backward(st.forward, st.ctrl, sigma, terminal);

    const double loss = evaluate_loss(st.forward.terminal(), cls, h, data.targets);
    st.loss_history.push_back(loss);
    if (loss > prev_loss + 1e-14) {
      if (++rising >= 10) {
        st.diverged = true;
        st.sweeps_used = sweep + 1;
        return st;
      }
    } else {
      rising = 0;
    }
    prev_loss = loss;

    ControlPath updated = st.ctrl;
    for (int s = 0; s < st.ctrl.time.nodes(); ++s) {
      const auto& F = st.forward.at(s);
      const auto& R = st.co.at(s);
      for (Eigen::Index k = 0; k < m; ++k) {
        Eigen::VectorXd r(N);
        for (int j = 0; j < N; ++j) r(j) = R[static_cast<size_t>(j)].values(k);
        const ArgminResult am = argmin_T(F, r, box, sigma, rng);
        updated.a_path[static_cast<size_t>(s)].values(k) =
            (1.0 - opt.relax) * st.ctrl.a_path[static_cast<size_t>(s)].values(k) +
            opt.relax * am.a;
        updated.b_path[static_cast<size_t>(s)].values.row(k) =
            (1.0 - opt.relax) *
                st.ctrl.b_path[static_cast<size_t>(s)].values.row(k) +
            opt.relax * am.b.transpose();
      }
    }

    std::vector<double> ham(static_cast<size_t>(st.ctrl.time.nodes()));
    for (int s = 0; s < st.ctrl.time.nodes(); ++s)
      ham[static_cast<size_t>(s)] =
          hamiltonian(st.forward.at(s), st.co.at(s),
                      updated.a_path[static_cast<size_t>(s)],
                      updated.b_path[static_cast<size_t>(s)], sigma);
    st.hamiltonian_history.push_back(std::move(ham));

    const double change = sup_change(updated, st.ctrl);
    st.control_change_history.push_back(change);
    st.ctrl = std::move(updated);
    st.sweeps_used = sweep + 1;
    if (change <= opt.tol) {
      st.converged = true;
      break;
    }
  }

  st.forward = solve_forward_euler(data.initial, st.ctrl, sigma);
  const auto terminal = adjoint_terminal(st.forward.terminal(), cls, h, data.targets);
  st.co = solve_backward(st.forward, st.ctrl, sigma, terminal);
  st.loss_history.push_back(evaluate_loss(st.forward.terminal(), cls, h, data.targets));
  return st;
}

double boundary_contact_fraction(const ControlPath& ctrl, const BoxSet& box,
                                 double tol) {
  long total = 0, at = 0;
  auto near = [tol](double v, double bound) { return std::abs(v - bound) <= tol; };
  for (size_t s = 0; s < ctrl.a_path.size(); ++s) {
    const auto& a = ctrl.a_path[s].values;
    for (Eigen::Index k = 0; k < a.size(); ++k, ++total)
      if (near(a(k), box.a_min) || near(a(k), box.a_max)) ++at;
    const auto& b = ctrl.b_path[s].values;
    for (Eigen::Index k = 0; k < b.rows(); ++k)
      for (Eigen::Index l = 0; l < b.cols(); ++l, ++total)
        if (near(b(k, l), box.b_min) || near(b(k, l), box.b_max)) ++at;
  }
  return total == 0 ? 0.0 : static_cast<double>(at) / static_cast<double>(total);
}

}  // namespace ctnet
