#include "ctnet/hjb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ctnet/adjoint.hpp"

namespace ctnet {

HjbHamiltonian hjb_hamiltonian(const std::vector<GridFunction>& v,
                               const std::vector<GridFunction>& p,
                               const BoxSet& box, const Activation& sigma,
                               uint64_t seed) {
  if (v.empty() || v.size() != p.size())
    throw std::invalid_argument("hjb_hamiltonian: state/co-state count mismatch");
  const GridPtr grid = v.front().grid;
  const Eigen::Index m = grid->size();
  const int N = static_cast<int>(v.size());
  std::mt19937_64 rng(seed);

  HjbHamiltonian out;
  out.cell_values = GridFunction::zero(grid);
  out.a = GridFunction::zero(grid);
  out.b = Kernel::zero(grid, grid);
  const auto& w = grid->weights();
  for (Eigen::Index k = 0; k < m; ++k) {
    Eigen::VectorXd r(N);
    for (int j = 0; j < N; ++j) r(j) = p[static_cast<size_t>(j)].values(k);
    const ArgminResult am = argmin_T(v, r, box, sigma, rng);
    out.cell_values.values(k) = am.value;
    out.a.values(k) = am.a;
    out.b.values.row(k) = am.b.transpose();
    out.value += am.value * w(k);
  }
  return out;
}

HjbHamiltonian hjb_hamiltonian_single(const GridFunction& v, const GridFunction& p,
                                      const BoxSet& box, const Activation& sigma) {
  require_same_grid(v, p);
  const GridPtr grid = v.grid;
  const auto& w = grid->weights();
  // positive and negative parts of the state against the quadrature measure
  const double ip = (v.values.cwiseMax(0.0).array() * w.array()).sum();
  const double in = ((-v.values).cwiseMax(0.0).array() * w.array()).sum();

  HjbHamiltonian out;
  out.cell_values = GridFunction::zero(grid);
  out.a = GridFunction::constant(grid, box.a_min);
  out.b = Kernel::constant(grid, grid, box.b_min);
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    const double pk = p.values(k);
    double val = 0.0;
    if (pk > 0.0) {
      // push sigma's argument as low as possible
      const double inner = box.b_max * ip - box.b_min * in;
      val = sigma(box.a_min - inner) * pk;
      out.a.values(k) = box.a_min;
      for (Eigen::Index l = 0; l < w.size(); ++l)
        out.b.values(k, l) = v.values(l) > 0.0   ? box.b_max
                             : v.values(l) < 0.0 ? box.b_min
                                                 : box.b_min;
    } else if (pk < 0.0) {
      const double inner = box.b_min * ip - box.b_max * in;
      val = sigma(box.a_max - inner) * pk;
      out.a.values(k) = box.a_max;
      for (Eigen::Index l = 0; l < w.size(); ++l)
        out.b.values(k, l) = v.values(l) > 0.0   ? box.b_min
                             : v.values(l) < 0.0 ? box.b_max
                                                 : box.b_min;
    }
    out.cell_values.values(k) = val;
    out.value += val * w(k);
  }
  return out;
}

namespace {

void project_path(ControlPath& c, const BoxSet& box) {
  for (auto& a : c.a_path)
    a.values = a.values.cwiseMax(box.a_min).cwiseMin(box.a_max);
  for (auto& b : c.b_path)
    b.values = b.values.cwiseMax(box.b_min).cwiseMin(box.b_max);
}

double path_cost(const std::vector<GridFunction>& v, const ControlPath& c,
                 const std::vector<GridFunction>& targets, const Classifier& cls,
                 const Predictor& h, const Activation& sigma, LossKind loss,
                 Trajectory& traj) {
  traj = solve_forward_euler(v, c, sigma);
  return evaluate_loss(traj.terminal(), cls, h, targets, loss);
}

// projected gradient descent over the whole control path
double descend_path(const std::vector<GridFunction>& v, ControlPath& c,
                    const std::vector<GridFunction>& targets, const Classifier& cls,
                    const Predictor& h, const BoxSet& box, const Activation& sigma,
                    LossKind loss, int max_iter) {
  Trajectory traj;
  double value = path_cost(v, c, targets, cls, h, sigma, loss, traj);
  double tau = 1.0;
  for (int it = 0; it < max_iter; ++it) {
    const auto terminal = adjoint_terminal(traj.terminal(), cls, h, targets, loss);
    const Trajectory co = solve_backward(traj, c, sigma, terminal);
    const LossGradient g = loss_gradient(traj, co, c, sigma, cls, h, targets, loss);

    bool accepted = false;
    while (tau >= 1e-14) {
      ControlPath cand = c;
      for (size_t s = 0; s < cand.a_path.size(); ++s) {
        cand.a_path[s].values -= tau * g.d_a[s].values;
        cand.b_path[s].values -= tau * g.d_b[s].values;
      }
      project_path(cand, box);
      Trajectory cand_traj;
      const double cv =
          path_cost(v, cand, targets, cls, h, sigma, loss, cand_traj);
      if (cv <= value - 1e-15) {
        c = std::move(cand);
        traj = std::move(cand_traj);
        value = cv;
        tau = std::min(tau * 1.5, 1e6);
        accepted = true;
        break;
      }
      tau *= 0.5;
    }
    if (!accepted) break;
  }
  return value;
}

}  // namespace

ValueEstimate estimate_value(const std::vector<GridFunction>& v, double horizon,
                             int steps, const std::vector<GridFunction>& targets,
                             const Classifier& cls, const Predictor& h,
                             const BoxSet& box, const Activation& sigma,
                             LossKind loss, const HjbOptions& opt) {
  if (v.empty()) throw std::invalid_argument("estimate_value: no states");
  if (horizon < 0.0) throw std::invalid_argument("estimate_value: horizon < 0");
  ValueEstimate out;
  if (horizon == 0.0 || steps == 0) {
    out.value = evaluate_loss(v, cls, h, targets, loss);
    return out;
  }

  const GridPtr grid = v.front().grid;
  const TimeGrid tg(horizon, steps);
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> ua(box.a_min, box.a_max);
  std::uniform_real_distribution<double> ub(box.b_min, box.b_max);

  auto constant_path = [&](double a0, double b0) {
    ControlPath c = ControlPath::zero(tg, grid);
    for (auto& a : c.a_path) a.values.setConstant(a0);
    for (auto& b : c.b_path) b.values.setConstant(b0);
    return c;
  };

  std::vector<ControlPath> starts;
  for (const double a0 : {box.a_min, box.a_max})
    for (const double b0 : {box.b_min, box.b_max}) starts.push_back(constant_path(a0, b0));
  starts.push_back(constant_path(0.5 * (box.a_min + box.a_max),
                                 0.5 * (box.b_min + box.b_max)));
  for (int k = 0; k < opt.random_starts; ++k) {
    ControlPath c = ControlPath::zero(tg, grid);
    for (auto& a : c.a_path)
      for (Eigen::Index i = 0; i < a.values.size(); ++i) a.values(i) = ua(rng);
    for (auto& b : c.b_path)
      for (Eigen::Index i = 0; i < b.values.rows(); ++i)
        for (Eigen::Index j = 0; j < b.values.cols(); ++j) b.values(i, j) = ub(rng);
    starts.push_back(std::move(c));
  }

  out.value = std::numeric_limits<double>::infinity();
  for (auto& c : starts) {
    const double val =
        descend_path(v, c, targets, cls, h, box, sigma, loss, opt.max_iter);
    out.start_values.push_back(val);
    if (val < out.value) {
      out.value = val;
      out.ctrl = std::move(c);
    }
  }
  return out;
}

LipschitzReport empirical_lipschitz(const std::vector<GridFunction>& v_base,
                                    double horizon, int steps,
                                    const std::vector<GridFunction>& targets,
                                    const Classifier& cls, const Predictor& h,
                                    const BoxSet& box, const Activation& sigma,
                                    double radius, int trials, uint64_t seed,
                                    LossKind loss, const HjbOptions& opt) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto perturb = [&]() {
    std::vector<GridFunction> v = v_base;
    for (auto& f : v) {
      Eigen::VectorXd d(f.values.size());
      for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = u(rng);
      const double n = GridFunction(f.grid, d).norm();
      if (n > 0.0) f.values += (radius * u(rng)) * d / n;
    }
    return v;
  };
  auto dist = [](const std::vector<GridFunction>& x,
                 const std::vector<GridFunction>& y) {
    double acc = 0.0;
    for (size_t j = 0; j < x.size(); ++j) {
      const double n =
          GridFunction(x[j].grid, Eigen::VectorXd(x[j].values - y[j].values)).norm();
      acc += n * n;
    }
    return std::sqrt(acc);
  };

  LipschitzReport rep;
  HjbOptions o = opt;
  for (int t = 0; t < trials; ++t) {
    o.seed = seed + 1000 + static_cast<uint64_t>(t);
    const auto v1 = perturb();
    const auto v2 = perturb();
    const double d = dist(v1, v2);
    if (d < 1e-12) continue;
    const double V1 =
        estimate_value(v1, horizon, steps, targets, cls, h, box, sigma, loss, o).value;
    const double V2 =
        estimate_value(v2, horizon, steps, targets, cls, h, box, sigma, loss, o).value;
    rep.max_ratio = std::max(rep.max_ratio, std::abs(V1 - V2) / d);
    ++rep.samples;
  }
  return rep;
}

FeedbackResult integrate_feedback(
    const std::vector<GridFunction>& v0, double horizon, int steps,
    const CostateOracle& oracle,
    const std::function<double(const std::vector<GridFunction>&)>& terminal_cost,
    const BoxSet& box, const Activation& sigma, uint64_t seed) {
  if (v0.empty() || steps < 1 || !(horizon > 0.0))
    throw std::invalid_argument("integrate_feedback: bad arguments");
  const GridPtr grid = v0.front().grid;
  const TimeGrid tg(horizon, steps);
  const double dt = tg.dt();

  FeedbackResult out;
  out.traj.time = tg;
  out.traj.states.push_back(v0);
  out.ctrl = ControlPath::zero(tg, grid);

  std::vector<GridFunction> cur = v0;
  for (int s = 0; s < steps; ++s) {
    const auto p = oracle(cur, tg.node(s));
    const HjbHamiltonian h = hjb_hamiltonian(cur, p, box, sigma, seed + s);
    out.ctrl.a_path[static_cast<size_t>(s)] = h.a;
    out.ctrl.b_path[static_cast<size_t>(s)] = h.b;
    std::vector<GridFunction> next;
    next.reserve(cur.size());
    for (size_t j = 0; j < cur.size(); ++j) {
      const GridFunction bf = apply_kernel(h.b, cur[j]);
      const Eigen::VectorXd xi = h.a.values - bf.values;
      next.emplace_back(grid,
                        Eigen::VectorXd(cur[j].values + dt * sigma.apply(xi)));
    }
    cur = next;
    out.traj.states.push_back(cur);
  }
  // final node controls: feedback evaluated at the terminal state
  {
    const auto p = oracle(cur, tg.T);
    const HjbHamiltonian h = hjb_hamiltonian(cur, p, box, sigma, seed + steps);
    out.ctrl.a_path.back() = h.a;
    out.ctrl.b_path.back() = h.b;
  }
  out.terminal_cost = terminal_cost(cur);
  return out;
}

}  // namespace ctnet
