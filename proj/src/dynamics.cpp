#include "ctnet/dynamics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace ctnet {

Activation Activation::make(ActivationKind kind) {
  Activation act;
  act.kind_ = kind;
  switch (kind) {
    case ActivationKind::Sigmoid:
      act.lipschitz_ = 0.25;
      act.value_ = [](double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                                  : std::exp(x) / (1.0 + std::exp(x)); };
      act.deriv_ = [act](double x) {
        const double s = act.value_(x);
        return s * (1.0 - s);
      };
      act.deriv2_ = [act](double x) {
        const double s = act.value_(x);
        return s * (1.0 - s) * (1.0 - 2.0 * s);
      };
      break;
    case ActivationKind::Tanh:
      act.lipschitz_ = 1.0;
      act.value_ = [](double x) { return std::tanh(x); };
      act.deriv_ = [](double x) {
        const double t = std::tanh(x);
        return 1.0 - t * t;
      };
      act.deriv2_ = [](double x) {
        const double t = std::tanh(x);
        return -2.0 * t * (1.0 - t * t);
      };
      break;
    case ActivationKind::SmoothedRelu: {
      const double eps = kSmoothedReluEps;
      act.lipschitz_ = 1.0;
      act.value_ = [eps](double x) {
        return 0.5 * (x + std::sqrt(x * x + eps * eps)) - 0.5 * eps;
      };
      act.deriv_ = [eps](double x) {
        return 0.5 * (1.0 + x / std::sqrt(x * x + eps * eps));
      };
      act.deriv2_ = [eps](double x) {
        const double q = x * x + eps * eps;
        return 0.5 * eps * eps / (q * std::sqrt(q));
      };
      break;
    }
    case ActivationKind::Identity:
      act.lipschitz_ = 1.0;
      act.value_ = [](double x) { return x; };
      act.deriv_ = [](double) { return 1.0; };
      act.deriv2_ = [](double) { return 0.0; };
      break;
  }
  return act;
}

Activation Activation::make(const std::string& name) {
  if (name == "sigmoid") return make(ActivationKind::Sigmoid);
  if (name == "tanh") return make(ActivationKind::Tanh);
  if (name == "smoothed_relu") return make(ActivationKind::SmoothedRelu);
  if (name == "identity") return make(ActivationKind::Identity);
  throw std::invalid_argument("unknown activation: " + name);
}

Eigen::VectorXd Activation::apply(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out(i) = value_(x(i));
  return out;
}

Eigen::VectorXd Activation::apply_deriv(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out(i) = deriv_(x(i));
  return out;
}

TimeGrid::TimeGrid(double horizon, int s) : T(horizon), steps(s) {
  if (!(T > 0.0) || steps < 1) throw std::invalid_argument("invalid time grid");
}

ControlPath::ControlPath(TimeGrid tg, std::vector<GridFunction> a,
                         std::vector<Kernel> b)
    : time(tg), a_path(std::move(a)), b_path(std::move(b)) {
  const size_t n = static_cast<size_t>(time.nodes());
  if (a_path.size() != n || b_path.size() != n)
    throw std::invalid_argument("control path length mismatch");
  const GridPtr& g = a_path.front().grid;
  for (const auto& af : a_path)
    if (af.grid != g) throw std::invalid_argument("control snapshots on mixed grids");
  for (const auto& bk : b_path)
    if (bk.row_grid != g || bk.col_grid != g)
      throw std::invalid_argument("kernel snapshots on mixed grids");
}

ControlPath ControlPath::zero(const TimeGrid& tg, const GridPtr& grid) {
  std::vector<GridFunction> a(tg.nodes(), GridFunction::zero(grid));
  std::vector<Kernel> b(tg.nodes(), Kernel::zero(grid, grid));
  return ControlPath(tg, std::move(a), std::move(b));
}

GridFunction apply_kernel(const Kernel& b, const GridFunction& f) {
  if (b.col_grid != f.grid)
    throw std::invalid_argument("kernel column grid does not match function grid");
  Eigen::VectorXd weighted = f.values.cwiseProduct(b.col_grid->weights());
  return GridFunction(b.row_grid, b.values * weighted);
}

Eigen::MatrixXd kernel_matrix(const Kernel& b) {
  return b.values * b.col_grid->weights().asDiagonal();
}

Kernel transpose_kernel(const Kernel& b) {
  return Kernel(b.col_grid, b.row_grid, b.values.transpose());
}

namespace {

[[noreturn]] void throw_nonfinite(const char* where, int time_index, int datum) {
  std::ostringstream os;
  os << where << ": non-finite value at time index " << time_index << ", datum "
     << datum;
  throw std::runtime_error(os.str());
}

}  // namespace

Trajectory solve_forward_euler(const std::vector<GridFunction>& f_init,
                               const ControlPath& ctrl, const Activation& sigma) {
  if (f_init.empty()) throw std::invalid_argument("no initial data");
  const GridPtr& g = ctrl.grid();
  for (const auto& fi : f_init)
    if (fi.grid != g) throw std::invalid_argument("initial data grid mismatch");

  const int n = static_cast<int>(f_init.size());
  const double dt = ctrl.time.dt();
  Trajectory traj;
  traj.time = ctrl.time;
  traj.states.resize(ctrl.time.nodes());
  traj.states[0] = f_init;
  for (int s = 0; s < ctrl.time.steps; ++s) {
    const Eigen::MatrixXd bmat = kernel_matrix(ctrl.b_path[s]);
    traj.states[s + 1].reserve(n);
    for (int j = 0; j < n; ++j) {
      const Eigen::VectorXd& f = traj.states[s][j].values;
      Eigen::VectorXd xi = ctrl.a_path[s].values - bmat * f;
      Eigen::VectorXd next = f + dt * sigma.apply(xi);
      if (!next.allFinite()) throw_nonfinite("solve_forward_euler", s + 1, j);
      traj.states[s + 1].emplace_back(g, std::move(next));
    }
  }
  return traj;
}

namespace {

// Picard iteration on time-node window [s0, s1] of the trajectory, with the
// state at s0 fixed. Trapezoidal quadrature of the time integral. Bisects the
// window when the residual stalls.
void picard_window(Trajectory& traj, const ControlPath& ctrl,
                   const Activation& sigma, int s0, int s1, int max_iter,
                   double tol) {
  const double dt = ctrl.time.dt();
  const int n = traj.data_count();
  const int nodes = s1 - s0 + 1;
  const GridPtr& g = ctrl.grid();

  std::vector<Eigen::MatrixXd> bmats(nodes);
  for (int s = 0; s < nodes; ++s) bmats[s] = kernel_matrix(ctrl.b_path[s0 + s]);

  for (int j = 0; j < n; ++j) {
    // current iterate, initialized constant from the window start
    std::vector<Eigen::VectorXd> cur(nodes, traj.states[s0][j].values);
    double prev_res = std::numeric_limits<double>::infinity();
    int stalls = 0;
    bool converged = false;
    for (int it = 0; it < max_iter; ++it) {
      // integrand at current iterate
      std::vector<Eigen::VectorXd> rhs(nodes);
      for (int s = 0; s < nodes; ++s) {
        Eigen::VectorXd xi = ctrl.a_path[s0 + s].values - bmats[s] * cur[s];
        rhs[s] = sigma.apply(xi);
      }
      std::vector<Eigen::VectorXd> next(nodes);
      next[0] = cur[0];
      Eigen::VectorXd integral = Eigen::VectorXd::Zero(g->size());
      for (int s = 1; s < nodes; ++s) {
        integral += 0.5 * dt * (rhs[s - 1] + rhs[s]);
        next[s] = cur[0] + integral;
        if (!next[s].allFinite()) throw_nonfinite("solve_forward_picard", s0 + s, j);
      }
      double res = 0.0;
      for (int s = 1; s < nodes; ++s) {
        GridFunction d(g, Eigen::VectorXd(next[s] - cur[s]));
        res = std::max(res, d.norm());
      }
      cur = std::move(next);
      if (res <= tol) {
        converged = true;
        break;
      }
      if (res > 0.5 * prev_res) ++stalls;
      prev_res = res;
      if (stalls >= 3 && nodes > 2) break;  // contraction stalled, bisect below
    }
    if (!converged) {
      if (nodes > 2) {
        const int mid = s0 + (s1 - s0) / 2;
        // write best-so-far up to mid so the sub-window restarts from it
        for (int s = s0 + 1; s <= s1; ++s)
          traj.states[s][j] = GridFunction(g, cur[s - s0]);
        picard_window(traj, ctrl, sigma, s0, mid, max_iter, tol);
        picard_window(traj, ctrl, sigma, mid, s1, max_iter, tol);
        continue;
      }
      std::ostringstream os;
      os << "solve_forward_picard: no convergence in " << max_iter
         << " iterations, last residual " << prev_res;
      throw std::runtime_error(os.str());
    }
    for (int s = s0 + 1; s <= s1; ++s) traj.states[s][j] = GridFunction(g, cur[s - s0]);
  }
}

}  // namespace

Trajectory solve_forward_picard(const std::vector<GridFunction>& f_init,
                                const ControlPath& ctrl, const Activation& sigma,
                                int max_iter, double tol) {
  if (f_init.empty()) throw std::invalid_argument("no initial data");
  const GridPtr& g = ctrl.grid();
  for (const auto& fi : f_init)
    if (fi.grid != g) throw std::invalid_argument("initial data grid mismatch");

  Trajectory traj;
  traj.time = ctrl.time;
  traj.states.assign(ctrl.time.nodes(), f_init);
  picard_window(traj, ctrl, sigma, 0, ctrl.time.steps, max_iter, tol);
  return traj;
}

namespace {

// Left-rectangle L1-in-time norms over node range [s0, s2)
double l1_norm_a(const ControlPath& ctrl, int s0, int s2) {
  double acc = 0.0;
  for (int s = s0; s < s2; ++s) acc += ctrl.time.dt() * ctrl.a_path[s].norm();
  return acc;
}

double l1_norm_b(const ControlPath& ctrl, int s0, int s2) {
  double acc = 0.0;
  for (int s = s0; s < s2; ++s) acc += ctrl.time.dt() * ctrl.b_path[s].norm();
  return acc;
}

}  // namespace

AprioriReport check_apriori_bound(const Trajectory& traj, const ControlPath& ctrl,
                                  const Activation& sigma) {
  const double L = sigma.lipschitz();
  const double sigma0 = std::abs(sigma(0.0));
  const double sqrtY = std::sqrt(ctrl.grid()->total_measure());
  const int n = traj.data_count();
  const int nodes = traj.time.nodes();

  AprioriReport rep;
  rep.solution_bound_margin = std::numeric_limits<double>::infinity();
  rep.difference_bound_margin = std::numeric_limits<double>::infinity();
  rep.time_continuity_margin = std::numeric_limits<double>::infinity();

  for (int s = 0; s < nodes; ++s) {
    const double t = traj.time.node(s);
    const double na = l1_norm_a(ctrl, 0, s);
    const double nb = l1_norm_b(ctrl, 0, s);
    for (int j = 0; j < n; ++j) {
      const double lhs = traj.states[s][j].norm();
      const double rhs =
          (traj.states[0][j].norm() + sigma0 * sqrtY * t + L * na) * std::exp(L * nb);
      rep.solution_bound_margin = std::min(rep.solution_bound_margin, rhs - lhs);
    }
  }

  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double d0 =
          GridFunction(ctrl.grid(),
                       Eigen::VectorXd(traj.states[0][i].values - traj.states[0][j].values))
              .norm();
      for (int s = 0; s < nodes; ++s) {
        const double lhs =
            GridFunction(ctrl.grid(), Eigen::VectorXd(traj.states[s][i].values -
                                                      traj.states[s][j].values))
                .norm();
        const double rhs = d0 * std::exp(L * l1_norm_b(ctrl, 0, s));
        rep.difference_bound_margin = std::min(rep.difference_bound_margin, rhs - lhs);
      }
    }

  for (int j = 0; j < n; ++j) {
    std::vector<double> norms(nodes);
    for (int s = 0; s < nodes; ++s) norms[s] = traj.states[s][j].norm();
    for (int s1 = 0; s1 < nodes; ++s1)
      for (int s2 = s1 + 1; s2 < nodes; ++s2) {
        const double lhs =
            GridFunction(ctrl.grid(), Eigen::VectorXd(traj.states[s1][j].values -
                                                      traj.states[s2][j].values))
                .norm();
        double sup_f = 0.0;
        for (int s = s1; s <= s2; ++s) sup_f = std::max(sup_f, norms[s]);
        const double rhs = sigma0 * sqrtY * (traj.time.node(s2) - traj.time.node(s1)) +
                           L * (l1_norm_a(ctrl, s1, s2) + sup_f * l1_norm_b(ctrl, s1, s2));
        rep.time_continuity_margin = std::min(rep.time_continuity_margin, rhs - lhs);
      }
  }
  return rep;
}

double difference_bound_margin(const Trajectory& t1, const ControlPath& c1,
                               const Trajectory& t2, const ControlPath& c2,
                               const Activation& sigma) {
  if (t1.time.nodes() != t2.time.nodes() || t1.data_count() != t2.data_count())
    throw std::invalid_argument("trajectory shape mismatch");
  const double L = sigma.lipschitz();
  const double sigma0 = std::abs(sigma(0.0));
  const GridPtr& g = c1.grid();
  const double sqrtY = std::sqrt(g->total_measure());
  double margin = std::numeric_limits<double>::infinity();
  for (int s = 0; s < t1.time.nodes(); ++s) {
    const double t = t1.time.node(s);
    double na1 = l1_norm_a(c1, 0, s), nb1 = l1_norm_b(c1, 0, s);
    double nb2 = l1_norm_b(c2, 0, s);
    double da = 0.0, db = 0.0;
    for (int k = 0; k < s; ++k) {
      da += c1.time.dt() *
            GridFunction(g, Eigen::VectorXd(c1.a_path[k].values - c2.a_path[k].values))
                .norm();
      db += c1.time.dt() *
            Kernel(g, g, Eigen::MatrixXd(c1.b_path[k].values - c2.b_path[k].values))
                .norm();
    }
    for (int j = 0; j < t1.data_count(); ++j) {
      const double d0 =
          GridFunction(g, Eigen::VectorXd(t1.states[0][j].values - t2.states[0][j].values))
              .norm();
      const double lhs =
          GridFunction(g, Eigen::VectorXd(t1.states[s][j].values - t2.states[s][j].values))
              .norm();
      const double rhs =
          (d0 + L * da) * std::exp(L * nb2) +
          (t1.states[0][j].norm() + sigma0 * sqrtY * t + L * na1) * db *
              std::exp(L * (nb1 + nb2));
      margin = std::min(margin, rhs - lhs);
    }
  }
  return margin;
}

}  // namespace ctnet
