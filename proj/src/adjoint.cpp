#include "ctnet/adjoint.hpp"

#include <cmath>
#include <sstream>

namespace ctnet {

namespace {

// Terminal loss factor g_j(u): the L2(U) gradient of N*J with respect to Z_j.
GridFunction terminal_factor(const GridFunction& z, const Predictor& h,
                             const GridFunction& target, LossKind loss) {
  if (loss == LossKind::Mse) {
    GridFunction p = predict(z, h);
    Eigen::VectorXd out(z.values.size());
    if (h.kind == PredictorKind::Softmax)
      throw std::invalid_argument("softmax predictor pairs with the cross-entropy loss");
    for (Eigen::Index k = 0; k < out.size(); ++k)
      out(k) = (p.values(k) - target.values(k)) * h.h_prime(z.values(k));
    return GridFunction(z.grid, std::move(out));
  }
  // cross-entropy with softmax output: gradient is P - softmax(-Z)
  GridFunction p = predict(z, Predictor::softmax());
  return GridFunction(z.grid, Eigen::VectorXd(target.values - p.values));
}

}  // namespace

std::vector<GridFunction> adjoint_terminal(const std::vector<GridFunction>& f_terminal,
                                           const Classifier& cls, const Predictor& h,
                                           const std::vector<GridFunction>& targets,
                                           LossKind loss) {
  if (f_terminal.size() != targets.size() || f_terminal.empty())
    throw std::invalid_argument("adjoint_terminal: list length mismatch");
  std::vector<GridFunction> out;
  out.reserve(f_terminal.size());
  const Kernel w_t = transpose_kernel(cls.w);  // Y x U
  for (size_t j = 0; j < f_terminal.size(); ++j) {
    GridFunction z = network_output(f_terminal[j], cls);
    GridFunction g = terminal_factor(z, h, targets[j], loss);
    out.push_back(apply_kernel(w_t, g));
  }
  return out;
}

Trajectory solve_backward(const Trajectory& traj, const ControlPath& ctrl,
                          const Activation& sigma,
                          const std::vector<GridFunction>& terminal) {
  if (traj.time.nodes() != ctrl.time.nodes())
    throw std::invalid_argument("trajectory/control time grid mismatch");
  const int n = traj.data_count();
  if (static_cast<int>(terminal.size()) != n)
    throw std::invalid_argument("terminal data count mismatch");
  const GridPtr& g = ctrl.grid();
  const double dt = ctrl.time.dt();

  Trajectory co;
  co.time = traj.time;
  co.states.resize(traj.time.nodes());
  co.states.back() = terminal;
  for (int s = ctrl.time.steps - 1; s >= 0; --s) {
    const Eigen::MatrixXd bmat = kernel_matrix(ctrl.b_path[s]);
    const Eigen::MatrixXd bstar = kernel_matrix(transpose_kernel(ctrl.b_path[s]));
    co.states[s].reserve(n);
    for (int j = 0; j < n; ++j) {
      Eigen::VectorXd xi = ctrl.a_path[s].values - bmat * traj.states[s][j].values;
      Eigen::VectorXd scaled =
          sigma.apply_deriv(xi).cwiseProduct(co.states[s + 1][j].values);
      Eigen::VectorXd r = co.states[s + 1][j].values - dt * (bstar * scaled);
      if (!r.allFinite()) {
        std::ostringstream os;
        os << "solve_backward: non-finite value at time index " << s << ", datum " << j;
        throw std::runtime_error(os.str());
      }
      co.states[s].emplace_back(g, std::move(r));
    }
  }
  return co;
}

LossGradient loss_gradient(const Trajectory& traj, const Trajectory& co,
                           const ControlPath& ctrl, const Activation& sigma,
                           const Classifier& cls, const Predictor& h,
                           const std::vector<GridFunction>& targets, LossKind loss) {
  const int n = traj.data_count();
  const int steps = ctrl.time.steps;
  const GridPtr& g = ctrl.grid();
  const double inv_n = 1.0 / n;

  LossGradient grad;
  grad.d_a.reserve(steps + 1);
  grad.d_b.reserve(steps + 1);
  for (int s = 0; s < steps; ++s) {
    const Eigen::MatrixXd bmat = kernel_matrix(ctrl.b_path[s]);
    Eigen::VectorXd da = Eigen::VectorXd::Zero(g->size());
    Eigen::MatrixXd db = Eigen::MatrixXd::Zero(g->size(), g->size());
    for (int j = 0; j < n; ++j) {
      Eigen::VectorXd xi = ctrl.a_path[s].values - bmat * traj.states[s][j].values;
      // exact discrete adjoint of the Euler step: co-state at the node after s
      Eigen::VectorXd sr =
          sigma.apply_deriv(xi).cwiseProduct(co.states[s + 1][j].values);
      da += sr;
      db -= sr * traj.states[s][j].values.transpose();
    }
    grad.d_a.emplace_back(g, Eigen::VectorXd(inv_n * da));
    grad.d_b.emplace_back(g, g, Eigen::MatrixXd(inv_n * db));
  }
  grad.d_a.push_back(GridFunction::zero(g));
  grad.d_b.push_back(Kernel::zero(g, g));

  const GridPtr& ug = cls.u_grid();
  Eigen::MatrixXd dw = Eigen::MatrixXd::Zero(ug->size(), g->size());
  Eigen::VectorXd dmu = Eigen::VectorXd::Zero(ug->size());
  for (int j = 0; j < n; ++j) {
    GridFunction z = network_output(traj.terminal()[j], cls);
    GridFunction fac = terminal_factor(z, h, targets[j], loss);
    dmu += fac.values;
    dw += fac.values * traj.terminal()[j].values.transpose();
  }
  grad.d_w = Kernel(ug, g, Eigen::MatrixXd(inv_n * dw));
  grad.d_mu = GridFunction(ug, Eigen::VectorXd(inv_n * dmu));
  return grad;
}

double evaluate_loss(const std::vector<GridFunction>& f_terminal,
                     const Classifier& cls, const Predictor& h,
                     const std::vector<GridFunction>& targets, LossKind loss) {
  std::vector<GridFunction> z;
  z.reserve(f_terminal.size());
  for (const auto& f : f_terminal) z.push_back(network_output(f, cls));
  if (loss == LossKind::CrossEntropy) return loss_cross_entropy(z, targets);
  std::vector<GridFunction> pred;
  pred.reserve(z.size());
  for (const auto& zj : z) pred.push_back(predict(zj, h));
  return loss_mse(pred, targets);
}

TrainResult train_gradient_flow(const TrainingSet& data, ControlPath init_ctrl,
                                Classifier init_cls, const Activation& sigma,
                                const Predictor& h, double step, int iters,
                                LossKind loss) {
  if (!(step > 0.0)) throw std::invalid_argument("step must be positive");
  TrainResult res{std::move(init_ctrl), std::move(init_cls), {}};

  auto loss_of = [&](const ControlPath& c, const Classifier& cl) {
    Trajectory traj = solve_forward_euler(data.initial, c, sigma);
    return evaluate_loss(traj.terminal(), cl, h, data.targets, loss);
  };

  double j0 = loss_of(res.ctrl, res.cls);
  res.loss_history.push_back(j0);

  for (int it = 0; it < iters; ++it) {
    Trajectory traj = solve_forward_euler(data.initial, res.ctrl, sigma);
    std::vector<GridFunction> term =
        adjoint_terminal(traj.terminal(), res.cls, h, data.targets, loss);
    Trajectory co = solve_backward(traj, res.ctrl, sigma, term);
    LossGradient grad =
        loss_gradient(traj, co, res.ctrl, sigma, res.cls, h, data.targets, loss);

    double tau = step;
    bool accepted = false;
    for (int half = 0; half <= 30; ++half) {
      ControlPath cand = res.ctrl;
      Classifier cand_cls = res.cls;
      for (int s = 0; s < cand.time.nodes(); ++s) {
        cand.a_path[s].values -= tau * grad.d_a[s].values;
        cand.b_path[s].values -= tau * grad.d_b[s].values;
      }
      cand_cls.w.values -= tau * grad.d_w.values;
      cand_cls.mu.values -= tau * grad.d_mu.values;
      const double j1 = loss_of(cand, cand_cls);
      if (j1 <= j0) {
        res.ctrl = std::move(cand);
        res.cls = std::move(cand_cls);
        j0 = j1;
        accepted = true;
        break;
      }
      tau *= 0.5;
    }
    if (!accepted) throw std::runtime_error("train_gradient_flow: step underflow");
    res.loss_history.push_back(j0);
  }
  return res;
}

double StationarityResiduals::max() const {
  return std::max(std::max(a, b), std::max(w, mu));
}

StationarityResiduals stationarity_residuals(const Trajectory& traj,
                                             const Trajectory& co,
                                             const ControlPath& ctrl,
                                             const Activation& sigma,
                                             const Classifier& cls,
                                             const Predictor& h,
                                             const std::vector<GridFunction>& targets,
                                             LossKind loss) {
  LossGradient grad = loss_gradient(traj, co, ctrl, sigma, cls, h, targets, loss);
  const double n = traj.data_count();
  const double dt = ctrl.time.dt();
  double acc_a = 0.0, acc_b = 0.0;
  for (int s = 0; s < ctrl.time.steps; ++s) {
    const double na = grad.d_a[s].norm();
    const double nb = grad.d_b[s].norm();
    acc_a += dt * na * na;
    acc_b += dt * nb * nb;
  }
  StationarityResiduals r;
  r.a = n * std::sqrt(acc_a);
  r.b = n * std::sqrt(acc_b);
  r.w = n * grad.d_w.norm();
  r.mu = n * grad.d_mu.norm();
  return r;
}

StationaryClassifier stationary_classifier(const std::vector<GridFunction>& f_terminal,
                                           const std::vector<GridFunction>& targets,
                                           const GridPtr& u_grid, double drop_tol) {
  const int n = static_cast<int>(f_terminal.size());
  if (n < 1 || targets.size() != f_terminal.size())
    throw std::invalid_argument("stationary_classifier: list length mismatch");
  const GridPtr& yg = f_terminal.front().grid;

  // modified Gram-Schmidt on the terminal states
  double scale = 0.0;
  for (const auto& f : f_terminal) scale = std::max(scale, f.norm());
  StationaryClassifier out;
  for (const auto& f : f_terminal) {
    Eigen::VectorXd v = f.values;
    for (const auto& q : out.basis) {
      GridFunction vf(yg, v);
      v -= l2_inner(vf, q) * q.values;
    }
    GridFunction vf(yg, v);
    const double nrm = vf.norm();
    if (nrm > drop_tol * scale) out.basis.emplace_back(yg, Eigen::VectorXd(v / nrm));
  }
  out.span_dim = static_cast<int>(out.basis.size());
  if (out.span_dim == 0)
    throw std::runtime_error("stationary_classifier: degenerate terminal states (K = 0)");
  const int k = out.span_dim;

  Eigen::MatrixXd omega(n, k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) omega(i, j) = l2_inner(f_terminal[i], out.basis[j]);

  const Eigen::VectorXd e_tilde = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(n));
  const Eigen::MatrixXd a_mat = omega - e_tilde * (e_tilde.transpose() * omega);
  const Eigen::MatrixXd a_pinv = pseudo_inverse(a_mat);

  const Eigen::Index mu_cells = u_grid->size();
  out.w_coeffs.resize(k, mu_cells);
  Eigen::VectorXd mu(mu_cells);
  for (Eigen::Index uc = 0; uc < mu_cells; ++uc) {
    Eigen::VectorXd p(n);
    for (int j = 0; j < n; ++j) p(j) = targets[j].values(uc);
    const Eigen::VectorXd wc = a_pinv * p;
    out.w_coeffs.col(uc) = wc;
    mu(uc) = (p.dot(e_tilde) - e_tilde.transpose() * omega * wc) / std::sqrt(n);
  }

  Eigen::MatrixXd w_values = Eigen::MatrixXd::Zero(mu_cells, yg->size());
  for (int j = 0; j < k; ++j)
    w_values += out.w_coeffs.row(j).transpose() * out.basis[j].values.transpose();
  out.cls = Classifier(Kernel(u_grid, yg, std::move(w_values)),
                       GridFunction(u_grid, std::move(mu)));

  out.least_squares_residuals.reserve(n);
  for (int j = 0; j < n; ++j) {
    GridFunction z = network_output(f_terminal[j], out.cls);
    GridFunction d(u_grid, Eigen::VectorXd(z.values - targets[j].values));
    out.least_squares_residuals.push_back(d.norm());
  }
  return out;
}

Trajectory reduced_control_forward(const std::vector<GridFunction>& f_init,
                                   const TimeGrid& tg,
                                   const std::vector<GridFunction>& a_path,
                                   const std::vector<std::vector<GridFunction>>& b_coeffs,
                                   const Activation& sigma) {
  const int n = static_cast<int>(f_init.size());
  if (static_cast<int>(b_coeffs.size()) != n)
    throw std::invalid_argument("need one coefficient path per datum");
  if (static_cast<int>(a_path.size()) != tg.nodes())
    throw std::invalid_argument("a path length mismatch");
  for (const auto& path : b_coeffs)
    if (static_cast<int>(path.size()) != tg.nodes())
      throw std::invalid_argument("b coefficient path length mismatch");
  const GridPtr& g = f_init.front().grid;
  const double dt = tg.dt();

  Trajectory traj;
  traj.time = tg;
  traj.states.resize(tg.nodes());
  traj.states[0] = f_init;
  for (int s = 0; s < tg.steps; ++s) {
    Eigen::MatrixXd gram(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) gram(i, j) = l2_inner(traj.states[s][i], traj.states[s][j]);
    traj.states[s + 1].reserve(n);
    for (int j = 0; j < n; ++j) {
      Eigen::VectorXd xi = a_path[s].values;
      for (int l = 0; l < n; ++l) xi -= gram(l, j) * b_coeffs[l][s].values;
      Eigen::VectorXd next = traj.states[s][j].values + dt * sigma.apply(xi);
      if (!next.allFinite()) {
        std::ostringstream os;
        os << "reduced_control_forward: non-finite value at time index " << s + 1
           << ", datum " << j;
        throw std::runtime_error(os.str());
      }
      traj.states[s + 1].emplace_back(g, std::move(next));
    }
  }
  return traj;
}

double control_bv_norm(const ControlPath& ctrl) {
  double acc = 0.0;
  for (int s = 1; s < ctrl.time.nodes(); ++s) {
    acc += GridFunction(ctrl.grid(), Eigen::VectorXd(ctrl.a_path[s].values -
                                                     ctrl.a_path[s - 1].values))
               .norm();
    acc += Kernel(ctrl.grid(), ctrl.grid(),
                  Eigen::MatrixXd(ctrl.b_path[s].values - ctrl.b_path[s - 1].values))
               .norm();
  }
  return acc;
}

}  // namespace ctnet
