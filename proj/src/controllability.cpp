#include "ctnet/controllability.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>

namespace ctnet {

namespace {

// eigenvalues of the L2(Y)-symmetrized operator: W^{1/2} G W^{-1/2} is
// symmetric whenever G = G* in the weighted inner product
Eigen::VectorXd weighted_spectrum(const Eigen::MatrixXd& g, const GridPtr& grid) {
  const Eigen::VectorXd sw = grid->weights().cwiseSqrt();
  Eigen::MatrixXd s = sw.asDiagonal() * g * sw.cwiseInverse().asDiagonal();
  s = 0.5 * (s + s.transpose());  // kill quadrature round-off asymmetry
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("gramian eigensolve failed");
  return es.eigenvalues();
}

}  // namespace

Eigen::MatrixXd l2_adjoint(const Eigen::MatrixXd& a, const GridPtr& grid) {
  const auto& w = grid->weights();
  return w.cwiseInverse().asDiagonal() * a.transpose() * w.asDiagonal();
}

Eigen::MatrixXd propagator(const Trajectory& traj, const ControlPath& ctrl,
                           const Activation& sigma, int datum, int t_node,
                           int s_node) {
  if (s_node < 0 || t_node > traj.time.steps || s_node > t_node)
    throw std::invalid_argument("propagator: need 0 <= s_node <= t_node <= steps");
  const Eigen::Index m = ctrl.grid()->size();
  const double dt = traj.time.dt();
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(m, m);
  for (int s = s_node; s < t_node; ++s) {
    const auto& f = traj.at(s)[static_cast<size_t>(datum)];
    const GridFunction bf = apply_kernel(ctrl.b_path[static_cast<size_t>(s)], f);
    const Eigen::VectorXd xi =
        ctrl.a_path[static_cast<size_t>(s)].values - bf.values;
    const Eigen::MatrixXd B = kernel_matrix(ctrl.b_path[static_cast<size_t>(s)]);
    M = (Eigen::MatrixXd::Identity(m, m) -
         dt * sigma.apply_deriv(xi).asDiagonal() * B) *
        M;
  }
  return M;
}

Gramian gramian_stationary(const GridFunction& f_inf, const Kernel& b_inf,
                           const Activation& sigma, double T, int steps) {
  if (std::abs(sigma(0.0)) > 1e-12 || !(sigma.deriv(0.0) > 0.0))
    throw std::invalid_argument(
        "stationary gramian needs sigma(0) = 0 and sigma'(0) > 0");
  if (steps < 1 || !(T > 0.0))
    throw std::invalid_argument("stationary gramian needs T > 0 and steps >= 1");
  const GridPtr grid = f_inf.grid;
  const Eigen::Index m = grid->size();
  const double sp = sigma.deriv(0.0);
  const double fn = f_inf.norm();
  const double scale = sp * sp * (1.0 + fn * fn);

  const Eigen::MatrixXd B = kernel_matrix(b_inf);
  const Eigen::MatrixXd Bstar = l2_adjoint(B, grid);
  const double dt = T / steps;
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(m, m);
  for (int s = 0; s <= steps; ++s) {
    const double tau = dt * s;
    const Eigen::MatrixXd E = (-sp * (T - tau) * B).exp();
    const Eigen::MatrixXd Estar = (-sp * (T - tau) * Bstar).exp();
    const double weight = (s == 0 || s == steps) ? 0.5 : 1.0;
    G += weight * dt * E * Estar;
  }
  G *= scale;

  Gramian out;
  out.matrix = G;
  out.eigenvalues = weighted_spectrum(G, grid);
  out.min_eigenvalue = out.eigenvalues.minCoeff();
  out.coercivity_bound =
      scale * T * std::exp(-2.0 * sp * T * b_inf.norm());
  return out;
}

Gramian gramian_trajectory(const Trajectory& traj, const ControlPath& ctrl,
                           const Activation& sigma, int datum) {
  const GridPtr grid = ctrl.grid();
  const Eigen::Index m = grid->size();
  const int S = traj.time.steps;
  const double dt = traj.time.dt();

  // accumulate M(T, s) backward: M(T,S) = I, M(T,s) = M(T,s+1) M(s+1,s)
  std::vector<Eigen::MatrixXd> M(static_cast<size_t>(S) + 1);
  M[static_cast<size_t>(S)] = Eigen::MatrixXd::Identity(m, m);
  for (int s = S - 1; s >= 0; --s) {
    const auto& f = traj.at(s)[static_cast<size_t>(datum)];
    const GridFunction bf = apply_kernel(ctrl.b_path[static_cast<size_t>(s)], f);
    const Eigen::VectorXd xi =
        ctrl.a_path[static_cast<size_t>(s)].values - bf.values;
    const Eigen::MatrixXd B = kernel_matrix(ctrl.b_path[static_cast<size_t>(s)]);
    M[static_cast<size_t>(s)] =
        M[static_cast<size_t>(s) + 1] *
        (Eigen::MatrixXd::Identity(m, m) -
         dt * sigma.apply_deriv(xi).asDiagonal() * B);
  }

  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(m, m);
  for (int s = 0; s <= S; ++s) {
    const auto& f = traj.at(s)[static_cast<size_t>(datum)];
    const GridFunction bf = apply_kernel(ctrl.b_path[static_cast<size_t>(s)], f);
    const Eigen::VectorXd xi =
        ctrl.a_path[static_cast<size_t>(s)].values - bf.values;
    const double fn = f.norm();
    const Eigen::VectorXd d =
        sigma.apply_deriv(xi).array().square() * (1.0 + fn * fn);
    const auto& Ms = M[static_cast<size_t>(s)];
    const double weight = (s == 0 || s == S) ? 0.5 : 1.0;
    G += weight * dt * Ms * d.asDiagonal() * l2_adjoint(Ms, grid);
  }

  Gramian out;
  out.matrix = G;
  out.eigenvalues = weighted_spectrum(G, grid);
  out.min_eigenvalue = out.eigenvalues.minCoeff();
  return out;
}

ObstructionReport multistate_obstruction(const GridFunction& f_base,
                                         const std::vector<GridFunction>& directions,
                                         const ControlPath& ctrl,
                                         const Activation& sigma,
                                         const std::vector<double>& eps_list) {
  if (directions.empty() || eps_list.size() < 2)
    throw std::invalid_argument(
        "obstruction fit needs directions and at least two eps values");
  const Trajectory base = solve_forward_euler({f_base}, ctrl, sigma);
  const Eigen::MatrixXd M =
      propagator(base, ctrl, sigma, 0, base.time.steps, 0);
  const GridFunction& fT = base.terminal().front();

  ObstructionReport rep;
  rep.eps = eps_list;
  double ref_scale = 0.0;
  for (const double eps : eps_list) {
    if (!(eps > 0.0)) throw std::invalid_argument("eps values must be positive");
    double acc = 0.0;
    for (const auto& g : directions) {
      require_same_grid(f_base, g);
      GridFunction pert(f_base.grid,
                        Eigen::VectorXd(f_base.values + eps * g.values));
      const Trajectory t = solve_forward_euler({pert}, ctrl, sigma);
      const Eigen::VectorXd lin = M * g.values;
      GridFunction res(f_base.grid,
                       Eigen::VectorXd(t.terminal().front().values - fT.values -
                                       eps * lin));
      acc += res.norm() / eps;
      ref_scale = std::max(
          ref_scale, GridFunction(f_base.grid, Eigen::VectorXd(lin)).norm());
    }
    rep.residuals.push_back(acc / static_cast<double>(directions.size()));
  }

  // exact linear flows leave only round-off; a log-log fit there is noise
  const double floor = 1e-10 * (1.0 + ref_scale);
  bool all_floor = true;
  for (const double r : rep.residuals) all_floor = all_floor && (r < floor);
  if (all_floor) {
    rep.at_floor = true;
    rep.slope = 0.0;
    return rep;
  }

  const size_t n = eps_list.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    const double x = std::log(eps_list[i]);
    const double y = std::log(std::max(rep.residuals[i], 1e-300));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  rep.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return rep;
}

}  // namespace ctnet
