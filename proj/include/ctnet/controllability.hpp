#pragma once

#include <vector>

#include "ctnet/dynamics.hpp"

namespace ctnet {

// State transition matrix M(t_node, s_node) of the linearized dynamics
//   dg/dt = -sigma'(xi(t)) B_{b(t)} g,   xi = a - B_b f,
// along the stored trajectory of datum `datum`, by the same explicit Euler
// scheme as the forward solver.
Eigen::MatrixXd propagator(const Trajectory& traj, const ControlPath& ctrl,
                           const Activation& sigma, int datum, int t_node,
                           int s_node);

struct Gramian {
  Eigen::MatrixXd matrix;        // quadrature matrix of the Gramian operator
  Eigen::VectorXd eigenvalues;   // ascending, of the L2-symmetrized operator
  double min_eigenvalue = 0.0;
  // analytic coercivity lower bound (stationary variant only, else 0)
  double coercivity_bound = 0.0;
};

// Controllability Gramian around a stationary point (f_inf, b_inf) with
// a_inf = B_{b_inf} f_inf. Requires sigma(0) = 0 and sigma'(0) > 0; the time
// integral uses the trapezoidal rule on `steps` intervals and the matrix
// exponential of the frozen generator.
Gramian gramian_stationary(const GridFunction& f_inf, const Kernel& b_inf,
                           const Activation& sigma, double T, int steps);

// Controllability Gramian along a stored trajectory for one datum:
//   G = int_0^T M(T,s) D(s) M(T,s)* ds,  D = diag(sigma'(xi)^2 (1 + ||f||^2)),
// with * the L2(Y) adjoint.
Gramian gramian_trajectory(const Trajectory& traj, const ControlPath& ctrl,
                           const Activation& sigma, int datum);

// First-order obstruction to multi-state controllability: residual of the
// linearized transfer against the true perturbed flow,
//   res(eps) = mean_g ||(f_eps(T) - f(T)) - eps M(T,0) g|| / eps,
// fitted log-log over the eps list. A flat machine-precision floor (the
// linearization being exact) is reported instead of a meaningless slope.
struct ObstructionReport {
  std::vector<double> eps;
  std::vector<double> residuals;
  double slope = 0.0;
  bool at_floor = false;
};

ObstructionReport multistate_obstruction(const GridFunction& f_base,
                                         const std::vector<GridFunction>& directions,
                                         const ControlPath& ctrl,
                                         const Activation& sigma,
                                         const std::vector<double>& eps_list);

// L2(Y) adjoint of the quadrature matrix A: W^{-1} A^T W.
Eigen::MatrixXd l2_adjoint(const Eigen::MatrixXd& a, const GridPtr& grid);

}  // namespace ctnet
