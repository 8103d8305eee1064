#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ctnet/grid.hpp"

namespace ctnet {

enum class ActivationKind { Sigmoid, Tanh, SmoothedRelu, Identity };

// Pointwise activation with first and second derivatives. The Lipschitz
// constant is the exact sup of sigma' for each built-in kind.
class Activation {
public:
  static Activation make(ActivationKind kind);
  static Activation make(const std::string& name);

  ActivationKind kind() const { return kind_; }
  double lipschitz() const { return lipschitz_; }

  double operator()(double x) const { return value_(x); }
  double deriv(double x) const { return deriv_(x); }
  double deriv2(double x) const { return deriv2_(x); }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  Eigen::VectorXd apply_deriv(const Eigen::VectorXd& x) const;

private:
  ActivationKind kind_;
  double lipschitz_;
  std::function<double(double)> value_, deriv_, deriv2_;
};

// smoothing width of the SmoothedRelu kind
inline constexpr double kSmoothedReluEps = 1e-2;

// Uniform partition of [0, T] into S steps (S+1 nodes).
struct TimeGrid {
  double T = 0.0;
  int steps = 0;

  TimeGrid() = default;
  TimeGrid(double horizon, int s);
  double dt() const { return T / steps; }
  int nodes() const { return steps + 1; }
  double node(int s) const { return T * s / steps; }
};

// Time-sampled control pair (a(.,t), b(.,.,t)).
struct ControlPath {
  TimeGrid time;
  std::vector<GridFunction> a_path;  // one per node
  std::vector<Kernel> b_path;        // one per node

  ControlPath() = default;
  ControlPath(TimeGrid tg, std::vector<GridFunction> a, std::vector<Kernel> b);
  static ControlPath zero(const TimeGrid& tg, const GridPtr& grid);

  const GridPtr& grid() const { return a_path.front().grid; }
};

// Time-sampled family of N grid functions (states or co-states).
struct Trajectory {
  TimeGrid time;
  // states[s][j]: datum j at time node s
  std::vector<std::vector<GridFunction>> states;

  int data_count() const { return static_cast<int>(states.front().size()); }
  const std::vector<GridFunction>& at(int s) const { return states.at(s); }
  const std::vector<GridFunction>& terminal() const { return states.back(); }
};

// (B_b f)(y_k) = sum_l b(y_k, z_l) f(z_l) w_l
GridFunction apply_kernel(const Kernel& b, const GridFunction& f);

// Quadrature matrix of B_b: row k, col l holds b(y_k, z_l) w_l.
Eigen::MatrixXd kernel_matrix(const Kernel& b);

// Transposed kernel b*(y,z) = b(z,y).
Kernel transpose_kernel(const Kernel& b);

Trajectory solve_forward_euler(const std::vector<GridFunction>& f_init,
                               const ControlPath& ctrl, const Activation& sigma);

struct PicardOptions {
  int max_iter = 100;
  double tol = 1e-10;
};

Trajectory solve_forward_picard(const std::vector<GridFunction>& f_init,
                                const ControlPath& ctrl, const Activation& sigma,
                                int max_iter = 100, double tol = 1e-10);

// Margins of the a-priori bounds evaluated on a solver output. A margin is
// RHS - LHS, so anything below -1e-8 flags a violation.
struct AprioriReport {
  double solution_bound_margin;    // estimate on ||f(t)||
  double difference_bound_margin;  // pairs within the trajectory, same control
  double time_continuity_margin;
  bool ok(double tol = 1e-8) const {
    return solution_bound_margin >= -tol && difference_bound_margin >= -tol &&
           time_continuity_margin >= -tol;
  }
};

AprioriReport check_apriori_bound(const Trajectory& traj, const ControlPath& ctrl,
                                  const Activation& sigma);

// Difference estimate for two full runs (possibly different controls).
double difference_bound_margin(const Trajectory& t1, const ControlPath& c1,
                               const Trajectory& t2, const ControlPath& c2,
                               const Activation& sigma);

}  // namespace ctnet
