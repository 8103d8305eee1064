#pragma once

#include <random>
#include <vector>

#include "ctnet/adjoint.hpp"

namespace ctnet {

// Admissible control rectangle A = [a_min, a_max] x [b_min, b_max].
struct BoxSet {
  double a_min, a_max, b_min, b_max;

  BoxSet(double am, double aM, double bm, double bM);
  double clamp_a(double a) const;
  double clamp_b(double b) const;
};

// Control-theory Hamiltonian sum_j int sigma(a - B_b f_j) r_j dy.
double hamiltonian(const std::vector<GridFunction>& states,
                   const std::vector<GridFunction>& costates, const GridFunction& a,
                   const Kernel& b, const Activation& sigma);

// Pointwise control objective T_{F,r}(a, b) = sum_j sigma(a - <b, f_j>) r_j
// with b a function on the Y grid and r a fixed vector in R^N.
double pointwise_objective(const std::vector<GridFunction>& states,
                           const Eigen::VectorXd& r, double a,
                           const Eigen::VectorXd& b, const Activation& sigma);

struct ArgminResult {
  double a = 0.0;
  Eigen::VectorXd b;
  double value = 0.0;
};

// Minimizes T_{F,r} over the box: projected gradient descent multi-started
// from the four box corners (constant b) plus four random feasible points,
// followed by coordinate snap-to-bound sweeps. Deterministic given the rng
// state; ties prefer the lower corner.
ArgminResult argmin_T(const std::vector<GridFunction>& states, const Eigen::VectorXd& r,
                      const BoxSet& box, const Activation& sigma,
                      std::mt19937_64& rng);

// Closed-form bang-bang control for a single datum. Cells with r(y) = 0 or
// f(z) = 0 get the lower bound and a flag.
struct BangBangControl {
  GridFunction a;
  Kernel b;
  std::vector<bool> a_flagged;               // per y cell: r(y) == 0
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> b_flagged;
};

BangBangControl bang_bang_control(const GridFunction& f, const GridFunction& r,
                                  const BoxSet& box);

struct PontryaginState {
  ControlPath ctrl;
  Trajectory forward;
  Trajectory co;
  std::vector<std::vector<double>> hamiltonian_history;  // per sweep, per node
  std::vector<double> loss_history;
  std::vector<double> control_change_history;  // sup-norm per sweep
  bool converged = false;
  bool diverged = false;
  int sweeps_used = 0;
};

struct MsaOptions {
  int sweeps = 50;
  double relax = 0.5;
  double tol = 1e-6;
  uint64_t seed = 0;
};

// Method of successive approximations with relaxation for the coupled
// forward-backward optimality system.
PontryaginState solve_msa(const TrainingSet& data, const Classifier& cls,
                          const Predictor& h, const BoxSet& box,
                          ControlPath init, const Activation& sigma,
                          const MsaOptions& opt);

// Fraction of control values (all a and b samples) within tol of a box bound.
double boundary_contact_fraction(const ControlPath& ctrl, const BoxSet& box,
                                 double tol = 1e-6);

}  // namespace ctnet
