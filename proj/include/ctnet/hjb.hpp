#pragma once

#include <functional>
#include <random>
#include <vector>

#include "ctnet/pontryagin.hpp"

namespace ctnet {

// Pointwise-minimized Hamiltonian of the value equation,
//   H(v, p) = int_Y min_{(a, b(y,.)) in box} sum_j sigma(a - <b, v_j>) p_j(y) dy,
// with the per-cell minimizing controls recorded (usable as a feedback law).
struct HjbHamiltonian {
  double value = 0.0;
  GridFunction cell_values;  // minimized integrand per y cell
  GridFunction a;            // minimizing controls per y cell
  Kernel b;
};

HjbHamiltonian hjb_hamiltonian(const std::vector<GridFunction>& v,
                               const std::vector<GridFunction>& p,
                               const BoxSet& box, const Activation& sigma,
                               uint64_t seed = 0);

// Closed form for a single datum: with sigma increasing the inner minimum
// splits on the sign of p(y), and <b, v> is extremized against the positive
// and negative parts of v.
HjbHamiltonian hjb_hamiltonian_single(const GridFunction& v, const GridFunction& p,
                                      const BoxSet& box, const Activation& sigma);

struct HjbOptions {
  int random_starts = 4;
  int max_iter = 300;
  uint64_t seed = 0;
};

// Estimated value function at state v with time-to-go `horizon`: direct
// minimization of the terminal cost over box-constrained control paths by
// projected gradient descent, multi-started from constant box corners, the
// box center and random paths. horizon = 0 returns the terminal cost itself.
struct ValueEstimate {
  double value = 0.0;
  ControlPath ctrl;                  // best control path found
  std::vector<double> start_values;  // converged value per start
};

ValueEstimate estimate_value(const std::vector<GridFunction>& v, double horizon,
                             int steps, const std::vector<GridFunction>& targets,
                             const Classifier& cls, const Predictor& h,
                             const BoxSet& box, const Activation& sigma,
                             LossKind loss = LossKind::Mse,
                             const HjbOptions& opt = {});

// Sampled Lipschitz quotient of the estimated value in the state argument.
struct LipschitzReport {
  double max_ratio = 0.0;
  int samples = 0;
};

LipschitzReport empirical_lipschitz(const std::vector<GridFunction>& v_base,
                                    double horizon, int steps,
                                    const std::vector<GridFunction>& targets,
                                    const Classifier& cls, const Predictor& h,
                                    const BoxSet& box, const Activation& sigma,
                                    double radius, int trials, uint64_t seed,
                                    LossKind loss = LossKind::Mse,
                                    const HjbOptions& opt = {});

// Co-states p_j(., t) = gradient of the value function at the current state,
// supplied externally (an oracle in tests, an adjoint solve in applications).
using CostateOracle = std::function<std::vector<GridFunction>(
    const std::vector<GridFunction>& states, double t)>;

struct FeedbackResult {
  Trajectory traj;
  ControlPath ctrl;
  double terminal_cost = 0.0;
};

// Closed-loop Euler integration with the verification-theorem feedback: at
// every node the controls realize the pointwise Hamiltonian minimum for the
// oracle co-states.
FeedbackResult integrate_feedback(
    const std::vector<GridFunction>& v0, double horizon, int steps,
    const CostateOracle& oracle,
    const std::function<double(const std::vector<GridFunction>&)>& terminal_cost,
    const BoxSet& box, const Activation& sigma, uint64_t seed = 0);

}  // namespace ctnet
