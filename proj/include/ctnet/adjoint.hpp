#pragma once

#include <vector>

#include "ctnet/dynamics.hpp"
#include "ctnet/output_loss.hpp"

namespace ctnet {

enum class LossKind { Mse, CrossEntropy };

// Gradients of the loss with respect to all four training parameters,
// sampled on the control time grid. The entry at the final time node of
// d_a/d_b is zero: the explicit Euler step never reads the controls there.
struct LossGradient {
  std::vector<GridFunction> d_a;
  std::vector<Kernel> d_b;
  Kernel d_w;
  GridFunction d_mu;
};

// Terminal co-states r^{(j)}(T) on Y, one per datum.
std::vector<GridFunction> adjoint_terminal(const std::vector<GridFunction>& f_terminal,
                                           const Classifier& cls, const Predictor& h,
                                           const std::vector<GridFunction>& targets,
                                           LossKind loss = LossKind::Mse);

// Backward sweep of the final-value problem, using the stored forward states
// for the linearization point. Linear in the terminal data.
Trajectory solve_backward(const Trajectory& traj, const ControlPath& ctrl,
                          const Activation& sigma,
                          const std::vector<GridFunction>& terminal);

LossGradient loss_gradient(const Trajectory& traj, const Trajectory& co,
                           const ControlPath& ctrl, const Activation& sigma,
                           const Classifier& cls, const Predictor& h,
                           const std::vector<GridFunction>& targets,
                           LossKind loss = LossKind::Mse);

double evaluate_loss(const std::vector<GridFunction>& f_terminal,
                     const Classifier& cls, const Predictor& h,
                     const std::vector<GridFunction>& targets,
                     LossKind loss = LossKind::Mse);

struct TrainResult {
  ControlPath ctrl;
  Classifier cls;
  std::vector<double> loss_history;
};

// Steepest descent on (a, b, w, mu) jointly, with backtracking (the step is
// halved up to 30 times whenever the loss would increase).
TrainResult train_gradient_flow(const TrainingSet& data, ControlPath init_ctrl,
                                Classifier init_cls, const Activation& sigma,
                                const Predictor& h, double step, int iters,
                                LossKind loss = LossKind::Mse);

// L2 norms of the four stationarity expressions (N times the gradients).
struct StationarityResiduals {
  double a, b, w, mu;
  double max() const;
};

StationarityResiduals stationarity_residuals(const Trajectory& traj,
                                             const Trajectory& co,
                                             const ControlPath& ctrl,
                                             const Activation& sigma,
                                             const Classifier& cls,
                                             const Predictor& h,
                                             const std::vector<GridFunction>& targets,
                                             LossKind loss = LossKind::Mse);

// Closed-form stationary classifier for h = identity: orthonormal basis of
// span{f^{(j)}(T)}, the projected linear system for the w-coefficients, and
// the bias recovered from the mean condition.
struct StationaryClassifier {
  Classifier cls;
  int span_dim = 0;                         // K
  Eigen::MatrixXd w_coeffs;                 // K x |U| coefficient table
  std::vector<GridFunction> basis;          // sigma_1..sigma_K on Y
  std::vector<double> least_squares_residuals;  // ||W fT_j + mu - P_j|| per datum
};

StationaryClassifier stationary_classifier(const std::vector<GridFunction>& f_terminal,
                                           const std::vector<GridFunction>& targets,
                                           const GridPtr& u_grid,
                                           double drop_tol = 1e-10);

// Forward solve in the reduced parametrization
//   df_j/dt = sigma(a - sum_l b_l(y,t) <f_l, f_j>),
// coupled across data. b_coeffs is indexed [l][time node].
Trajectory reduced_control_forward(const std::vector<GridFunction>& f_init,
                                   const TimeGrid& tg,
                                   const std::vector<GridFunction>& a_path,
                                   const std::vector<std::vector<GridFunction>>& b_coeffs,
                                   const Activation& sigma);

// Total-variation-in-time diagnostic of a trained control path.
double control_bv_norm(const ControlPath& ctrl);

}  // namespace ctnet
