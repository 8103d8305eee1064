#pragma once

#include <vector>

#include "ctnet/dynamics.hpp"
#include "ctnet/grid.hpp"

namespace ctnet {

// Final-layer affine map: Z(u) = int_Y w(u,y) f(y,T) dy + mu(u).
struct Classifier {
  Kernel w;          // on U x Y
  GridFunction mu;   // on U

  Classifier() = default;
  Classifier(Kernel w_, GridFunction mu_);
  const GridPtr& u_grid() const { return mu.grid; }
  const GridPtr& y_grid() const { return w.col_grid; }
};

enum class PredictorKind { Identity, Logistic, Softmax };

// Prediction function h applied to the network output. Softmax normalizes
// exp(-Z) against the quadrature measure on U (max-shift stabilized).
struct Predictor {
  PredictorKind kind = PredictorKind::Identity;

  static Predictor identity() { return {PredictorKind::Identity}; }
  static Predictor logistic() { return {PredictorKind::Logistic}; }
  static Predictor softmax() { return {PredictorKind::Softmax}; }

  double h(double z) const;
  double h_prime(double z) const;
};

struct TrainingSet {
  std::vector<GridFunction> initial;  // f_I^{(j)} on Y
  std::vector<GridFunction> targets;  // P^{(j)} on U

  TrainingSet() = default;
  // Validates pairwise-distinct initial data (L2 distance > 1e-12).
  TrainingSet(std::vector<GridFunction> init, std::vector<GridFunction> tgt);
  int size() const { return static_cast<int>(initial.size()); }
};

GridFunction network_output(const GridFunction& f_terminal, const Classifier& cls);

GridFunction predict(const GridFunction& z, const Predictor& h);

double loss_mse(const std::vector<GridFunction>& predicted,
                const std::vector<GridFunction>& targets);

// Cross-entropy of the softmax prediction against probability densities P.
double loss_cross_entropy(const std::vector<GridFunction>& z,
                          const std::vector<GridFunction>& targets);

// -(1/N) sum_j int ln(P) P du, the floor of the cross-entropy loss.
double cross_entropy_floor(const std::vector<GridFunction>& targets);

}  // namespace ctnet
