#include "ctnet/output_loss.hpp"

#include <cmath>

namespace ctnet {

Classifier::Classifier(Kernel w_, GridFunction mu_)
    : w(std::move(w_)), mu(std::move(mu_)) {
  if (w.row_grid != mu.grid)
    throw std::invalid_argument("classifier w row grid must match mu grid");
}

double Predictor::h(double z) const {
  switch (kind) {
    case PredictorKind::Identity:
      return z;
    case PredictorKind::Logistic:
      return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    case PredictorKind::Softmax:
      throw std::logic_error("softmax is not a pointwise map; use predict()");
  }
  return 0.0;
}

double Predictor::h_prime(double z) const {
  switch (kind) {
    case PredictorKind::Identity:
      return 1.0;
    case PredictorKind::Logistic: {
      const double s = h(z);
      return s * (1.0 - s);
    }
    case PredictorKind::Softmax:
      throw std::logic_error("softmax is not a pointwise map; use predict()");
  }
  return 0.0;
}

TrainingSet::TrainingSet(std::vector<GridFunction> init, std::vector<GridFunction> tgt)
    : initial(std::move(init)), targets(std::move(tgt)) {
  if (initial.empty() || initial.size() != targets.size())
    throw std::invalid_argument("training set needs matched, nonempty lists");
  for (size_t i = 0; i < initial.size(); ++i)
    for (size_t j = i + 1; j < initial.size(); ++j) {
      GridFunction d(initial[i].grid,
                     Eigen::VectorXd(initial[i].values - initial[j].values));
      if (d.norm() <= 1e-12)
        throw std::invalid_argument("duplicate initial data at indices " +
                                    std::to_string(i) + "," + std::to_string(j));
    }
}

GridFunction network_output(const GridFunction& f_terminal, const Classifier& cls) {
  GridFunction z = apply_kernel(cls.w, f_terminal);
  z.values += cls.mu.values;
  return z;
}

GridFunction predict(const GridFunction& z, const Predictor& h) {
  switch (h.kind) {
    case PredictorKind::Identity:
      return z;
    case PredictorKind::Logistic: {
      Eigen::VectorXd out(z.values.size());
      for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = h.h(z.values(i));
      return GridFunction(z.grid, std::move(out));
    }
    case PredictorKind::Softmax: {
      // exp(-Z) / int exp(-Z) du with max-shift stabilization
      const double shift = (-z.values).maxCoeff();
      Eigen::VectorXd e = (-z.values.array() - shift).exp();
      const double mass = e.dot(z.grid->weights());
      if (!(mass > 0.0))
        throw std::runtime_error("softmax denominator underflow, shift " +
                                 std::to_string(shift));
      return GridFunction(z.grid, Eigen::VectorXd(e / mass));
    }
  }
  throw std::logic_error("unreachable");
}

double loss_mse(const std::vector<GridFunction>& predicted,
                const std::vector<GridFunction>& targets) {
  if (predicted.size() != targets.size() || predicted.empty())
    throw std::invalid_argument("loss_mse: list length mismatch");
  double acc = 0.0;
  for (size_t j = 0; j < predicted.size(); ++j) {
    GridFunction d(predicted[j].grid,
                   Eigen::VectorXd(predicted[j].values - targets[j].values));
    const double nrm = d.norm();
    acc += nrm * nrm;
  }
  return acc / (2.0 * static_cast<double>(predicted.size()));
}

namespace {

void require_density(const GridFunction& p) {
  if ((p.values.array() < 0.0).any())
    throw std::invalid_argument("target is not a probability density (negative)");
  const double mass = p.values.dot(p.grid->weights());
  if (std::abs(mass - 1.0) > 1e-8)
    throw std::invalid_argument("target is not a probability density (mass " +
                                std::to_string(mass) + ")");
}

}  // namespace

double loss_cross_entropy(const std::vector<GridFunction>& z,
                          const std::vector<GridFunction>& targets) {
  if (z.size() != targets.size() || z.empty())
    throw std::invalid_argument("loss_cross_entropy: list length mismatch");
  double acc = 0.0;
  for (size_t j = 0; j < z.size(); ++j) {
    require_density(targets[j]);
    const auto& w = z[j].grid->weights();
    // ln softmax(-Z) = -Z - logsumexp; stabilized
    const double shift = (-z[j].values).maxCoeff();
    const double lse =
        shift + std::log(((-z[j].values.array() - shift).exp() * w.array()).sum());
    for (Eigen::Index k = 0; k < w.size(); ++k)
      acc -= (-z[j].values(k) - lse) * targets[j].values(k) * w(k);
  }
  return acc / static_cast<double>(z.size());
}

double cross_entropy_floor(const std::vector<GridFunction>& targets) {
  double acc = 0.0;
  for (const auto& p : targets) {
    const auto& w = p.grid->weights();
    for (Eigen::Index k = 0; k < w.size(); ++k)
      if (p.values(k) > 0.0) acc -= std::log(p.values(k)) * p.values(k) * w(k);
  }
  return acc / static_cast<double>(targets.size());
}

}  // namespace ctnet
