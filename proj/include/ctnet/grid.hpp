#pragma once

#include <Eigen/Dense>
#include <memory>
#include <stdexcept>
#include <vector>

namespace ctnet {

// Discretization of a label domain (Y or U): cell centers of a uniform
// tensor grid together with their measures. Immutable after construction;
// downstream objects hold shared references.
class SpatialGrid {
public:
  // Uniform tensor grid on the box [lo, hi]^dim with cells_per_axis cells
  // along each axis. Quadrature is the midpoint rule, weight = cell measure.
  static std::shared_ptr<const SpatialGrid> uniform(int dim, int cells_per_axis,
                                                    double lo = 0.0,
                                                    double hi = 1.0);

  int dim() const { return dim_; }
  Eigen::Index size() const { return weights_.size(); }
  const Eigen::MatrixXd& cells() const { return cells_; }  // size x dim
  const Eigen::VectorXd& weights() const { return weights_; }
  double total_measure() const { return total_measure_; }
  int cells_per_axis() const { return cells_per_axis_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }

  SpatialGrid(int dim, Eigen::MatrixXd cells, Eigen::VectorXd weights,
              int cells_per_axis, double lo, double hi);

private:
  int dim_;
  Eigen::MatrixXd cells_;
  Eigen::VectorXd weights_;
  double total_measure_;
  int cells_per_axis_;
  double lo_, hi_;
};

using GridPtr = std::shared_ptr<const SpatialGrid>;

// Scalar field on a grid (a state f, co-state r or bias a at fixed time).
struct GridFunction {
  GridPtr grid;
  Eigen::VectorXd values;

  GridFunction() = default;
  GridFunction(GridPtr g, Eigen::VectorXd v);
  static GridFunction zero(const GridPtr& g);
  static GridFunction constant(const GridPtr& g, double c);

  double norm() const;  // quadrature L2 norm
};

// Scalar field on row_grid x col_grid (weight kernel b at fixed time, or the
// classifier kernel w on U x Y).
struct Kernel {
  GridPtr row_grid;
  GridPtr col_grid;
  Eigen::MatrixXd values;

  Kernel() = default;
  Kernel(GridPtr rg, GridPtr cg, Eigen::MatrixXd v);
  static Kernel zero(const GridPtr& rg, const GridPtr& cg);
  static Kernel constant(const GridPtr& rg, const GridPtr& cg, double c);

  double norm() const;  // quadrature L2(YxY) norm
};

inline void require_same_grid(const GridFunction& f, const GridFunction& g) {
  if (f.grid != g.grid)
    throw std::invalid_argument("grid mismatch between grid functions");
}

double l2_inner(const GridFunction& f, const GridFunction& g);

Eigen::MatrixXd gram_matrix(const std::vector<GridFunction>& fs);

// True iff the stacked matrix [G_F; e^T] has numerical rank N.
bool weak_li_test(const std::vector<GridFunction>& fs, double tol = 1e-10);

// Moore-Penrose inverse with relative spectral cutoff.
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m, double tol = 1e-10);

int numerical_rank(const Eigen::MatrixXd& m, double tol = 1e-10);

}  // namespace ctnet
