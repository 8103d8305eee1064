#include "ctnet/grid.hpp"

#include <cmath>

namespace ctnet {

SpatialGrid::SpatialGrid(int dim, Eigen::MatrixXd cells, Eigen::VectorXd weights,
                         int cells_per_axis, double lo, double hi)
    : dim_(dim),
      cells_(std::move(cells)),
      weights_(std::move(weights)),
      cells_per_axis_(cells_per_axis),
      lo_(lo),
      hi_(hi) {
  if (dim_ < 1) throw std::invalid_argument("grid dim must be positive");
  if (weights_.size() < 1) throw std::invalid_argument("grid needs at least one cell");
  if (cells_.rows() != weights_.size() || cells_.cols() != dim_)
    throw std::invalid_argument("cell/weight shape mismatch");
  if ((weights_.array() <= 0.0).any())
    throw std::invalid_argument("quadrature weights must be strictly positive");
  total_measure_ = weights_.sum();
}

std::shared_ptr<const SpatialGrid> SpatialGrid::uniform(int dim, int cells_per_axis,
                                                        double lo, double hi) {
  if (dim < 1 || cells_per_axis < 1)
    throw std::invalid_argument("invalid uniform grid spec");
  if (!(hi > lo)) throw std::invalid_argument("domain extent must be positive");
  const double h = (hi - lo) / cells_per_axis;
  Eigen::Index m = 1;
  for (int k = 0; k < dim; ++k) m *= cells_per_axis;
  Eigen::MatrixXd cells(m, dim);
  for (Eigen::Index i = 0; i < m; ++i) {
    Eigen::Index rest = i;
    for (int k = 0; k < dim; ++k) {
      const Eigen::Index idx = rest % cells_per_axis;
      rest /= cells_per_axis;
      cells(i, k) = lo + (static_cast<double>(idx) + 0.5) * h;
    }
  }
  const double cell_measure = std::pow(h, dim);
  Eigen::VectorXd weights = Eigen::VectorXd::Constant(m, cell_measure);
  return std::make_shared<SpatialGrid>(dim, std::move(cells), std::move(weights),
                                       cells_per_axis, lo, hi);
}

GridFunction::GridFunction(GridPtr g, Eigen::VectorXd v)
    : grid(std::move(g)), values(std::move(v)) {
  if (!grid) throw std::invalid_argument("null grid");
  if (values.size() != grid->size())
    throw std::invalid_argument("grid function length mismatch");
  if (!values.allFinite())
    throw std::invalid_argument("grid function has non-finite values");
}

GridFunction GridFunction::zero(const GridPtr& g) {
  return GridFunction(g, Eigen::VectorXd::Zero(g->size()));
}

GridFunction GridFunction::constant(const GridPtr& g, double c) {
  return GridFunction(g, Eigen::VectorXd::Constant(g->size(), c));
}

double GridFunction::norm() const {
  return std::sqrt(values.cwiseAbs2().dot(grid->weights()));
}

Kernel::Kernel(GridPtr rg, GridPtr cg, Eigen::MatrixXd v)
    : row_grid(std::move(rg)), col_grid(std::move(cg)), values(std::move(v)) {
  if (!row_grid || !col_grid) throw std::invalid_argument("null grid");
  if (values.rows() != row_grid->size() || values.cols() != col_grid->size())
    throw std::invalid_argument("kernel shape mismatch");
  if (!values.allFinite())
    throw std::invalid_argument("kernel has non-finite values");
}

Kernel Kernel::zero(const GridPtr& rg, const GridPtr& cg) {
  return Kernel(rg, cg, Eigen::MatrixXd::Zero(rg->size(), cg->size()));
}

Kernel Kernel::constant(const GridPtr& rg, const GridPtr& cg, double c) {
  return Kernel(rg, cg, Eigen::MatrixXd::Constant(rg->size(), cg->size(), c));
}

double Kernel::norm() const {
  // ||b||^2 = sum_kl b_kl^2 w_k w_l, fixed summation order
  double acc = 0.0;
  const auto& wr = row_grid->weights();
  const auto& wc = col_grid->weights();
  for (Eigen::Index k = 0; k < values.rows(); ++k)
    for (Eigen::Index l = 0; l < values.cols(); ++l)
      acc += values(k, l) * values(k, l) * wr(k) * wc(l);
  return std::sqrt(acc);
}

double l2_inner(const GridFunction& f, const GridFunction& g) {
  require_same_grid(f, g);
  double acc = 0.0;
  const auto& w = f.grid->weights();
  for (Eigen::Index k = 0; k < w.size(); ++k) acc += f.values(k) * g.values(k) * w(k);
  return acc;
}

Eigen::MatrixXd gram_matrix(const std::vector<GridFunction>& fs) {
  if (fs.empty()) throw std::invalid_argument("gram_matrix needs N >= 1");
  const Eigen::Index n = static_cast<Eigen::Index>(fs.size());
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) {
      const double v = l2_inner(fs[i], fs[j]);
      g(i, j) = v;
      g(j, i) = v;
    }
  return g;
}

int numerical_rank(const Eigen::MatrixXd& m, double tol) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return 0;
  const double cutoff = tol * sv(0);
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff) ++rank;
  return rank;
}

bool weak_li_test(const std::vector<GridFunction>& fs, double tol) {
  const Eigen::Index n = static_cast<Eigen::Index>(fs.size());
  Eigen::MatrixXd stacked(n + 1, n);
  stacked.topRows(n) = gram_matrix(fs);
  stacked.row(n).setOnes();
  return numerical_rank(stacked, tol) == static_cast<int>(n);
}

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m, double tol) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  const double cutoff = sv.size() > 0 ? tol * sv(0) : 0.0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff) inv(i) = 1.0 / sv(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

}  // namespace ctnet
