#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "ctnet/dynamics.hpp"

using namespace ctnet;

namespace {

GridFunction random_gf(const GridPtr& g, std::mt19937_64& rng, double amp = 1.0) {
  std::uniform_real_distribution<double> u(-amp, amp);
  Eigen::VectorXd v(g->size());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = u(rng);
  return GridFunction(g, std::move(v));
}

Kernel random_kernel(const GridPtr& g, std::mt19937_64& rng, double amp = 1.0) {
  std::uniform_real_distribution<double> u(-amp, amp);
  Eigen::MatrixXd m(g->size(), g->size());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = u(rng);
  return Kernel(g, g, std::move(m));
}

ControlPath random_ctrl(const TimeGrid& tg, const GridPtr& g, std::mt19937_64& rng,
                        double amp = 1.0) {
  ControlPath c = ControlPath::zero(tg, g);
  for (auto& a : c.a_path) a = random_gf(g, rng, amp);
  for (auto& b : c.b_path) b = random_kernel(g, rng, amp);
  return c;
}

}  // namespace

TEST_CASE("activation values and exact Lipschitz constants") {
  const auto sig = Activation::make(ActivationKind::Sigmoid);
  CHECK(sig(0.0) == doctest::Approx(0.5));
  CHECK(sig.lipschitz() == doctest::Approx(0.25));
  const auto th = Activation::make("tanh");
  CHECK(th(0.0) == 0.0);
  CHECK(th.lipschitz() == doctest::Approx(1.0));
  const auto id = Activation::make("identity");
  CHECK(id(3.5) == 3.5);
  const auto sr = Activation::make("smoothed_relu");
  CHECK(sr(0.0) == 0.0);  // shifted so the origin is fixed
  // asymptotes x - eps/2 and -eps/2 away from the kink
  CHECK(sr(10.0) == doctest::Approx(10.0 - 0.5 * kSmoothedReluEps).epsilon(1e-6));
  CHECK(sr(-10.0) == doctest::Approx(-0.5 * kSmoothedReluEps).epsilon(1e-4));
  CHECK_THROWS(Activation::make("relu"));
}

TEST_CASE("activation derivatives agree with central differences") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const double eps = 1e-6;
  for (const char* name : {"sigmoid", "tanh", "smoothed_relu", "identity"}) {
    const auto s = Activation::make(name);
    for (int k = 0; k < 20; ++k) {
      const double x = u(rng);
      const double fd1 = (s(x + eps) - s(x - eps)) / (2 * eps);
      CHECK(s.deriv(x) == doctest::Approx(fd1).epsilon(1e-7));
      const double fd2 = (s.deriv(x + eps) - s.deriv(x - eps)) / (2 * eps);
      CHECK(s.deriv2(x) == doctest::Approx(fd2).epsilon(1e-5));
      CHECK(std::abs(s.deriv(x)) <= s.lipschitz() + 1e-12);
    }
  }
}

TEST_CASE("kernel application: constant kernel integrates") {
  const auto g = SpatialGrid::uniform(1, 32);
  std::mt19937_64 rng(2);
  const GridFunction f = random_gf(g, rng);
  const Kernel b = Kernel::constant(g, g, 2.0);
  const GridFunction bf = apply_kernel(b, f);
  const double integral = f.values.dot(g->weights());
  for (Eigen::Index k = 0; k < g->size(); ++k)
    CHECK(bf.values(k) == doctest::Approx(2.0 * integral).epsilon(1e-13));
}

TEST_CASE("kernel matrix consistent with apply_kernel, transpose swaps arguments") {
  const auto g = SpatialGrid::uniform(1, 8);
  std::mt19937_64 rng(3);
  const Kernel b = random_kernel(g, rng);
  const GridFunction f = random_gf(g, rng);
  const Eigen::VectorXd via_matrix = kernel_matrix(b) * f.values;
  CHECK((via_matrix - apply_kernel(b, f).values).cwiseAbs().maxCoeff() < 1e-14);
  const Kernel bt = transpose_kernel(b);
  for (Eigen::Index i = 0; i < g->size(); ++i)
    for (Eigen::Index j = 0; j < g->size(); ++j)
      CHECK(bt.values(i, j) == b.values(j, i));
}

TEST_CASE("Euler is exact when the right-hand side is constant in time") {
  const auto g = SpatialGrid::uniform(1, 8);
  const TimeGrid tg(2.0, 10);
  ControlPath c = ControlPath::zero(tg, g);
  for (auto& a : c.a_path) a = GridFunction::constant(g, 0.7);
  const auto sig = Activation::make("sigmoid");
  const GridFunction f0 = GridFunction::constant(g, 0.3);
  const Trajectory traj = solve_forward_euler({f0}, c, sig);
  // b = 0: f(t) = f0 + t sigma(a)
  const double expect = 0.3 + 2.0 * sig(0.7);
  for (Eigen::Index k = 0; k < g->size(); ++k)
    CHECK(traj.terminal().front().values(k) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("Euler self-convergence order is first order") {
  const auto g = SpatialGrid::uniform(1, 8);
  std::mt19937_64 rng(17);
  const GridFunction f0 = random_gf(g, rng, 0.5);
  const auto sig = Activation::make("sigmoid");
  const double T = 1.0;

  auto terminal = [&](int steps) {
    // controls constant in time so refinement changes only the stepper
    std::mt19937_64 r2(99);
    const GridFunction a = random_gf(g, r2, 0.5);
    const Kernel b = random_kernel(g, r2, 0.5);
    TimeGrid tg(T, steps);
    ControlPath c = ControlPath::zero(tg, g);
    for (auto& x : c.a_path) x = a;
    for (auto& x : c.b_path) x = b;
    return solve_forward_euler({f0}, c, sig).terminal().front();
  };

  const GridFunction ref = terminal(512);
  std::vector<double> errs;
  for (const int s : {16, 32, 64}) {
    GridFunction d(g, Eigen::VectorXd(terminal(s).values - ref.values));
    errs.push_back(d.norm());
  }
  const double order1 = std::log2(errs[0] / errs[1]);
  const double order2 = std::log2(errs[1] / errs[2]);
  CHECK(order1 > 0.8);
  CHECK(order1 < 1.2);
  CHECK(order2 > 0.8);
  CHECK(order2 < 1.2);
}

TEST_CASE("Picard agrees with Euler in the contraction regime") {
  const auto g = SpatialGrid::uniform(1, 8);
  std::mt19937_64 rng(23);
  const auto sig = Activation::make("sigmoid");
  for (int inst = 0; inst < 5; ++inst) {
    const TimeGrid tg(0.5, 64);
    const ControlPath c = random_ctrl(tg, g, rng, 0.8);
    const GridFunction f0 = random_gf(g, rng, 0.5);
    const Trajectory te = solve_forward_euler({f0}, c, sig);
    const Trajectory tp = solve_forward_picard({f0}, c, sig);
    GridFunction d(g, Eigen::VectorXd(te.terminal().front().values -
                                      tp.terminal().front().values));
    const double rel = d.norm() / std::max(1e-12, te.terminal().front().norm());
    CHECK(rel <= 5e-3);
  }
}

TEST_CASE("Picard reports its last residual when it cannot contract") {
  const auto g = SpatialGrid::uniform(1, 4);
  const TimeGrid tg(0.5, 2);  // windows cannot bisect below two nodes
  ControlPath c = ControlPath::zero(tg, g);
  for (auto& b : c.b_path) b = Kernel::constant(g, g, -40.0);  // expansive
  const auto id = Activation::make("identity");
  const GridFunction f0 = GridFunction::constant(g, 1.0);
  CHECK_THROWS_WITH_AS(
      (void)solve_forward_picard({f0}, c, id, 5, 1e-14),
      doctest::Contains("residual"), std::runtime_error);
}

TEST_CASE("a-priori bounds hold on random instances") {
  std::mt19937_64 rng(31);
  for (int inst = 0; inst < 25; ++inst) {
    const auto g = SpatialGrid::uniform(1, 8, 0.0, 1.0 + (inst % 3));
    const TimeGrid tg(0.25 + 0.1 * (inst % 5), 24);
    const ControlPath c = random_ctrl(tg, g, rng, 1.0);
    std::vector<GridFunction> f0 = {random_gf(g, rng), random_gf(g, rng)};
    const auto sig = Activation::make(inst % 2 ? "tanh" : "sigmoid");
    const Trajectory traj = solve_forward_euler(f0, c, sig);
    const AprioriReport rep = check_apriori_bound(traj, c, sig);
    CHECK(rep.ok(1e-8));
  }
}

TEST_CASE("difference bound across two control paths") {
  const auto g = SpatialGrid::uniform(1, 8);
  std::mt19937_64 rng(41);
  const auto sig = Activation::make("sigmoid");
  for (int inst = 0; inst < 10; ++inst) {
    const TimeGrid tg(0.5, 32);
    const ControlPath c1 = random_ctrl(tg, g, rng, 1.0);
    const ControlPath c2 = random_ctrl(tg, g, rng, 1.0);
    const GridFunction f0 = random_gf(g, rng);
    const Trajectory t1 = solve_forward_euler({f0}, c1, sig);
    const Trajectory t2 = solve_forward_euler({f0}, c2, sig);
    CHECK(difference_bound_margin(t1, c1, t2, c2, sig) >= -1e-8);
  }
}

TEST_CASE("forward blow-up reports the failing node") {
  const auto g = SpatialGrid::uniform(1, 4);
  const TimeGrid tg(1.0, 20);
  ControlPath c = ControlPath::zero(tg, g);
  for (auto& b : c.b_path) b = Kernel::constant(g, g, -1e18);  // explosive growth
  const auto id = Activation::make("identity");
  CHECK_THROWS(solve_forward_euler({GridFunction::constant(g, 1.0)}, c, id));
}

TEST_CASE("time grid arithmetic") {
  const TimeGrid tg(2.0, 8);
  CHECK(tg.dt() == doctest::Approx(0.25));
  CHECK(tg.nodes() == 9);
  CHECK(tg.node(0) == 0.0);
  CHECK(tg.node(8) == 2.0);
  CHECK_THROWS(TimeGrid(1.0, 0));
  CHECK_THROWS(TimeGrid(-1.0, 4));
}
