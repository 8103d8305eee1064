#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "ctnet/pontryagin.hpp"

using namespace ctnet;

namespace {

GridFunction random_gf(const GridPtr& g, std::mt19937_64& rng, double amp = 1.0) {
  std::uniform_real_distribution<double> u(-amp, amp);
  Eigen::VectorXd v(g->size());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = u(rng);
  return GridFunction(g, std::move(v));
}

}  // namespace

TEST_CASE("box validation") {
  CHECK_THROWS(BoxSet(1.0, 1.0, -1.0, 1.0));
  CHECK_THROWS(BoxSet(-1.0, 1.0, 2.0, 1.0));
  const BoxSet box(-1.0, 1.0, -2.0, 2.0);
  CHECK(box.clamp_a(5.0) == 1.0);
  CHECK(box.clamp_b(-5.0) == -2.0);
}

TEST_CASE("hamiltonian against a direct sum") {
  const auto y = SpatialGrid::uniform(1, 8);
  std::mt19937_64 rng(1);
  std::vector<GridFunction> F = {random_gf(y, rng), random_gf(y, rng)};
  std::vector<GridFunction> R = {random_gf(y, rng), random_gf(y, rng)};
  const GridFunction a = random_gf(y, rng);
  Eigen::MatrixXd bv(y->size(), y->size());
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (Eigen::Index i = 0; i < bv.rows(); ++i)
    for (Eigen::Index j = 0; j < bv.cols(); ++j) bv(i, j) = u(rng);
  const Kernel b(y, y, bv);
  const auto sig = Activation::make("sigmoid");

  double expect = 0.0;
  for (int j = 0; j < 2; ++j) {
    const GridFunction bf = apply_kernel(b, F[j]);
    for (Eigen::Index k = 0; k < y->size(); ++k)
      expect += sig(a.values(k) - bf.values(k)) * R[j].values(k) *
                y->weights()(k);
  }
  CHECK(hamiltonian(F, R, a, b, sig) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("argmin matches the bang-bang closed form for one datum") {
  const auto y = SpatialGrid::uniform(1, 4);
  std::mt19937_64 rng(7);
  const BoxSet box(-1.5, 0.5, -1.0, 2.0);
  const auto sig = Activation::make("sigmoid");
  std::mt19937_64 search_rng(42);
  int tested = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const GridFunction f = random_gf(y, rng);
    const GridFunction r = random_gf(y, rng);
    // closed form per y cell
    const BangBangControl bb = bang_bang_control(f, r, box);
    for (Eigen::Index k = 0; k < y->size(); ++k) {
      if (std::abs(r.values(k)) <= 1e-9) continue;
      Eigen::VectorXd rk(1);
      rk(0) = r.values(k);
      const ArgminResult am = argmin_T({f}, rk, box, sig, search_rng);
      CHECK(am.a == doctest::Approx(bb.a.values(k)).epsilon(1e-12));
      for (Eigen::Index l = 0; l < y->size(); ++l) {
        if (std::abs(f.values(l)) <= 1e-9) continue;
        CHECK(am.b(l) == doctest::Approx(bb.b.values(k, l)).epsilon(1e-12));
      }
      ++tested;
    }
  }
  CHECK(tested > 500);  // the check must not be vacuous
}

TEST_CASE("bang-bang flags the degenerate cells") {
  const auto y = SpatialGrid::uniform(1, 3);
  const BoxSet box(-1.0, 1.0, -1.0, 1.0);
  GridFunction f(y, Eigen::Vector3d(1.0, 0.0, -2.0));
  GridFunction r(y, Eigen::Vector3d(0.0, 3.0, -1.0));
  const BangBangControl bb = bang_bang_control(f, r, box);
  CHECK(bb.a_flagged[0]);
  CHECK_FALSE(bb.a_flagged[1]);
  CHECK(bb.a.values(0) == -1.0);  // lower bound on ties
  CHECK(bb.a.values(1) == -1.0);  // r > 0
  CHECK(bb.a.values(2) == 1.0);   // r < 0
  // r(1) f(0) > 0 -> upper; r(1) f(2) < 0 -> lower; f(1) = 0 -> flagged lower
  CHECK(bb.b.values(1, 0) == 1.0);
  CHECK(bb.b.values(1, 2) == -1.0);
  CHECK(bb.b_flagged(1, 1));
  CHECK(bb.b.values(1, 1) == -1.0);
}

TEST_CASE("argmin value within 1e-6 of a dense lattice search for two data") {
  const auto y = SpatialGrid::uniform(1, 2);
  std::mt19937_64 rng(11);
  const BoxSet box(-1.0, 1.0, -1.0, 1.0);
  const auto sig = Activation::make("sigmoid");
  std::mt19937_64 search_rng(5);
  const int lattice = 41;
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<GridFunction> F = {random_gf(y, rng), random_gf(y, rng)};
    Eigen::VectorXd r(2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    r << u(rng), u(rng);
    const ArgminResult am = argmin_T(F, r, box, sig, search_rng);

    double dense = std::numeric_limits<double>::infinity();
    auto tick = [&](int i) { return -1.0 + 2.0 * i / (lattice - 1); };
    for (int ia = 0; ia < lattice; ++ia)
      for (int i0 = 0; i0 < lattice; ++i0)
        for (int i1 = 0; i1 < lattice; ++i1) {
          Eigen::VectorXd b(2);
          b << tick(i0), tick(i1);
          dense = std::min(dense,
                           pointwise_objective(F, r, tick(ia), b, sig));
        }
    CHECK(am.value <= dense + 1e-6);
  }
}

TEST_CASE("MSA converges to bang-bang structure with a flat Hamiltonian") {
  const auto y = SpatialGrid::uniform(1, 4);
  const auto u = SpatialGrid::uniform(1, 4);
  std::mt19937_64 rng(23);
  // unreachable target keeps the co-state sign fixed along the optimal arc,
  // so the minimum-principle solution is genuinely bang-bang (no singular arc)
  const TrainingSet data({random_gf(y, rng)}, {GridFunction::constant(u, 5.0)});
  const Classifier cls(Kernel::constant(u, y, 1.0), GridFunction::zero(u));
  const BoxSet box(-1.0, 1.0, -1.0, 1.0);
  const auto sig = Activation::make("sigmoid");
  MsaOptions opt;
  opt.sweeps = 200;
  opt.relax = 0.5;
  opt.seed = 3;
  const PontryaginState st = solve_msa(data, cls, Predictor::identity(), box,
                                       ControlPath::zero(TimeGrid(1.0, 16), y),
                                       sig, opt);
  CHECK(st.converged);
  CHECK_FALSE(st.diverged);
  CHECK(boundary_contact_fraction(st.ctrl, box, 1e-6) >= 0.99);

  const auto& ham = st.hamiltonian_history.back();
  const auto [mn, mx] = std::minmax_element(ham.begin(), ham.end());
  const double mag = std::max(std::abs(*mn), std::abs(*mx));
  CHECK(*mx - *mn <= 0.05 * mag);
}

TEST_CASE("MSA is deterministic for a fixed seed") {
  const auto y = SpatialGrid::uniform(1, 3);
  const auto u = SpatialGrid::uniform(1, 3);
  std::mt19937_64 rng(31);
  const TrainingSet data({random_gf(y, rng)}, {random_gf(u, rng)});
  const Classifier cls(Kernel::constant(u, y, 1.0), GridFunction::zero(u));
  const BoxSet box(-1.0, 1.0, -1.0, 1.0);
  const auto sig = Activation::make("sigmoid");
  MsaOptions opt;
  opt.sweeps = 5;
  opt.seed = 17;
  auto run = [&]() {
    return solve_msa(data, cls, Predictor::identity(), box,
                     ControlPath::zero(TimeGrid(0.5, 4), y), sig, opt);
  };
  const PontryaginState s1 = run();
  const PontryaginState s2 = run();
  CHECK(s1.loss_history == s2.loss_history);
  for (size_t s = 0; s < s1.ctrl.a_path.size(); ++s) {
    CHECK(s1.ctrl.a_path[s].values == s2.ctrl.a_path[s].values);
    CHECK(s1.ctrl.b_path[s].values == s2.ctrl.b_path[s].values);
  }
}

TEST_CASE("bad relaxation is rejected") {
  const auto y = SpatialGrid::uniform(1, 2);
  std::mt19937_64 rng(37);
  const TrainingSet data({random_gf(y, rng)}, {random_gf(y, rng)});
  const Classifier cls(Kernel::constant(y, y, 1.0), GridFunction::zero(y));
  MsaOptions opt;
  opt.relax = 0.0;
  CHECK_THROWS(solve_msa(data, cls, Predictor::identity(), BoxSet(-1, 1, -1, 1),
                         ControlPath::zero(TimeGrid(0.5, 2), y),
                         Activation::make("sigmoid"), opt));
}
