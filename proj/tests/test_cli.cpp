#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "ctnet/serialize.hpp"

using namespace ctnet;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd =
      std::string(CTNET_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir() {
  const fs::path d = fs::temp_directory_path() / "ctnet_cli_tests";
  fs::create_directories(d);
  return d;
}

void write_config(const fs::path& path, const std::string& data_index,
                  const fs::path& out_dir, int steps = 8,
                  const std::string& extra = "") {
  std::ofstream cfg(path);
  cfg << R"({
  "y_grid": {"dim": 1, "cells_per_axis": 4},
  "time": {"T": 1.0, "steps": )"
      << steps << R"(},
  "activation": "sigmoid",
  "predictor": "identity",
  "loss": "mse",
  "box": {"a_min": -1.0, "a_max": 1.0, "b_min": -1.0, "b_max": 1.0},
  "train": {"step": 4.0, "iters": 300, "seed": 7},
  "data": ")"
      << data_index << R"(",
  "output": ")"
      << out_dir.string() << R"(")"
      << extra << "\n}\n";
}

GridFunction random_gf(const GridPtr& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd v(g->size());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = u(rng);
  return GridFunction(g, std::move(v));
}

}  // namespace

TEST_CASE("grid metadata JSON round trip") {
  const auto g = SpatialGrid::uniform(2, 8, -1.0, 3.0);
  const GridPtr g2 = grid_from_json(grid_to_json(*g));
  CHECK(g2->dim() == 2);
  CHECK(g2->cells_per_axis() == 8);
  CHECK(g2->lo() == -1.0);
  CHECK(g2->hi() == 3.0);
  CHECK((g2->cells() - g->cells()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("grid function and kernel CSV round trips are exact") {
  const auto g = SpatialGrid::uniform(1, 8);
  std::mt19937_64 rng(1);
  const GridFunction f = random_gf(g, rng);
  const fs::path d = scratch_dir();
  write_grid_function_csv(d / "f.csv", f);
  const GridFunction f2 = read_grid_function_csv(d / "f.csv", g);
  CHECK(f.values == f2.values);  // 17 significant digits restore the bits

  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd m(g->size(), g->size());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = u(rng);
  const Kernel b(g, g, m);
  write_kernel_csv(d / "b.csv", b);
  const Kernel b2 = read_kernel_csv(d / "b.csv", g, g);
  CHECK(b.values == b2.values);
}

TEST_CASE("grid function CSV validates shape") {
  const auto g = SpatialGrid::uniform(1, 8);
  const auto small = SpatialGrid::uniform(1, 4);
  std::mt19937_64 rng(2);
  const fs::path d = scratch_dir();
  write_grid_function_csv(d / "shape.csv", random_gf(g, rng));
  CHECK_THROWS(read_grid_function_csv(d / "shape.csv", small));
  CHECK_THROWS(read_grid_function_csv(d / "does_not_exist.csv", g));
}

TEST_CASE("trajectory and checkpoint round trips") {
  const auto g = SpatialGrid::uniform(1, 4);
  std::mt19937_64 rng(3);
  const TimeGrid tg(1.0, 3);
  ControlPath ctrl = ControlPath::zero(tg, g);
  for (auto& a : ctrl.a_path) a = random_gf(g, rng);
  const Trajectory traj =
      solve_forward_euler({random_gf(g, rng), random_gf(g, rng)}, ctrl,
                          Activation::make("sigmoid"));
  const fs::path d = scratch_dir() / "traj";
  write_trajectory(d, traj);
  const Trajectory t2 = read_trajectory(d);
  CHECK(t2.time.steps == traj.time.steps);
  CHECK(t2.data_count() == 2);
  for (int s = 0; s <= tg.steps; ++s)
    for (int j = 0; j < 2; ++j)
      CHECK(t2.at(s)[j].values == traj.at(s)[j].values);

  const Classifier cls(Kernel::constant(g, g, 2.0), random_gf(g, rng));
  const fs::path cd = scratch_dir() / "ckpt";
  write_checkpoint(cd, ctrl, cls, 42);
  const Checkpoint cp = read_checkpoint(cd);
  CHECK(cp.iteration == 42);
  CHECK(cp.cls.mu.values == cls.mu.values);
  for (int s = 0; s <= tg.steps; ++s)
    CHECK(cp.ctrl.a_path[s].values == ctrl.a_path[s].values);
}

TEST_CASE("training set fixtures load with the expected shapes") {
  GridPtr y, u;
  const TrainingSet toy2 =
      load_training_set(fs::path(CTNET_DATA_DIR) / "toy2" / "index.json", y, u);
  CHECK(toy2.size() == 2);
  CHECK(y->size() == 4);

  const TrainingSet imgs = load_training_set(
      fs::path(CTNET_DATA_DIR) / "images10" / "index.json", y, u);
  CHECK(imgs.size() == 10);
  CHECK(y->dim() == 2);
  CHECK(y->size() == 64);
  // image data normalized to [0, 1]
  for (const auto& f : imgs.initial) {
    CHECK(f.values.minCoeff() >= 0.0);
    CHECK(f.values.maxCoeff() <= 1.0 + 1e-12);
  }
  // targets are probability densities on U
  for (const auto& p : imgs.targets)
    CHECK(p.values.dot(u->weights()) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("duplicate data are rejected at load time") {
  const fs::path d = scratch_dir() / "dup";
  fs::create_directories(d);
  const auto g = SpatialGrid::uniform(1, 4);
  std::mt19937_64 rng(5);
  const GridFunction f = random_gf(g, rng);
  const TrainingSet ok({f, random_gf(g, rng)}, {f, f});
  write_training_set(d / "index.json", ok, g);
  // overwrite the second datum with a copy of the first
  fs::copy_file(d / "initial_000.csv", d / "initial_001.csv",
                fs::copy_options::overwrite_existing);
  GridPtr y, u;
  CHECK_THROWS_WITH_AS(load_training_set(d / "index.json", y, u),
                       doctest::Contains("duplicate"), std::invalid_argument);
}

TEST_CASE("cli: check exits zero on a fresh tree") {
  const fs::path d = scratch_dir();
  write_config(d / "check.json", "unused", d / "check_out");
  CHECK(run_cli("-c " + (d / "check.json").string() + " check",
                d / "check.log") == 0);
  CHECK(slurp(d / "check.log").find("FAIL") == std::string::npos);
}

TEST_CASE("cli: train reduces the toy loss a hundredfold") {
  const fs::path d = scratch_dir();
  const fs::path out = d / "train_out";
  write_config(d / "train.json",
               (fs::path(CTNET_DATA_DIR) / "toy1" / "index.json").string(), out);
  CHECK(run_cli("-c " + (d / "train.json").string() + " train",
                d / "train.log") == 0);
  std::ifstream loss(out / "loss.csv");
  std::string line, first, last;
  std::getline(loss, line);  // header
  while (std::getline(loss, line))
    if (!line.empty()) {
      if (first.empty()) first = line;
      last = line;
    }
  const double j0 = std::stod(first.substr(first.find(',') + 1));
  const double j1 = std::stod(last.substr(last.find(',') + 1));
  CHECK(j1 <= 0.01 * j0);
  CHECK(fs::exists(out / "manifest.json"));
  CHECK(fs::exists(out / "checkpoint" / "checkpoint.json"));
}

TEST_CASE("cli: identical seeds give byte-identical outputs") {
  const fs::path d = scratch_dir();
  for (const char* run : {"det1", "det2"}) {
    write_config(d / (std::string(run) + ".json"),
                 (fs::path(CTNET_DATA_DIR) / "toy1" / "index.json").string(),
                 d / run);
    CHECK(run_cli("-c " + (d / (std::string(run) + ".json")).string() + " train",
                  d / (std::string(run) + ".log")) == 0);
  }
  CHECK(slurp(d / "det1" / "loss.csv") == slurp(d / "det2" / "loss.csv"));
  CHECK(slurp(d / "det1" / "checkpoint" / "w.csv") ==
        slurp(d / "det2" / "checkpoint" / "w.csv"));
  CHECK(slurp(d / "det1" / "checkpoint" / "a_t0000.csv") ==
        slurp(d / "det2" / "checkpoint" / "a_t0000.csv"));
}

TEST_CASE("cli: forward writes a trajectory bundle and bound margins") {
  const fs::path d = scratch_dir();
  const fs::path out = d / "fwd_out";
  write_config(d / "fwd.json",
               (fs::path(CTNET_DATA_DIR) / "toy2" / "index.json").string(), out);
  CHECK(run_cli("-c " + (d / "fwd.json").string() + " forward",
                d / "fwd.log") == 0);
  CHECK(fs::exists(out / "trajectory" / "manifest.json"));
  CHECK(fs::exists(out / "apriori.json"));
  const Trajectory traj = read_trajectory(out / "trajectory");
  CHECK(traj.data_count() == 2);
}

TEST_CASE("cli: pontryagin emits per-sweep diagnostics") {
  const fs::path d = scratch_dir();
  const fs::path out = d / "msa_out";
  write_config(d / "msa.json",
               (fs::path(CTNET_DATA_DIR) / "toy1" / "index.json").string(), out,
               4, ",\n  \"msa\": {\"sweeps\": 5, \"relax\": 0.5, \"seed\": 1}");
  CHECK(run_cli("-c " + (d / "msa.json").string() + " pontryagin",
                d / "msa.log") == 0);
  const std::string sweeps = slurp(out / "sweeps.csv");
  CHECK(sweeps.find("sweep,loss") == 0);
  CHECK(fs::exists(out / "pontryagin.json"));
}

TEST_CASE("cli: hjb-eval and hjb-value emit JSON results") {
  const fs::path d = scratch_dir();
  const auto g = SpatialGrid::uniform(1, 4);
  std::mt19937_64 rng(9);
  write_grid_function_csv(d / "state.csv", random_gf(g, rng));
  write_grid_function_csv(d / "costate.csv", random_gf(g, rng));
  const fs::path out = d / "hjb_out";
  write_config(d / "hjb.json",
               (fs::path(CTNET_DATA_DIR) / "toy1" / "index.json").string(), out,
               2);
  CHECK(run_cli("-c " + (d / "hjb.json").string() + " hjb-eval --state " +
                    (d / "state.csv").string() + " --costate " +
                    (d / "costate.csv").string(),
                d / "hjb_eval.log") == 0);
  CHECK(slurp(out / "hjb_eval.json").find("hamiltonian") != std::string::npos);

  CHECK(run_cli("-c " + (d / "hjb.json").string() + " hjb-value",
                d / "hjb_value.log") == 0);
  CHECK(slurp(out / "hjb_value.json").find("value") != std::string::npos);
}

TEST_CASE("cli: usage and runtime errors use distinct exit codes") {
  const fs::path d = scratch_dir();
  CHECK(run_cli("frobnicate", d / "usage.log") == 2);  // unknown command
  CHECK(run_cli("", d / "usage2.log") == 2);           // missing subcommand
  write_config(d / "missing.json", (d / "no_such_index.json").string(),
               d / "missing_out");
  CHECK(run_cli("-c " + (d / "missing.json").string() + " train",
                d / "missing.log") == 1);
  CHECK(slurp(d / "missing.log").find("error") != std::string::npos);
  std::ofstream(d / "broken.json") << "{ not json";
  CHECK(run_cli("-c " + (d / "broken.json").string() + " check",
                d / "broken.log") == 1);
}
