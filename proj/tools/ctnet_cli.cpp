// Experiment driver: JSON config in, CSV/JSON artifacts out.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "ctnet/controllability.hpp"
#include "ctnet/hjb.hpp"
#include "ctnet/pontryagin.hpp"
#include "ctnet/serialize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ctnet;

namespace {

struct Config {
  std::string text;  // raw config for the manifest digest
  GridPtr y_grid, u_grid;
  TimeGrid time;
  Activation sigma = Activation::make(ActivationKind::Sigmoid);
  Predictor predictor = Predictor::identity();
  LossKind loss = LossKind::Mse;
  bool has_box = false;
  double a_min = -1, a_max = 1, b_min = -1, b_max = 1;
  double train_step = 1.0;
  int train_iters = 200;
  uint64_t seed = 0;
  int msa_sweeps = 30;
  double msa_relax = 0.5;
  double msa_tol = 1e-6;
  fs::path data_path;
  fs::path output_dir = "out";
};

GridPtr parse_grid(const json& j) {
  return SpatialGrid::uniform(j.value("dim", 1), j.at("cells_per_axis").get<int>(),
                              j.value("lo", 0.0), j.value("hi", 1.0));
}

Config load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  Config c;
  c.text = ss.str();
  json j;
  try {
    j = json::parse(c.text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("config is not valid JSON: ") + e.what());
  }
  c.y_grid = parse_grid(j.at("y_grid"));
  c.u_grid = j.contains("u_grid") ? parse_grid(j.at("u_grid")) : c.y_grid;
  c.time = TimeGrid(j.at("time").at("T").get<double>(),
                    j.at("time").at("steps").get<int>());
  if (c.time.steps < 1) throw std::runtime_error("time.steps must be >= 1");
  c.sigma = Activation::make(j.value("activation", std::string("sigmoid")));
  const std::string pk = j.value("predictor", std::string("identity"));
  if (pk == "identity")
    c.predictor = Predictor::identity();
  else if (pk == "logistic")
    c.predictor = Predictor::logistic();
  else if (pk == "softmax")
    c.predictor = Predictor::softmax();
  else
    throw std::runtime_error("unknown predictor: " + pk);
  const std::string lk = j.value("loss", std::string("mse"));
  if (lk == "mse")
    c.loss = LossKind::Mse;
  else if (lk == "cross_entropy")
    c.loss = LossKind::CrossEntropy;
  else
    throw std::runtime_error("unknown loss: " + lk);
  if (j.contains("box")) {
    c.has_box = true;
    c.a_min = j["box"].at("a_min").get<double>();
    c.a_max = j["box"].at("a_max").get<double>();
    c.b_min = j["box"].at("b_min").get<double>();
    c.b_max = j["box"].at("b_max").get<double>();
  }
  if (j.contains("train")) {
    c.train_step = j["train"].value("step", 1.0);
    c.train_iters = j["train"].value("iters", 200);
    c.seed = j["train"].value("seed", 0ull);
  }
  if (j.contains("msa")) {
    c.msa_sweeps = j["msa"].value("sweeps", 30);
    c.msa_relax = j["msa"].value("relax", 0.5);
    c.msa_tol = j["msa"].value("tol", 1e-6);
    c.seed = j["msa"].value("seed", c.seed);
  }
  if (j.contains("data")) c.data_path = j.at("data").get<std::string>();
  if (j.contains("output")) c.output_dir = j.at("output").get<std::string>();
  return c;
}

TrainingSet load_data(const Config& c, GridPtr& y, GridPtr& u) {
  if (c.data_path.empty()) throw std::runtime_error("config has no data path");
  if (!fs::exists(c.data_path))
    throw std::runtime_error("data index not found: " + c.data_path.string());
  TrainingSet data = load_training_set(c.data_path, y, u);
  for (const auto& f : data.initial)
    if (!f.values.allFinite()) throw std::runtime_error("non-finite initial datum");
  for (const auto& p : data.targets)
    if (!p.values.allFinite()) throw std::runtime_error("non-finite target");
  return data;
}

Classifier default_classifier(const GridPtr& u, const GridPtr& y) {
  return Classifier(Kernel::constant(u, y, 1.0), GridFunction::zero(u));
}

void emit_manifest(const Config& c, const std::string& command) {
  fs::create_directories(c.output_dir);
  write_run_manifest(c.output_dir / "manifest.json", command, c.text, c.seed);
}

int cmd_forward(const Config& c) {
  GridPtr y, u;
  const TrainingSet data = load_data(c, y, u);
  ControlPath ctrl = ControlPath::zero(c.time, y);
  const Trajectory traj = solve_forward_euler(data.initial, ctrl, c.sigma);
  emit_manifest(c, "forward");
  write_trajectory(c.output_dir / "trajectory", traj);
  const AprioriReport rep = check_apriori_bound(traj, ctrl, c.sigma);
  json out;
  out["solution_bound_margin"] = rep.solution_bound_margin;
  out["difference_bound_margin"] = rep.difference_bound_margin;
  out["time_continuity_margin"] = rep.time_continuity_margin;
  std::ofstream(c.output_dir / "apriori.json") << out.dump(2) << '\n';
  return 0;
}

int cmd_train(const Config& c) {
  GridPtr y, u;
  const TrainingSet data = load_data(c, y, u);
  const TrainResult res = train_gradient_flow(
      data, ControlPath::zero(c.time, y), default_classifier(u, y), c.sigma,
      c.predictor, c.train_step, c.train_iters, c.loss);
  emit_manifest(c, "train");
  write_loss_csv(c.output_dir / "loss.csv", res.loss_history);
  write_checkpoint(c.output_dir / "checkpoint", res.ctrl, res.cls,
                   static_cast<int>(res.loss_history.size()) - 1);
  return 0;
}

int cmd_pontryagin(const Config& c) {
  if (!c.has_box) throw std::runtime_error("pontryagin needs box constraints");
  GridPtr y, u;
  const TrainingSet data = load_data(c, y, u);
  const BoxSet box(c.a_min, c.a_max, c.b_min, c.b_max);
  MsaOptions opt;
  opt.sweeps = c.msa_sweeps;
  opt.relax = c.msa_relax;
  opt.tol = c.msa_tol;
  opt.seed = c.seed;
  const PontryaginState st =
      solve_msa(data, default_classifier(u, y), c.predictor, box,
                ControlPath::zero(c.time, y), c.sigma, opt);
  emit_manifest(c, "pontryagin");

  std::ofstream sweeps(c.output_dir / "sweeps.csv");
  sweeps << "sweep,loss,control_change,hamiltonian_min,hamiltonian_max\n";
  for (size_t s = 0; s < st.hamiltonian_history.size(); ++s) {
    const auto& h = st.hamiltonian_history[s];
    const auto [mn, mx] = std::minmax_element(h.begin(), h.end());
    char line[256];
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g,%.17g\n", s,
                  st.loss_history[s], st.control_change_history[s], *mn, *mx);
    sweeps << line;
  }
  json out;
  out["converged"] = st.converged;
  out["diverged"] = st.diverged;
  out["sweeps_used"] = st.sweeps_used;
  out["final_loss"] = st.loss_history.back();
  out["boundary_contact_fraction"] = boundary_contact_fraction(st.ctrl, box);
  std::ofstream(c.output_dir / "pontryagin.json") << out.dump(2) << '\n';
  write_checkpoint(c.output_dir / "checkpoint", st.ctrl,
                   default_classifier(u, y), st.sweeps_used);
  return st.diverged ? 1 : 0;
}

int cmd_controllability(const Config& c) {
  GridPtr y, u;
  const TrainingSet data = load_data(c, y, u);
  ControlPath ctrl = ControlPath::zero(c.time, y);
  for (auto& b : ctrl.b_path) b.values.setConstant(0.5);
  const Trajectory traj = solve_forward_euler(data.initial, ctrl, c.sigma);
  const Gramian g = gramian_trajectory(traj, ctrl, c.sigma, 0);
  emit_manifest(c, "controllability");

  std::ofstream spec(c.output_dir / "spectrum.csv");
  spec << "index,eigenvalue\n";
  for (Eigen::Index i = 0; i < g.eigenvalues.size(); ++i) {
    char line[64];
    std::snprintf(line, sizeof line, "%lld,%.17g\n", static_cast<long long>(i),
                  g.eigenvalues(i));
    spec << line;
  }

  std::vector<GridFunction> dirs;
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> un(-1.0, 1.0);
  for (int k = 0; k < 3; ++k) {
    Eigen::VectorXd v(y->size());
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = un(rng);
    dirs.emplace_back(y, std::move(v));
  }
  const ObstructionReport rep = multistate_obstruction(
      data.initial.front(), dirs, ctrl, c.sigma,
      {1e-1, 3e-2, 1e-2, 3e-3, 1e-3});
  json out;
  out["min_eigenvalue"] = g.min_eigenvalue;
  out["slope"] = rep.slope;
  out["at_floor"] = rep.at_floor;
  out["residuals"] = rep.residuals;
  out["eps"] = rep.eps;
  std::ofstream(c.output_dir / "obstruction.json") << out.dump(2) << '\n';
  return 0;
}

int cmd_hjb_eval(const Config& c, const std::vector<std::string>& state_files,
                 const std::vector<std::string>& costate_files) {
  if (!c.has_box) throw std::runtime_error("hjb-eval needs box constraints");
  if (state_files.empty() || state_files.size() != costate_files.size())
    throw std::runtime_error("hjb-eval needs matching --state/--costate files");
  std::vector<GridFunction> v, p;
  for (size_t i = 0; i < state_files.size(); ++i) {
    v.push_back(read_grid_function_csv(state_files[i], c.y_grid));
    p.push_back(read_grid_function_csv(costate_files[i], c.y_grid));
  }
  const BoxSet box(c.a_min, c.a_max, c.b_min, c.b_max);
  const HjbHamiltonian h = hjb_hamiltonian(v, p, box, c.sigma, c.seed);
  emit_manifest(c, "hjb-eval");
  json out;
  out["hamiltonian"] = h.value;
  write_grid_function_csv(c.output_dir / "cell_values.csv", h.cell_values);
  std::ofstream(c.output_dir / "hjb_eval.json") << out.dump(2) << '\n';
  std::cout << out.dump() << '\n';
  return 0;
}

int cmd_hjb_value(const Config& c) {
  if (!c.has_box) throw std::runtime_error("hjb-value needs box constraints");
  GridPtr y, u;
  const TrainingSet data = load_data(c, y, u);
  const BoxSet box(c.a_min, c.a_max, c.b_min, c.b_max);
  HjbOptions opt;
  opt.seed = c.seed;
  const ValueEstimate est =
      estimate_value(data.initial, c.time.T, c.time.steps, data.targets,
                     default_classifier(u, y), c.predictor, box, c.sigma, c.loss, opt);
  emit_manifest(c, "hjb-value");
  json out;
  out["value"] = est.value;
  out["start_values"] = est.start_values;
  std::ofstream(c.output_dir / "hjb_value.json") << out.dump(2) << '\n';
  std::cout << out.dump() << '\n';
  return 0;
}

// quick self-checks usable on a fresh checkout: forward bounds, a finite
// difference probe of the gradient, the cross-entropy floor, serialization
// round trip
int cmd_check(const Config& c) {
  const GridPtr y = c.y_grid;
  const GridPtr u = c.u_grid;
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> un(-0.5, 0.5);
  auto rand_gf = [&](const GridPtr& g) {
    Eigen::VectorXd v(g->size());
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = un(rng);
    return GridFunction(g, std::move(v));
  };

  int failures = 0;
  auto report = [&](const std::string& name, bool ok) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << '\n';
    if (!ok) ++failures;
  };

  TrainingSet data({rand_gf(y), rand_gf(y)}, {rand_gf(u), rand_gf(u)});
  ControlPath ctrl = ControlPath::zero(c.time, y);
  for (auto& a : ctrl.a_path) a = rand_gf(y);
  const Trajectory traj = solve_forward_euler(data.initial, ctrl, c.sigma);
  report("apriori_bounds", check_apriori_bound(traj, ctrl, c.sigma).ok());

  const Classifier cls = default_classifier(u, y);
  const auto terminal =
      adjoint_terminal(traj.terminal(), cls, c.predictor, data.targets);
  const Trajectory co = solve_backward(traj, ctrl, c.sigma, terminal);
  const LossGradient g =
      loss_gradient(traj, co, ctrl, c.sigma, cls, c.predictor, data.targets);
  const double j0 =
      evaluate_loss(traj.terminal(), cls, c.predictor, data.targets);
  const double eps = 1e-6;
  ControlPath cp = ctrl, cm = ctrl;
  cp.a_path[0].values(0) += eps;
  cm.a_path[0].values(0) -= eps;
  const double jp = evaluate_loss(
      solve_forward_euler(data.initial, cp, c.sigma).terminal(), cls,
      c.predictor, data.targets);
  const double jm = evaluate_loss(
      solve_forward_euler(data.initial, cm, c.sigma).terminal(), cls,
      c.predictor, data.targets);
  const double fd = (jp - jm) / (2 * eps);
  // nodal partial = dt * w_k * L2 gradient density
  const double an = c.time.dt() * y->weights()(0) * g.d_a[0].values(0);
  report("gradient_probe",
         std::abs(fd - an) <= 1e-6 * std::max(1.0, std::abs(fd)) && j0 >= 0.0);

  std::vector<GridFunction> ps, zs;
  for (int k = 0; k < 5; ++k) {
    GridFunction z = rand_gf(u);
    GridFunction p = predict(z, Predictor::softmax());
    ps.push_back(p);
    zs.push_back(z);
  }
  bool floor_ok = true;
  for (int k = 0; k < 5; ++k)
    floor_ok = floor_ok && loss_cross_entropy({zs[static_cast<size_t>(k)]},
                                              {ps[static_cast<size_t>(k)]}) >=
                               cross_entropy_floor({ps[static_cast<size_t>(k)]}) -
                                   1e-10;
  report("cross_entropy_floor", floor_ok);

  const fs::path tmp = fs::temp_directory_path() / "ctnet_check_roundtrip.csv";
  const GridFunction f = rand_gf(y);
  write_grid_function_csv(tmp, f);
  const GridFunction f2 = read_grid_function_csv(tmp, y);
  fs::remove(tmp);
  report("serialize_roundtrip", (f.values - f2.values).cwiseAbs().maxCoeff() == 0.0);

  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"continuum network experiment driver"};
  app.require_subcommand(1);

  std::string config_path;
  int threads = 0;
  app.add_option("-c,--config", config_path, "JSON config file")->required();
  app.add_option("--threads", threads, "cap worker threads (0 = default)");

  std::string box_csv;
  int sweeps_override = -1;
  double relax_override = -1;
  long long seed_override = -1;
  std::vector<std::string> state_files, costate_files;

  auto* forward = app.add_subcommand("forward", "solve the forward problem");
  auto* train = app.add_subcommand("train", "gradient-flow training");
  auto* pont = app.add_subcommand("pontryagin", "MSA sweep to the minimum principle");
  pont->add_option("--box", box_csv, "a_min,a_max,b_min,b_max override");
  pont->add_option("--sweeps", sweeps_override, "MSA sweep cap");
  pont->add_option("--relax", relax_override, "relaxation weight in (0,1]");
  pont->add_option("--seed", seed_override, "rng seed override");
  auto* ctrb = app.add_subcommand("controllability", "Gramian spectrum and obstruction");
  auto* hjb_eval = app.add_subcommand("hjb-eval", "Hamiltonian at supplied files");
  hjb_eval->add_option("--state", state_files, "state CSV, one per datum");
  hjb_eval->add_option("--costate", costate_files, "co-state CSV, one per datum");
  auto* hjb_value = app.add_subcommand("hjb-value", "toy value estimation");
  auto* check = app.add_subcommand("check", "run built-in invariant checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (threads > 0) Eigen::setNbThreads(threads);
    Config cfg = load_config(config_path);
    if (seed_override >= 0) cfg.seed = static_cast<uint64_t>(seed_override);
    if (sweeps_override > 0) cfg.msa_sweeps = sweeps_override;
    if (relax_override > 0) cfg.msa_relax = relax_override;
    if (!box_csv.empty()) {
      double v[4];
      if (std::sscanf(box_csv.c_str(), "%lf,%lf,%lf,%lf", &v[0], &v[1], &v[2],
                      &v[3]) != 4)
        throw std::runtime_error("--box expects a_min,a_max,b_min,b_max");
      cfg.has_box = true;
      cfg.a_min = v[0];
      cfg.a_max = v[1];
      cfg.b_min = v[2];
      cfg.b_max = v[3];
    }

    if (forward->parsed()) return cmd_forward(cfg);
    if (train->parsed()) return cmd_train(cfg);
    if (pont->parsed()) return cmd_pontryagin(cfg);
    if (ctrb->parsed()) return cmd_controllability(cfg);
    if (hjb_eval->parsed()) return cmd_hjb_eval(cfg, state_files, costate_files);
    if (hjb_value->parsed()) return cmd_hjb_value(cfg);
    if (check->parsed()) return cmd_check(cfg);
    return 2;
  } catch (const std::exception& e) {
    nlohmann::json err;
    err["error"] = e.what();
    std::cerr << err.dump() << '\n';
    return 1;
  }
}
