#include "ctnet/serialize.hpp"

#include <json.hpp>

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ctnet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);  // binary: no CRLF surprises
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  return in;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

void write_grid_function_csv(const fs::path& path, const GridFunction& f) {
  auto out = open_out(path);
  out << "index";
  for (int d = 0; d < f.grid->dim(); ++d) out << ",x" << d;
  out << ",value\n";
  for (Eigen::Index k = 0; k < f.values.size(); ++k) {
    out << k;
    for (int d = 0; d < f.grid->dim(); ++d) out << ',' << fmt(f.grid->cells()(k, d));
    out << ',' << fmt(f.values(k)) << '\n';
  }
}

GridFunction read_grid_function_csv(const fs::path& path, const GridPtr& grid) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("empty grid function file: " + path.string());
  Eigen::VectorXd v(grid->size());
  Eigen::Index count = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() < 2)
      throw std::runtime_error("malformed row in " + path.string() + ": " + line);
    const long idx = std::stol(cells.front());
    if (idx < 0 || idx >= grid->size())
      throw std::runtime_error("cell index out of range in " + path.string());
    v(idx) = std::stod(cells.back());
    ++count;
  }
  if (count != grid->size())
    throw std::runtime_error("row count mismatch in " + path.string() + ": got " +
                             std::to_string(count) + ", grid has " +
                             std::to_string(grid->size()));
  return GridFunction(grid, std::move(v));
}

void write_kernel_csv(const fs::path& path, const Kernel& b) {
  auto out = open_out(path);
  out << "row,col,value\n";
  for (Eigen::Index k = 0; k < b.values.rows(); ++k)
    for (Eigen::Index l = 0; l < b.values.cols(); ++l)
      out << k << ',' << l << ',' << fmt(b.values(k, l)) << '\n';
}

Kernel read_kernel_csv(const fs::path& path, const GridPtr& row_grid,
                       const GridPtr& col_grid) {
  auto in = open_in(path);
  std::string line;
  std::getline(in, line);
  Eigen::MatrixXd m(row_grid->size(), col_grid->size());
  long count = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 3)
      throw std::runtime_error("malformed row in " + path.string() + ": " + line);
    const long r = std::stol(cells[0]), c = std::stol(cells[1]);
    if (r < 0 || r >= m.rows() || c < 0 || c >= m.cols())
      throw std::runtime_error("kernel index out of range in " + path.string());
    m(r, c) = std::stod(cells[2]);
    ++count;
  }
  if (count != m.size())
    throw std::runtime_error("row count mismatch in " + path.string());
  return Kernel(row_grid, col_grid, std::move(m));
}

std::string grid_to_json(const SpatialGrid& g) {
  json j;
  j["dim"] = g.dim();
  j["cells_per_axis"] = g.cells_per_axis();
  j["lo"] = g.lo();
  j["hi"] = g.hi();
  return j.dump();
}

GridPtr grid_from_json(const std::string& text) {
  const json j = json::parse(text);
  return SpatialGrid::uniform(j.at("dim").get<int>(),
                              j.at("cells_per_axis").get<int>(),
                              j.at("lo").get<double>(), j.at("hi").get<double>());
}

void write_trajectory(const fs::path& dir, const Trajectory& traj) {
  fs::create_directories(dir);
  json manifest;
  manifest["T"] = traj.time.T;
  manifest["steps"] = traj.time.steps;
  manifest["data_count"] = traj.data_count();
  manifest["grid"] = json::parse(grid_to_json(*traj.at(0).front().grid));
  open_out(dir / "manifest.json") << manifest.dump(2) << '\n';
  for (int s = 0; s <= traj.time.steps; ++s)
    for (int j = 0; j < traj.data_count(); ++j) {
      char name[64];
      std::snprintf(name, sizeof name, "state_t%04d_j%03d.csv", s, j);
      write_grid_function_csv(dir / name,
                              traj.at(s)[static_cast<size_t>(j)]);
    }
}

Trajectory read_trajectory(const fs::path& dir) {
  std::stringstream ss;
  ss << open_in(dir / "manifest.json").rdbuf();
  const json manifest = json::parse(ss.str());
  const GridPtr grid = grid_from_json(manifest.at("grid").dump());
  Trajectory traj;
  traj.time = TimeGrid(manifest.at("T").get<double>(), manifest.at("steps").get<int>());
  const int n = manifest.at("data_count").get<int>();
  for (int s = 0; s <= traj.time.steps; ++s) {
    std::vector<GridFunction> node;
    for (int j = 0; j < n; ++j) {
      char name[64];
      std::snprintf(name, sizeof name, "state_t%04d_j%03d.csv", s, j);
      node.push_back(read_grid_function_csv(dir / name, grid));
    }
    traj.states.push_back(std::move(node));
  }
  return traj;
}

void write_checkpoint(const fs::path& dir, const ControlPath& ctrl,
                      const Classifier& cls, int iteration) {
  fs::create_directories(dir);
  json j;
  j["iteration"] = iteration;
  j["T"] = ctrl.time.T;
  j["steps"] = ctrl.time.steps;
  j["y_grid"] = json::parse(grid_to_json(*ctrl.grid()));
  j["u_grid"] = json::parse(grid_to_json(*cls.u_grid()));
  open_out(dir / "checkpoint.json") << j.dump(2) << '\n';
  for (int s = 0; s <= ctrl.time.steps; ++s) {
    char name[64];
    std::snprintf(name, sizeof name, "a_t%04d.csv", s);
    write_grid_function_csv(dir / name, ctrl.a_path[static_cast<size_t>(s)]);
    std::snprintf(name, sizeof name, "b_t%04d.csv", s);
    write_kernel_csv(dir / name, ctrl.b_path[static_cast<size_t>(s)]);
  }
  write_kernel_csv(dir / "w.csv", cls.w);
  write_grid_function_csv(dir / "mu.csv", cls.mu);
}

Checkpoint read_checkpoint(const fs::path& dir) {
  std::stringstream ss;
  ss << open_in(dir / "checkpoint.json").rdbuf();
  const json j = json::parse(ss.str());
  const GridPtr y_grid = grid_from_json(j.at("y_grid").dump());
  const GridPtr u_grid = grid_from_json(j.at("u_grid").dump());
  const TimeGrid tg(j.at("T").get<double>(), j.at("steps").get<int>());
  std::vector<GridFunction> a;
  std::vector<Kernel> b;
  for (int s = 0; s <= tg.steps; ++s) {
    char name[64];
    std::snprintf(name, sizeof name, "a_t%04d.csv", s);
    a.push_back(read_grid_function_csv(dir / name, y_grid));
    std::snprintf(name, sizeof name, "b_t%04d.csv", s);
    b.push_back(read_kernel_csv(dir / name, y_grid, y_grid));
  }
  Checkpoint cp;
  cp.ctrl = ControlPath(tg, std::move(a), std::move(b));
  cp.cls = Classifier(read_kernel_csv(dir / "w.csv", u_grid, y_grid),
                      read_grid_function_csv(dir / "mu.csv", u_grid));
  cp.iteration = j.at("iteration").get<int>();
  return cp;
}

std::string config_digest(const std::string& text) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

void write_run_manifest(const fs::path& path, const std::string& command,
                        const std::string& config_text, uint64_t seed) {
  json j;
  j["command"] = command;
  j["config_digest"] = config_digest(config_text);
  j["seed"] = seed;
  j["format_version"] = 1;
  open_out(path) << j.dump(2) << '\n';
}

TrainingSet load_training_set(const fs::path& index_path, GridPtr& y_grid_out,
                              GridPtr& u_grid_out) {
  std::stringstream ss;
  ss << open_in(index_path).rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw std::runtime_error("bad training index " + index_path.string() + ": " +
                             e.what());
  }
  y_grid_out = grid_from_json(j.at("y_grid").dump());
  u_grid_out = grid_from_json(j.at("u_grid").dump());
  const fs::path base = index_path.parent_path();
  std::vector<GridFunction> init, tgt;
  for (const auto& d : j.at("data")) {
    init.push_back(read_grid_function_csv(
        base / d.at("initial").get<std::string>(), y_grid_out));
    tgt.push_back(read_grid_function_csv(base / d.at("target").get<std::string>(),
                                         u_grid_out));
  }
  return TrainingSet(std::move(init), std::move(tgt));
}

void write_training_set(const fs::path& index_path, const TrainingSet& data,
                        const GridPtr& u_grid) {
  const fs::path base = index_path.parent_path();
  fs::create_directories(base);
  json j;
  j["y_grid"] = json::parse(grid_to_json(*data.initial.front().grid));
  j["u_grid"] = json::parse(grid_to_json(*u_grid));
  j["data"] = json::array();
  for (int k = 0; k < data.size(); ++k) {
    char iname[64], tname[64];
    std::snprintf(iname, sizeof iname, "initial_%03d.csv", k);
    std::snprintf(tname, sizeof tname, "target_%03d.csv", k);
    write_grid_function_csv(base / iname, data.initial[static_cast<size_t>(k)]);
    write_grid_function_csv(base / tname, data.targets[static_cast<size_t>(k)]);
    j["data"].push_back({{"initial", iname}, {"target", tname}});
  }
  open_out(index_path) << j.dump(2) << '\n';
}

void write_loss_csv(const fs::path& path, const std::vector<double>& history) {
  auto out = open_out(path);
  out << "iteration,loss\n";
  for (size_t i = 0; i < history.size(); ++i)
    out << i << ',' << fmt(history[i]) << '\n';
}

}  // namespace ctnet
