#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ctnet/adjoint.hpp"
#include "ctnet/output_loss.hpp"

namespace ctnet {

// CSV layout for grid functions: one header line "index,x0,...,value", one
// row per cell, values printed with 17 significant digits so that identical
// inputs produce byte-identical files.
void write_grid_function_csv(const std::filesystem::path& path,
                             const GridFunction& f);
GridFunction read_grid_function_csv(const std::filesystem::path& path,
                                    const GridPtr& grid);

// Kernel CSV: "row,col,value" triples in row-major order.
void write_kernel_csv(const std::filesystem::path& path, const Kernel& b);
Kernel read_kernel_csv(const std::filesystem::path& path, const GridPtr& row_grid,
                       const GridPtr& col_grid);

// JSON round trip of grid metadata (dim, cells per axis, bounds).
std::string grid_to_json(const SpatialGrid& g);
GridPtr grid_from_json(const std::string& text);

// Trajectory bundle: a directory with manifest.json (time grid, datum count,
// grid metadata) and one CSV per (time node, datum).
void write_trajectory(const std::filesystem::path& dir, const Trajectory& traj);
Trajectory read_trajectory(const std::filesystem::path& dir);

// Trainer checkpoint: checkpoint.json plus CSVs for the control path and the
// classifier, restorable to the exact state.
void write_checkpoint(const std::filesystem::path& dir, const ControlPath& ctrl,
                      const Classifier& cls, int iteration);
struct Checkpoint {
  ControlPath ctrl;
  Classifier cls;
  int iteration = 0;
};
Checkpoint read_checkpoint(const std::filesystem::path& dir);

// Run manifest: config digest, seed and library version, written next to
// command outputs for reproducibility.
void write_run_manifest(const std::filesystem::path& path,
                        const std::string& command, const std::string& config_text,
                        uint64_t seed);

// FNV-1a digest of a string, hex encoded.
std::string config_digest(const std::string& text);

// Training data bundle: a JSON index with per-datum initial/target CSV paths
// (relative to the index file) and grid metadata for Y and U.
TrainingSet load_training_set(const std::filesystem::path& index_path,
                              GridPtr& y_grid_out, GridPtr& u_grid_out);
void write_training_set(const std::filesystem::path& index_path,
                        const TrainingSet& data, const GridPtr& u_grid);

void write_loss_csv(const std::filesystem::path& path,
                    const std::vector<double>& history);

}  // namespace ctnet
