#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "tintegrate/pde.hpp"
#include "tintegrate/tensor.hpp"

namespace ti {

/// Everything needed to regenerate one benchmark dataset deterministically.
struct DatasetConfig {
  std::string pde;  // burgers1d | kdv1d | ks1d | heat3d
  long n_samples = 0;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;

  double t_final = 0.0, dt_save = 0.0, t_train = 0.0, dt_solver = 0.0;

  Grid1D grid1d;
  Grid3D grid3d;

  double nu = 0.01;                    // burgers1d
  double eta = 6.0, gamma_kdv = 1.0;   // kdv1d
  double alpha_diff = 1.0;             // heat3d
  GRFSpec grf;                         // burgers1d / ks1d initial fields
  double blob_sigma = 2.0, blob_lo = 2.0, blob_hi = 11.0;  // heat3d IC sampling

  bool is_3d() const { return pde == "heat3d"; }
  long n_t() const;
  long space() const;
  void validate() const;

  nlohmann::json to_json() const;
  static DatasetConfig from_json(const nlohmann::json& j);
  /// Desk-scale defaults per benchmark; paper_scale restores the full sizes.
  static DatasetConfig defaults(const std::string& pde, bool paper_scale);
};

/// N_s samples x (N_t + 1) frames x spatial grid of solution snapshots.
struct TrajectoryDataset {
  DatasetConfig config;
  std::vector<nlohmann::json> ic_params;  // one entry per sample
  Tensor u;                               // [N_s x (N_t+1) x space]

  long n_t() const { return config.n_t(); }
  long space() const { return config.space(); }
  long n_train() const;
  long n_test() const { return config.n_samples - n_train(); }

  double frame_time(long f) const { return static_cast<double>(f) * config.dt_save; }
  /// Last frame index whose time is inside the training window.
  long train_boundary_frame() const;

  /// Snapshot as a [1 x space] row (branch-ready).
  Tensor state(long sample, long frame) const;
  /// Rows of samples x one frame, [count x space].
  Tensor states(const std::vector<long>& samples, long frame) const;

  /// Physical coordinates of every grid cell, [space x d].
  Tensor space_coords() const;
  /// Indices of cells that participate in losses and error norms (excludes
  /// the masked quadrant for heat3d; identity for 1-D grids).
  std::vector<long> active_cells() const;
};

/// Draws every IC, runs the reference solver, and assembles the dataset.
/// Fully deterministic under (config, seed); aborts with the sample index on
/// any solver blow-up.
TrajectoryDataset generate_dataset(const DatasetConfig& config);

/// Directory layout: manifest.json + u.bin (raw little-endian float-64,
/// row-major [sample][time][space]). Round-trips bit-exactly.
void save_dataset(const TrajectoryDataset& ds, const std::string& dir);
TrajectoryDataset load_dataset(const std::string& dir);

}  // namespace ti
