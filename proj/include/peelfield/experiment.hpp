#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "peelfield/fem.hpp"
#include "peelfield/inverse.hpp"
#include "peelfield/io.hpp"
#include "peelfield/peel.hpp"
#include "peelfield/rng.hpp"
#include "peelfield/sources.hpp"
#include "peelfield/sphere.hpp"

namespace peelfield {

// Everything a study or comparison run needs, resolved from the key-value
// config file.  Defaults are desk-scale; the file schema is documented in
// the README.
struct ExperimentConfig {
  // mesh: either a file, or a generated multi-shell sphere
  std::string mesh_file;
  ShellSpec shells;
  double mesh_edge_mm = 8.0;
  std::vector<int> refine_labels;
  int refine_rounds = 0;

  // sensors: either a file, or a generated montage on the outer radius
  std::string sensor_file;
  int sensor_count = 64;
  std::string sensor_montage = "fibonacci";  // "fibonacci" | "rings"

  // source space
  std::vector<int> active_compartments;
  std::vector<double> peel_depths_mm = {0.0};
  int source_count = 500;
  int true_source_count = 0;  // 0 = every placed source synthesizes trials
  bool freeze_lattice = true;

  // trial sweep
  std::vector<double> snr_db = {5, 10, 15, 20, 25, 30};
  int trials = 20;
  std::vector<std::string> methods = {"sloreta", "dipole_scan"};
  bool noiseless = false;
  double noiseless_lambda_snr_db = 100.0;  // sLORETA lambda when noiseless
  double scan_trunc_rtol = 1e-6;
  std::uint64_t seed = 1;

  // dispersion report
  double dispersion_roi_mm = 30.0;
  double dispersion_snr_db = -1.0;  // < 0 = use the largest SNR in the sweep

  // solver
  double solver_tol = 1e-9;

  // analytic comparison
  std::vector<double> compare_eccentricities;
  int compare_directions_per_ecc = 20;
  std::string compare_mode = "block";  // "block" | "radial" | "random"
  bool compare_self = false;

  bool uses_sphere() const { return mesh_file.empty(); }

  static ExperimentConfig from_config(const ConfigMap& cfg);
  void validate() const;
};

// Mesh + attached sensors + transfer matrix: computed once per mesh and
// shared by every peel depth.
struct ForwardContext {
  TetrahedralMesh mesh;
  SensorArray sensors;
  TransferMatrix transfer;
};

ForwardContext build_forward_context(const ExperimentConfig& config);

// One peel depth's slice of the pipeline: peel -> place -> D -> L.
struct DepthSpace {
  double depth_mm = 0.0;
  PeelResult peel;
  EffectiveDepth realized_depth;
  SourceSpace sources;
  std::vector<int> source_origin;  // index into the frozen space (or self)
  InterpolationMatrix D;
  LeadField L;
};

// When `frozen` is non-null its positions are reused (filtered to the new
// kept set) instead of re-placing, so deeper depths select subsets.
DepthSpace build_depth_space(const ForwardContext& ctx,
                             const ExperimentConfig& config, double depth_mm,
                             const SourceSpace* frozen = nullptr);

struct SyntheticTrial {
  int source_index = -1;
  Vec3 position = Vec3::Zero();
  Vec3 direction = Vec3::Zero();  // unit
  double amplitude = 0.0;         // scaled so ||a s|| = sqrt(n_sensors)
  double snr_db = 0.0;
  bool noiseless = false;
  Measurement measurement;  // centered after noise addition
};

// M = a (L e_src) d + 10^(-snr/20) N, with N standard normal per sensor and
// amplitude fixed so the noiseless part has norm sqrt(n_sensors); the sum is
// re-centered because the solvers' gauge requires mean-free measurements.
SyntheticTrial synthesize_measurement(const LeadField& L, int source_index,
                                      const Vec3& position,
                                      const Vec3& direction, double snr_db,
                                      bool noiseless, RandomStream& noise_rng);

// Deterministic per-source unit direction, fixed across trials and SNRs.
Vec3 trial_direction(std::uint64_t seed, int source_index);

// Substream for the noise of one (source, trial, snr) cell; independent of
// thread scheduling so reruns are byte-identical.
RandomStream noise_stream(std::uint64_t seed, int source_index, int trial,
                          double snr_db);

}  // namespace peelfield
