#include "peelfield/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <set>

#include "peelfield/errors.hpp"
#include "peelfield/mesh.hpp"

namespace peelfield {

namespace {

// Fixed substream tag keeping direction draws disjoint from noise draws.
constexpr std::uint64_t kDirectionTag = 0x646972656374ULL;

}  // namespace

ExperimentConfig ExperimentConfig::from_config(const ConfigMap& cfg) {
  ExperimentConfig out;
  out.mesh_file = cfg.get_string("mesh_file", "");
  if (cfg.has("shell_radii_mm")) {
    out.shells.radii_mm = cfg.get_double_list("shell_radii_mm");
    out.shells.conductivities = cfg.get_double_list("shell_conductivities");
  }
  out.mesh_edge_mm = cfg.get_double("mesh_edge_mm", 8.0);
  if (cfg.has("refine_compartments"))
    out.refine_labels = cfg.get_int_list("refine_compartments");
  out.refine_rounds = cfg.get_int("refine_rounds", out.refine_labels.empty() ? 0 : 1);

  out.sensor_file = cfg.get_string("sensor_file", "");
  out.sensor_count = cfg.get_int("sensor_count", 64);
  out.sensor_montage = cfg.get_string("sensor_montage", "fibonacci");

  if (cfg.has("active_compartments"))
    out.active_compartments = cfg.get_int_list("active_compartments");
  if (cfg.has("peel_depths_mm"))
    out.peel_depths_mm = cfg.get_double_list("peel_depths_mm");
  out.source_count = cfg.get_int("source_count", 500);
  out.true_source_count = cfg.get_int("true_source_count", 0);
  out.freeze_lattice = cfg.get_bool("freeze_lattice", true);

  if (cfg.has("snr_db")) out.snr_db = cfg.get_double_list("snr_db");
  out.trials = cfg.get_int("trials", 20);
  if (cfg.has("methods")) out.methods = cfg.get_string_list("methods");
  out.noiseless = cfg.get_bool("noiseless", false);
  out.noiseless_lambda_snr_db = cfg.get_double("noiseless_lambda_snr_db", 100.0);
  out.scan_trunc_rtol = cfg.get_double("scan_trunc_rtol", 1e-6);
  out.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 1));

  out.dispersion_roi_mm = cfg.get_double("dispersion_roi_mm", 30.0);
  out.dispersion_snr_db = cfg.get_double("dispersion_snr_db", -1.0);
  out.solver_tol = cfg.get_double("solver_tol", 1e-9);

  if (cfg.has("compare_eccentricities"))
    out.compare_eccentricities = cfg.get_double_list("compare_eccentricities");
  out.compare_directions_per_ecc = cfg.get_int("compare_directions_per_ecc", 20);
  out.compare_mode = cfg.get_string("compare_mode", "block");
  out.compare_self = cfg.get_bool("compare_self", false);

  out.validate();
  return out;
}

void ExperimentConfig::validate() const {
  if (mesh_file.empty()) {
    if (shells.shell_count() == 0)
      throw ConfigError("config needs either mesh_file or shell_radii_mm");
    shells.validate();
  }
  if (mesh_edge_mm <= 0.0) throw ConfigError("mesh_edge_mm must be positive");
  if (refine_rounds < 0) throw ConfigError("refine_rounds must be >= 0");
  if (sensor_file.empty() && sensor_count < 2)
    throw ConfigError("sensor_count must be at least 2");
  if (sensor_montage != "fibonacci" && sensor_montage != "rings")
    throw ConfigError("sensor_montage must be 'fibonacci' or 'rings'");
  if (active_compartments.empty())
    throw ConfigError("active_compartments must list at least one label");
  if (peel_depths_mm.empty())
    throw ConfigError("peel_depths_mm must list at least one depth");
  for (double d : peel_depths_mm)
    if (!(d >= 0.0)) throw ConfigError("peel depths must be >= 0");
  if (source_count < 1) throw ConfigError("source_count must be >= 1");
  if (true_source_count < 0)
    throw ConfigError("true_source_count must be >= 0");
  for (double s : snr_db)
    if (!std::isfinite(s)) throw ConfigError("snr_db entries must be finite");
  if (trials < 1) throw ConfigError("trials must be >= 1");
  if (methods.empty()) throw ConfigError("methods must list at least one method");
  for (const std::string& m : methods)
    if (m != "sloreta" && m != "dipole_scan")
      throw ConfigError("unknown method '" + m +
                        "' (expected sloreta or dipole_scan)");
  if (!(scan_trunc_rtol >= 0.0 && scan_trunc_rtol < 1.0))
    throw ConfigError("scan_trunc_rtol must lie in [0, 1)");
  if (dispersion_roi_mm <= 0.0)
    throw ConfigError("dispersion_roi_mm must be positive");
  if (solver_tol <= 0.0) throw ConfigError("solver_tol must be positive");
  for (double e : compare_eccentricities)
    if (!(e > 0.0 && e < 1.0))
      throw ConfigError("compare_eccentricities must lie in (0, 1)");
  if (compare_directions_per_ecc < 1)
    throw ConfigError("compare_directions_per_ecc must be >= 1");
  if (compare_mode != "block" && compare_mode != "radial" &&
      compare_mode != "random")
    throw ConfigError("compare_mode must be block, radial, or random");
}

ForwardContext build_forward_context(const ExperimentConfig& config) {
  ForwardContext ctx;
  if (!config.mesh_file.empty()) {
    ctx.mesh = load_mesh(config.mesh_file);
  } else {
    ctx.mesh = generate_sphere_mesh(config.shells, config.mesh_edge_mm);
  }
  if (!config.refine_labels.empty() && config.refine_rounds > 0) {
    const std::set<int> labels(config.refine_labels.begin(),
                               config.refine_labels.end());
    ctx.mesh = refine_compartments(ctx.mesh, labels, config.refine_rounds);
  }

  std::vector<std::string> labels;
  std::vector<Vec3> positions;
  if (!config.sensor_file.empty()) {
    SensorFile file = load_sensor_file(config.sensor_file);
    labels = std::move(file.labels);
    positions = std::move(file.positions);
  } else {
    if (config.mesh_file.empty() && config.sensor_montage == "rings") {
      positions = ring_montage(config.shells.outer_radius(),
                               {0.9, 0.7, 0.45, 0.25, -0.25, -0.45, -0.7, -0.9},
                               config.sensor_count / 8);
    } else if (config.mesh_file.empty()) {
      positions =
          fibonacci_montage(config.shells.outer_radius(), config.sensor_count);
    } else {
      throw ConfigError("sensor_file is required when mesh_file is given");
    }
    labels.reserve(positions.size());
    char buf[32];
    for (std::size_t i = 0; i < positions.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "E%03zu", i + 1);
      labels.emplace_back(buf);
    }
  }
  ctx.sensors = SensorArray::attach(ctx.mesh, labels, positions);

  const SystemMatrix system = assemble_system(ctx.mesh);
  TransferOptions options;
  options.tol = config.solver_tol;
  ctx.transfer = compute_transfer(system, ctx.sensors, options);
  return ctx;
}

DepthSpace build_depth_space(const ForwardContext& ctx,
                             const ExperimentConfig& config, double depth_mm,
                             const SourceSpace* frozen) {
  DepthSpace out;
  out.depth_mm = depth_mm;
  PeelConfig peel_config;
  peel_config.depth_mm = depth_mm;
  peel_config.active_compartments.insert(config.active_compartments.begin(),
                                         config.active_compartments.end());
  out.peel = peel(ctx.mesh, peel_config);
  out.realized_depth = effective_depth(ctx.mesh, out.peel);

  if (frozen == nullptr) {
    out.sources = place_sources(ctx.mesh, out.peel, config.source_count);
    out.source_origin.resize(out.sources.count());
    for (int i = 0; i < out.sources.count(); ++i) out.source_origin[i] = i;
  } else {
    // Frozen lattice: keep only positions whose host survived this depth's
    // peel, so deeper depths see subsets of the shallow source space.
    if (out.peel.kept_tetra.empty())
      throw ConfigError("peeled source space is empty");
    const std::set<int> kept(out.peel.kept_tetra.begin(),
                             out.peel.kept_tetra.end());
    for (int i = 0; i < frozen->count(); ++i) {
      if (kept.count(frozen->host_tetra[i])) {
        out.sources.positions.push_back(frozen->positions[i]);
        out.sources.host_tetra.push_back(frozen->host_tetra[i]);
        out.source_origin.push_back(i);
      }
    }
    if (out.sources.count() == 0)
      throw ConfigError("peeled source space is empty");
  }

  const std::vector<HdivDipole> dipoles =
      enumerate_hdiv_dipoles(ctx.mesh, out.peel.kept_tetra);
  out.D = build_interpolation_pbo(dipoles, out.sources, ctx.mesh);
  out.L = compose_leadfield(ctx.transfer, out.D);
  return out;
}

SyntheticTrial synthesize_measurement(const LeadField& L, int source_index,
                                      const Vec3& position,
                                      const Vec3& direction, double snr_db,
                                      bool noiseless, RandomStream& noise_rng) {
  if (source_index < 0 || source_index >= L.source_count())
    throw ConfigError("synthesize: source index outside lead field");
  const int n_sensors = L.sensor_count();
  SyntheticTrial trial;
  trial.source_index = source_index;
  trial.position = position;
  trial.direction = direction;
  trial.snr_db = snr_db;
  trial.noiseless = noiseless;

  const Eigen::VectorXd signal = L.source_block(source_index) * direction;
  const double signal_norm = signal.norm();
  if (signal_norm <= 0.0) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "silent source (index %d)", source_index);
    throw NumericalError(buf);
  }
  // Unit-RMS signal: the dB exponent then scales noise relative to a known
  // signal power, making the label a true SNR.
  trial.amplitude = std::sqrt(static_cast<double>(n_sensors)) / signal_norm;

  Eigen::VectorXd m = trial.amplitude * signal;
  if (!noiseless) {
    const double noise_scale = std::pow(10.0, -snr_db / 20.0);
    for (int s = 0; s < n_sensors; ++s)
      m[s] += noise_scale * noise_rng.next_normal();
  }
  trial.measurement.values = std::move(m);
  trial.measurement.center();
  return trial;
}

Vec3 trial_direction(std::uint64_t seed, int source_index) {
  RandomStream rng(seed, static_cast<std::uint64_t>(source_index),
                   kDirectionTag, 0);
  double d[3];
  rng.next_direction(d);
  return Vec3(d[0], d[1], d[2]);
}

RandomStream noise_stream(std::uint64_t seed, int source_index, int trial,
                          double snr_db) {
  // SNR folded in at 0.1 dB resolution so every sweep cell draws its own
  // stream regardless of evaluation order.
  const auto snr_key =
      static_cast<std::uint64_t>(static_cast<std::int64_t>(
          std::llround(snr_db * 10.0)) + (1LL << 32));
  return RandomStream(seed, static_cast<std::uint64_t>(source_index),
                      static_cast<std::uint64_t>(trial) + 1, snr_key);
}

}  // namespace peelfield
