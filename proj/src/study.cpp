#include "peelfield/study.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>

#include <nlohmann/json.hpp>

#include "peelfield/analytic.hpp"
#include "peelfield/errors.hpp"
#include "peelfield/parallel.hpp"
#include "peelfield/version.hpp"

namespace peelfield {

namespace {

using json = nlohmann::json;

json config_echo(const ExperimentConfig& c) {
  json doc;
  doc["mesh_file"] = c.mesh_file;
  if (c.uses_sphere()) {
    doc["shell_radii_mm"] = c.shells.radii_mm;
    doc["shell_conductivities"] = c.shells.conductivities;
    doc["mesh_edge_mm"] = c.mesh_edge_mm;
  }
  doc["refine_compartments"] = c.refine_labels;
  doc["refine_rounds"] = c.refine_rounds;
  doc["sensor_file"] = c.sensor_file;
  doc["sensor_count"] = c.sensor_count;
  doc["sensor_montage"] = c.sensor_montage;
  doc["active_compartments"] = c.active_compartments;
  doc["peel_depths_mm"] = c.peel_depths_mm;
  doc["source_count"] = c.source_count;
  doc["true_source_count"] = c.true_source_count;
  doc["freeze_lattice"] = c.freeze_lattice;
  doc["snr_db"] = c.snr_db;
  doc["trials"] = c.trials;
  doc["methods"] = c.methods;
  doc["noiseless"] = c.noiseless;
  doc["noiseless_lambda_snr_db"] = c.noiseless_lambda_snr_db;
  doc["scan_trunc_rtol"] = c.scan_trunc_rtol;
  doc["seed"] = c.seed;
  doc["dispersion_roi_mm"] = c.dispersion_roi_mm;
  doc["dispersion_snr_db"] = c.dispersion_snr_db;
  doc["solver_tol"] = c.solver_tol;
  return doc;
}

json decision_parameters() {
  json doc;
  doc["lambda_rule"] = "lambda = 10^(-snr_db/10) * trace(L L^T) / n_sensors";
  doc["amplitude_rule"] = "a chosen so ||a L_x d|| = sqrt(n_sensors)";
  doc["noise_rule"] =
      "M = a s + 10^(-snr_db/20) N, N ~ iid standard normal; M re-centered";
  doc["rng"] =
      "splitmix64 substreams keyed (seed, source, trial, snr*10); "
      "directions fixed per source across trials and depths";
  doc["localisation_scale"] = "delta_mm_scaled = ||x_true - x_argmax|| / sqrt(3)";
  doc["outlier_metric"] = "delta_mm_scaled vs published (mu + 2 sigma)";
  doc["electrode_model"] = "point electrode at nearest outer-boundary node";
  return doc;
}

void write_manifest(const std::string& path, const ExperimentConfig& config,
                    json extra) {
  json doc;
  doc["software"] = "peelfield";
  doc["version"] = kVersion;
  doc["config"] = config_echo(config);
  doc["decisions"] = decision_parameters();
  for (auto& [key, value] : extra.items()) doc[key] = std::move(value);
  std::vector<std::string> lines = {doc.dump(2)};
  write_text_file(path, lines);
}

// Evenly strided subset of [0, n) with k elements (k <= n), in order.
std::vector<int> strided_subset(int n, int k) {
  std::vector<int> out;
  if (k <= 0 || k >= n) {
    out.resize(n);
    for (int i = 0; i < n; ++i) out[i] = i;
    return out;
  }
  out.reserve(k);
  for (int i = 0; i < k; ++i)
    out.push_back(static_cast<int>((static_cast<long>(i) * n) / k));
  return out;
}

}  // namespace

double median_of(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

StudyReport run_study(const ExperimentConfig& config,
                      const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const ForwardContext ctx = build_forward_context(config);

  StudyReport report;
  report.node_count = ctx.mesh.node_count();
  report.tetra_count = ctx.mesh.tet_count();

  // Shallowest depth hosts the frozen lattice; every other depth filters it.
  const double min_depth =
      *std::min_element(config.peel_depths_mm.begin(),
                        config.peel_depths_mm.end());
  DepthSpace base = build_depth_space(ctx, config, min_depth);

  const double dispersion_snr = config.dispersion_snr_db >= 0.0
                                    ? config.dispersion_snr_db
                                    : *std::max_element(config.snr_db.begin(),
                                                        config.snr_db.end());

  const int n_methods = static_cast<int>(config.methods.size());
  bool first_depth_processed = false;

  for (double depth : config.peel_depths_mm) {
    DepthSpace local;
    const DepthSpace* space = nullptr;
    if (depth == min_depth) {
      space = &base;
    } else if (config.freeze_lattice) {
      local = build_depth_space(ctx, config, depth, &base.sources);
      space = &local;
    } else {
      local = build_depth_space(ctx, config, depth);
      space = &local;
    }
    report.source_counts_per_depth.push_back(space->sources.count());
    report.effective_depths_mm.push_back(space->realized_depth.value_mm);

    const std::vector<int> true_sources =
        strided_subset(space->sources.count(), config.true_source_count);
    const int n_true = static_cast<int>(true_sources.size());

    // Factor per-depth solvers up front; measurements reuse them.
    DipoleScanSolver scan_solver(space->L, config.scan_trunc_rtol);
    std::vector<SloretaSolver> sloreta_solvers;
    const bool wants_sloreta =
        std::count(config.methods.begin(), config.methods.end(), "sloreta") >
        0;
    if (wants_sloreta) {
      sloreta_solvers.reserve(config.snr_db.size());
      for (double snr : config.snr_db)
        sloreta_solvers.emplace_back(
            space->L, config.noiseless ? config.noiseless_lambda_snr_db : snr);
    }

    const int n_snr = static_cast<int>(config.snr_db.size());
    const std::size_t cells =
        static_cast<std::size_t>(n_snr) * config.trials * n_true;
    std::vector<StudyRow> depth_rows(cells * n_methods);
    const bool disp_depth = !first_depth_processed;
    std::vector<DispersionRow> disp_rows;
    std::vector<int> disp_slot_of_cell(cells, -1);
    if (disp_depth) {
      // Dispersion is reported for trial 0 of the dispersion SNR only.
      int slot = 0;
      for (std::size_t cell = 0; cell < cells; ++cell) {
        const int snr_idx = static_cast<int>(cell / (config.trials * n_true));
        const int rem = static_cast<int>(cell % (config.trials * n_true));
        const int trial = rem / n_true;
        if (trial == 0 && config.snr_db[snr_idx] == dispersion_snr) {
          disp_slot_of_cell[cell] = slot;
          slot += n_methods;
        }
      }
      disp_rows.resize(slot);
    }

    parallel_for(cells, [&](std::size_t cell) {
      const int snr_idx = static_cast<int>(cell / (config.trials * n_true));
      const int rem = static_cast<int>(cell % (config.trials * n_true));
      const int trial = rem / n_true;
      const int src_pos = rem % n_true;
      const int src = true_sources[src_pos];
      const int origin = space->source_origin[src];
      const double snr = config.snr_db[snr_idx];

      const Vec3 dir = trial_direction(config.seed, origin);
      RandomStream noise = noise_stream(config.seed, origin, trial, snr);
      const SyntheticTrial synthetic = synthesize_measurement(
          space->L, src, space->sources.positions[src], dir, snr,
          config.noiseless, noise);

      for (int m = 0; m < n_methods; ++m) {
        Reconstruction recon;
        if (config.methods[m] == "sloreta") {
          recon = sloreta_solvers[snr_idx].apply(synthetic.measurement);
        } else {
          recon = scan_solver.apply(synthetic.measurement);
        }
        const LocalisationError err = localisation_error(
            synthetic.position, recon, space->sources);
        StudyRow& row = depth_rows[cell * n_methods + m];
        row.source_id = src;
        row.snr_db = snr;
        row.depth_mm = depth;
        row.method = config.methods[m];
        row.delta_mm_scaled = err.scaled_mm;
        row.delta_mm_raw = err.raw_mm;

        if (disp_depth && disp_slot_of_cell[cell] >= 0) {
          const Dispersion sd = spatial_dispersion(
              recon, space->sources, src, config.dispersion_roi_mm);
          DispersionRow& drow = disp_rows[disp_slot_of_cell[cell] + m];
          drow.source_id = src;
          drow.method = config.methods[m];
          drow.sd_mm = sd.sd_mm;
        }
      }
    });

    report.rows.insert(report.rows.end(), depth_rows.begin(),
                       depth_rows.end());
    if (disp_depth)
      report.dispersion.insert(report.dispersion.end(), disp_rows.begin(),
                               disp_rows.end());

    // Summaries keyed (method, snr, depth), in sweep order.
    for (int m = 0; m < n_methods; ++m) {
      for (int snr_idx = 0; snr_idx < n_snr; ++snr_idx) {
        std::vector<double> deltas;
        deltas.reserve(static_cast<std::size_t>(config.trials) * n_true);
        for (std::size_t cell = 0; cell < cells; ++cell) {
          if (static_cast<int>(cell / (config.trials * n_true)) != snr_idx)
            continue;
          deltas.push_back(depth_rows[cell * n_methods + m].delta_mm_scaled);
        }
        const SampleStats stats = sample_stats(deltas);
        StudySummaryRow srow;
        srow.method = config.methods[m];
        srow.snr_db = config.snr_db[snr_idx];
        srow.depth_mm = depth;
        srow.mean_mm = stats.mean;
        srow.stddev_mm = stats.stddev;
        srow.count = stats.count;
        try {
          const OutlierReference ref = cuffin_reference(config.snr_db[snr_idx]);
          srow.outliers = outlier_count(deltas, ref.mu_mm, ref.sigma_mm);
        } catch (const ConfigError&) {
          srow.outliers = -1;  // SNR not in the published table
        }
        report.summary.push_back(srow);
      }
    }
    first_depth_processed = true;
  }

  // --- emit CSVs ---
  std::vector<std::string> lines;
  lines.reserve(report.rows.size() + 1);
  lines.push_back("source_id,snr_db,depth_mm,method,delta_mm_scaled,delta_mm_raw");
  for (const StudyRow& r : report.rows) {
    lines.push_back(std::to_string(r.source_id) + "," +
                    format_double(r.snr_db) + "," + format_double(r.depth_mm) +
                    "," + r.method + "," + format_double(r.delta_mm_scaled) +
                    "," + format_double(r.delta_mm_raw));
  }
  write_text_file(out_dir + "/localisation.csv", lines);

  lines.clear();
  lines.push_back("method,snr_db,depth_mm,mean_mm,stddev_mm,outliers,count");
  for (const StudySummaryRow& r : report.summary) {
    lines.push_back(r.method + "," + format_double(r.snr_db) + "," +
                    format_double(r.depth_mm) + "," + format_double(r.mean_mm) +
                    "," + format_double(r.stddev_mm) + "," +
                    std::to_string(r.outliers) + "," +
                    std::to_string(r.count));
  }
  write_text_file(out_dir + "/summary.csv", lines);

  lines.clear();
  lines.push_back("source_id,method,sd_mm");
  for (const DispersionRow& r : report.dispersion) {
    lines.push_back(std::to_string(r.source_id) + "," + r.method + "," +
                    format_double(r.sd_mm));
  }
  write_text_file(out_dir + "/dispersion.csv", lines);

  json extra;
  extra["node_count"] = report.node_count;
  extra["tetra_count"] = report.tetra_count;
  extra["source_counts_per_depth"] = report.source_counts_per_depth;
  extra["effective_depths_mm"] = report.effective_depths_mm;
  extra["dispersion_snr_db_used"] = dispersion_snr;
  write_manifest(out_dir + "/manifest.json", config, std::move(extra));
  return report;
}

CompareReport compare_forward(const ExperimentConfig& config,
                              const std::string& out_dir) {
  if (!config.uses_sphere())
    throw ConfigError("analytic comparison requires shell spec");
  std::filesystem::create_directories(out_dir);
  const ForwardContext ctx = build_forward_context(config);

  // All elements of the active compartments, unpeeled: the comparison probes
  // forward accuracy at high eccentricities that peeling would exclude.
  std::vector<int> kept;
  for (int t = 0; t < ctx.mesh.tet_count(); ++t) {
    if (std::count(config.active_compartments.begin(),
                   config.active_compartments.end(), ctx.mesh.labels[t]))
      kept.push_back(t);
  }
  if (kept.empty()) throw ConfigError("no tetra in compartments");

  std::vector<double> ladder = config.compare_eccentricities;
  if (ladder.empty())
    ladder = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.85, 0.9, 0.95, 0.985};

  const double r_inner = config.shells.radii_mm.front();
  const std::vector<Vec3> directions =
      fibonacci_montage(1.0, config.compare_directions_per_ecc);

  CompareReport report;
  SourceSpace sources;
  const TetLocator locator(ctx.mesh, kept);
  for (double ecc : ladder) {
    for (const Vec3& u : directions) {
      const Vec3 pos = ecc * r_inner * u;
      const int host = locator.locate(pos);
      if (host < 0) {
        ++report.skipped_positions;
        continue;
      }
      sources.positions.push_back(pos);
      sources.host_tetra.push_back(host);
    }
  }
  if (sources.count() == 0)
    throw ConfigError("no comparison source lies inside the active region");

  const std::vector<HdivDipole> dipoles =
      enumerate_hdiv_dipoles(ctx.mesh, kept);
  const InterpolationMatrix D =
      build_interpolation_pbo(dipoles, sources, ctx.mesh);
  const LeadField L_n = compose_leadfield(ctx.transfer, D);

  // The analytic model is evaluated at the positions the numerical model
  // actually uses: the boundary nodes each sensor attached to (these sit
  // exactly on the outer radius after snapping).
  SensorArray analytic_sensors = ctx.sensors;
  for (int s = 0; s < analytic_sensors.count(); ++s)
    analytic_sensors.positions[s] =
        ctx.mesh.nodes[ctx.sensors.attached_nodes[s]];
  const LeadField L_a =
      analytic_sphere_leadfield(config.shells, analytic_sensors, sources);

  ForwardComparison comparison;
  if (config.compare_mode == "block") {
    comparison = config.compare_self ? rdm_mag(L_a, L_a) : rdm_mag(L_n, L_a);
  } else {
    std::vector<Eigen::Vector3d> dirs(sources.count());
    for (int i = 0; i < sources.count(); ++i) {
      if (config.compare_mode == "radial") {
        dirs[i] = sources.positions[i].normalized();
      } else {
        RandomStream rng(config.seed, static_cast<std::uint64_t>(i),
                         0x636f6d70ULL, 2);
        double d[3];
        rng.next_direction(d);
        dirs[i] = Eigen::Vector3d(d[0], d[1], d[2]);
      }
    }
    comparison = config.compare_self ? rdm_mag_directed(L_a, L_a, dirs)
                                     : rdm_mag_directed(L_n, L_a, dirs);
  }

  report.rows.reserve(sources.count());
  for (int i = 0; i < sources.count(); ++i) {
    CompareRow row;
    row.source_id = i;
    row.eccentricity = sources.positions[i].norm() / r_inner;
    row.rdm = comparison.rdm[i];
    row.mag = comparison.mag[i];
    report.rows.push_back(row);
  }

  // Fixed eccentricity bins; the last one is the beyond-0.98 band.
  const std::vector<double> edges = {0.0,  0.2,  0.4,  0.6, 0.8,
                                     0.9,  0.95, 0.98, 1.0};
  for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
    CompareBin bin;
    bin.ecc_lo = edges[b];
    bin.ecc_hi = edges[b + 1];
    std::vector<double> rdms, mags;
    for (const CompareRow& row : report.rows) {
      if (row.eccentricity > bin.ecc_lo && row.eccentricity <= bin.ecc_hi) {
        rdms.push_back(row.rdm);
        mags.push_back(row.mag);
      }
    }
    bin.count = static_cast<int>(rdms.size());
    bin.median_rdm = median_of(std::move(rdms));
    bin.median_mag = median_of(std::move(mags));
    report.bins.push_back(bin);
  }

  {
    std::vector<double> rdms, mags;
    for (const CompareRow& row : report.rows) {
      rdms.push_back(row.rdm);
      mags.push_back(row.mag);
    }
    report.median_rdm = median_of(std::move(rdms));
    report.median_mag = median_of(std::move(mags));
  }

  std::vector<std::string> lines;
  lines.push_back("source_id,eccentricity,rdm,mag");
  for (const CompareRow& row : report.rows) {
    lines.push_back(std::to_string(row.source_id) + "," +
                    format_double(row.eccentricity) + "," +
                    format_double(row.rdm) + "," + format_double(row.mag));
  }
  write_text_file(out_dir + "/rdm_mag.csv", lines);

  lines.clear();
  lines.push_back("ecc_lo,ecc_hi,count,median_rdm,median_mag");
  for (const CompareBin& bin : report.bins) {
    lines.push_back(format_double(bin.ecc_lo) + "," +
                    format_double(bin.ecc_hi) + "," +
                    std::to_string(bin.count) + "," +
                    format_double(bin.median_rdm) + "," +
                    format_double(bin.median_mag));
  }
  write_text_file(out_dir + "/rdm_mag_bins.csv", lines);

  json extra;
  extra["compare_mode"] = config.compare_mode;
  extra["compare_self"] = config.compare_self;
  extra["eccentricity_ladder"] = ladder;
  extra["median_rdm"] = report.median_rdm;
  extra["median_mag"] = report.median_mag;
  extra["source_count"] = sources.count();
  extra["skipped_positions"] = report.skipped_positions;
  extra["node_count"] = ctx.mesh.node_count();
  extra["tetra_count"] = ctx.mesh.tet_count();
  write_manifest(out_dir + "/compare_manifest.json", config, std::move(extra));
  return report;
}

}  // namespace peelfield
