#include <cstdio>
#include <exception>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "peelfield/errors.hpp"
#include "peelfield/experiment.hpp"
#include "peelfield/io.hpp"
#include "peelfield/mesh.hpp"
#include "peelfield/metrics.hpp"
#include "peelfield/peel.hpp"
#include "peelfield/sphere.hpp"
#include "peelfield/study.hpp"
#include "peelfield/version.hpp"

namespace {

using namespace peelfield;

int cmd_mesh_sphere(const std::vector<double>& radii,
                    const std::vector<double>& conductivities, double edge_mm,
                    const std::vector<int>& refine_labels, int refine_rounds,
                    const std::string& out) {
  ShellSpec spec;
  spec.radii_mm = radii;
  spec.conductivities = conductivities;
  spec.validate();
  TetrahedralMesh mesh = generate_sphere_mesh(spec, edge_mm);
  if (!refine_labels.empty() && refine_rounds > 0) {
    const std::set<int> labels(refine_labels.begin(), refine_labels.end());
    mesh = refine_compartments(mesh, labels, refine_rounds);
  }
  save_mesh(mesh, out);
  std::printf("wrote %s: %d nodes, %d tetra\n", out.c_str(),
              mesh.node_count(), mesh.tet_count());
  return 0;
}

int cmd_refine(const std::string& mesh_path,
               const std::vector<int>& refine_labels, int rounds,
               const std::string& out) {
  TetrahedralMesh mesh = load_mesh(mesh_path);
  const std::set<int> labels(refine_labels.begin(), refine_labels.end());
  mesh = refine_compartments(mesh, labels, rounds);
  save_mesh(mesh, out);
  std::printf("wrote %s: %d nodes, %d tetra\n", out.c_str(),
              mesh.node_count(), mesh.tet_count());
  return 0;
}

int cmd_peel(const std::string& mesh_path,
             const std::vector<int>& compartments, double depth_mm,
             const std::string& out) {
  const TetrahedralMesh mesh = load_mesh(mesh_path);
  PeelConfig config;
  config.depth_mm = depth_mm;
  config.active_compartments.insert(compartments.begin(), compartments.end());
  const PeelResult result = peel(mesh, config);
  const EffectiveDepth realized = effective_depth(mesh, result);
  save_peel_json(out, result, depth_mm, realized.value_mm);
  std::printf("wrote %s: kept %zu, removed %zu (effective depth %.3f mm)\n",
              out.c_str(), result.kept_tetra.size(),
              result.removed_tetra.size(), realized.value_mm);
  return 0;
}

int cmd_leadfield(const std::string& mesh_path, const std::string& sensor_path,
                  const std::vector<int>& compartments, double depth_mm,
                  int source_count, double tol, const std::string& out,
                  const std::string& sources_out, const std::string& dmat_out) {
  ExperimentConfig config;
  config.mesh_file = mesh_path;
  config.sensor_file = sensor_path;
  config.active_compartments = compartments;
  config.peel_depths_mm = {depth_mm};
  config.source_count = source_count;
  config.solver_tol = tol;
  config.validate();

  const ForwardContext ctx = build_forward_context(config);
  const DepthSpace space = build_depth_space(ctx, config, depth_mm);
  save_leadfield(out, space.L.L);
  if (!sources_out.empty()) save_source_space_json(sources_out, space.sources);
  if (!dmat_out.empty()) save_dmat(dmat_out, space.D);
  std::printf("wrote %s: %d sensors x %d sources\n", out.c_str(),
              space.L.sensor_count(), space.L.source_count());
  return 0;
}

int cmd_study(const std::string& config_path, const std::string& out_dir) {
  const ConfigMap cfg = ConfigMap::parse_file(config_path);
  const ExperimentConfig config = ExperimentConfig::from_config(cfg);
  const StudyReport report = run_study(config, out_dir);
  std::printf("study complete: %zu trial rows, %zu summary rows -> %s\n",
              report.rows.size(), report.summary.size(), out_dir.c_str());
  return 0;
}

int cmd_analytic_compare(const std::string& config_path,
                         const std::string& out_dir) {
  const ConfigMap cfg = ConfigMap::parse_file(config_path);
  const ExperimentConfig config = ExperimentConfig::from_config(cfg);
  const CompareReport report = compare_forward(config, out_dir);
  std::printf(
      "comparison complete: %zu sources, median RDM %.4f, median MAG %.4f\n",
      report.rows.size(), report.median_rdm, report.median_mag);
  return 0;
}

// Independent statistics pass over an emitted per-trial CSV; lets the
// summary table be audited without rerunning the study.
int cmd_stats(const std::string& csv_path, const std::string& out) {
  const std::string text = read_text_file(csv_path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) ||
      line != "source_id,snr_db,depth_mm,method,delta_mm_scaled,delta_mm_raw")
    throw ConfigError("unexpected CSV header in " + csv_path);

  struct Key {
    std::string method;
    double snr, depth;
    bool operator<(const Key& o) const {
      if (method != o.method) return method < o.method;
      if (snr != o.snr) return snr < o.snr;
      return depth < o.depth;
    }
  };
  std::map<Key, std::vector<double>> groups;
  std::vector<Key> order;  // first-seen order, mirroring the study's emission
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string::size_type start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (fields.size() != 6)
      throw ConfigError("malformed CSV row in " + csv_path);
    Key key{fields[3], std::stod(fields[1]), std::stod(fields[2])};
    auto it = groups.find(key);
    if (it == groups.end()) {
      order.push_back(key);
      it = groups.emplace(key, std::vector<double>()).first;
    }
    it->second.push_back(std::stod(fields[4]));
  }

  std::vector<std::string> lines;
  lines.push_back("method,snr_db,depth_mm,mean_mm,stddev_mm,outliers,count");
  for (const Key& key : order) {
    const SampleStats stats = sample_stats(groups[key]);
    int outliers = -1;
    try {
      const OutlierReference ref = cuffin_reference(key.snr);
      outliers = outlier_count(groups[key], ref.mu_mm, ref.sigma_mm);
    } catch (const ConfigError&) {
    }
    lines.push_back(key.method + "," + format_double(key.snr) + "," +
                    format_double(key.depth) + "," +
                    format_double(stats.mean) + "," +
                    format_double(stats.stddev) + "," +
                    std::to_string(outliers) + "," +
                    std::to_string(stats.count));
  }
  if (out.empty()) {
    for (const std::string& l : lines) std::printf("%s\n", l.c_str());
  } else {
    write_text_file(out, lines);
    std::printf("wrote %s: %zu groups\n", out.c_str(), lines.size() - 1);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tetrahedral-FEM EEG forward/inverse laboratory"};
  app.set_version_flag("--version", std::string("peelfield ") + kVersion);
  app.require_subcommand(1);

  // mesh-sphere
  std::vector<double> radii, conductivities;
  double edge_mm = 8.0;
  std::vector<int> refine_labels;
  int refine_rounds = 1;
  std::string out_path, mesh_path, sensor_path, config_path, out_dir;
  auto* mesh_sphere =
      app.add_subcommand("mesh-sphere", "Generate a multi-shell sphere mesh");
  mesh_sphere->add_option("--radii", radii, "Shell radii, mm, innermost first")
      ->required()
      ->delimiter(',');
  mesh_sphere
      ->add_option("--conductivities", conductivities, "Shell conductivities, S/m")
      ->required()
      ->delimiter(',');
  mesh_sphere->add_option("--edge-mm", edge_mm, "Target edge length, mm")
      ->required();
  mesh_sphere->add_option("--refine-compartments", refine_labels,
                          "Labels to refine once generated")
      ->delimiter(',');
  mesh_sphere->add_option("--refine-rounds", refine_rounds,
                          "Refinement rounds for those labels");
  mesh_sphere->add_option("--out", out_path, "Output mesh path")->required();

  // refine
  auto* refine = app.add_subcommand(
      "refine", "Red/green refine the selected compartments of a mesh");
  int rounds = 1;
  refine->add_option("--mesh", mesh_path, "Input mesh")->required();
  refine->add_option("--compartments", refine_labels, "Labels to refine")
      ->required()
      ->delimiter(',');
  refine->add_option("--rounds", rounds, "Refinement rounds");
  refine->add_option("--out", out_path, "Output mesh path")->required();

  // peel
  auto* peel_cmd = app.add_subcommand(
      "peel", "Remove source positions too close to compartment boundaries");
  std::vector<int> compartments;
  double depth_mm = 0.0;
  peel_cmd->add_option("--mesh", mesh_path, "Input mesh")->required();
  peel_cmd->add_option("--compartments", compartments, "Active labels")
      ->required()
      ->delimiter(',');
  peel_cmd->add_option("--depth-mm", depth_mm, "Peeling depth, mm")
      ->required();
  peel_cmd->add_option("--out", out_path, "Output JSON path")->required();

  // leadfield
  auto* leadfield = app.add_subcommand(
      "leadfield", "Assemble, solve, and compose the lead field for a mesh");
  int source_count = 500;
  double tol = 1e-9;
  std::string sources_out, dmat_out;
  leadfield->add_option("--mesh", mesh_path, "Input mesh")->required();
  leadfield->add_option("--sensors", sensor_path, "Sensor file")->required();
  leadfield->add_option("--compartments", compartments, "Active labels")
      ->required()
      ->delimiter(',');
  leadfield->add_option("--depth-mm", depth_mm, "Peeling depth, mm");
  leadfield->add_option("--sources", source_count, "Target source count");
  leadfield->add_option("--tol", tol, "Solver relative tolerance");
  leadfield->add_option("--out", out_path, "Output lead-field binary")
      ->required();
  leadfield->add_option("--save-sources", sources_out,
                        "Also write the source space JSON here");
  leadfield->add_option("--save-dmat", dmat_out,
                        "Also write the interpolation matrix here");

  // study
  auto* study = app.add_subcommand(
      "study", "Run the localisation study described by a config file");
  study->add_option("--config", config_path, "Config file")->required();
  study->add_option("--out", out_dir, "Output directory")->required();

  // analytic-compare
  auto* compare = app.add_subcommand(
      "analytic-compare",
      "Compare the numerical lead field against the analytic sphere model");
  compare->add_option("--config", config_path, "Config file")->required();
  compare->add_option("--out", out_dir, "Output directory")->required();

  // stats
  auto* stats = app.add_subcommand(
      "stats", "Recompute summary statistics from a localisation CSV");
  std::string csv_path, stats_out;
  stats->add_option("--csv", csv_path, "localisation.csv path")->required();
  stats->add_option("--out", stats_out, "Output CSV (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (mesh_sphere->parsed())
      return cmd_mesh_sphere(radii, conductivities, edge_mm, refine_labels,
                             refine_rounds, out_path);
    if (refine->parsed())
      return cmd_refine(mesh_path, refine_labels, rounds, out_path);
    if (peel_cmd->parsed())
      return cmd_peel(mesh_path, compartments, depth_mm, out_path);
    if (leadfield->parsed())
      return cmd_leadfield(mesh_path, sensor_path, compartments, depth_mm,
                           source_count, tol, out_path, sources_out, dmat_out);
    if (study->parsed()) return cmd_study(config_path, out_dir);
    if (compare->parsed()) return cmd_analytic_compare(config_path, out_dir);
    if (stats->parsed()) return cmd_stats(csv_path, stats_out);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
