// Python bindings for the main pipeline: mesh generation, peeling, source
// placement, lead-field construction, the analytic reference, inverse
// solvers, and the two config-driven experiment drivers.  Heavy calls drop
// the GIL while the C++ side runs.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <array>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "peelfield/analytic.hpp"
#include "peelfield/errors.hpp"
#include "peelfield/experiment.hpp"
#include "peelfield/fem.hpp"
#include "peelfield/inverse.hpp"
#include "peelfield/io.hpp"
#include "peelfield/mesh.hpp"
#include "peelfield/metrics.hpp"
#include "peelfield/peel.hpp"
#include "peelfield/sources.hpp"
#include "peelfield/sphere.hpp"
#include "peelfield/study.hpp"

namespace py = pybind11;
using namespace peelfield;

namespace {

std::vector<Vec3> to_point_list(const Eigen::MatrixXd& m) {
  if (m.cols() != 3)
    throw ConfigError("expected an N x 3 array of points");
  std::vector<Vec3> out(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[i] = m.row(i).transpose();
  return out;
}

Eigen::MatrixXd to_matrix(const std::vector<Vec3>& points) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(points.size()), 3);
  for (std::size_t i = 0; i < points.size(); ++i)
    m.row(static_cast<Eigen::Index>(i)) = points[i].transpose();
  return m;
}

ShellSpec make_shell_spec(const std::vector<double>& radii,
                          const std::vector<double>& conductivities) {
  ShellSpec spec;
  spec.radii_mm = radii;
  spec.conductivities = conductivities;
  spec.validate();
  return spec;
}

// Sequentially labeled array attached to the nearest outer-boundary nodes;
// the Python surface takes bare positions.
SensorArray make_sensor_array(const TetrahedralMesh& mesh,
                              const Eigen::MatrixXd& positions) {
  std::vector<std::string> labels(positions.rows());
  for (Eigen::Index i = 0; i < positions.rows(); ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "E%03d", static_cast<int>(i));
    labels[i] = buf;
  }
  return SensorArray::attach(mesh, labels, to_point_list(positions));
}

py::dict recon_to_dict(const Reconstruction& r) {
  py::dict d;
  d["method"] = r.method;
  d["parameter"] = r.parameter;
  d["scores"] = r.scores;
  d["argmax"] = r.argmax;
  d["moments"] = to_matrix(r.moments);
  return d;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  const ConfigMap cfg = ConfigMap::parse_file(path);
  return ExperimentConfig::from_config(cfg);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() =
      "Tetrahedral finite-element EEG forward and inverse laboratory: "
      "multi-shell sphere meshes, source-space peeling, transfer-matrix "
      "lead fields, analytic validation, and localisation studies.";
  m.attr("__version__") = PEELFIELD_VERSION_STRING;

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError",
                                         PyExc_RuntimeError);

  py::class_<TetrahedralMesh>(m, "Mesh",
                              "Conforming tetrahedral mesh with per-element "
                              "compartment labels and conductivities.")
      .def(py::init([](const Eigen::MatrixXd& nodes,
                       const Eigen::MatrixXi& tetra,
                       const std::vector<int>& labels,
                       const std::map<int, double>& conductivities) {
             if (tetra.cols() != 4)
               throw ConfigError("expected a T x 4 array of tetrahedra");
             std::vector<std::array<int, 4>> tets(tetra.rows());
             for (Eigen::Index t = 0; t < tetra.rows(); ++t)
               for (int v = 0; v < 4; ++v) tets[t][v] = tetra(t, v);
             return TetrahedralMesh(to_point_list(nodes), std::move(tets),
                                    labels, conductivities);
           }),
           py::arg("nodes"), py::arg("tetra"), py::arg("labels"),
           py::arg("conductivities"))
      .def_property_readonly(
          "nodes",
          [](const TetrahedralMesh& mesh) { return to_matrix(mesh.nodes); },
          "Node positions, N x 3, mm.")
      .def_property_readonly(
          "tetra",
          [](const TetrahedralMesh& mesh) {
            Eigen::MatrixXi t(mesh.tet_count(), 4);
            for (int i = 0; i < mesh.tet_count(); ++i)
              for (int v = 0; v < 4; ++v) t(i, v) = mesh.tetra[i][v];
            return t;
          },
          "Element vertex indices, T x 4.")
      .def_property_readonly(
          "labels",
          [](const TetrahedralMesh& mesh) { return mesh.labels; },
          "Compartment label per element.")
      .def_property_readonly(
          "conductivities",
          [](const TetrahedralMesh& mesh) { return mesh.conductivities; },
          "label -> sigma in S/m.")
      .def_property_readonly("node_count", &TetrahedralMesh::node_count)
      .def_property_readonly("tet_count", &TetrahedralMesh::tet_count)
      .def("total_volume", &TetrahedralMesh::total_volume)
      .def("label_volume", &TetrahedralMesh::label_volume, py::arg("label"))
      .def("median_edge_length", &TetrahedralMesh::median_edge_length)
      .def("__repr__", [](const TetrahedralMesh& mesh) {
        char buf[80];
        std::snprintf(buf, sizeof(buf), "Mesh(nodes=%d, tetra=%d)",
                      mesh.node_count(), mesh.tet_count());
        return std::string(buf);
      });

  py::class_<PeelResult>(m, "PeelResult",
                         "Partition of the active compartment into source-"
                         "hosting and peeled-away elements.")
      .def_readonly("kept_tetra", &PeelResult::kept_tetra)
      .def_readonly("removed_tetra", &PeelResult::removed_tetra)
      .def_readonly("surface_nodes", &PeelResult::surface_nodes)
      .def("__repr__", [](const PeelResult& r) {
        char buf[80];
        std::snprintf(buf, sizeof(buf), "PeelResult(kept=%zu, removed=%zu)",
                      r.kept_tetra.size(), r.removed_tetra.size());
        return std::string(buf);
      });

  py::class_<SourceSpace>(m, "SourceSpace",
                          "Dipole positions with their host elements.")
      .def_property_readonly(
          "positions",
          [](const SourceSpace& s) { return to_matrix(s.positions); },
          "Source positions, N x 3, mm.")
      .def_readonly("host_tetra", &SourceSpace::host_tetra)
      .def_property_readonly("count", &SourceSpace::count)
      .def("__repr__", [](const SourceSpace& s) {
        char buf[48];
        std::snprintf(buf, sizeof(buf), "SourceSpace(count=%d)", s.count());
        return std::string(buf);
      });

  m.def(
      "generate_sphere_mesh",
      [](const std::vector<double>& radii,
         const std::vector<double>& conductivities, double edge_mm) {
        const ShellSpec spec = make_shell_spec(radii, conductivities);
        py::gil_scoped_release release;
        return generate_sphere_mesh(spec, edge_mm);
      },
      py::arg("radii_mm"), py::arg("conductivities"), py::arg("edge_mm"),
      "Body-centered-cubic tetrahedral mesh of concentric shells "
      "(innermost first), with shell interfaces snapped to spheres.");

  m.def(
      "refine_compartments",
      [](const TetrahedralMesh& mesh, const std::set<int>& labels) {
        py::gil_scoped_release release;
        return refine_compartments(mesh, labels);
      },
      py::arg("mesh"), py::arg("labels"),
      "Uniform 1:8 refinement of the selected compartments with a "
      "conforming transition layer.");

  m.def("load_mesh", &load_mesh, py::arg("path"));
  m.def("save_mesh", &save_mesh, py::arg("mesh"), py::arg("path"));

  m.def(
      "fibonacci_montage",
      [](double radius_mm, int n) {
        return to_matrix(fibonacci_montage(radius_mm, n));
      },
      py::arg("radius_mm"), py::arg("n"),
      "Near-uniform montage of n sensor positions on a sphere.");

  m.def(
      "peel",
      [](const TetrahedralMesh& mesh, double depth_mm,
         const std::set<int>& active_compartments) {
        PeelConfig config;
        config.depth_mm = depth_mm;
        config.active_compartments = active_compartments;
        py::gil_scoped_release release;
        return peel(mesh, config);
      },
      py::arg("mesh"), py::arg("depth_mm"), py::arg("active_compartments"),
      "Source-position peeling: keep the active-compartment elements whose "
      "nodes all lie at least depth_mm inside the active surface.");

  m.def(
      "effective_depth",
      [](const TetrahedralMesh& mesh, const PeelResult& result) {
        const EffectiveDepth d = effective_depth(mesh, result);
        return d.empty ? std::numeric_limits<double>::infinity() : d.value_mm;
      },
      py::arg("mesh"), py::arg("peel_result"),
      "Realized standoff of the kept elements from the active surface "
      "(inf when nothing survived).");

  m.def(
      "place_sources",
      [](const TetrahedralMesh& mesh, const PeelResult& result,
         int target_count) {
        py::gil_scoped_release release;
        return place_sources(mesh, result, target_count);
      },
      py::arg("mesh"), py::arg("peel_result"), py::arg("target_count"),
      "Cubic-lattice source positions inside the kept elements, spacing "
      "bisected toward the target count.");

  m.def(
      "compute_leadfield",
      [](const TetrahedralMesh& mesh, const Eigen::MatrixXd& sensor_positions,
         const PeelResult& peel_result, const SourceSpace& sources,
         double tol) {
        SensorArray sensors = make_sensor_array(mesh, sensor_positions);
        Eigen::MatrixXd L;
        {
          py::gil_scoped_release release;
          const SystemMatrix system = assemble_system(mesh);
          TransferOptions options;
          options.tol = tol;
          const TransferMatrix T = compute_transfer(system, sensors, options);
          const std::vector<HdivDipole> dipoles =
              enumerate_hdiv_dipoles(mesh, peel_result.kept_tetra);
          const InterpolationMatrix D =
              build_interpolation_pbo(dipoles, sources, mesh);
          L = compose_leadfield(T, D).L;
        }
        return L;
      },
      py::arg("mesh"), py::arg("sensor_positions"), py::arg("peel_result"),
      py::arg("sources"), py::arg("tol") = 1e-9,
      "Full forward pipeline: attach sensors, assemble, solve the transfer "
      "system, and interpolate mixed-element dipoles onto the sources.  "
      "Returns sensors x (3 * n_sources), Cartesian triplet columns, each "
      "mean-free over sensors.");

  m.def(
      "analytic_leadfield",
      [](const std::vector<double>& radii,
         const std::vector<double>& conductivities,
         const Eigen::MatrixXd& sensor_positions,
         const Eigen::MatrixXd& source_positions) {
        const ShellSpec spec = make_shell_spec(radii, conductivities);
        if (spec.shell_count() != 3)
          throw ConfigError("Ary model requires 3 shells");
        SensorArray sensors;
        sensors.positions = to_point_list(sensor_positions);
        sensors.labels.resize(sensors.positions.size());
        sensors.attached_nodes.resize(sensors.positions.size());
        for (std::size_t i = 0; i < sensors.positions.size(); ++i) {
          char buf[16];
          std::snprintf(buf, sizeof(buf), "E%03d", static_cast<int>(i));
          sensors.labels[i] = buf;
          sensors.attached_nodes[i] = static_cast<int>(i);
        }
        SourceSpace space;
        space.positions = to_point_list(source_positions);
        space.host_tetra.assign(space.positions.size(), -1);
        Eigen::MatrixXd L;
        {
          py::gil_scoped_release release;
          L = analytic_sphere_leadfield(spec, sensors, space).L;
        }
        return L;
      },
      py::arg("radii_mm"), py::arg("conductivities"),
      py::arg("sensor_positions"), py::arg("source_positions"),
      "Closed-form 3-shell sphere lead field (Legendre series), same layout "
      "and mean-free convention as compute_leadfield.");

  m.def(
      "analytic_potential",
      [](const std::vector<double>& radii,
         const std::vector<double>& conductivities, const Vec3& source,
         const Vec3& moment, const Vec3& sensor) {
        const AnalyticSphereModel model(
            make_shell_spec(radii, conductivities));
        return model.potential(source, moment, sensor);
      },
      py::arg("radii_mm"), py::arg("conductivities"), py::arg("source"),
      py::arg("moment"), py::arg("sensor"),
      "Surface potential of one dipole in the concentric-shell model.");

  m.def(
      "rdm_mag",
      [](const Eigen::MatrixXd& numerical, const Eigen::MatrixXd& analytic) {
        if (numerical.rows() != analytic.rows() ||
            numerical.cols() != analytic.cols())
          throw ConfigError("lead fields differ in shape");
        LeadField a{numerical}, b{analytic};
        const ForwardComparison cmp = rdm_mag(a, b);
        return py::make_tuple(cmp.rdm, cmp.mag);
      },
      py::arg("numerical"), py::arg("analytic"),
      "Per-source shape error (RDM) and magnitude error (MAG) between two "
      "lead fields of identical layout.");

  m.def(
      "sloreta",
      [](const Eigen::MatrixXd& L, const Eigen::VectorXd& measurement,
         double snr_db) {
        Measurement M;
        M.values = measurement;
        M.center();
        Reconstruction recon;
        {
          py::gil_scoped_release release;
          recon = sloreta(LeadField{L}, M, snr_db);
        }
        return recon_to_dict(recon);
      },
      py::arg("leadfield"), py::arg("measurement"), py::arg("snr_db"),
      "Standardized low-resolution tomography with SNR-scaled Tikhonov "
      "regularization; the measurement is mean-centered internally.");

  m.def(
      "dipole_scan",
      [](const Eigen::MatrixXd& L, const Eigen::VectorXd& measurement,
         double trunc_rtol) {
        Measurement M;
        M.values = measurement;
        M.center();
        Reconstruction recon;
        {
          py::gil_scoped_release release;
          recon = dipole_scan(LeadField{L}, M, trunc_rtol);
        }
        return recon_to_dict(recon);
      },
      py::arg("leadfield"), py::arg("measurement"),
      py::arg("trunc_rtol") = 1e-6,
      "Per-position truncated-SVD goodness-of-fit scan; the measurement is "
      "mean-centered internally.");

  m.def("save_leadfield", &save_leadfield, py::arg("path"),
        py::arg("leadfield"));
  m.def("load_leadfield", &load_leadfield, py::arg("path"));

  m.def(
      "run_study",
      [](const std::string& config_path, const std::string& out_dir) {
        const ExperimentConfig config = load_experiment_config(config_path);
        StudyReport report;
        {
          py::gil_scoped_release release;
          report = run_study(config, out_dir);
        }
        py::list summary;
        for (const StudySummaryRow& row : report.summary) {
          py::dict d;
          d["method"] = row.method;
          d["snr_db"] = row.snr_db;
          d["depth_mm"] = row.depth_mm;
          d["mean_mm"] = row.mean_mm;
          d["stddev_mm"] = row.stddev_mm;
          d["outliers"] = row.outliers;
          d["count"] = row.count;
          summary.append(d);
        }
        py::dict out;
        out["summary"] = summary;
        out["source_counts_per_depth"] = report.source_counts_per_depth;
        out["effective_depths_mm"] = report.effective_depths_mm;
        out["node_count"] = report.node_count;
        out["tetra_count"] = report.tetra_count;
        return out;
      },
      py::arg("config_path"), py::arg("out_dir"),
      "Run the localisation-error study described by a config file; writes "
      "localisation.csv, summary.csv, dispersion.csv and manifest.json into "
      "out_dir and returns the summary rows.");

  m.def(
      "compare_forward",
      [](const std::string& config_path, const std::string& out_dir) {
        const ExperimentConfig config = load_experiment_config(config_path);
        CompareReport report;
        {
          py::gil_scoped_release release;
          report = compare_forward(config, out_dir);
        }
        py::list bins;
        for (const CompareBin& bin : report.bins) {
          py::dict d;
          d["ecc_lo"] = bin.ecc_lo;
          d["ecc_hi"] = bin.ecc_hi;
          d["count"] = bin.count;
          d["median_rdm"] = bin.median_rdm;
          d["median_mag"] = bin.median_mag;
          bins.append(d);
        }
        py::dict out;
        out["median_rdm"] = report.median_rdm;
        out["median_mag"] = report.median_mag;
        out["skipped_positions"] = report.skipped_positions;
        out["bins"] = bins;
        return out;
      },
      py::arg("config_path"), py::arg("out_dir"),
      "Numerical-vs-analytic forward comparison on a generated 3-shell "
      "sphere; writes rdm_mag.csv, rdm_mag_bins.csv and "
      "compare_manifest.json into out_dir and returns the medians.");
}
