#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <nlohmann/json.hpp>

#include "peelfield/errors.hpp"
#include "peelfield/io.hpp"
#include "peelfield/peel.hpp"
#include "support.hpp"

using namespace peelfield;

TEST_CASE("lead-field binary round-trips bit-exactly") {
  RandomSequence seq(1);
  Eigen::MatrixXd L(5, 9);
  for (int r = 0; r < L.rows(); ++r)
    for (int c = 0; c < L.cols(); ++c) L(r, c) = seq.range(-1e3, 1e3);
  L(2, 3) = 0.1;  // not exactly representable; binary keeps every bit
  L(4, 0) = -1e-17;

  const std::string path = temp_path("lfld");
  save_leadfield(path, L);
  const Eigen::MatrixXd back = load_leadfield(path);
  REQUIRE(back.rows() == L.rows());
  REQUIRE(back.cols() == L.cols());
  CHECK((back - L).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("lead-field binary rejects damaged files") {
  const std::string bad = temp_path("lfld_bad");
  write_file(bad, "MEAD????????????????");
  CHECK_THROWS_AS(load_leadfield(bad), ConfigError);

  // valid header claiming more data than the file holds
  Eigen::MatrixXd L = Eigen::MatrixXd::Ones(4, 4);
  const std::string cut = temp_path("lfld_cut");
  save_leadfield(cut, L);
  const std::string all = read_text_file(cut);
  write_file(cut, all.substr(0, all.size() - 8));
  CHECK_THROWS_AS(load_leadfield(cut), ConfigError);

  CHECK_THROWS_AS(load_leadfield(temp_path("lfld_missing")), ConfigError);
}

TEST_CASE("sensor files round-trip through text at full precision") {
  SensorFile sensors;
  sensors.labels = {"Cz", "E42", "tail"};
  sensors.positions = {{0.1, -0.2, 99.99999999999999},
                       {3.0, 4.0, 5.0},
                       {-1e-7, 2e8, 0.333333333333333314829616256247}};
  const std::string path = temp_path("sensors");
  save_sensor_file(path, sensors);

  const SensorFile back = load_sensor_file(path);
  REQUIRE(back.labels == sensors.labels);
  for (std::size_t i = 0; i < sensors.positions.size(); ++i)
    CHECK((back.positions[i] - sensors.positions[i]).norm() == 0.0);
}

TEST_CASE("sensor file parsing tolerates comments and flags bad lines") {
  const std::string path = temp_path("sensors_txt");
  write_file(path,
             "# montage exported by hand\n\n"
             "sensors v1\n"
             "A1 1 2 3   # occipital\n"
             "\n"
             "A2 -4 5e1 6.5\n");
  const SensorFile ok = load_sensor_file(path);
  REQUIRE(ok.labels.size() == 2);
  CHECK(ok.positions[1].y() == 50.0);

  write_file(path, "sensors v1\nA1 1 2 3\nA2 4 five 6\n");
  CHECK_THROWS_WITH_AS(load_sensor_file(path),
                       ("bad sensor line 3 in " + path).c_str(), ConfigError);

  write_file(path, "electrodes v2\nA1 1 2 3\n");
  CHECK_THROWS_AS(load_sensor_file(path), ConfigError);

  write_file(path, "sensors v1\n# nothing else\n");
  CHECK_THROWS_AS(load_sensor_file(path), ConfigError);
}

TEST_CASE("sparse interpolation matrices round-trip through dmat text") {
  Eigen::SparseMatrix<double> D(6, 4);
  std::vector<Eigen::Triplet<double>> entries = {
      {0, 0, 1.5},   {5, 0, -2.25}, {2, 1, 1e-12},
      {3, 3, 0.1},   {0, 3, -7.0},
  };
  D.setFromTriplets(entries.begin(), entries.end());

  const std::string path = temp_path("dmat");
  save_dmat(path, D);
  const Eigen::SparseMatrix<double> back = load_dmat(path);
  REQUIRE(back.rows() == 6);
  REQUIRE(back.cols() == 4);
  CHECK((Eigen::MatrixXd(back) - Eigen::MatrixXd(D)).cwiseAbs().maxCoeff() ==
        0.0);

  write_file(path, "dmat v2\n1 1 1\n0 0 1\n");
  CHECK_THROWS_AS(load_dmat(path), ConfigError);
  write_file(path, "dmat v1\n2 2 1\n0 5 1.0\n");
  CHECK_THROWS_AS(load_dmat(path), ConfigError);  // column outside shape
  write_file(path, "dmat v1\n2 2 3\n0 0 1.0\n");
  CHECK_THROWS_AS(load_dmat(path), ConfigError);  // fewer triplets than nnz
}

TEST_CASE("peel report JSON carries counts and index sets") {
  PeelResult result;
  result.kept_tetra = {0, 2, 5};
  result.removed_tetra = {1, 3, 4};
  result.surface_nodes = {7, 8};

  const std::string path = temp_path("peel_json");
  save_peel_json(path, result, 12.0, 13.25);

  const auto doc = nlohmann::json::parse(read_text_file(path));
  CHECK(doc.at("depth_mm").get<double>() == 12.0);
  CHECK(doc.at("effective_depth_mm").get<double>() == 13.25);
  CHECK(doc.at("kept_count").get<int>() == 3);
  CHECK(doc.at("removed_count").get<int>() == 3);
  CHECK(doc.at("surface_node_count").get<int>() == 2);
  CHECK(doc.at("kept_tetra").get<std::vector<int>>() == result.kept_tetra);
  CHECK(doc.at("removed_tetra").get<std::vector<int>>() ==
        result.removed_tetra);
}

TEST_CASE("source spaces round-trip through JSON") {
  SourceSpace sources;
  sources.positions = {{0.1, 2.5, -3.25}, {10, 20, 30}};
  sources.host_tetra = {4, 17};

  const std::string path = temp_path("srcspace");
  save_source_space_json(path, sources);
  const SourceSpace back = load_source_space_json(path);
  REQUIRE(back.count() == 2);
  CHECK(back.host_tetra == sources.host_tetra);
  for (int i = 0; i < 2; ++i)
    CHECK((back.positions[i] - sources.positions[i]).norm() == 0.0);

  write_file(path, "{\"positions_mm\": [[1,2,3]], \"host_tetra\": [0, 1]}");
  CHECK_THROWS_AS(load_source_space_json(path), ConfigError);
  write_file(path, "{not json");
  CHECK_THROWS_AS(load_source_space_json(path), ConfigError);
}

TEST_CASE("reconstruction JSON names the method and the winning moment") {
  Reconstruction recon;
  recon.method = "dipole_scan";
  recon.parameter = 1e-6;
  recon.scores = Eigen::Vector3d(0.2, 0.9, 0.1);
  recon.moments = {Eigen::Vector3d::Zero(), Eigen::Vector3d(1, -2, 3),
                   Eigen::Vector3d::Zero()};
  recon.argmax = 1;

  const std::string path = temp_path("recon");
  save_reconstruction_json(path, recon);
  const auto doc = nlohmann::json::parse(read_text_file(path));
  CHECK(doc.at("method") == "dipole_scan");
  CHECK(doc.at("parameter").get<double>() == 1e-6);
  CHECK(doc.at("argmax").get<int>() == 1);
  CHECK(doc.at("scores").size() == 3);
  const auto m = doc.at("argmax_moment").get<std::vector<double>>();
  CHECK(m == std::vector<double>{1.0, -2.0, 3.0});
}

TEST_CASE("format_double is stable and compact") {
  CHECK(format_double(0.0) == "0");
  CHECK(format_double(-3.0) == "-3");
  CHECK(format_double(0.125) == "0.125");
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0 / 3.0) == "0.3333333333");
}

TEST_CASE("config files parse keys, comments, and versions") {
  const std::string text =
      "# study setup\n"
      "config_version: 1\n"
      "seed: 77\n"
      "snr_db: 5, 10, 20\n"
      "methods: sloreta, dipole_scan\n"
      "  solver_tol :  1e-9  # tight\n"
      "freeze_lattice: off\n"
      "label: three-shell run\n";
  const ConfigMap cfg = ConfigMap::parse_text(text, "test.cfg");
  CHECK(cfg.get_int("seed") == 77);
  CHECK(cfg.get_double("solver_tol") == 1e-9);
  CHECK(cfg.get_bool("freeze_lattice", true) == false);
  CHECK(cfg.get_bool("absent", true) == true);
  CHECK(cfg.get_double_list("snr_db") == std::vector<double>{5, 10, 20});
  CHECK(cfg.get_string_list("methods") ==
        std::vector<std::string>{"sloreta", "dipole_scan"});
  CHECK(cfg.get_string("label") == "three-shell run");
  CHECK(cfg.get_int("missing", 9) == 9);
  CHECK(cfg.unused_keys().empty());
}

TEST_CASE("config parsing failures carry the origin and line number") {
  CHECK_THROWS_WITH_AS(
      ConfigMap::parse_text("config_version: 1\njust words\n", "f.cfg"),
      "f.cfg line 2: expected 'key: value'", ConfigError);
  CHECK_THROWS_WITH_AS(
      ConfigMap::parse_text("config_version: 1\n: lost\n", "f.cfg"),
      "f.cfg line 2: empty key", ConfigError);
  CHECK_THROWS_WITH_AS(
      ConfigMap::parse_text("config_version: 1\na: 1\na: 2\n", "f.cfg"),
      "f.cfg line 3: duplicate key 'a'", ConfigError);
  CHECK_THROWS_WITH_AS(ConfigMap::parse_text("seed: 1\n", "f.cfg"),
                       "f.cfg: missing required key 'config_version'",
                       ConfigError);
  CHECK_THROWS_WITH_AS(ConfigMap::parse_text("config_version: 2\n", "f.cfg"),
                       "f.cfg: unsupported config_version (expected 1)",
                       ConfigError);
}

TEST_CASE("typed config getters reject malformed values") {
  const ConfigMap cfg = ConfigMap::parse_text(
      "config_version: 1\n"
      "n: 12abc\n"
      "x: 3.5x\n"
      "b: maybe\n"
      "l: 1, two, 3\n"
      "empty_list: ,\n",
      "bad.cfg");
  CHECK_THROWS_WITH_AS(cfg.get_int("n"),
                       "bad.cfg: key 'n' is not an integer: 12abc",
                       ConfigError);
  CHECK_THROWS_WITH_AS(cfg.get_double("x"),
                       "bad.cfg: key 'x' is not a number: 3.5x", ConfigError);
  CHECK_THROWS_WITH_AS(cfg.get_bool("b", false),
                       "bad.cfg: key 'b' is not a boolean: maybe", ConfigError);
  CHECK_THROWS_AS(cfg.get_int_list("l"), ConfigError);
  CHECK_THROWS_WITH_AS(cfg.get_double_list("empty_list"),
                       "bad.cfg: key 'empty_list' lists no values",
                       ConfigError);
  CHECK_THROWS_WITH_AS(cfg.get_string("gone"),
                       "bad.cfg: missing required key 'gone'", ConfigError);
}

TEST_CASE("unused keys are reported for typo detection") {
  const ConfigMap cfg = ConfigMap::parse_text(
      "config_version: 1\nseed: 1\nseeed: 2\n", "typo.cfg");
  (void)cfg.get_int("seed");
  const std::vector<std::string> unused = cfg.unused_keys();
  REQUIRE(unused.size() == 1);
  CHECK(unused[0] == "seeed");
}
