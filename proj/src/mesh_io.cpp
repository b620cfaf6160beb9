#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "peelfield/errors.hpp"
#include "peelfield/mesh.hpp"

namespace peelfield {

namespace {

// Token stream over a line-oriented text file with `#` comments.
class TokenReader {
 public:
  explicit TokenReader(std::istream& in, std::string origin)
      : in_(in), origin_(std::move(origin)) {}

  std::string next() {
    for (;;) {
      std::string tok;
      if (line_ >> tok) return tok;
      std::string raw;
      if (!std::getline(in_, raw)) return {};
      ++line_number_;
      if (auto hash = raw.find('#'); hash != std::string::npos)
        raw.erase(hash);
      line_ = std::istringstream(raw);
    }
  }

  std::string expect() {
    std::string tok = next();
    if (tok.empty())
      throw ConfigError(origin_ + ": unexpected end of file at line " +
                        std::to_string(line_number_));
    return tok;
  }

  long expect_int() {
    const std::string tok = expect();
    try {
      std::size_t used = 0;
      const long v = std::stol(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      throw ConfigError(origin_ + ": expected integer, got '" + tok +
                        "' near line " + std::to_string(line_number_));
    }
  }

  double expect_double() {
    const std::string tok = expect();
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      throw ConfigError(origin_ + ": expected number, got '" + tok +
                        "' near line " + std::to_string(line_number_));
    }
  }

 private:
  std::istream& in_;
  std::string origin_;
  std::istringstream line_;
  int line_number_ = 0;
};

}  // namespace

TetrahedralMesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open mesh file: " + path);
  TokenReader reader(in, path);

  if (reader.expect() != "tetmesh" || reader.expect() != "v1")
    throw ConfigError(path + ": expected 'tetmesh v1' header");

  if (reader.expect() != "nodes")
    throw ConfigError(path + ": expected 'nodes' section");
  const long n_nodes = reader.expect_int();
  if (n_nodes < 0) throw ConfigError(path + ": negative node count");
  std::vector<Vec3> nodes(n_nodes);
  for (long i = 0; i < n_nodes; ++i)
    for (int k = 0; k < 3; ++k) nodes[i][k] = reader.expect_double();

  if (reader.expect() != "tetra")
    throw ConfigError(path + ": expected 'tetra' section");
  const long n_tets = reader.expect_int();
  if (n_tets < 0) throw ConfigError(path + ": negative element count");
  std::vector<std::array<int, 4>> tetra(n_tets);
  std::vector<int> labels(n_tets);
  for (long t = 0; t < n_tets; ++t) {
    for (int k = 0; k < 4; ++k)
      tetra[t][k] = static_cast<int>(reader.expect_int());
    labels[t] = static_cast<int>(reader.expect_int());
  }

  if (reader.expect() != "conductivity")
    throw ConfigError(path + ": expected 'conductivity' section");
  const long n_sigma = reader.expect_int();
  std::map<int, double> conductivities;
  for (long k = 0; k < n_sigma; ++k) {
    const int label = static_cast<int>(reader.expect_int());
    conductivities[label] = reader.expect_double();
  }

  return TetrahedralMesh(std::move(nodes), std::move(tetra), std::move(labels),
                         std::move(conductivities));
}

void save_mesh(const TetrahedralMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write mesh file: " + path);
  out << "tetmesh v1\n";
  out << "# positions mm, conductivities S/m\n";
  out << "nodes " << mesh.node_count() << "\n";
  char buf[96];
  for (const auto& p : mesh.nodes) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", p.x(), p.y(), p.z());
    out << buf;
  }
  out << "tetra " << mesh.tet_count() << "\n";
  for (int t = 0; t < mesh.tet_count(); ++t) {
    const auto& tet = mesh.tetra[t];
    out << tet[0] << ' ' << tet[1] << ' ' << tet[2] << ' ' << tet[3] << ' '
        << mesh.labels[t] << "\n";
  }
  out << "conductivity " << mesh.conductivities.size() << "\n";
  for (const auto& [label, sigma] : mesh.conductivities) {
    std::snprintf(buf, sizeof(buf), "%d %.17g\n", label, sigma);
    out << buf;
  }
  if (!out) throw ConfigError("failed while writing mesh file: " + path);
}

}  // namespace peelfield
