#include "dpcc/geometry.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace dpcc {

namespace {

[[noreturn]] void parse_fail(const std::string& path, int line, const std::string& msg) {
  fail(ErrorKind::parse, path + ":" + std::to_string(line) + ": " + msg);
}

}  // namespace

PointCloud load_ply(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::io, "cannot open " + path);

  int lineno = 0;
  std::string line;
  auto next_line = [&](const char* what) {
    if (!std::getline(in, line)) parse_fail(path, lineno, std::string("unexpected end of file, expected ") + what);
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };

  if (next_line("ply magic") != "ply") parse_fail(path, lineno, "not a PLY file (missing 'ply' magic)");

  PointCloud cloud;
  Eigen::Index n_vertices = -1;
  int xyz_cols[3] = {-1, -1, -1};  // property index of x, y, z
  int n_props = 0;
  bool in_vertex_element = false;
  bool saw_format = false;

  for (;;) {
    next_line("header line");
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "end_header") break;
    if (tok == "format") {
      std::string fmt, ver;
      ls >> fmt >> ver;
      if (fmt != "ascii")
        fail(ErrorKind::format, path + ": only ascii PLY is supported (got format '" + fmt + "')");
      if (ver != "1.0") parse_fail(path, lineno, "unsupported PLY version '" + ver + "'");
      saw_format = true;
    } else if (tok == "comment") {
      std::string key;
      ls >> key;
      if (key == "label") {
        long v = 0;
        if (!(ls >> v)) parse_fail(path, lineno, "malformed label comment");
        cloud.label = static_cast<int>(v);
      }
    } else if (tok == "element") {
      std::string name;
      long count = 0;
      if (!(ls >> name >> count)) parse_fail(path, lineno, "malformed element line");
      if (name == "vertex") {
        n_vertices = count;
        in_vertex_element = true;
      } else {
        in_vertex_element = false;
      }
    } else if (tok == "property") {
      if (!in_vertex_element) continue;
      std::string type, name;
      if (!(ls >> type)) parse_fail(path, lineno, "malformed property line");
      if (type == "list") {
        ls >> type >> type;  // skip count and element types
      }
      if (!(ls >> name)) parse_fail(path, lineno, "malformed property line");
      if (name == "x") xyz_cols[0] = n_props;
      else if (name == "y") xyz_cols[1] = n_props;
      else if (name == "z") xyz_cols[2] = n_props;
      ++n_props;
    } else if (tok == "ply" || tok.empty()) {
      parse_fail(path, lineno, "unexpected header line '" + line + "'");
    }
    // other header keywords are ignored
  }

  if (!saw_format) parse_fail(path, lineno, "missing format line");
  if (n_vertices < 0) parse_fail(path, lineno, "missing vertex element");
  for (int c = 0; c < 3; ++c)
    if (xyz_cols[c] < 0) parse_fail(path, lineno, "vertex element lacks x/y/z properties");

  cloud.points.resize(n_vertices, 3);
  std::vector<double> vals(n_props);
  for (Eigen::Index i = 0; i < n_vertices; ++i) {
    next_line("vertex row");
    std::istringstream ls(line);
    for (int p = 0; p < n_props; ++p) {
      if (!(ls >> vals[p]))
        parse_fail(path, lineno, "vertex row has fewer values than declared properties");
    }
    for (int c = 0; c < 3; ++c) cloud.points(i, c) = vals[xyz_cols[c]];
  }
  return cloud;
}

void save_ply(const std::string& path, const PointCloud& cloud) {
  std::ofstream out(path);
  require(out.good(), ErrorKind::io, "cannot write " + path);

  out << "ply\n";
  out << "format ascii 1.0\n";
  if (cloud.label) out << "comment label " << *cloud.label << "\n";
  out << "element vertex " << cloud.points.rows() << "\n";
  out << "property float x\n";
  out << "property float y\n";
  out << "property float z\n";
  out << "end_header\n";
  char buf[96];
  for (Eigen::Index i = 0; i < cloud.points.rows(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g\n", cloud.points(i, 0), cloud.points(i, 1),
                  cloud.points(i, 2));
    out << buf;
  }
  require(out.good(), ErrorKind::io, "write failed for " + path);
}

}  // namespace dpcc
