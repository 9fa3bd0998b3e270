#include "dpcc/evaluation.hpp"

#include "dpcc/codec.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace dpcc {

double compute_bpp(size_t container_bytes, size_t n_points) {
  require(n_points >= 1, ErrorKind::usage, "bpp needs at least one point");
  return 8.0 * static_cast<double>(container_bytes) / static_cast<double>(n_points);
}

namespace {

void check_curve(const std::vector<RdPoint>& curve) {
  require(curve.size() >= 4, ErrorKind::config, "bd metrics need at least 4 rate points");
  for (const RdPoint& p : curve)
    require(p.bpp > 0.0 && std::isfinite(p.bpp) && std::isfinite(p.psnr_d1),
            ErrorKind::numeric, "bd metrics need finite points with positive bpp");
}

void sort_by_bpp(std::vector<RdPoint>& curve) {
  std::sort(curve.begin(), curve.end(),
            [](const RdPoint& a, const RdPoint& b) { return a.bpp < b.bpp; });
}

Eigen::Vector4d fit_cubic(const std::vector<double>& x, const std::vector<double>& y) {
  auto n = static_cast<Eigen::Index>(x.size());
  Mat v(n, 4);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double xi = x[static_cast<size_t>(i)];
    v(i, 0) = 1.0;
    v(i, 1) = xi;
    v(i, 2) = xi * xi;
    v(i, 3) = xi * xi * xi;
    rhs(i) = y[static_cast<size_t>(i)];
  }
  return v.colPivHouseholderQr().solve(rhs);
}

double integrate(const Eigen::Vector4d& c, double lo, double hi) {
  auto anti = [&](double x) {
    return c(0) * x + c(1) * x * x / 2.0 + c(2) * x * x * x / 3.0 +
           c(3) * x * x * x * x / 4.0;
  };
  return anti(hi) - anti(lo);
}

// mean vertical gap between the two cubic fits over the shared x range
double mean_fit_gap(const std::vector<double>& xa, const std::vector<double>& ya,
                    const std::vector<double>& xb, const std::vector<double>& yb) {
  for (size_t i = 0; i + 1 < xa.size(); ++i)
    require(xa[i] < xa[i + 1], ErrorKind::numeric, "bd metrics need distinct rate points");
  for (size_t i = 0; i + 1 < xb.size(); ++i)
    require(xb[i] < xb[i + 1], ErrorKind::numeric, "bd metrics need distinct rate points");

  double lo = std::max(xa.front(), xb.front());
  double hi = std::min(xa.back(), xb.back());
  require(hi > lo, ErrorKind::numeric, "bd metrics need overlapping curves");

  Eigen::Vector4d ca = fit_cubic(xa, ya);
  Eigen::Vector4d cb = fit_cubic(xb, yb);
  return (integrate(cb, lo, hi) - integrate(ca, lo, hi)) / (hi - lo);
}

}  // namespace

double bd_psnr(std::vector<RdPoint> a, std::vector<RdPoint> b) {
  check_curve(a);
  check_curve(b);
  sort_by_bpp(a);
  sort_by_bpp(b);
  auto split = [](const std::vector<RdPoint>& c, std::vector<double>& x,
                  std::vector<double>& y) {
    for (const RdPoint& p : c) {
      x.push_back(std::log10(p.bpp));
      y.push_back(p.psnr_d1);
    }
  };
  std::vector<double> xa, ya, xb, yb;
  split(a, xa, ya);
  split(b, xb, yb);
  return mean_fit_gap(xa, ya, xb, yb);
}

double bd_rate(std::vector<RdPoint> a, std::vector<RdPoint> b) {
  check_curve(a);
  check_curve(b);
  sort_by_bpp(a);
  sort_by_bpp(b);
  auto split = [](const std::vector<RdPoint>& c, std::vector<double>& x,
                  std::vector<double>& y) {
    for (const RdPoint& p : c) {
      x.push_back(p.psnr_d1);
      y.push_back(std::log10(p.bpp));
    }
  };
  std::vector<double> xa, ya, xb, yb;
  split(a, xa, ya);
  split(b, xb, yb);
  double gap = mean_fit_gap(xa, ya, xb, yb);
  return 100.0 * (std::pow(10.0, gap) - 1.0);
}

EvalReport evaluate_codec(const std::vector<const Model*>& models,
                          const std::vector<PointCloud>& clouds, uint64_t seed) {
  require(!models.empty(), ErrorKind::config, "evaluate: no models to evaluate");
  require(!clouds.empty(), ErrorKind::config, "evaluate: no clouds to evaluate");

  EvalReport report;
  for (size_t mi = 0; mi < models.size(); ++mi) {
    const Model& model = *models[mi];
    std::vector<CloudEval> rows;
    rows.reserve(clouds.size());
    double sum_bpp = 0.0, sum_psnr = 0.0, sum_cd = 0.0;
    for (size_t ci = 0; ci < clouds.size(); ++ci) {
      const PointCloud& cloud = clouds[ci];
      EncodeResult enc = encode_cloud(model, cloud, mix_seed(seed, ci));
      PointCloud dec = decode_cloud(model, enc.bytes);

      NormalizationParams norm;
      for (int k = 0; k < 3; ++k) norm.center[k] = static_cast<double>(enc.header.center[k]);
      norm.scale = static_cast<double>(enc.header.scale);
      Mat ref = normalize(cloud.points, norm);
      Mat rec = normalize(dec.points, norm);

      CloudEval e;
      e.bpp = compute_bpp(enc.bytes.size(), cloud.size());
      e.psnr_d1 = d1_psnr(ref, rec);
      e.chamfer = chamfer_distance(ref, rec);
      rows.push_back(e);
      sum_bpp += e.bpp;
      sum_psnr += e.psnr_d1;
      sum_cd += e.chamfer;
    }
    RdPoint point;
    point.lambda = model.trained_lambda;
    point.bpp = sum_bpp / static_cast<double>(clouds.size());
    point.psnr_d1 = sum_psnr / static_cast<double>(clouds.size());
    point.chamfer = sum_cd / static_cast<double>(clouds.size());
    report.table.push_back(point);
    report.per_cloud.push_back(std::move(rows));
  }
  return report;
}

void write_rd_csv(const std::string& path, const std::vector<RdPoint>& table) {
  std::ofstream out(path);
  require(out.good(), ErrorKind::io, "cannot write " + path);
  out << "lambda,bpp,psnr_d1,chamfer\n";
  out << std::setprecision(12);
  for (const RdPoint& p : table)
    out << p.lambda << ',' << p.bpp << ',' << p.psnr_d1 << ',' << p.chamfer << '\n';
  require(out.good(), ErrorKind::io, "write failed for " + path);
}

std::vector<RdPoint> read_rd_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::io, "cannot read " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::format,
          "rd csv is empty: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == "lambda,bpp,psnr_d1,chamfer", ErrorKind::format,
          "rd csv has the wrong header: " + path);

  std::vector<RdPoint> table;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    RdPoint p;
    char c1 = 0, c2 = 0, c3 = 0;
    row >> p.lambda >> c1 >> p.bpp >> c2 >> p.psnr_d1 >> c3 >> p.chamfer;
    require(!row.fail() && c1 == ',' && c2 == ',' && c3 == ',', ErrorKind::format,
            "rd csv has a malformed row: " + line);
    table.push_back(p);
  }
  return table;
}

void write_rd_svg(const std::string& path, const std::vector<RdPoint>& table) {
  require(!table.empty(), ErrorKind::config, "rd plot needs at least one point");
  std::vector<RdPoint> pts = table;
  sort_by_bpp(pts);

  double x_lo = pts.front().bpp, x_hi = pts.back().bpp;
  double y_lo = pts.front().psnr_d1, y_hi = y_lo;
  for (const RdPoint& p : pts) {
    y_lo = std::min(y_lo, p.psnr_d1);
    y_hi = std::max(y_hi, p.psnr_d1);
  }
  if (x_hi - x_lo < 1e-12) x_hi = x_lo + 1.0;
  if (y_hi - y_lo < 1e-12) y_hi = y_lo + 1.0;

  const double w = 640, h = 440, ml = 70, mr = 20, mt = 20, mb = 50;
  auto px = [&](double bpp) { return ml + (bpp - x_lo) / (x_hi - x_lo) * (w - ml - mr); };
  auto py = [&](double ps) { return h - mb - (ps - y_lo) / (y_hi - y_lo) * (h - mt - mb); };

  std::ostringstream svg;
  svg << std::setprecision(6);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << w << ' ' << h
      << "\">\n";
  svg << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr << "\" y2=\""
      << h - mb << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
      << h - mb << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << (ml + w - mr) / 2 << "\" y=\"" << h - 12
      << "\" text-anchor=\"middle\" font-size=\"14\">bits per point</text>\n";
  svg << "<text x=\"18\" y=\"" << (mt + h - mb) / 2
      << "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 18 "
      << (mt + h - mb) / 2 << ")\">D1 PSNR (dB)</text>\n";
  for (double f : {0.0, 0.5, 1.0}) {
    double bx = x_lo + f * (x_hi - x_lo);
    double by = y_lo + f * (y_hi - y_lo);
    svg << "<text x=\"" << px(bx) << "\" y=\"" << h - mb + 18
        << "\" text-anchor=\"middle\" font-size=\"12\">" << bx << "</text>\n";
    svg << "<text x=\"" << ml - 8 << "\" y=\"" << py(by) + 4
        << "\" text-anchor=\"end\" font-size=\"12\">" << by << "</text>\n";
  }

  svg << "<polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"2\" points=\"";
  for (const RdPoint& p : pts) svg << px(p.bpp) << ',' << py(p.psnr_d1) << ' ';
  svg << "\"/>\n";
  for (const RdPoint& p : pts)
    svg << "<circle cx=\"" << px(p.bpp) << "\" cy=\"" << py(p.psnr_d1)
        << "\" r=\"4\" fill=\"#1f6fb2\"/>\n";
  svg << "</svg>\n";

  std::ofstream out(path);
  require(out.good(), ErrorKind::io, "cannot write " + path);
  out << svg.str();
  require(out.good(), ErrorKind::io, "write failed for " + path);
}

}  // namespace dpcc
