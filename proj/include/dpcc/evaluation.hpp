#pragma once

#include "dpcc/geometry.hpp"
#include "dpcc/model.hpp"

#include <string>
#include <vector>

namespace dpcc {

/// One operating point on a rate-distortion curve.
struct RdPoint {
  double lambda = 0.0;
  double bpp = 0.0;  // must stay positive; the BD fits work in log10(bpp)
  double psnr_d1 = 0.0;
  double chamfer = 0.0;
};

/// Header bytes count: the whole file pays for itself.
double compute_bpp(size_t container_bytes, size_t n_points);

/// Classic Bjontegaard deltas over the overlapping range of two curves,
/// each fitted with a cubic polynomial. Positive means B beats A. Curves
/// need at least four points; order does not matter (sorted internally).
double bd_psnr(std::vector<RdPoint> a, std::vector<RdPoint> b);   // dB
double bd_rate(std::vector<RdPoint> a, std::vector<RdPoint> b);   // percent

struct CloudEval {
  double bpp = 0.0;
  double psnr_d1 = 0.0;
  double chamfer = 0.0;
};

struct EvalReport {
  std::vector<RdPoint> table;                     // one row per model
  std::vector<std::vector<CloudEval>> per_cloud;  // parallel to table
};

/// Encode and decode every cloud with every model (one model per rate point;
/// lambda is read off the checkpoint provenance). Distortion is measured in
/// the codec's normalized frame so clouds of different extent average fairly.
EvalReport evaluate_codec(const std::vector<const Model*>& models,
                          const std::vector<PointCloud>& clouds, uint64_t seed);

void write_rd_csv(const std::string& path, const std::vector<RdPoint>& table);
std::vector<RdPoint> read_rd_csv(const std::string& path);

/// Minimal standalone plot of the RD table: bpp on x, D1 PSNR on y.
void write_rd_svg(const std::string& path, const std::vector<RdPoint>& table);

}  // namespace dpcc
