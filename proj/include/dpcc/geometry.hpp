#pragma once

#include "dpcc/common.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dpcc {

/// A point cloud is an N x 3 matrix of xyz positions plus an optional
/// integer class label (written to PLY as a comment so other tools still
/// read the file).
struct PointCloud {
  Mat points;                // N x 3
  std::optional<int> label;  // semantic class, if any

  Eigen::Index size() const { return points.rows(); }
};

/// Parameters of the map into the unit ball used before encoding.
/// x_norm = (x - center) / scale, componentwise.
struct NormalizationParams {
  double center[3] = {0.0, 0.0, 0.0};
  double scale = 1.0;
};

/// Center on the centroid and scale by the max distance from it, so the
/// cloud fits in the unit ball with the farthest point on the sphere.
/// Degenerate clouds (max radius below 1e-12) keep scale 1.
NormalizationParams compute_normalization(const Mat& points);

Mat normalize(const Mat& points, const NormalizationParams& p);
Mat denormalize(const Mat& points, const NormalizationParams& p);

/// Farthest point sampling. Starts at index 0, then repeatedly picks the point
/// with the largest distance to the selected set (ties break to the lowest
/// index). Returns the selected row indices in selection order.
std::vector<int> farthest_point_sample(const Mat& points, int n_samples);

/// Row i holds the indices of the k nearest rows of `reference` to row i of
/// `query`, ascending by distance (ties break to the lowest index). k must
/// be <= reference.rows().
IMat knn(const Mat& query, const Mat& reference, int k);

/// Symmetric chamfer distance: mean over A of the squared distance to the
/// nearest point of B, plus the same with the roles swapped.
double chamfer_distance(const Mat& a, const Mat& b);

/// Point-to-point (D1) geometry PSNR with the given signal peak:
/// 10*log10(peak^2 / max(mse(a->b), mse(b->a))), capped at 100 dB when the
/// clouds coincide.
double d1_psnr(const Mat& a, const Mat& b, double peak = 1.0);

PointCloud load_ply(const std::string& path);
void save_ply(const std::string& path, const PointCloud& cloud);

}  // namespace dpcc
