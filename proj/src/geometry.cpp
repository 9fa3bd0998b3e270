#include "dpcc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace dpcc {

NormalizationParams compute_normalization(const Mat& points) {
  require(points.rows() > 0, ErrorKind::numeric, "cannot normalize an empty point cloud");
  require(points.allFinite(), ErrorKind::numeric, "point cloud has non-finite coordinates");
  NormalizationParams p;
  Eigen::RowVector3d c = points.colwise().mean();
  for (int i = 0; i < 3; ++i) p.center[i] = c(i);
  double max_r = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    max_r = std::max(max_r, (points.row(i) - c).norm());
  p.scale = max_r < 1e-12 ? 1.0 : max_r;
  return p;
}

Mat normalize(const Mat& points, const NormalizationParams& p) {
  require(points.allFinite(), ErrorKind::numeric, "point cloud has non-finite coordinates");
  require(p.scale > 0.0, ErrorKind::numeric, "normalization scale must be positive");
  Mat out = points;
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (int c = 0; c < 3; ++c) out(i, c) = (out(i, c) - p.center[c]) / p.scale;
  return out;
}

Mat denormalize(const Mat& points, const NormalizationParams& p) {
  require(p.scale > 0.0, ErrorKind::numeric, "normalization scale must be positive");
  Mat out = points;
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (int c = 0; c < 3; ++c) out(i, c) = out(i, c) * p.scale + p.center[c];
  return out;
}

std::vector<int> farthest_point_sample(const Mat& points, int n_samples) {
  const Eigen::Index n = points.rows();
  require(n > 0, ErrorKind::numeric, "farthest_point_sample: empty cloud");
  require(n_samples >= 1 && n_samples <= n, ErrorKind::numeric,
          "farthest_point_sample: n_samples out of range");

  std::vector<int> selected;
  selected.reserve(n_samples);
  std::vector<double> best(n, std::numeric_limits<double>::infinity());

  int cur = 0;
  selected.push_back(cur);
  for (int s = 1; s < n_samples; ++s) {
    int arg = -1;
    double far = -1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double d = (points.row(i) - points.row(cur)).squaredNorm();
      if (d < best[i]) best[i] = d;
      if (best[i] > far) {
        far = best[i];
        arg = static_cast<int>(i);
      }
    }
    cur = arg;
    selected.push_back(cur);
  }
  return selected;
}

IMat knn(const Mat& query, const Mat& reference, int k) {
  const Eigen::Index n = reference.rows();
  require(k >= 1 && k <= n, ErrorKind::numeric, "knn: k out of range");
  IMat out(query.rows(), k);

  std::vector<std::pair<double, int>> dist(n);
  for (Eigen::Index q = 0; q < query.rows(); ++q) {
    for (Eigen::Index i = 0; i < n; ++i)
      dist[i] = {(reference.row(i) - query.row(q)).squaredNorm(), static_cast<int>(i)};
    // pair ordering gives ascending distance with index as tiebreak
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    for (int j = 0; j < k; ++j) out(q, j) = dist[j].second;
  }
  return out;
}

namespace {

double one_sided_mse(const Mat& a, const Mat& b) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      double d = (a.row(i) - b.row(j)).squaredNorm();
      if (d < best) best = d;
    }
    acc += best;
  }
  return acc / static_cast<double>(a.rows());
}

}  // namespace

double chamfer_distance(const Mat& a, const Mat& b) {
  require(a.rows() > 0 && b.rows() > 0, ErrorKind::numeric, "chamfer_distance: empty cloud");
  return one_sided_mse(a, b) + one_sided_mse(b, a);
}

double d1_psnr(const Mat& a, const Mat& b, double peak) {
  require(a.rows() > 0 && b.rows() > 0, ErrorKind::numeric, "d1_psnr: empty cloud");
  require(peak > 0.0, ErrorKind::numeric, "d1_psnr: peak must be positive");
  double mse = std::max(one_sided_mse(a, b), one_sided_mse(b, a));
  if (mse == 0.0) return 100.0;
  return 10.0 * std::log10(peak * peak / mse);
}

}  // namespace dpcc
