#pragma once

#include "dpcc/common.hpp"

#include <functional>
#include <vector>

namespace dpcc {

/// Variance schedule for the diffusion process. Arrays are 1-based in t:
/// beta[t] and alpha[t] are valid for t in [1, T]; alpha_bar[t] for t in
/// [0, T] with alpha_bar[0] == 1. alpha_bar is the running product of the
/// clipped alphas, so alpha_bar[t] == alpha_bar[t-1] * alpha[t] holds
/// exactly.
struct NoiseSchedule {
  int T = 0;
  std::vector<double> beta;       // size T+1, [0] unused
  std::vector<double> alpha;      // size T+1, [0] unused
  std::vector<double> alpha_bar;  // size T+1

  /// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps
  Mat forward_sample(const Mat& x0, int t, const Mat& eps) const;

  /// Invert forward_sample given a noise estimate. Errors when abar_t is
  /// too small to divide by (below 1e-8).
  Mat predict_x0(const Mat& x_t, int t, const Mat& eps_hat) const;

  /// One ancestral sampling step from x_t to x_{t-1}. `noise` is ignored at
  /// t == 1 (the last step is deterministic).
  Mat reverse_step(const Mat& x_t, int t, const Mat& eps_hat, const Mat& noise) const;

  /// Run the full reverse chain from pure noise. The denoiser maps
  /// (x_t, t) -> predicted eps. Draw order is fixed: x_T first, then after
  /// each denoiser call the step noise for t > 1.
  Mat generate(Eigen::Index n_points,
               const std::function<Mat(const Mat&, int)>& denoiser,
               uint64_t seed) const;

  void check_t(int t, bool allow_zero = false) const;
};

/// Cosine schedule: abar follows a squared-cosine ramp, betas derived from
/// consecutive ratios and clipped to [1e-6, 0.999].
NoiseSchedule cosine_schedule(int T, double s = 0.008);

}  // namespace dpcc
