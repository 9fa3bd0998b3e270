#include "dpcc/schedule.hpp"

#include <algorithm>
#include <cmath>

namespace dpcc {

void NoiseSchedule::check_t(int t, bool allow_zero) const {
  int lo = allow_zero ? 0 : 1;
  require(t >= lo && t <= T, ErrorKind::numeric,
          "timestep " + std::to_string(t) + " outside [" + std::to_string(lo) + ", " +
              std::to_string(T) + "]");
}

Mat NoiseSchedule::forward_sample(const Mat& x0, int t, const Mat& eps) const {
  check_t(t);
  require(x0.rows() == eps.rows() && x0.cols() == eps.cols(), ErrorKind::numeric,
          "forward_sample: shape mismatch between x0 and eps");
  double ab = alpha_bar[t];
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

Mat NoiseSchedule::predict_x0(const Mat& x_t, int t, const Mat& eps_hat) const {
  check_t(t);
  double ab = alpha_bar[t];
  require(ab >= 1e-8, ErrorKind::numeric,
          "predict_x0: alpha_bar too small at t=" + std::to_string(t));
  return (x_t - std::sqrt(1.0 - ab) * eps_hat) / std::sqrt(ab);
}

Mat NoiseSchedule::reverse_step(const Mat& x_t, int t, const Mat& eps_hat, const Mat& noise) const {
  check_t(t);
  double a = alpha[t];
  double ab = alpha_bar[t];
  double ab_prev = alpha_bar[t - 1];
  double b = beta[t];

  Mat mean = (x_t - (b / std::sqrt(1.0 - ab)) * eps_hat) / std::sqrt(a);
  if (t == 1) return mean;

  double var = (1.0 - ab_prev) / (1.0 - ab) * b;
  return mean + std::sqrt(var) * noise;
}

Mat NoiseSchedule::generate(Eigen::Index n_points,
                            const std::function<Mat(const Mat&, int)>& denoiser,
                            uint64_t seed) const {
  Rng rng(seed);
  Mat x = rng.normal_mat(n_points, 3);
  for (int t = T; t >= 1; --t) {
    Mat eps_hat = denoiser(x, t);
    require(eps_hat.allFinite(), ErrorKind::numeric,
            "generate: denoiser output not finite at step t=" + std::to_string(t));
    Mat noise = t > 1 ? rng.normal_mat(n_points, 3) : Mat::Zero(n_points, 3);
    x = reverse_step(x, t, eps_hat, noise);
    require(x.allFinite(), ErrorKind::numeric,
            "generate: non-finite sample at step t=" + std::to_string(t));
  }
  return x;
}

NoiseSchedule cosine_schedule(int T, double s) {
  require(T >= 1, ErrorKind::config, "schedule length must be >= 1");
  auto f = [&](double t) {
    double v = std::cos((t / T + s) / (1.0 + s) * M_PI / 2.0);
    return v * v;
  };

  NoiseSchedule sch;
  sch.T = T;
  sch.beta.assign(T + 1, 0.0);
  sch.alpha.assign(T + 1, 0.0);
  sch.alpha_bar.assign(T + 1, 1.0);

  double f0 = f(0.0);
  double prev = 1.0;
  for (int t = 1; t <= T; ++t) {
    double ab = f(static_cast<double>(t)) / f0;
    double b = 1.0 - ab / prev;
    b = std::clamp(b, 1e-6, 0.999);
    sch.beta[t] = b;
    sch.alpha[t] = 1.0 - b;
    sch.alpha_bar[t] = sch.alpha_bar[t - 1] * sch.alpha[t];
    prev = ab;
  }
  return sch;
}

}  // namespace dpcc
