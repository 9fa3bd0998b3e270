#pragma once

#include "dpcc/autodiff.hpp"
#include "dpcc/common.hpp"

#include <string>

namespace dpcc {

/// Probabilities handed to the rate estimate and the coder never go below
/// this floor (2^-16, one count in a 16-bit frequency table).
constexpr double kProbFloor = 1.0 / 65536.0;

/// Learned per-channel density for latents coded without side information.
/// Each channel owns a monotone map c: R -> (0,1) built from three composed
/// nonnegative-weight affine layers (widths 1-3-3-1) with bounded
/// nonlinearities between them; symbol probability is c(y+1/2) - c(y-1/2).
class FactorizedModel {
public:
  /// Registers 28 parameters per channel under `prefix.` in the store.
  /// init_scale sets the initial spread of the density (the initial map is
  /// close to a logistic CDF with this scale).
  FactorizedModel(int channels, nn::ParameterStore& ps, const std::string& prefix, Rng& rng,
                  double init_scale = 4.0);

  int channels() const { return C_; }

  /// Cumulative map, elementwise per channel. x is n x C.
  nn::Var cdf(const nn::Var& x) const;
  /// Raw telescoping probability c(y+1/2) - c(y-1/2), unfloored.
  nn::Var pmf_raw(const nn::Var& y) const;
  /// Floored probability used for rates and coding.
  nn::Var likelihood(const nn::Var& y) const;

  /// Plain-value evaluations for CDF table construction (no tape).
  double cdf_scalar(double x, int channel) const;
  double pmf_scalar(int symbol, int channel) const;

private:
  int C_;
  nn::Var H1_, b1_, a1_;  // 3xC each
  nn::Var H2_, b2_, a2_;  // 9xC, 3xC, 3xC
  nn::Var H3_, b3_;       // 3xC, 1xC
};

/// Conditional density for latents whose (mu, sigma) come from the
/// hyperprior: a Gaussian convolved with the unit quantization box,
/// p(y) = Phi((y - mu + 1/2)/sigma) - Phi((y - mu - 1/2)/sigma).
struct GaussianConditional {
  static nn::Var pmf_raw(const nn::Var& y, const nn::Var& mu, const nn::Var& sigma);
  static nn::Var likelihood(const nn::Var& y, const nn::Var& mu, const nn::Var& sigma);
  static double pmf_scalar(int symbol, double mu, double sigma);
};

/// Rounding used at test time: half cases go away from zero.
Mat quantize_test(const Mat& y);
/// Training proxy: additive Uniform(-1/2, 1/2) noise.
Mat quantize_train_noise(const Mat& y, Rng& rng);
/// Tape version of the training proxy (noise enters as a constant).
nn::Var quantize_train(const nn::Var& y, Rng& rng);

/// Total information content of a likelihood array: -sum log2 p. 1x1.
nn::Var bits_from_likelihood(const nn::Var& p);

}  // namespace dpcc
