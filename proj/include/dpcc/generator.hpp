#pragma once

#include "dpcc/autodiff.hpp"
#include "dpcc/common.hpp"

#include <optional>
#include <string>

namespace dpcc {

/// Everything the denoiser is conditioned on at one timestep: the schedule
/// scalars, an optional class label, and the dequantized latents.
struct ConditionSet {
  int t = 0;
  double beta_t = 0.0;
  double alpha_bar_t = 0.0;
  std::optional<int> label;
  nn::Var y_l_hat;  // 1 x C
  nn::Var y_h_hat;  // S x C
};

struct DenoiserConfig {
  int C = 288;          // feature width
  int S = 64;           // token count
  int k = 8;            // KNN group size for token pooling
  int heads = 4;        // self-attention heads
  int label_vocab = 0;  // 0 disables label conditioning
  void validate() const;
};

/// Trigonometric point embedding: dim/6 frequency bands, all sine slots then
/// all cosine slots, each half laid out band-major then coordinate.
Mat positional_encode(const Mat& points, int dim);

/// Per-query inverse-squared-distance weights over each query's k nearest
/// reference rows, normalized to sum to 1. Returned alongside the neighbor
/// indices; used to carry token features back to points.
Mat inverse_distance_weights(const Mat& queries, const Mat& reference, const IMat& idx);

/// Noise predictor: per-point stem with positional encoding, globally
/// conditioned via adaptive layer norm, local token pooling around FPS
/// centers, cross-attention against the detail latent, one self-attention
/// block, inverse-distance upsampling back to points, linear head to 3.
class Denoiser {
public:
  Denoiser(const DenoiserConfig& config, nn::ParameterStore& params, const std::string& prefix,
           Rng& rng);

  nn::Var forward(const Mat& x_t, const ConditionSet& cond) const;
  const DenoiserConfig& config() const { return config_; }

  /// Modulation sites are exposed for the init/no-op and gradient contracts:
  /// site 0 conditions points on the global vector, site 1 conditions tokens.
  nn::Var adaln(int site, const nn::Var& features, const nn::Var& cond_vec) const;

  /// The residual multi-head self-attention block over tokens (stage 5);
  /// exposed so its permutation equivariance can be checked directly.
  nn::Var mix_tokens(const nn::Var& tokens) const;

private:
  nn::Var global_condition(const ConditionSet& cond) const;

  DenoiserConfig config_;
  nn::ParameterStore& params_;
  std::string prefix_;
};

}  // namespace dpcc
