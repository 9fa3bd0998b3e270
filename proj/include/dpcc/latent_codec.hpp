#pragma once

#include "dpcc/autodiff.hpp"
#include "dpcc/common.hpp"
#include "dpcc/entropy_model.hpp"

#include <memory>
#include <string>

namespace dpcc {

struct CompressorConfig {
  int C = 288;     // latent width
  int C_z = 96;    // hyperprior width
  int S = 64;      // detail token count
  int k_enc = 16;  // encoder neighborhood size
  void validate() const;
};

/// The three transmitted latents and their quantized counterparts. All live
/// on the tape so train-mode quantization keeps the graph connected; in test
/// mode the quantized entries are exact integers.
struct LatentTriple {
  nn::Var y_l;  // 1 x C
  nn::Var y_h;  // S x C
  nn::Var z;    // 1 x C_z
  nn::Var q_l;
  nn::Var q_h;
  nn::Var q_z;
};

/// Dual-branch analysis transform plus the likelihood models needed to code
/// its outputs: a permutation-invariant global branch, a local detail branch
/// over FPS neighborhoods, and a hyperprior that predicts per-element
/// Gaussian parameters for the detail stream.
class Compressor {
public:
  Compressor(const CompressorConfig& config, nn::ParameterStore& params,
             const std::string& prefix, Rng& rng);

  nn::Var encode_shape_latent(const Mat& points) const;   // 1 x C
  nn::Var encode_detail_latent(const Mat& points) const;  // S x C
  nn::Var hyper_encode(const nn::Var& y_h) const;         // 1 x C_z
  /// mu, sigma both S x C; sigma >= 0.04 everywhere.
  void hyper_decode(const nn::Var& z_hat, nn::Var& mu, nn::Var& sigma) const;

  /// Full analysis pass. Train mode perturbs with uniform noise drawn from
  /// rng (order: y_l, y_h, z); test mode rounds half away from zero.
  LatentTriple extract(const Mat& points, bool train_mode, Rng* rng) const;

  /// Total bits to code the triple: factorized model over the shape latent,
  /// hyperprior-conditioned Gaussians over the detail latent, a second
  /// factorized model over the hyper latent.
  nn::Var estimate_rate(const LatentTriple& triple) const;

  const CompressorConfig& config() const { return config_; }
  const FactorizedModel& shape_model() const { return *shape_model_; }
  const FactorizedModel& hyper_model() const { return *hyper_model_; }

private:
  CompressorConfig config_;
  nn::ParameterStore& params_;
  std::string prefix_;
  std::unique_ptr<FactorizedModel> shape_model_;
  std::unique_ptr<FactorizedModel> hyper_model_;
};

}  // namespace dpcc
