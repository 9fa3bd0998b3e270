#pragma once

#include "dpcc/autodiff.hpp"
#include "dpcc/generator.hpp"
#include "dpcc/latent_codec.hpp"

#include <memory>
#include <string>

namespace dpcc {

/// One codec instance: the compressor, the denoiser, the diffusion horizon,
/// and the ablation switches that drop either latent branch.
struct ModelConfig {
  int C = 288;
  int C_z = 96;
  int S = 64;
  int k_enc = 16;
  int k_gen = 8;
  int heads = 4;
  int label_vocab = 0;
  int T = 200;
  bool use_shape_latent = true;   // off: the global stream is not coded or used
  bool use_detail_latent = true;  // off: the detail + hyper streams are dropped

  void validate() const;
  CompressorConfig compressor() const;
  DenoiserConfig denoiser() const;
  bool operator==(const ModelConfig&) const = default;
};

class Model {
public:
  explicit Model(const ModelConfig& config, uint64_t init_seed = 7);

  const ModelConfig& config() const { return config_; }
  nn::ParameterStore& params() { return params_; }
  const nn::ParameterStore& params() const { return params_; }
  const Compressor& compressor() const { return *compressor_; }
  const Denoiser& denoiser() const { return *denoiser_; }

  /// estimate_rate restricted to the streams the config actually transmits.
  nn::Var rate_bits(const LatentTriple& triple) const;

  /// Training provenance carried in the checkpoint manifest (purely
  /// informational; zero until a trainer sets them).
  double trained_lambda = 0.0;
  double trained_gamma = 0.0;
  long long trained_steps = 0;

private:
  ModelConfig config_;
  nn::ParameterStore params_;
  std::unique_ptr<Compressor> compressor_;
  std::unique_ptr<Denoiser> denoiser_;
};

/// Checkpoint file: "DPCK" magic, little-endian u32 manifest length, a JSON
/// manifest (format version, config, training provenance, named parameter
/// shapes), then the tensors as little-endian float32 in manifest order.
void save_checkpoint(const Model& model, const std::string& path);
std::unique_ptr<Model> load_checkpoint(const std::string& path);
/// Load weights into an existing model; the stored config must match exactly.
void load_weights(Model& model, const std::string& path);

}  // namespace dpcc
