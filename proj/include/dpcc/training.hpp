#pragma once

#include "dpcc/geometry.hpp"
#include "dpcc/model.hpp"
#include "dpcc/schedule.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace dpcc {

struct TrainConfig {
  double lambda = 1.0;  // rate weight, in loss units per bit per point
  double gamma = 1.0;   // chamfer weight relative to the noise regression
  long long steps = 80000;
  int batch = 48;
  double lr = 1e-4;
  double lr_decay = 0.5;
  long long lr_decay_every = 30000;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  int points_per_cloud = 2048;  // larger clouds are subsampled per draw
  long long metrics_every = 100;
  long long checkpoint_every = 10000;
  uint64_t seed = 1;

  void validate() const;
  double lr_at(long long step) const;  // step counts from zero
};

/// Swap the real denoiser out of the loss, keeping everything else intact.
using DenoiserOverride = std::function<nn::Var(const Mat& x_t, const ConditionSet&)>;

/// One rate-distortion sample for a single normalized cloud: noise regression
/// at a random timestep, chamfer on the implied clean-cloud estimate, and the
/// estimated code length of the quantized latents.
struct RdLoss {
  nn::Var total;       // d_mse + gamma * d_cd + lambda * bpp, on the tape
  double d_mse = 0.0;  // mean squared noise prediction error
  double d_cd = 0.0;   // chamfer between predicted and true clean cloud
  double bpp = 0.0;    // estimated bits per point
};

RdLoss rd_loss(const Model& model, const Mat& points, std::optional<int> label,
               const TrainConfig& cfg, const NoiseSchedule& sched, Rng& rng,
               const DenoiserOverride& denoiser_override = nullptr);

struct TrainMetric {
  long long step = 0;
  double loss = 0.0;
  double d_mse = 0.0;
  double d_cd = 0.0;
  double bpp = 0.0;
};

struct TrainResult {
  std::vector<TrainMetric> history;  // step 0, every metrics_every, final step
};

/// Minimize the batch-averaged rd_loss with Adam over shuffled epochs.
/// `metrics_path` (when set) gets a CSV of the history; `checkpoint_path`
/// (when set) is rewritten every checkpoint_every steps and at the end.
TrainResult train_model(Model& model, const std::vector<PointCloud>& clouds,
                        const TrainConfig& cfg, const std::string& checkpoint_path = "",
                        const std::string& metrics_path = "",
                        const DenoiserOverride& denoiser_override = nullptr);

}  // namespace dpcc
