#include "dpcc/training.hpp"

#include "dpcc/geometry.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

namespace dpcc {

using nn::Var;

void TrainConfig::validate() const {
  require(lambda >= 0.0 && gamma >= 0.0, ErrorKind::config,
          "train: loss weights must be nonnegative");
  require(steps >= 1, ErrorKind::config, "train: steps must be positive");
  require(batch >= 1, ErrorKind::config, "train: batch must be positive");
  require(lr > 0.0, ErrorKind::config, "train: lr must be positive");
  require(lr_decay > 0.0 && lr_decay <= 1.0, ErrorKind::config,
          "train: lr_decay must be in (0, 1]");
  require(lr_decay_every >= 1, ErrorKind::config, "train: lr_decay_every must be positive");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0,
          ErrorKind::config, "train: Adam betas must be in [0, 1)");
  require(points_per_cloud >= 1, ErrorKind::config,
          "train: points_per_cloud must be positive");
  require(metrics_every >= 1 && checkpoint_every >= 1, ErrorKind::config,
          "train: cadences must be positive");
}

double TrainConfig::lr_at(long long step) const {
  return lr * std::pow(lr_decay, static_cast<double>(step / lr_decay_every));
}

namespace {

// first `count` entries of a random permutation of the rows
Mat subsample_rows(const Mat& points, int count, Rng& rng) {
  auto n = points.rows();
  if (n <= count) return points;
  std::vector<Eigen::Index> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  for (int i = 0; i < count; ++i) {
    int j = rng.uniform_int(i, static_cast<int>(n) - 1);
    std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
  }
  Mat out(count, points.cols());
  for (int i = 0; i < count; ++i) out.row(i) = points.row(idx[static_cast<size_t>(i)]);
  return out;
}

void shuffle_indices(std::vector<size_t>& idx, Rng& rng) {
  for (size_t i = idx.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rng.uniform_int(0, static_cast<int>(i) - 1));
    std::swap(idx[i - 1], idx[j]);
  }
}

}  // namespace

RdLoss rd_loss(const Model& model, const Mat& points, std::optional<int> label,
               const TrainConfig& cfg, const NoiseSchedule& sched, Rng& rng,
               const DenoiserOverride& denoiser_override) {
  const ModelConfig& mc = model.config();
  Mat x0 = subsample_rows(points, cfg.points_per_cloud, rng);
  auto n = x0.rows();
  require(n >= mc.S, ErrorKind::config, "train: cloud smaller than the token count");

  int t = rng.uniform_int(1, sched.T);
  Mat eps = rng.normal_mat(n, 3);
  Mat x_t = sched.forward_sample(x0, t, eps);

  LatentTriple triple = model.compressor().extract(x0, true, &rng);

  ConditionSet cond;
  cond.t = t;
  cond.beta_t = sched.beta[t];
  cond.alpha_bar_t = sched.alpha_bar[t];
  if (mc.label_vocab > 0 && label) {
    require(*label >= 0 && *label < mc.label_vocab, ErrorKind::config,
            "train: label outside the model's embedding table");
    cond.label = label;
  }
  cond.y_l_hat = mc.use_shape_latent ? triple.q_l : nn::constant(Mat::Zero(1, mc.C));
  cond.y_h_hat = mc.use_detail_latent ? triple.q_h : nn::constant(Mat::Zero(mc.S, mc.C));

  Var eps_hat =
      denoiser_override ? denoiser_override(x_t, cond) : model.denoiser().forward(x_t, cond);

  Var d_mse = nn::mean_all(nn::square(nn::sub(eps_hat, nn::constant(eps))));

  double ab = sched.alpha_bar[static_cast<size_t>(t)];
  require(ab >= 1e-8, ErrorKind::numeric, "train: alpha_bar too small to invert");
  Var x0_hat = nn::mul_scalar(
      nn::sub(nn::constant(x_t), nn::mul_scalar(eps_hat, std::sqrt(1.0 - ab))),
      1.0 / std::sqrt(ab));
  Var d_cd = nn::chamfer(x0_hat, nn::constant(x0));

  Var bpp = nn::mul_scalar(model.rate_bits(triple), 1.0 / static_cast<double>(n));

  RdLoss out;
  out.total = nn::add(nn::add(d_mse, nn::mul_scalar(d_cd, cfg.gamma)),
                      nn::mul_scalar(bpp, cfg.lambda));
  out.d_mse = d_mse->value(0, 0);
  out.d_cd = d_cd->value(0, 0);
  out.bpp = bpp->value(0, 0);
  return out;
}

TrainResult train_model(Model& model, const std::vector<PointCloud>& clouds,
                        const TrainConfig& cfg, const std::string& checkpoint_path,
                        const std::string& metrics_path,
                        const DenoiserOverride& denoiser_override) {
  cfg.validate();
  require(!clouds.empty(), ErrorKind::config, "train: no training clouds");
  for (const PointCloud& c : clouds)
    require(c.size() >= model.config().S, ErrorKind::config,
            "train: cloud smaller than the token count");

  std::vector<Mat> normed;
  normed.reserve(clouds.size());
  for (const PointCloud& c : clouds)
    normed.push_back(normalize(c.points, compute_normalization(c.points)));

  NoiseSchedule sched = cosine_schedule(model.config().T);
  Rng rng(mix_seed(cfg.seed, 0));
  nn::Adam opt(model.params(), cfg.lr, cfg.adam_beta1, cfg.adam_beta2);

  std::ofstream metrics;
  if (!metrics_path.empty()) {
    metrics.open(metrics_path);
    require(metrics.good(), ErrorKind::io, "train: cannot write metrics to " + metrics_path);
    metrics << "step,loss,d_mse,d_cd,bpp\n";
  }

  auto save = [&] {
    if (checkpoint_path.empty()) return;
    model.trained_lambda = cfg.lambda;
    model.trained_gamma = cfg.gamma;
    save_checkpoint(model, checkpoint_path);
  };

  TrainResult result;
  auto record = [&](long long step, double loss, double mse, double cd, double b) {
    result.history.push_back({step, loss, mse, cd, b});
    if (metrics.is_open())
      metrics << step << ',' << loss << ',' << mse << ',' << cd << ',' << b << '\n';
  };

  std::vector<size_t> queue;
  auto next_cloud = [&]() -> size_t {
    if (queue.empty()) {
      queue.resize(clouds.size());
      std::iota(queue.begin(), queue.end(), size_t{0});
      shuffle_indices(queue, rng);
    }
    size_t i = queue.back();
    queue.pop_back();
    return i;
  };

  for (long long step = 0; step < cfg.steps; ++step) {
    opt.set_lr(cfg.lr_at(step));
    model.params().zero_grad();

    Var total;
    double mse = 0.0, cd = 0.0, bpp = 0.0;
    for (int b = 0; b < cfg.batch; ++b) {
      size_t i = next_cloud();
      RdLoss loss =
          rd_loss(model, normed[i], clouds[i].label, cfg, sched, rng, denoiser_override);
      total = (b == 0) ? loss.total : nn::add(total, loss.total);
      mse += loss.d_mse;
      cd += loss.d_cd;
      bpp += loss.bpp;
    }
    total = nn::mul_scalar(total, 1.0 / cfg.batch);
    mse /= cfg.batch;
    cd /= cfg.batch;
    bpp /= cfg.batch;

    double value = total->value(0, 0);
    require(std::isfinite(value), ErrorKind::numeric, "train: loss became non-finite");
    nn::backward(total);
    opt.step();
    model.trained_steps += 1;

    if (step % cfg.metrics_every == 0 || step + 1 == cfg.steps)
      record(step, value, mse, cd, bpp);
    if ((step + 1) % cfg.checkpoint_every == 0 && step + 1 != cfg.steps) save();
  }
  save();
  return result;
}

}  // namespace dpcc
