#include "dpcc/latent_codec.hpp"

#include "dpcc/generator.hpp"
#include "dpcc/geometry.hpp"

#include <cmath>

namespace dpcc {

using nn::Var;

void CompressorConfig::validate() const {
  require(C >= 6 && C % 6 == 0, ErrorKind::config,
          "compressor: C must be a positive multiple of 6");
  require(C_z >= 1, ErrorKind::config, "compressor: C_z must be positive");
  require(S >= 1, ErrorKind::config, "compressor: S must be positive");
  require(k_enc >= 1, ErrorKind::config, "compressor: k_enc must be positive");
}

Compressor::Compressor(const CompressorConfig& config, nn::ParameterStore& params,
                       const std::string& prefix, Rng& rng)
    : config_(config), params_(params), prefix_(prefix) {
  config_.validate();
  const int C = config_.C, Cz = config_.C_z, S = config_.S;

  auto dense = [&](const std::string& name, int in, int out) {
    params_.create(prefix_ + name + ".W", nn::glorot(in, out, rng));
    params_.create(prefix_ + name + ".b", Mat::Zero(1, out));
  };
  dense(".shape.l1", 3, 64);
  dense(".shape.l2", 64, 128);
  dense(".shape.l3", 128, C);
  dense(".detail", C, C);
  dense(".hyper_enc.l1", C, C);
  dense(".hyper_enc.l2", C, Cz);
  dense(".hyper_dec.l1", Cz, Cz);
  dense(".hyper_dec.l2", Cz, 2 * S * C);

  shape_model_ = std::make_unique<FactorizedModel>(C, params_, prefix_ + ".em_shape", rng);
  hyper_model_ = std::make_unique<FactorizedModel>(Cz, params_, prefix_ + ".em_hyper", rng);
}

namespace {

Var dense_apply(const nn::ParameterStore& ps, const std::string& name, const Var& x) {
  return nn::linear(x, ps.get(name + ".W"), ps.get(name + ".b"));
}

}  // namespace

Var Compressor::encode_shape_latent(const Mat& points) const {
  require(points.rows() >= 1 && points.cols() == 3, ErrorKind::numeric,
          "shape encoder: need an N x 3 cloud");
  require(points.allFinite(), ErrorKind::numeric, "shape encoder: non-finite input");
  Var h = nn::constant(points);
  h = nn::silu(dense_apply(params_, prefix_ + ".shape.l1", h));
  h = nn::silu(dense_apply(params_, prefix_ + ".shape.l2", h));
  h = dense_apply(params_, prefix_ + ".shape.l3", h);
  return nn::group_max(h, 1);
}

Var Compressor::encode_detail_latent(const Mat& points) const {
  const int S = config_.S, k = config_.k_enc;
  require(points.cols() == 3, ErrorKind::numeric, "detail encoder: need an N x 3 cloud");
  require(points.rows() >= S, ErrorKind::numeric,
          "detail encoder: cloud smaller than token count");
  require(points.allFinite(), ErrorKind::numeric, "detail encoder: non-finite input");

  std::vector<int> center_idx = farthest_point_sample(points, S);
  Mat centers(S, 3);
  for (int s = 0; s < S; ++s) centers.row(s) = points.row(center_idx[s]);
  IMat neighbors = knn(centers, points, k);

  Mat rel(S * k, 3);
  for (int s = 0; s < S; ++s)
    for (int j = 0; j < k; ++j)
      rel.row(s * k + j) = points.row(neighbors(s, j)) - centers.row(s);

  Var h = nn::constant(positional_encode(rel, config_.C));
  h = nn::silu(dense_apply(params_, prefix_ + ".detail", h));
  return nn::group_max(h, S);
}

Var Compressor::hyper_encode(const Var& y_h) const {
  require(y_h->value.rows() == config_.S && y_h->value.cols() == config_.C, ErrorKind::numeric,
          "hyper encoder: detail latent has the wrong shape");
  Var h = nn::silu(dense_apply(params_, prefix_ + ".hyper_enc.l1", y_h));
  return dense_apply(params_, prefix_ + ".hyper_enc.l2", nn::mean_rows(h));
}

void Compressor::hyper_decode(const Var& z_hat, Var& mu, Var& sigma) const {
  const int S = config_.S, C = config_.C;
  require(z_hat->value.rows() == 1 && z_hat->value.cols() == config_.C_z, ErrorKind::numeric,
          "hyper decoder: latent has the wrong shape");
  Var h = nn::silu(dense_apply(params_, prefix_ + ".hyper_dec.l1", z_hat));
  Var out = dense_apply(params_, prefix_ + ".hyper_dec.l2", h);
  mu = nn::reshape(nn::slice_cols(out, 0, S * C), S, C);
  // additive floor keeps sigma >= 0.04 with live gradients everywhere
  sigma = nn::add_scalar(nn::softplus(nn::reshape(nn::slice_cols(out, S * C, S * C), S, C)),
                         0.04);
}

LatentTriple Compressor::extract(const Mat& points, bool train_mode, Rng* rng) const {
  LatentTriple t;
  t.y_l = encode_shape_latent(points);
  t.y_h = encode_detail_latent(points);
  t.z = hyper_encode(t.y_h);
  if (train_mode) {
    require(rng != nullptr, ErrorKind::usage, "train-mode quantization needs an rng");
    t.q_l = quantize_train(t.y_l, *rng);
    t.q_h = quantize_train(t.y_h, *rng);
    t.q_z = quantize_train(t.z, *rng);
  } else {
    t.q_l = nn::constant(quantize_test(t.y_l->value));
    t.q_h = nn::constant(quantize_test(t.y_h->value));
    t.q_z = nn::constant(quantize_test(t.z->value));
  }
  return t;
}

Var Compressor::estimate_rate(const LatentTriple& triple) const {
  Var bits_shape = bits_from_likelihood(shape_model_->likelihood(triple.q_l));
  Var mu, sigma;
  hyper_decode(triple.q_z, mu, sigma);
  Var bits_detail =
      bits_from_likelihood(GaussianConditional::likelihood(triple.q_h, mu, sigma));
  Var bits_hyper = bits_from_likelihood(hyper_model_->likelihood(triple.q_z));
  return nn::add(nn::add(bits_shape, bits_detail), bits_hyper);
}

}  // namespace dpcc
