#include "dpcc/generator.hpp"

#include "dpcc/geometry.hpp"

#include <cmath>

namespace dpcc {

using nn::Var;

void DenoiserConfig::validate() const {
  require(C >= 6 && C % 6 == 0, ErrorKind::config,
          "denoiser: C must be a positive multiple of 6");
  require(heads >= 1 && C % heads == 0, ErrorKind::config,
          "denoiser: C must be divisible by the head count");
  require(S >= 1, ErrorKind::config, "denoiser: S must be positive");
  require(k >= 1, ErrorKind::config, "denoiser: k must be positive");
  require(label_vocab >= 0, ErrorKind::config, "denoiser: label_vocab must be nonnegative");
}

Mat positional_encode(const Mat& points, int dim) {
  require(dim >= 6 && dim % 6 == 0, ErrorKind::config,
          "positional encoding width must be a positive multiple of 6");
  require(points.cols() == 3, ErrorKind::numeric, "positional encoding expects N x 3 input");
  const int bands = dim / 6;
  const int half = dim / 2;
  Mat out(points.rows(), dim);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (int j = 0; j < bands; ++j) {
      const double freq = std::ldexp(M_PI, j);  // 2^j * pi
      for (int c = 0; c < 3; ++c) {
        const double arg = freq * points(i, c);
        out(i, j * 3 + c) = std::sin(arg);
        out(i, half + j * 3 + c) = std::cos(arg);
      }
    }
  }
  return out;
}

Mat inverse_distance_weights(const Mat& queries, const Mat& reference, const IMat& idx) {
  require(idx.rows() == queries.rows(), ErrorKind::numeric,
          "interpolation: index rows must match queries");
  Mat weights(idx.rows(), idx.cols());
  for (Eigen::Index i = 0; i < idx.rows(); ++i) {
    double total = 0.0;
    for (Eigen::Index j = 0; j < idx.cols(); ++j) {
      double d2 = (queries.row(i) - reference.row(idx(i, j))).squaredNorm();
      weights(i, j) = 1.0 / (d2 + 1e-8);
      total += weights(i, j);
    }
    weights.row(i) /= total;
  }
  return weights;
}

Denoiser::Denoiser(const DenoiserConfig& config, nn::ParameterStore& params,
                   const std::string& prefix, Rng& rng)
    : config_(config), params_(params), prefix_(prefix) {
  config_.validate();
  const int C = config_.C;

  auto dense = [&](const std::string& name, int in, int out) {
    params_.create(prefix_ + name + ".W", nn::glorot(in, out, rng));
    params_.create(prefix_ + name + ".b", Mat::Zero(1, out));
  };
  auto modulation = [&](const std::string& site) {
    // zero init so conditioning starts as the identity on normalized features
    params_.create(prefix_ + site + ".scale.W", Mat::Zero(C, C));
    params_.create(prefix_ + site + ".scale.b", Mat::Zero(1, C));
    params_.create(prefix_ + site + ".shift.W", Mat::Zero(C, C));
    params_.create(prefix_ + site + ".shift.b", Mat::Zero(1, C));
  };

  dense(".stem.l1", 3, 64);
  dense(".stem.l2", 64, 128);
  dense(".stem.l3", 128, C);
  dense(".cond.sched", 2, C);
  dense(".cond.shape", C, C);
  if (config_.label_vocab > 0)
    params_.create(prefix_ + ".cond.label", nn::glorot(config_.label_vocab, C, rng));
  modulation(".ada0");
  dense(".tok", C, C);
  dense(".xattn.q", C, C);
  dense(".xattn.k", C, C);
  dense(".xattn.v", C, C);
  modulation(".ada1");
  dense(".sattn.q", C, C);
  dense(".sattn.k", C, C);
  dense(".sattn.v", C, C);
  dense(".sattn.o", C, C);
  dense(".up", 2 * C, C);
  dense(".head", C, 3);
}

namespace {

Var dense_apply(const nn::ParameterStore& ps, const std::string& name, const Var& x) {
  return nn::linear(x, ps.get(name + ".W"), ps.get(name + ".b"));
}

Mat timestep_embedding(int t, int dim) {
  // classic sinusoid pair bank over half the width
  const int half = dim / 2;
  Mat out(1, dim);
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * i / half);
    out(0, i) = std::sin(t * freq);
    out(0, half + i) = std::cos(t * freq);
  }
  if (dim % 2) out(0, dim - 1) = 0.0;
  return out;
}

void check_stage(const Var& v, const char* stage) {
  require(v->value.allFinite(), ErrorKind::numeric,
          std::string("denoiser produced non-finite values at ") + stage);
}

}  // namespace

Var Denoiser::adaln(int site, const Var& features, const Var& cond_vec) const {
  require(site == 0 || site == 1, ErrorKind::usage, "adaln: unknown modulation site");
  const std::string base = prefix_ + (site == 0 ? ".ada0" : ".ada1");
  require(cond_vec->value.cols() == config_.C, ErrorKind::numeric,
          "adaln: condition width mismatch");
  require(cond_vec->value.rows() == 1 || cond_vec->value.rows() == features->value.rows(),
          ErrorKind::numeric, "adaln: condition rows neither broadcast nor aligned");
  require(features->value.cols() == config_.C, ErrorKind::numeric,
          "adaln: feature width mismatch");
  Var scale = dense_apply(params_, base + ".scale", cond_vec);
  Var shift = dense_apply(params_, base + ".shift", cond_vec);
  Var normed = nn::layer_norm(features);
  return nn::add(nn::mul(normed, nn::add_scalar(scale, 1.0)), shift);
}

Var Denoiser::mix_tokens(const Var& tokens) const {
  const int C = config_.C;
  require(tokens->value.cols() == C, ErrorKind::numeric, "mix_tokens: width mismatch");
  const int dh = C / config_.heads;
  Var q = dense_apply(params_, prefix_ + ".sattn.q", tokens);
  Var key = dense_apply(params_, prefix_ + ".sattn.k", tokens);
  Var val = dense_apply(params_, prefix_ + ".sattn.v", tokens);
  Var mixed;
  for (int h = 0; h < config_.heads; ++h) {
    Var qh = nn::slice_cols(q, h * dh, dh);
    Var kh = nn::slice_cols(key, h * dh, dh);
    Var vh = nn::slice_cols(val, h * dh, dh);
    Var attn = nn::softmax_rows(
        nn::mul_scalar(nn::matmul(qh, nn::transpose(kh)), 1.0 / std::sqrt(double(dh))));
    Var oh = nn::matmul(attn, vh);
    mixed = mixed ? nn::concat_cols(mixed, oh) : oh;
  }
  return nn::add(tokens, dense_apply(params_, prefix_ + ".sattn.o", mixed));
}

Var Denoiser::global_condition(const ConditionSet& cond) const {
  const int C = config_.C;
  require(std::isfinite(cond.beta_t) && std::isfinite(cond.alpha_bar_t), ErrorKind::numeric,
          "condition: schedule scalars must be finite");
  require(cond.y_l_hat && cond.y_l_hat->value.rows() == 1 &&
              cond.y_l_hat->value.cols() == C,
          ErrorKind::numeric, "condition: shape latent must be 1 x C");

  Var g = nn::constant(timestep_embedding(cond.t, C));
  Mat sched(1, 2);
  sched << cond.beta_t, cond.alpha_bar_t;
  g = nn::add(g, dense_apply(params_, prefix_ + ".cond.sched", nn::constant(sched)));
  g = nn::add(g, dense_apply(params_, prefix_ + ".cond.shape", cond.y_l_hat));
  if (config_.label_vocab > 0 && cond.label) {
    require(*cond.label >= 0 && *cond.label < config_.label_vocab, ErrorKind::config,
            "condition: label outside the embedding table");
    g = nn::add(g, nn::gather_rows(params_.get(prefix_ + ".cond.label"), {*cond.label}));
  }
  return g;
}

Var Denoiser::forward(const Mat& x_t, const ConditionSet& cond) const {
  const int C = config_.C, S = config_.S, k = config_.k;
  const Eigen::Index N = x_t.rows();
  require(x_t.cols() == 3, ErrorKind::numeric, "denoiser: input must be N x 3");
  require(N >= S, ErrorKind::numeric, "denoiser: fewer points than tokens");
  require(x_t.allFinite(), ErrorKind::numeric, "denoiser: non-finite input");
  require(cond.y_h_hat && cond.y_h_hat->value.rows() == S &&
              cond.y_h_hat->value.cols() == C,
          ErrorKind::numeric, "denoiser: detail latent must be S x C");

  // (1) per-point stem plus trigonometric embedding
  Var f = nn::constant(x_t);
  f = nn::silu(dense_apply(params_, prefix_ + ".stem.l1", f));
  f = nn::silu(dense_apply(params_, prefix_ + ".stem.l2", f));
  f = dense_apply(params_, prefix_ + ".stem.l3", f);
  f = nn::add(f, nn::constant(positional_encode(x_t, C)));
  check_stage(f, "stage 1 (point stem)");

  // (2) global conditioning
  Var points_cond = adaln(0, f, global_condition(cond));
  check_stage(points_cond, "stage 2 (global conditioning)");

  // (3) token pooling around FPS centers, with a trig branch on the group
  // geometry so tokens see raw local structure as well as learned features
  std::vector<int> center_idx = farthest_point_sample(x_t, S);
  Mat centers(S, 3);
  for (int s = 0; s < S; ++s) centers.row(s) = x_t.row(center_idx[s]);
  IMat neighbors = knn(centers, x_t, std::min<int>(k, static_cast<int>(N)));
  const int kk = static_cast<int>(neighbors.cols());
  std::vector<int> flat(S * kk);
  Mat rel(S * kk, 3);
  for (int s = 0; s < S; ++s)
    for (int j = 0; j < kk; ++j) {
      flat[s * kk + j] = neighbors(s, j);
      rel.row(s * kk + j) = x_t.row(neighbors(s, j)) - centers.row(s);
    }
  Var pooled = nn::group_max(nn::gather_rows(points_cond, flat), S);
  Var trig = nn::group_max(
      nn::silu(dense_apply(params_, prefix_ + ".tok", nn::constant(positional_encode(rel, C)))),
      S);
  Var tokens = nn::add(pooled, trig);
  check_stage(tokens, "stage 3 (token pooling)");

  // (4) cross-attention against the detail latent, then token conditioning
  {
    Var q = dense_apply(params_, prefix_ + ".xattn.q", tokens);
    Var key = dense_apply(params_, prefix_ + ".xattn.k", cond.y_h_hat);
    Var val = dense_apply(params_, prefix_ + ".xattn.v", cond.y_h_hat);
    Var attn = nn::softmax_rows(
        nn::mul_scalar(nn::matmul(q, nn::transpose(key)), 1.0 / std::sqrt(double(C))));
    tokens = adaln(1, tokens, nn::matmul(attn, val));
  }
  check_stage(tokens, "stage 4 (detail conditioning)");

  // (5) one residual self-attention block over tokens
  tokens = mix_tokens(tokens);
  check_stage(tokens, "stage 5 (self-attention)");

  // (6) inverse-distance interpolation back to points
  const int ki = std::min(3, S);
  IMat up_idx = knn(x_t, centers, ki);
  Var interp;
  {
    Mat weights = inverse_distance_weights(x_t, centers, up_idx);
    for (int j = 0; j < ki; ++j) {
      std::vector<int> col(N);
      for (Eigen::Index i = 0; i < N; ++i) col[i] = up_idx(i, j);
      Var term = nn::mul(nn::gather_rows(tokens, col), nn::constant(weights.col(j)));
      interp = interp ? nn::add(interp, term) : term;
    }
  }
  Var up = nn::silu(
      dense_apply(params_, prefix_ + ".up", nn::concat_cols(interp, points_cond)));
  check_stage(up, "stage 6 (upsampling)");

  // (7) noise head
  Var eps_hat = dense_apply(params_, prefix_ + ".head", up);
  check_stage(eps_hat, "stage 7 (head)");
  return eps_hat;
}

}  // namespace dpcc
