#include "dpcc/entropy_model.hpp"

#include <cmath>

namespace dpcc {

using nn::Var;

namespace {

const double kLn2 = std::log(2.0);
const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

double softplus_d(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

}  // namespace

FactorizedModel::FactorizedModel(int channels, nn::ParameterStore& ps, const std::string& prefix,
                                 Rng& rng, double init_scale) : C_(channels) {
  require(channels >= 1, ErrorKind::config, "factorized model needs at least one channel");
  require(init_scale > 0, ErrorKind::config, "init_scale must be positive");

  // Per-stage scale so the composed affine maps multiply out to 1/init_scale;
  // weights start at softplus^-1(1/(stage_scale * fan_out)).
  const double stage = std::cbrt(init_scale);
  auto filled = [&](int rows, double fan_out) {
    double w = 1.0 / (stage * fan_out);
    double raw = std::log(std::expm1(w));
    return Mat::Constant(rows, C_, raw);
  };

  H1_ = ps.create(prefix + ".H1", filled(3, 3.0));
  b1_ = ps.create(prefix + ".b1", rng.uniform_mat(3, C_, -0.5, 0.5));
  a1_ = ps.create(prefix + ".a1", Mat::Zero(3, C_));
  H2_ = ps.create(prefix + ".H2", filled(9, 3.0));
  b2_ = ps.create(prefix + ".b2", rng.uniform_mat(3, C_, -0.5, 0.5));
  a2_ = ps.create(prefix + ".a2", Mat::Zero(3, C_));
  H3_ = ps.create(prefix + ".H3", filled(3, 1.0));
  b3_ = ps.create(prefix + ".b3", rng.uniform_mat(1, C_, -0.5, 0.5));
}

Var FactorizedModel::cdf(const Var& x) const {
  using namespace nn;
  require(x->value.cols() == C_, ErrorKind::numeric,
          "factorized cdf: channel count mismatch");
  auto row = [](const Var& p, int j) { return gather_rows(p, {j}); };

  // layer 1: scalar input fans out to three hidden units per channel
  Var h[3];
  for (int j = 0; j < 3; ++j) {
    Var u = add(mul(x, softplus(row(H1_, j))), row(b1_, j));
    h[j] = add(u, mul(nn::tanh(u), nn::tanh(row(a1_, j))));
  }
  // layer 2: dense 3 -> 3, weights kept nonnegative through softplus
  Var h2[3];
  for (int j = 0; j < 3; ++j) {
    Var u = mul(h[0], softplus(row(H2_, j * 3 + 0)));
    u = add(u, mul(h[1], softplus(row(H2_, j * 3 + 1))));
    u = add(u, mul(h[2], softplus(row(H2_, j * 3 + 2))));
    u = add(u, row(b2_, j));
    h2[j] = add(u, mul(nn::tanh(u), nn::tanh(row(a2_, j))));
  }
  // layer 3: collapse to one logit per channel, squash to (0,1)
  Var u = mul(h2[0], softplus(row(H3_, 0)));
  u = add(u, mul(h2[1], softplus(row(H3_, 1))));
  u = add(u, mul(h2[2], softplus(row(H3_, 2))));
  u = add(u, b3_);
  return sigmoid(u);
}

Var FactorizedModel::pmf_raw(const Var& y) const {
  using namespace nn;
  return sub(cdf(add_scalar(y, 0.5)), cdf(add_scalar(y, -0.5)));
}

Var FactorizedModel::likelihood(const Var& y) const {
  return nn::clamp_min(pmf_raw(y), kProbFloor);
}

double FactorizedModel::cdf_scalar(double x, int channel) const {
  require(channel >= 0 && channel < C_, ErrorKind::numeric, "factorized cdf: bad channel");
  const Mat &H1 = H1_->value, &b1 = b1_->value, &a1 = a1_->value;
  const Mat &H2 = H2_->value, &b2 = b2_->value, &a2 = a2_->value;
  const Mat &H3 = H3_->value, &b3 = b3_->value;

  double h[3];
  for (int j = 0; j < 3; ++j) {
    double u = softplus_d(H1(j, channel)) * x + b1(j, channel);
    h[j] = u + std::tanh(a1(j, channel)) * std::tanh(u);
  }
  double h2[3];
  for (int j = 0; j < 3; ++j) {
    double u = b2(j, channel);
    for (int k = 0; k < 3; ++k) u += softplus_d(H2(j * 3 + k, channel)) * h[k];
    h2[j] = u + std::tanh(a2(j, channel)) * std::tanh(u);
  }
  double u = b3(0, channel);
  for (int k = 0; k < 3; ++k) u += softplus_d(H3(k, channel)) * h2[k];
  return 1.0 / (1.0 + std::exp(-u));
}

double FactorizedModel::pmf_scalar(int symbol, int channel) const {
  return cdf_scalar(symbol + 0.5, channel) - cdf_scalar(symbol - 0.5, channel);
}

namespace {

Var normal_cdf(const Var& x) {
  using namespace nn;
  return mul_scalar(add_scalar(nn::erf(mul_scalar(x, kInvSqrt2)), 1.0), 0.5);
}

}  // namespace

Var GaussianConditional::pmf_raw(const Var& y, const Var& mu, const Var& sigma) {
  using namespace nn;
  Var d = sub(y, mu);
  Var hi = normal_cdf(div(add_scalar(d, 0.5), sigma));
  Var lo = normal_cdf(div(add_scalar(d, -0.5), sigma));
  return sub(hi, lo);
}

Var GaussianConditional::likelihood(const Var& y, const Var& mu, const Var& sigma) {
  return nn::clamp_min(pmf_raw(y, mu, sigma), kProbFloor);
}

double GaussianConditional::pmf_scalar(int symbol, double mu, double sigma) {
  auto phi = [](double x) { return 0.5 * (1.0 + std::erf(x * kInvSqrt2)); };
  double d = symbol - mu;
  return phi((d + 0.5) / sigma) - phi((d - 0.5) / sigma);
}

Mat quantize_test(const Mat& y) {
  return y.unaryExpr([](double v) { return std::round(v); });
}

Mat quantize_train_noise(const Mat& y, Rng& rng) {
  Mat out = y;
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) += rng.uniform(-0.5, 0.5);
  return out;
}

nn::Var quantize_train(const nn::Var& y, Rng& rng) {
  Mat noise = rng.uniform_mat(y->value.rows(), y->value.cols(), -0.5, 0.5);
  return nn::add(y, nn::constant(std::move(noise)));
}

nn::Var bits_from_likelihood(const nn::Var& p) {
  return nn::mul_scalar(nn::sum_all(nn::log(p)), -1.0 / kLn2);
}

}  // namespace dpcc
