#include "dpcc/codec.hpp"

#include "dpcc/schedule.hpp"

#include <cmath>

namespace dpcc {

using nn::Var;

std::vector<CdfTable> factorized_tables(const FactorizedModel& fm) {
  std::vector<CdfTable> tables;
  tables.reserve(fm.channels());
  for (int c = 0; c < fm.channels(); ++c)
    tables.push_back(build_cdf([&fm, c](int s) { return fm.pmf_scalar(s, c); }, 0));
  return tables;
}

CdfTable gaussian_cdf_table(double mu, double sigma) {
  int hint = static_cast<int>(std::lround(std::clamp(mu, -255.0, 255.0)));
  return build_cdf(
      [mu, sigma](int s) { return GaussianConditional::pmf_scalar(s, mu, sigma); }, hint);
}

namespace {

std::vector<int> to_symbols(const Mat& q) {
  std::vector<int> out(static_cast<size_t>(q.size()));
  size_t n = 0;
  for (Eigen::Index i = 0; i < q.rows(); ++i)
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
      double v = q(i, j);
      require(std::isfinite(v) && v == std::round(v) && std::abs(v) < 1e9,
              ErrorKind::numeric, "entropy coding: latents must be exact integers");
      out[n++] = static_cast<int>(v);
    }
  return out;
}

Mat from_symbols(const std::vector<int>& symbols, Eigen::Index rows, Eigen::Index cols) {
  Mat out(rows, cols);
  size_t n = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = symbols[n++];
  return out;
}

/// Channel tables repeat row-major across a (rows x channels) latent.
std::vector<const CdfTable*> channel_sequence(const std::vector<CdfTable>& tables,
                                              Eigen::Index rows) {
  std::vector<const CdfTable*> seq;
  seq.reserve(static_cast<size_t>(rows) * tables.size());
  for (Eigen::Index i = 0; i < rows; ++i)
    for (const CdfTable& t : tables) seq.push_back(&t);
  return seq;
}

void detail_tables(const Model& model, const Mat& q_z, std::vector<CdfTable>& storage,
                   std::vector<const CdfTable*>& seq) {
  nn::NoGradGuard ng;
  Var mu, sigma;
  model.compressor().hyper_decode(nn::constant(q_z), mu, sigma);
  const Mat& m = mu->value;
  const Mat& s = sigma->value;
  storage.clear();
  storage.reserve(static_cast<size_t>(m.size()));
  seq.clear();
  seq.reserve(static_cast<size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      storage.push_back(gaussian_cdf_table(m(i, j), s(i, j)));
  for (const CdfTable& t : storage) seq.push_back(&t);
}

}  // namespace

std::array<std::vector<uint8_t>, 3> encode_streams(const Model& model, const Mat& q_l,
                                                   const Mat& q_h, const Mat& q_z,
                                                   int* clamped) {
  const ModelConfig& cfg = model.config();
  require(q_l.rows() == 1 && q_l.cols() == cfg.C, ErrorKind::numeric,
          "encode: shape latent must be 1 x C");
  require(q_h.rows() == cfg.S && q_h.cols() == cfg.C, ErrorKind::numeric,
          "encode: detail latent must be S x C");
  require(q_z.rows() == 1 && q_z.cols() == cfg.C_z, ErrorKind::numeric,
          "encode: hyper latent must be 1 x C_z");

  std::array<std::vector<uint8_t>, 3> streams;
  if (cfg.use_shape_latent) {
    std::vector<CdfTable> tables = factorized_tables(model.compressor().shape_model());
    streams[0] = rc_encode(to_symbols(q_l), channel_sequence(tables, 1), clamped);
  }
  if (cfg.use_detail_latent) {
    std::vector<CdfTable> hyper = factorized_tables(model.compressor().hyper_model());
    streams[1] = rc_encode(to_symbols(q_z), channel_sequence(hyper, 1), clamped);

    std::vector<CdfTable> storage;
    std::vector<const CdfTable*> seq;
    detail_tables(model, q_z, storage, seq);
    streams[2] = rc_encode(to_symbols(q_h), seq, clamped);
  }
  return streams;
}

void decode_streams(const Model& model, const std::array<std::vector<uint8_t>, 3>& streams,
                    Mat& q_l, Mat& q_h, Mat& q_z) {
  const ModelConfig& cfg = model.config();
  if (cfg.use_shape_latent) {
    std::vector<CdfTable> tables = factorized_tables(model.compressor().shape_model());
    q_l = from_symbols(rc_decode(streams[0], channel_sequence(tables, 1)), 1, cfg.C);
  } else {
    require(streams[0].empty(), ErrorKind::format,
            "decode: unexpected shape stream for this model");
    q_l = Mat::Zero(1, cfg.C);
  }
  if (cfg.use_detail_latent) {
    std::vector<CdfTable> hyper = factorized_tables(model.compressor().hyper_model());
    q_z = from_symbols(rc_decode(streams[1], channel_sequence(hyper, 1)), 1, cfg.C_z);

    std::vector<CdfTable> storage;
    std::vector<const CdfTable*> seq;
    detail_tables(model, q_z, storage, seq);
    q_h = from_symbols(rc_decode(streams[2], seq), cfg.S, cfg.C);
  } else {
    require(streams[1].empty() && streams[2].empty(), ErrorKind::format,
            "decode: unexpected detail streams for this model");
    q_z = Mat::Zero(1, cfg.C_z);
    q_h = Mat::Zero(cfg.S, cfg.C);
  }
}

EncodeResult encode_cloud(const Model& model, const PointCloud& cloud, uint64_t seed) {
  const ModelConfig& cfg = model.config();
  require(cloud.size() >= cfg.S, ErrorKind::numeric,
          "encode: cloud smaller than the token count");

  NormalizationParams norm = compute_normalization(cloud.points);
  Mat pts = normalize(cloud.points, norm);

  nn::NoGradGuard ng;
  LatentTriple triple = model.compressor().extract(pts, false, nullptr);

  EncodeResult result;
  result.estimated_bits = model.rate_bits(triple)->value(0, 0);
  std::array<std::vector<uint8_t>, 3> streams =
      encode_streams(model, triple.q_l->value, triple.q_h->value, triple.q_z->value,
                     &result.clamped);

  ContainerHeader& h = result.header;
  h.n_points = static_cast<uint32_t>(cloud.size());
  h.tokens = static_cast<uint16_t>(cfg.S);
  h.channels = static_cast<uint16_t>(cfg.C);
  h.hyper_channels = static_cast<uint16_t>(cfg.C_z);
  h.timesteps = static_cast<uint16_t>(cfg.T);
  h.seed = seed;
  if (cloud.label) {
    require(*cloud.label >= -1 && *cloud.label <= 32767, ErrorKind::config,
            "encode: label does not fit the header field");
    require(cfg.label_vocab == 0 || *cloud.label < cfg.label_vocab, ErrorKind::config,
            "encode: label outside the model's embedding table");
    h.label = static_cast<int16_t>(*cloud.label);
  }
  for (int i = 0; i < 3; ++i) h.center[i] = static_cast<float>(norm.center[i]);
  h.scale = static_cast<float>(norm.scale);

  for (int i = 0; i < 3; ++i) result.payload_bytes[i] = streams[i].size();
  result.bytes = pack_container(h, streams);
  return result;
}

PointCloud decode_cloud(const Model& model, const std::vector<uint8_t>& bytes) {
  const ModelConfig& cfg = model.config();
  Container c = unpack_container(bytes);
  require(c.header.tokens == cfg.S && c.header.channels == cfg.C &&
              c.header.hyper_channels == cfg.C_z,
          ErrorKind::config, "decode: container dimensions do not match the model");
  require(c.header.timesteps >= 1, ErrorKind::format, "decode: container has no timesteps");
  require(c.header.n_points >= static_cast<uint32_t>(cfg.S), ErrorKind::format,
          "decode: container has fewer points than tokens");

  Mat q_l, q_h, q_z;
  decode_streams(model, c.streams, q_l, q_h, q_z);

  std::optional<int> label;
  if (c.header.label >= 0) {
    label = c.header.label;
    if (cfg.label_vocab > 0)
      require(*label < cfg.label_vocab, ErrorKind::config,
              "decode: label outside the model's embedding table");
  }
  std::optional<int> cond_label =
      (cfg.label_vocab > 0 && label) ? label : std::optional<int>{};

  NoiseSchedule sched = cosine_schedule(c.header.timesteps);
  auto denoise = [&](const Mat& x, int t) {
    nn::NoGradGuard ng;
    ConditionSet cond;
    cond.t = t;
    cond.beta_t = sched.beta[t];
    cond.alpha_bar_t = sched.alpha_bar[t];
    cond.label = cond_label;
    cond.y_l_hat = nn::constant(q_l);
    cond.y_h_hat = nn::constant(q_h);
    return model.denoiser().forward(x, cond)->value;
  };
  Mat x = sched.generate(c.header.n_points, denoise, c.header.seed);

  NormalizationParams norm;
  for (int i = 0; i < 3; ++i) norm.center[i] = static_cast<double>(c.header.center[i]);
  norm.scale = static_cast<double>(c.header.scale);
  require(norm.scale > 0.0, ErrorKind::format, "decode: container scale must be positive");

  PointCloud out;
  out.points = denormalize(x, norm);
  out.label = label;
  return out;
}

}  // namespace dpcc
