#include "dpcc/model.hpp"

#include "dpcc/container.hpp"

#include "json.hpp"

#include <bit>
#include <cstring>

namespace dpcc {

using nlohmann::json;
using nn::Var;

void ModelConfig::validate() const {
  compressor().validate();
  denoiser().validate();
  require(T >= 1, ErrorKind::config, "model: T must be positive");
}

CompressorConfig ModelConfig::compressor() const {
  CompressorConfig cfg;
  cfg.C = C;
  cfg.C_z = C_z;
  cfg.S = S;
  cfg.k_enc = k_enc;
  return cfg;
}

DenoiserConfig ModelConfig::denoiser() const {
  DenoiserConfig cfg;
  cfg.C = C;
  cfg.S = S;
  cfg.k = k_gen;
  cfg.heads = heads;
  cfg.label_vocab = label_vocab;
  return cfg;
}

Model::Model(const ModelConfig& config, uint64_t init_seed) : config_(config) {
  config_.validate();
  Rng rng(init_seed);
  compressor_ = std::make_unique<Compressor>(config_.compressor(), params_, "comp", rng);
  denoiser_ = std::make_unique<Denoiser>(config_.denoiser(), params_, "gen", rng);
}

Var Model::rate_bits(const LatentTriple& triple) const {
  if (config_.use_shape_latent && config_.use_detail_latent)
    return compressor_->estimate_rate(triple);
  if (config_.use_shape_latent)
    return bits_from_likelihood(compressor_->shape_model().likelihood(triple.q_l));
  if (config_.use_detail_latent) {
    Var mu, sigma;
    compressor_->hyper_decode(triple.q_z, mu, sigma);
    Var detail = bits_from_likelihood(GaussianConditional::likelihood(triple.q_h, mu, sigma));
    return nn::add(detail,
                   bits_from_likelihood(compressor_->hyper_model().likelihood(triple.q_z)));
  }
  return nn::constant(Mat::Zero(1, 1));
}

namespace {

constexpr char kCkptMagic[4] = {'D', 'P', 'C', 'K'};
constexpr int kCkptFormatVersion = 1;

void put_f32(std::vector<uint8_t>& out, float f) {
  const auto u = std::bit_cast<uint32_t>(f);
  out.push_back(static_cast<uint8_t>(u & 0xFF));
  out.push_back(static_cast<uint8_t>((u >> 8) & 0xFF));
  out.push_back(static_cast<uint8_t>((u >> 16) & 0xFF));
  out.push_back(static_cast<uint8_t>((u >> 24) & 0xFF));
}

float take_f32(const std::vector<uint8_t>& bytes, size_t offset) {
  uint32_t u = static_cast<uint32_t>(bytes[offset]) |
               (static_cast<uint32_t>(bytes[offset + 1]) << 8) |
               (static_cast<uint32_t>(bytes[offset + 2]) << 16) |
               (static_cast<uint32_t>(bytes[offset + 3]) << 24);
  return std::bit_cast<float>(u);
}

json config_to_json(const ModelConfig& cfg) {
  return json{{"C", cfg.C},
              {"C_z", cfg.C_z},
              {"S", cfg.S},
              {"k_enc", cfg.k_enc},
              {"k_gen", cfg.k_gen},
              {"heads", cfg.heads},
              {"label_vocab", cfg.label_vocab},
              {"T", cfg.T},
              {"use_shape_latent", cfg.use_shape_latent},
              {"use_detail_latent", cfg.use_detail_latent}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig cfg;
  try {
    cfg.C = j.at("C").get<int>();
    cfg.C_z = j.at("C_z").get<int>();
    cfg.S = j.at("S").get<int>();
    cfg.k_enc = j.at("k_enc").get<int>();
    cfg.k_gen = j.at("k_gen").get<int>();
    cfg.heads = j.at("heads").get<int>();
    cfg.label_vocab = j.at("label_vocab").get<int>();
    cfg.T = j.at("T").get<int>();
    cfg.use_shape_latent = j.at("use_shape_latent").get<bool>();
    cfg.use_detail_latent = j.at("use_detail_latent").get<bool>();
  } catch (const json::exception& e) {
    fail(ErrorKind::format, std::string("checkpoint manifest: ") + e.what());
  }
  return cfg;
}

struct ParsedCheckpoint {
  ModelConfig config;
  json manifest;
  size_t tensor_offset = 0;
};

ParsedCheckpoint parse_checkpoint(const std::vector<uint8_t>& bytes) {
  require(bytes.size() >= 8 && std::memcmp(bytes.data(), kCkptMagic, 4) == 0,
          ErrorKind::format, "checkpoint: bad magic");
  uint32_t mlen = static_cast<uint32_t>(bytes[4]) | (static_cast<uint32_t>(bytes[5]) << 8) |
                  (static_cast<uint32_t>(bytes[6]) << 16) |
                  (static_cast<uint32_t>(bytes[7]) << 24);
  require(8 + static_cast<size_t>(mlen) <= bytes.size(), ErrorKind::format,
          "checkpoint: manifest length exceeds file size");

  ParsedCheckpoint parsed;
  try {
    parsed.manifest = json::parse(bytes.begin() + 8, bytes.begin() + 8 + mlen);
  } catch (const json::exception& e) {
    fail(ErrorKind::format, std::string("checkpoint manifest: ") + e.what());
  }
  int version = parsed.manifest.value("format_version", -1);
  require(version == kCkptFormatVersion, ErrorKind::format,
          "checkpoint: unsupported format version " + std::to_string(version));
  require(parsed.manifest.contains("config") && parsed.manifest.contains("params"),
          ErrorKind::format, "checkpoint: manifest missing config or params");
  parsed.config = config_from_json(parsed.manifest.at("config"));
  parsed.tensor_offset = 8 + mlen;
  return parsed;
}

void fill_weights(Model& model, const ParsedCheckpoint& parsed,
                  const std::vector<uint8_t>& bytes) {
  const json& plist = parsed.manifest.at("params");
  require(plist.is_array() && plist.size() == model.params().entries().size(),
          ErrorKind::format, "checkpoint: parameter list does not match the model");
  size_t offset = parsed.tensor_offset;
  for (const json& entry : plist) {
    std::string name;
    Eigen::Index rows = 0, cols = 0;
    try {
      name = entry.at("name").get<std::string>();
      rows = entry.at("rows").get<Eigen::Index>();
      cols = entry.at("cols").get<Eigen::Index>();
    } catch (const json::exception& e) {
      fail(ErrorKind::format, std::string("checkpoint manifest: ") + e.what());
    }
    require(model.params().has(name), ErrorKind::config,
            "checkpoint: unknown parameter " + name);
    Var p = model.params().get(name);
    require(p->value.rows() == rows && p->value.cols() == cols, ErrorKind::config,
            "checkpoint: shape mismatch for " + name);
    const size_t need = static_cast<size_t>(rows) * cols * 4;
    require(offset + need <= bytes.size(), ErrorKind::format,
            "checkpoint: tensor data truncated at " + name);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) {
        p->value(i, j) = static_cast<double>(take_f32(bytes, offset));
        offset += 4;
      }
  }
  require(offset == bytes.size(), ErrorKind::format, "checkpoint: trailing bytes");

  const json& train = parsed.manifest.value("train", json::object());
  model.trained_lambda = train.value("lambda", 0.0);
  model.trained_gamma = train.value("gamma", 0.0);
  model.trained_steps = train.value("steps", 0LL);
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
  json plist = json::array();
  for (const auto& [name, v] : model.params().entries())
    plist.push_back({{"name", name}, {"rows", v->value.rows()}, {"cols", v->value.cols()}});
  json manifest{{"format_version", kCkptFormatVersion},
                {"config", config_to_json(model.config())},
                {"train",
                 {{"lambda", model.trained_lambda},
                  {"gamma", model.trained_gamma},
                  {"steps", model.trained_steps}}},
                {"params", plist}};
  std::string mstr = manifest.dump();

  std::vector<uint8_t> out;
  out.reserve(8 + mstr.size() + model.params().total_size() * 4);
  out.insert(out.end(), kCkptMagic, kCkptMagic + 4);
  uint32_t mlen = static_cast<uint32_t>(mstr.size());
  out.push_back(static_cast<uint8_t>(mlen & 0xFF));
  out.push_back(static_cast<uint8_t>((mlen >> 8) & 0xFF));
  out.push_back(static_cast<uint8_t>((mlen >> 16) & 0xFF));
  out.push_back(static_cast<uint8_t>((mlen >> 24) & 0xFF));
  out.insert(out.end(), mstr.begin(), mstr.end());
  for (const auto& [name, v] : model.params().entries())
    for (Eigen::Index i = 0; i < v->value.rows(); ++i)
      for (Eigen::Index j = 0; j < v->value.cols(); ++j)
        put_f32(out, static_cast<float>(v->value(i, j)));
  write_binary_file(path, out);
}

std::unique_ptr<Model> load_checkpoint(const std::string& path) {
  std::vector<uint8_t> bytes = read_binary_file(path);
  ParsedCheckpoint parsed = parse_checkpoint(bytes);
  auto model = std::make_unique<Model>(parsed.config);
  fill_weights(*model, parsed, bytes);
  return model;
}

void load_weights(Model& model, const std::string& path) {
  std::vector<uint8_t> bytes = read_binary_file(path);
  ParsedCheckpoint parsed = parse_checkpoint(bytes);
  require(parsed.config == model.config(), ErrorKind::config,
          "checkpoint: stored config does not match the target model");
  fill_weights(model, parsed, bytes);
}

}  // namespace dpcc
