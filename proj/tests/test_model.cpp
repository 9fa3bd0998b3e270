#include "doctest.h"

#include "dpcc/model.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace dpcc;

namespace {

ModelConfig toy_config() {
  ModelConfig cfg;
  cfg.C = 12;
  cfg.C_z = 4;
  cfg.S = 4;
  cfg.k_enc = 5;
  cfg.k_gen = 4;
  cfg.heads = 2;
  cfg.T = 20;
  return cfg;
}

std::string temp_path(const char* stem) {
  return (std::filesystem::temp_directory_path() / stem).string();
}

std::vector<uint8_t> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void dump(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

}  // namespace

TEST_CASE("parameter inventory matches the architecture") {
  auto lin = [](long long in, long long out) { return in * out + out; };

  ModelConfig cfg = toy_config();
  const long long C = cfg.C, Cz = cfg.C_z, S = cfg.S;

  long long comp = lin(3, 64) + lin(64, 128) + lin(128, C)  // shape stem
                   + lin(C, C)                              // detail mixer
                   + lin(C, C) + lin(C, Cz)                 // hyper encoder
                   + lin(Cz, Cz) + lin(Cz, 2 * S * C)       // hyper decoder
                   + 28 * C + 28 * Cz;                      // entropy models
  long long gen = lin(3, 64) + lin(64, 128) + lin(128, C)        // stem
                  + lin(2, C) + lin(C, C)                        // schedule + shape cond
                  + 2 * (2 * C * C + 2 * C)                      // two adaln sites
                  + lin(C, C)                                    // token mixer
                  + 3 * lin(C, C)                                // cross-attention
                  + 4 * lin(C, C)                                // self-attention
                  + lin(2 * C, C) + lin(C, 3);                   // fuse + head

  Model plain(cfg);
  CHECK(plain.params().total_size() == comp + gen);
  CHECK(plain.params().entries().size() == 70);

  cfg.label_vocab = 8;
  Model labeled(cfg);
  CHECK(labeled.params().total_size() == comp + gen + 8 * C);
  CHECK(labeled.params().entries().size() == 71);
}

TEST_CASE("config validation") {
  ModelConfig cfg = toy_config();
  cfg.T = 0;
  CHECK_THROWS_AS(Model{cfg}, Error);
  cfg = toy_config();
  cfg.C = 13;  // positional encoding needs C % 6 == 0
  CHECK_THROWS_AS(Model{cfg}, Error);
  cfg = toy_config();
  cfg.heads = 5;  // must divide C
  CHECK_THROWS_AS(Model{cfg}, Error);
}

TEST_CASE("checkpoint save, load, save is byte identical") {
  Model model(toy_config(), 11);
  model.trained_lambda = 0.25;
  model.trained_gamma = 2.0;
  model.trained_steps = 1234;

  std::string p1 = temp_path("dpcc_ckpt_a.bin");
  std::string p2 = temp_path("dpcc_ckpt_b.bin");
  save_checkpoint(model, p1);

  std::unique_ptr<Model> loaded = load_checkpoint(p1);
  CHECK(loaded->config() == model.config());
  CHECK(loaded->trained_lambda == 0.25);
  CHECK(loaded->trained_gamma == 2.0);
  CHECK(loaded->trained_steps == 1234);

  // values survive as float32: the reload must match the f32 rounding exactly
  const auto& orig = model.params().entries();
  const auto& back = loaded->params().entries();
  REQUIRE(orig.size() == back.size());
  for (size_t i = 0; i < orig.size(); ++i) {
    CHECK(orig[i].first == back[i].first);
    REQUIRE(orig[i].second->value.rows() == back[i].second->value.rows());
    REQUIRE(orig[i].second->value.cols() == back[i].second->value.cols());
    const Mat& a = orig[i].second->value;
    const Mat& b = back[i].second->value;
    for (Eigen::Index r = 0; r < a.rows(); ++r)
      for (Eigen::Index c = 0; c < a.cols(); ++c)
        CHECK(b(r, c) == static_cast<double>(static_cast<float>(a(r, c))));
  }

  save_checkpoint(*loaded, p2);
  CHECK(slurp(p1) == slurp(p2));
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("load_weights replaces values in place and rejects config drift") {
  Model donor(toy_config(), 3);
  std::string path = temp_path("dpcc_ckpt_w.bin");
  save_checkpoint(donor, path);

  Model target(toy_config(), 99);  // different init, same shapes
  double before = target.params().entries()[0].second->value(0, 0);
  load_weights(target, path);
  double after = target.params().entries()[0].second->value(0, 0);
  CHECK(after != before);
  CHECK(after ==
        static_cast<double>(static_cast<float>(donor.params().entries()[0].second->value(0, 0))));

  ModelConfig other = toy_config();
  other.C = 24;
  Model mismatched(other);
  CHECK_THROWS_AS(load_weights(mismatched, path), Error);
  try {
    load_weights(mismatched, path);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
  }
  std::remove(path.c_str());
}

TEST_CASE("malformed checkpoints are rejected") {
  Model model(toy_config(), 5);
  std::string path = temp_path("dpcc_ckpt_bad.bin");
  save_checkpoint(model, path);
  std::vector<uint8_t> good = slurp(path);

  auto expect_kind = [&](const std::vector<uint8_t>& bytes, ErrorKind kind) {
    dump(path, bytes);
    try {
      load_checkpoint(path);
      FAIL("expected a load failure");
    } catch (const Error& e) {
      CHECK(e.kind() == kind);
    }
  };

  std::vector<uint8_t> bad = good;
  bad[0] = 'X';
  expect_kind(bad, ErrorKind::format);

  bad = good;  // truncated tensor block
  bad.resize(bad.size() - 3);
  expect_kind(bad, ErrorKind::format);

  bad = good;  // trailing garbage
  bad.push_back(0);
  expect_kind(bad, ErrorKind::format);

  bad = good;  // manifest is not JSON
  bad[8] = '~';
  expect_kind(bad, ErrorKind::format);

  std::remove(path.c_str());
  CHECK_THROWS_AS(load_checkpoint(path), Error);
  try {
    load_checkpoint(path);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::io);
  }
}

TEST_CASE("rate_bits respects the stream switches") {
  Rng rng(404);
  ModelConfig cfg = toy_config();

  Mat q_l = quantize_test(rng.normal_mat(1, cfg.C) * 3.0);
  Mat q_h = quantize_test(rng.normal_mat(cfg.S, cfg.C) * 2.0);
  Mat q_z = quantize_test(rng.normal_mat(1, cfg.C_z) * 3.0);
  LatentTriple triple;
  triple.q_l = nn::constant(q_l);
  triple.q_h = nn::constant(q_h);
  triple.q_z = nn::constant(q_z);

  auto bits_with = [&](bool shape_on, bool detail_on) {
    ModelConfig c = cfg;
    c.use_shape_latent = shape_on;
    c.use_detail_latent = detail_on;
    Model m(c, 21);  // same seed: identical weights across the four variants
    nn::NoGradGuard ng;
    return m.rate_bits(triple)->value(0, 0);
  };

  double both = bits_with(true, true);
  double shape_only = bits_with(true, false);
  double detail_only = bits_with(false, true);
  double neither = bits_with(false, false);

  CHECK(both > 0.0);
  CHECK(shape_only > 0.0);
  CHECK(detail_only > 0.0);
  CHECK(neither == 0.0);
  // the full rate is exactly the two disjoint halves
  CHECK(both == doctest::Approx(shape_only + detail_only).epsilon(1e-9));

  // the shape half matches an independent recomputation
  Model m(cfg, 21);
  nn::NoGradGuard ng;
  double by_hand =
      bits_from_likelihood(m.compressor().shape_model().likelihood(triple.q_l))->value(0, 0);
  CHECK(shape_only == doctest::Approx(by_hand).epsilon(1e-9));
}
