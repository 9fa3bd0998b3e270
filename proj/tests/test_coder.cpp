#include "doctest.h"

#include "dpcc/coder.hpp"
#include "dpcc/container.hpp"
#include "dpcc/entropy_model.hpp"

#include <cmath>
#include <numeric>

using namespace dpcc;

namespace {

void check_invariants(const CdfTable& t) {
  REQUIRE(t.n_symbols() >= 1);
  CHECK(t.cum.front() == 0);
  CHECK(t.cum.back() == 65536);
  for (int i = 0; i < t.n_symbols(); ++i) CHECK(t.cum[i + 1] > t.cum[i]);
}

CdfTable gaussian_table(double mu, double sigma) {
  return build_cdf([=](int s) { return GaussianConditional::pmf_scalar(s, mu, sigma); },
                   static_cast<int>(std::lround(mu)));
}

std::vector<const CdfTable*> repeat(const CdfTable& t, size_t n) {
  return std::vector<const CdfTable*>(n, &t);
}

}  // namespace

TEST_CASE("build_cdf: uniform four-symbol model quantizes exactly") {
  auto pmf = [](int s) { return (s >= 0 && s <= 3) ? 0.25 : 0.0; };
  CdfTable t = build_cdf(pmf, 1);
  check_invariants(t);
  CHECK(t.s_min == 0);
  CHECK(t.n_symbols() == 4);
  for (int i = 0; i < 4; ++i) CHECK(t.freq(i) == 16384);
}

TEST_CASE("build_cdf: standard normal covers at least [-6, 6]") {
  CdfTable t = gaussian_table(0.0, 1.0);
  check_invariants(t);
  CHECK(t.s_min <= -6);
  CHECK(t.s_max() >= 6);

  double covered = 0.0;
  for (int s = t.s_min; s <= t.s_max(); ++s)
    covered += GaussianConditional::pmf_scalar(s, 0.0, 1.0);
  CHECK(1.0 - covered < 1e-6);
}

TEST_CASE("build_cdf: invariants hold across random gaussian contexts") {
  Rng rng(71);
  for (int trial = 0; trial < 50; ++trial) {
    double mu = rng.uniform(-40.0, 40.0);
    double sigma = rng.uniform(0.04, 8.0);
    CdfTable t = gaussian_table(mu, sigma);
    check_invariants(t);
    CHECK(t.s_min >= -255);
    CHECK(t.s_max() <= 255);
    CHECK(t.contains(static_cast<int>(std::lround(mu))));
  }
}

TEST_CASE("build_cdf: vanishing mass is rejected") {
  CHECK_THROWS_AS(build_cdf([](int) { return 0.0; }, 0), Error);
  try {
    build_cdf([](int) { return 1e-9; }, 0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::numeric);
  }
}

TEST_CASE("range coder: empty message is a bare flush") {
  std::vector<uint8_t> bytes = rc_encode({}, {});
  CHECK(bytes.size() <= 8);
  CHECK(rc_decode(bytes, {}).empty());
}

TEST_CASE("range coder: uniform bytes cost about eight bits each") {
  auto pmf = [](int s) { return (s >= 0 && s <= 255) ? 1.0 / 256.0 : 0.0; };
  CdfTable t = build_cdf(pmf, 128);
  for (int i = 0; i < 256; ++i) CHECK(t.freq(i) == 256);

  Rng rng(72);
  std::vector<int> msg(1000);
  for (int& s : msg) s = rng.uniform_int(0, 255);
  std::vector<uint8_t> bytes = rc_encode(msg, repeat(t, msg.size()));
  CHECK(bytes.size() >= 1000);
  CHECK(bytes.size() <= 1032);
  CHECK(rc_decode(bytes, repeat(t, msg.size())) == msg);
}

TEST_CASE("range coder: random tables round-trip and meet the size bound") {
  Rng rng(73);
  std::vector<CdfTable> tables;
  for (int i = 0; i < 20; ++i) {
    int radius = rng.uniform_int(1, 12);
    std::vector<double> w(2 * radius + 1);
    double total = 0.0;
    for (double& x : w) {
      x = rng.uniform(0.01, 1.0);
      total += x;
    }
    auto pmf = [&w, radius, total](int s) {
      if (s < -radius || s > radius) return 0.0;
      return w[s + radius] / total;
    };
    int mode = -radius + static_cast<int>(std::max_element(w.begin(), w.end()) - w.begin());
    tables.push_back(build_cdf(pmf, mode));
    check_invariants(tables.back());
  }

  std::vector<int> msg(10000);
  std::vector<const CdfTable*> seq(msg.size());
  double ideal_bits = 0.0;
  for (size_t i = 0; i < msg.size(); ++i) {
    const CdfTable& t = tables[rng.uniform_int(0, 19)];
    seq[i] = &t;
    msg[i] = rng.uniform_int(t.s_min, t.s_max());
    ideal_bits -= std::log2(t.freq(msg[i] - t.s_min) / 65536.0);
  }

  std::vector<uint8_t> bytes = rc_encode(msg, seq);
  CHECK(static_cast<double>(bytes.size()) <= ideal_bits / 8.0 + 32.0);
  CHECK(rc_decode(bytes, seq) == msg);
}

TEST_CASE("range coder: out-of-range symbols clamp to the table edge") {
  CdfTable t = gaussian_table(0.0, 1.0);
  int clamped = 0;
  std::vector<int> msg = {300, 0, -300};
  std::vector<uint8_t> bytes = rc_encode(msg, repeat(t, 3), &clamped);
  CHECK(clamped == 2);
  std::vector<int> back = rc_decode(bytes, repeat(t, 3));
  CHECK(back[0] == t.s_max());
  CHECK(back[1] == 0);
  CHECK(back[2] == t.s_min);
}

TEST_CASE("range coder: size mismatch and truncation are errors") {
  CdfTable t = gaussian_table(0.0, 2.0);
  CHECK_THROWS_AS(rc_encode({1, 2}, repeat(t, 3)), Error);

  Rng rng(74);
  std::vector<int> msg(500);
  for (int& s : msg) s = rng.uniform_int(t.s_min, t.s_max());
  std::vector<uint8_t> bytes = rc_encode(msg, repeat(t, msg.size()));

  for (size_t keep : {size_t{0}, size_t{4}, bytes.size() - 1}) {
    std::vector<uint8_t> cut(bytes.begin(), bytes.begin() + keep);
    try {
      rc_decode(cut, repeat(t, msg.size()));
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::format);
    }
  }
}

TEST_CASE("container: full round trip preserves every field bitwise") {
  ContainerHeader h;
  h.n_points = 2048;
  h.tokens = 64;
  h.channels = 288;
  h.hyper_channels = 96;
  h.timesteps = 200;
  h.seed = 0xDEADBEEF12345678ULL;
  h.label = 5;
  h.center[0] = 0.1f;
  h.center[1] = -2.5f;
  h.center[2] = 3.25f;
  h.scale = 0.75f;

  Rng rng(75);
  std::array<std::vector<uint8_t>, 3> streams;
  for (size_t k = 0; k < 3; ++k) {
    streams[k].resize(17 * (k + 1) + 1);
    for (uint8_t& b : streams[k]) b = static_cast<uint8_t>(rng.uniform_int(0, 255));
  }

  std::vector<uint8_t> bytes = pack_container(h, streams);
  Container c = unpack_container(bytes);
  CHECK(c.header.n_points == h.n_points);
  CHECK(c.header.tokens == h.tokens);
  CHECK(c.header.channels == h.channels);
  CHECK(c.header.hyper_channels == h.hyper_channels);
  CHECK(c.header.timesteps == h.timesteps);
  CHECK(c.header.seed == h.seed);
  CHECK(c.header.label == h.label);
  for (int i = 0; i < 3; ++i) CHECK(c.header.center[i] == h.center[i]);
  CHECK(c.header.scale == h.scale);
  CHECK(c.streams == streams);
  CHECK(pack_container(c.header, c.streams) == bytes);
}

TEST_CASE("container: absent label and empty streams") {
  ContainerHeader h;
  h.n_points = 2048;
  h.tokens = 64;
  h.channels = 288;
  h.hyper_channels = 96;
  h.timesteps = 200;
  std::vector<uint8_t> bytes = pack_container(h, {});
  CHECK(bytes.size() == 55);
  Container c = unpack_container(bytes);
  CHECK(c.header.label == -1);
  for (const auto& s : c.streams) CHECK(s.empty());
}

TEST_CASE("container: malformed input is rejected as a format error") {
  ContainerHeader h;
  h.n_points = 16;
  std::vector<uint8_t> good = pack_container(h, {{{1, 2, 3}, {4}, {}}});

  auto expect_format = [](std::vector<uint8_t> bytes) {
    try {
      unpack_container(bytes);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::format);
    }
  };

  auto bad_magic = good;
  bad_magic[0] = 'X';
  expect_format(bad_magic);

  auto bad_version = good;
  bad_version[4] = 2;
  expect_format(bad_version);

  expect_format(std::vector<uint8_t>(good.begin(), good.begin() + 10));
  expect_format(std::vector<uint8_t>(good.begin(), good.end() - 1));

  auto trailing = good;
  trailing.push_back(0);
  expect_format(trailing);

  auto oversized_len = good;
  oversized_len[kHeaderBytes] = 0xFF;  // first stream length low byte
  expect_format(oversized_len);
}

TEST_CASE("container: binary file io round trip and missing-file error") {
  std::vector<uint8_t> payload = {0, 1, 2, 254, 255, 10, 13};
  std::string path = "coder_io_test.bin";
  write_binary_file(path, payload);
  CHECK(read_binary_file(path) == payload);
  std::remove(path.c_str());
  try {
    read_binary_file("definitely_missing_file.bin");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::io);
  }
}
