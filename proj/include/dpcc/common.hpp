#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace dpcc {

// Row-major everywhere: point clouds and feature maps are (rows x channels)
// and serialization walks memory in row order.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using IMat = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class ErrorKind { io, parse, format, config, numeric, usage };

const char* to_string(ErrorKind kind);

/// All library errors carry a kind tag; the CLI prints it as a stable prefix.
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

inline void require(bool cond, ErrorKind kind, const std::string& msg) {
  if (!cond) fail(kind, msg);
}

/// Deterministic RNG. mt19937_64 is fully specified by the standard; the
/// uniform/normal conversions are done by hand so that draw sequences are
/// identical across standard libraries. Bitstream reproducibility depends
/// on this.
class Rng {
public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  /// Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  /// Standard normal via Box-Muller; the paired draw is cached.
  double normal();

  /// Uniform integer on [lo, hi] inclusive.
  int uniform_int(int lo, int hi);

  Mat normal_mat(Eigen::Index rows, Eigen::Index cols);
  Mat uniform_mat(Eigen::Index rows, Eigen::Index cols, double a, double b);

private:
  std::mt19937_64 gen_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

/// splitmix64 step; used to derive independent sub-seeds from a master seed.
uint64_t mix_seed(uint64_t seed, uint64_t stream);

}  // namespace dpcc
