#pragma once

#include "dpcc/coder.hpp"
#include "dpcc/container.hpp"
#include "dpcc/geometry.hpp"
#include "dpcc/model.hpp"

#include <array>
#include <optional>

namespace dpcc {

/// Per-channel coding tables for a factorized model (index = channel).
std::vector<CdfTable> factorized_tables(const FactorizedModel& fm);
/// Table for one element of the detail stream given its predicted context.
CdfTable gaussian_cdf_table(double mu, double sigma);

/// Entropy-code quantized latents into the three container payloads, in
/// stream order (shape, hyper, detail). Disabled streams stay empty.
/// `clamped`, when non-null, counts symbols pushed back into table range.
std::array<std::vector<uint8_t>, 3> encode_streams(const Model& model, const Mat& q_l,
                                                   const Mat& q_h, const Mat& q_z,
                                                   int* clamped = nullptr);
/// Inverse of encode_streams; latents come back as exact integers.
void decode_streams(const Model& model, const std::array<std::vector<uint8_t>, 3>& streams,
                    Mat& q_l, Mat& q_h, Mat& q_z);

struct EncodeResult {
  std::vector<uint8_t> bytes;  // complete container file image
  ContainerHeader header;
  std::array<size_t, 3> payload_bytes = {0, 0, 0};
  double estimated_bits = 0.0;
  int clamped = 0;
};

/// Normalize, extract test-mode latents, entropy-code, pack. `seed` rides in
/// the header and drives the decoder's sampling.
EncodeResult encode_cloud(const Model& model, const PointCloud& cloud, uint64_t seed);

/// Unpack, entropy-decode, run the reverse diffusion from the header seed,
/// denormalize. Exactly header.n_points points come back.
PointCloud decode_cloud(const Model& model, const std::vector<uint8_t>& bytes);

}  // namespace dpcc
