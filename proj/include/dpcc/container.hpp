#pragma once

#include "dpcc/common.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace dpcc {

/// Fixed 43-byte header of the .dpcc wire format (all integers little-endian)
/// followed by three length-prefixed entropy-coded streams in decode order:
/// the shape latent, the hyperprior latent, then the detail latent.
struct ContainerHeader {
  uint32_t n_points = 0;
  uint16_t tokens = 0;          // S
  uint16_t channels = 0;        // C
  uint16_t hyper_channels = 0;  // C_z
  uint16_t timesteps = 0;       // T
  uint64_t seed = 0;
  int16_t label = -1;  // -1 encodes "no label"
  float center[3] = {0.0f, 0.0f, 0.0f};
  float scale = 1.0f;
};

constexpr size_t kHeaderBytes = 43;

std::vector<uint8_t> pack_container(const ContainerHeader& header,
                                    const std::array<std::vector<uint8_t>, 3>& streams);

struct Container {
  ContainerHeader header;
  std::array<std::vector<uint8_t>, 3> streams;
};

Container unpack_container(const std::vector<uint8_t>& bytes);

std::vector<uint8_t> read_binary_file(const std::string& path);
void write_binary_file(const std::string& path, const std::vector<uint8_t>& bytes);

}  // namespace dpcc
