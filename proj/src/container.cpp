#include "dpcc/container.hpp"

#include <cstring>
#include <fstream>

namespace dpcc {

namespace {

const char kMagic[4] = {'D', 'P', 'C', 'C'};
constexpr uint8_t kVersion = 1;

void put_u16(std::vector<uint8_t>& b, uint16_t v) {
  b.push_back(v & 0xFF);
  b.push_back(v >> 8);
}

void put_u32(std::vector<uint8_t>& b, uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xFF);
}

void put_u64(std::vector<uint8_t>& b, uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back((v >> (8 * i)) & 0xFF);
}

void put_f32(std::vector<uint8_t>& b, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(b, bits);
}

struct Reader {
  const std::vector<uint8_t>& b;
  size_t pos = 0;

  void need(size_t n) const {
    require(pos + n <= b.size(), ErrorKind::format, "container truncated");
  }
  uint8_t u8() {
    need(1);
    return b[pos++];
  }
  uint16_t u16() {
    need(2);
    uint16_t v = b[pos] | (uint16_t(b[pos + 1]) << 8);
    pos += 2;
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(b[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(b[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  float f32() {
    uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
};

}  // namespace

std::vector<uint8_t> pack_container(const ContainerHeader& h,
                                    const std::array<std::vector<uint8_t>, 3>& streams) {
  std::vector<uint8_t> out;
  size_t total = kHeaderBytes;
  for (const auto& s : streams) total += 4 + s.size();
  out.reserve(total);

  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(kVersion);
  put_u32(out, h.n_points);
  put_u16(out, h.tokens);
  put_u16(out, h.channels);
  put_u16(out, h.hyper_channels);
  put_u16(out, h.timesteps);
  put_u64(out, h.seed);
  put_u16(out, static_cast<uint16_t>(h.label));
  for (float c : h.center) put_f32(out, c);
  put_f32(out, h.scale);

  for (const auto& s : streams) {
    require(s.size() <= 0xFFFFFFFFu, ErrorKind::format, "stream too large for container");
    put_u32(out, static_cast<uint32_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

Container unpack_container(const std::vector<uint8_t>& bytes) {
  Reader r{bytes};
  r.need(5);
  require(std::memcmp(bytes.data(), kMagic, 4) == 0, ErrorKind::format,
          "not a dpcc container (bad magic)");
  r.pos = 4;
  uint8_t version = r.u8();
  require(version == kVersion, ErrorKind::format,
          "unsupported container version " + std::to_string(version));

  Container c;
  c.header.n_points = r.u32();
  c.header.tokens = r.u16();
  c.header.channels = r.u16();
  c.header.hyper_channels = r.u16();
  c.header.timesteps = r.u16();
  c.header.seed = r.u64();
  c.header.label = static_cast<int16_t>(r.u16());
  for (float& v : c.header.center) v = r.f32();
  c.header.scale = r.f32();

  for (auto& s : c.streams) {
    uint32_t len = r.u32();
    require(r.pos + len <= bytes.size(), ErrorKind::format,
            "container stream length exceeds file size");
    s.assign(bytes.begin() + r.pos, bytes.begin() + r.pos + len);
    r.pos += len;
  }
  require(r.pos == bytes.size(), ErrorKind::format, "trailing bytes after container payload");
  return c;
}

std::vector<uint8_t> read_binary_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::io, "cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  require(!in.bad(), ErrorKind::io, "read failed for " + path);
  return bytes;
}

void write_binary_file(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::io, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  require(out.good(), ErrorKind::io, "write failed for " + path);
}

}  // namespace dpcc
