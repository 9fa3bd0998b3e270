#include "dpcc/coder.hpp"

#include <algorithm>
#include <cmath>

namespace dpcc {

namespace {

constexpr uint32_t kTotal = 1u << 16;
constexpr uint32_t kTop = 1u << 24;
constexpr int kRangeCap = 255;
// expansion runs until less than this much model mass is left outside;
// tighter than the documented 1e-6 guarantee so the tables carry a little
// margin around the nominal support
constexpr double kTailEps = 1e-8;

/// LZMA-style byte-oriented range encoder: 64-bit low for carry detection,
/// pending 0xFF run tracked by cache_size.
class RangeEncoder {
public:
  void encode(uint32_t cum_start, uint32_t freq) {
    range_ /= kTotal;
    low_ += static_cast<uint64_t>(cum_start) * range_;
    range_ *= freq;
    while (range_ < kTop) {
      shift_low();
      range_ <<= 8;
    }
  }

  std::vector<uint8_t> finish() {
    for (int i = 0; i < 5; ++i) shift_low();
    return std::move(out_);
  }

private:
  void shift_low() {
    if (static_cast<uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
      uint8_t carry = static_cast<uint8_t>(low_ >> 32);
      uint8_t b = cache_;
      do {
        out_.push_back(static_cast<uint8_t>(b + carry));
        b = 0xFF;
      } while (--cache_size_ != 0);
      cache_ = static_cast<uint8_t>(static_cast<uint32_t>(low_) >> 24);
    }
    ++cache_size_;
    low_ = static_cast<uint64_t>(static_cast<uint32_t>(low_) << 8);
  }

  uint64_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint8_t cache_ = 0;
  uint64_t cache_size_ = 1;
  std::vector<uint8_t> out_;
};

class RangeDecoder {
public:
  RangeDecoder(const uint8_t* data, size_t size) : data_(data), size_(size) {
    for (int i = 0; i < 5; ++i) code_ = (code_ << 8) | read_byte();
  }

  uint32_t decode_target() {
    range_ /= kTotal;
    return std::min(code_ / range_, kTotal - 1);
  }

  void consume(uint32_t cum_start, uint32_t freq) {
    code_ -= cum_start * range_;
    range_ *= freq;
    while (range_ < kTop) {
      code_ = (code_ << 8) | read_byte();
      range_ <<= 8;
    }
  }

private:
  uint32_t read_byte() {
    require(pos_ < size_, ErrorKind::format, "truncated range-coded stream");
    return data_[pos_++];
  }

  const uint8_t* data_;
  size_t size_;
  size_t pos_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint32_t code_ = 0;
};

}  // namespace

CdfTable build_cdf(const std::function<double(int)>& pmf, int mode_hint) {
  int lo = std::clamp(mode_hint, -kRangeCap, kRangeCap);
  int hi = lo;
  double mass = pmf(lo);
  double max_p = mass;

  while (1.0 - mass >= kTailEps && (lo > -kRangeCap || hi < kRangeCap)) {
    double pl = lo > -kRangeCap ? pmf(lo - 1) : -1.0;
    double pr = hi < kRangeCap ? pmf(hi + 1) : -1.0;
    if (pl >= pr) {
      --lo;
      mass += pl;
      max_p = std::max(max_p, pl);
    } else {
      ++hi;
      mass += pr;
      max_p = std::max(max_p, pr);
    }
  }
  require(max_p >= 1.0 / 65536.0, ErrorKind::numeric,
          "degenerate pmf: no symbol carries codable mass");
  require(mass > 0.0, ErrorKind::numeric, "degenerate pmf: zero total mass");

  const int n = hi - lo + 1;
  std::vector<int64_t> counts(n);
  int64_t total = 0;
  for (int i = 0; i < n; ++i) {
    double p = pmf(lo + i) / mass;
    counts[i] = std::max<int64_t>(1, std::llround(p * kTotal));
    total += counts[i];
  }
  // nudge counts until they add to exactly 2^16, taking from (or giving to)
  // the largest bins where the relative distortion is smallest
  while (total != kTotal) {
    int64_t diff = static_cast<int64_t>(kTotal) - total;
    int arg = 0;
    for (int i = 1; i < n; ++i)
      if (counts[i] > counts[arg]) arg = i;
    if (diff > 0) {
      counts[arg] += diff;
      total += diff;
    } else {
      int64_t take = std::min(-diff, counts[arg] - 1);
      require(take > 0, ErrorKind::numeric, "cdf quantization cannot reach the 16-bit total");
      counts[arg] -= take;
      total -= take;
    }
  }

  CdfTable t;
  t.s_min = lo;
  t.cum.resize(n + 1);
  t.cum[0] = 0;
  for (int i = 0; i < n; ++i) t.cum[i + 1] = t.cum[i] + static_cast<uint32_t>(counts[i]);
  return t;
}

std::vector<uint8_t> rc_encode(const std::vector<int>& symbols,
                               const std::vector<const CdfTable*>& tables, int* clamped) {
  require(symbols.size() == tables.size(), ErrorKind::numeric,
          "rc_encode: one table required per symbol");
  RangeEncoder enc;
  for (size_t i = 0; i < symbols.size(); ++i) {
    const CdfTable& t = *tables[i];
    int s = symbols[i];
    if (!t.contains(s)) {
      s = std::clamp(s, t.s_min, t.s_max());
      if (clamped) ++*clamped;
    }
    int idx = s - t.s_min;
    enc.encode(t.cum[idx], t.freq(idx));
  }
  return enc.finish();
}

std::vector<int> rc_decode(const std::vector<uint8_t>& bytes,
                           const std::vector<const CdfTable*>& tables) {
  RangeDecoder dec(bytes.data(), bytes.size());
  std::vector<int> out;
  out.reserve(tables.size());
  for (const CdfTable* tp : tables) {
    const CdfTable& t = *tp;
    uint32_t target = dec.decode_target();
    auto it = std::upper_bound(t.cum.begin(), t.cum.end(), target);
    int idx = static_cast<int>(it - t.cum.begin()) - 1;
    dec.consume(t.cum[idx], t.freq(idx));
    out.push_back(t.s_min + idx);
  }
  return out;
}

}  // namespace dpcc
