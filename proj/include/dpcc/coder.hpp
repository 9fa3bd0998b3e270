#pragma once

#include "dpcc/common.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace dpcc {

/// Quantized cumulative frequency table for one coding context. Frequencies
/// total exactly 2^16 with every in-range symbol given at least one count,
/// so the cumulative sequence is strictly increasing.
struct CdfTable {
  int s_min = 0;
  std::vector<uint32_t> cum;  // n_symbols + 1 entries, cum[0] = 0, back() = 65536

  int n_symbols() const { return static_cast<int>(cum.size()) - 1; }
  int s_max() const { return s_min + n_symbols() - 1; }
  uint32_t freq(int index) const { return cum[index + 1] - cum[index]; }
  bool contains(int symbol) const { return symbol >= s_min && symbol <= s_max(); }
};

/// Build a table by scanning outward from `mode_hint`, greedily extending
/// toward the larger next probability, until the model's tail mass is
/// negligible or the hard range cap [-255, 255] is reached. `pmf` must
/// return the raw (unfloored) model probability of an integer symbol.
CdfTable build_cdf(const std::function<double(int)>& pmf, int mode_hint);

/// Range-code `symbols` against per-symbol tables (tables.size() must equal
/// symbols.size(); entries may repeat). Out-of-range symbols are clamped to
/// the table edge; if `clamped` is non-null it is incremented per clamp so
/// callers can surface a warning.
std::vector<uint8_t> rc_encode(const std::vector<int>& symbols,
                               const std::vector<const CdfTable*>& tables,
                               int* clamped = nullptr);

/// Inverse of rc_encode; needs the same table sequence. Truncated input is
/// reported as a format error.
std::vector<int> rc_decode(const std::vector<uint8_t>& bytes,
                           const std::vector<const CdfTable*>& tables);

}  // namespace dpcc
