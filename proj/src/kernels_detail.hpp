#pragma once
// Internals shared by the scalar and AVX2 kernel translation units: the FP32
// accumulate tail (replicated operation for operation from mac_step so every
// kernel is bit-identical to the datapath) and the E2M1 integer value table.

#include <array>
#include <cfloat>
#include <cmath>
#include <cstdint>

#include "mxsim/mac.hpp"

namespace mxsim::detail {

// One accumulation tail: apply 2^(exp+se) exactly in double, one RNE
// conversion to FP32, one RNE add, clamp to +-FLT_MAX with the sticky
// saturated flag. Mirrors mac_step exactly.
inline void accumulate_tail(MacState& s, int64_t sig, int exp, int se) {
  double scaled = std::ldexp(double(sig), exp + se);
  bool clipped = false;
  float f = float(scaled);
  if (!std::isfinite(f)) {
    f = std::copysign(FLT_MAX, float(scaled > 0 ? 1.f : -1.f));
    clipped = true;
  }
  float acc = s.accumulator + f;
  if (!std::isfinite(acc)) {
    acc = std::copysign(FLT_MAX, acc);
    clipped = true;
  }
  s.accumulator = acc;
  s.saturated = s.saturated || clipped;
}

// E2M1 codes as signed integers at LSB weight 2^-1: v = +-sig << (eff-1),
// so a pair's E3M4 product (sig_a*sig_b at weight 2^-2) is simply va*vb.
constexpr std::array<int8_t, 16> fp4_value_table() {
  std::array<int8_t, 16> t{};
  for (int c = 0; c < 16; ++c) {
    int expf = (c >> 1) & 3;
    int sig = expf ? 2 + (c & 1) : (c & 1);
    int eff = expf ? expf : 1;
    int v = sig << (eff - 1);
    t[size_t(c)] = int8_t((c >> 3) ? -v : v);
  }
  return t;
}
inline constexpr std::array<int8_t, 16> kFp4Value = fp4_value_table();

}  // namespace mxsim::detail
