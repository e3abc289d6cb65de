#pragma once
// MX element formats: bit-exact encode/decode of the six element encodings
// plus the E8M0 shared scale.
//
// Element codes are raw right-aligned bit patterns (<= 8 bits). INT8 is
// two's-complement fixed point with 6 fraction bits (value = m * 2^-6) so the
// shared-scale rule applies uniformly across formats; the minifloats follow
// the usual sign / exponent / mantissa layout with subnormals (exponent field
// 0 -> no implicit bit, effective exponent 1 - bias).

#include <cstdint>
#include <string>
#include <string_view>

#include "mxsim/common.hpp"

namespace mxsim {

enum class ElementFormat : uint8_t {
  Int8 = 0,
  Fp8E5M2,
  Fp8E4M3,
  Fp6E3M2,
  Fp6E2M3,
  Fp4E2M1,
};
inline constexpr int kNumFormats = 6;

struct FormatInfo {
  const char* name;
  int total_bits;   // storage bits per element
  int exp_bits;     // 0 for INT8
  int mant_bits;    // fraction bits (6 for INT8 fixed point)
  int bias;         // exponent bias (0 for INT8)
  int emax;         // exponent of the largest representable power of two
  double max_finite;
  bool has_inf;     // E5M2 only
  bool has_nan;     // E5M2 (6 codes), E4M3 (1 per sign)
};

const FormatInfo& format_info(ElementFormat f);
ElementFormat format_from_name(std::string_view name);  // std::invalid_argument

// Exact value denoted by a code. NaN/Inf codes (E5M2/E4M3 specials) decode to
// IEEE NaN / +-Inf doubles; every other result is exact.
double decode_element(ElementFormat f, uint8_t code);

// Round-to-nearest-even onto the format's value grid; magnitudes beyond the
// max finite value saturate (sign preserved, never Inf/NaN); +-0 -> code 0.
// Requires a finite input.
uint8_t encode_element(ElementFormat f, double value);

bool is_nan_code(ElementFormat f, uint8_t code);
bool is_inf_code(ElementFormat f, uint8_t code);

// E8M0 shared scale: value = 2^(exp_code - 127); code 255 is reserved
// (NaN-scale in the MX standard) and rejected everywhere in this model.
struct SharedScale {
  uint8_t exp_code = 127;  // neutral scale 2^0
};

double scale_value(SharedScale s);
int scale_exp_unbiased(SharedScale s);  // exp_code - 127, rejects 255

// Scale rule: largest power of two in the block divided by the largest power
// of two representable in the element format, i.e. 2^(floor(log2 max_abs) -
// emax), clamped to the E8M0 range; max_abs = 0 yields the neutral scale.
SharedScale scale_for_max_abs(ElementFormat f, double max_abs);

// JSON array of format descriptors (name, widths, bias, emax, max finite,
// special-value policy) plus the E8M0 scale descriptor.
std::string formats_json();

}  // namespace mxsim
