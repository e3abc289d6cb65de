#include "mxsim/formats.hpp"

#include <cmath>
#include <cstring>

#include <json.hpp>

namespace mxsim {

namespace {

// Widths and biases define each format; emax and max_finite are the enumerated
// consequences, stored here and re-validated by the test suite.
const FormatInfo kFormats[kNumFormats] = {
    // name        bits e  m  bias emax max_finite    inf    nan
    {"int8", 8, 0, 6, 0, 0, 127.0 / 64.0, false, false},
    {"fp8_e5m2", 8, 5, 2, 15, 15, 57344.0, true, true},
    {"fp8_e4m3", 8, 4, 3, 7, 8, 448.0, false, true},
    {"fp6_e3m2", 6, 3, 2, 3, 4, 28.0, false, false},
    {"fp6_e2m3", 6, 2, 3, 1, 2, 7.5, false, false},
    {"fp4_e2m1", 4, 2, 1, 1, 2, 6.0, false, false},
};

struct Fields {
  int sign;   // 0/1
  int expf;   // raw exponent field
  int mant;   // raw mantissa field
};

Fields split(const FormatInfo& fi, uint8_t code) {
  int mmask = (1 << fi.mant_bits) - 1;
  int emask = (1 << fi.exp_bits) - 1;
  return {(code >> (fi.exp_bits + fi.mant_bits)) & 1,
          (code >> fi.mant_bits) & emask, code & mmask};
}

}  // namespace

const FormatInfo& format_info(ElementFormat f) {
  return kFormats[static_cast<int>(f)];
}

ElementFormat format_from_name(std::string_view name) {
  for (int i = 0; i < kNumFormats; ++i)
    if (name == kFormats[i].name) return static_cast<ElementFormat>(i);
  throw std::invalid_argument("unknown element format: " + std::string(name));
}

bool is_nan_code(ElementFormat f, uint8_t code) {
  const FormatInfo& fi = format_info(f);
  if (!fi.has_nan) return false;
  Fields x = split(fi, code);
  int emask = (1 << fi.exp_bits) - 1;
  int mmask = (1 << fi.mant_bits) - 1;
  if (fi.has_inf) return x.expf == emask && x.mant != 0;       // E5M2
  return x.expf == emask && x.mant == mmask;                   // E4M3
}

bool is_inf_code(ElementFormat f, uint8_t code) {
  const FormatInfo& fi = format_info(f);
  if (!fi.has_inf) return false;
  Fields x = split(fi, code);
  return x.expf == ((1 << fi.exp_bits) - 1) && x.mant == 0;
}

double decode_element(ElementFormat f, uint8_t code) {
  const FormatInfo& fi = format_info(f);
  require(code < (1u << fi.total_bits), "element code out of range");
  if (f == ElementFormat::Int8) {
    int8_t sv;
    std::memcpy(&sv, &code, 1);
    return std::ldexp(static_cast<double>(sv), -6);
  }
  if (is_nan_code(f, code)) return std::numeric_limits<double>::quiet_NaN();
  Fields x = split(fi, code);
  double sign = x.sign ? -1.0 : 1.0;
  if (is_inf_code(f, code)) return sign * std::numeric_limits<double>::infinity();
  if (x.expf == 0)  // subnormal: no implicit bit, effective exponent 1 - bias
    return sign * std::ldexp(static_cast<double>(x.mant), 1 - fi.bias - fi.mant_bits);
  return sign * std::ldexp(static_cast<double>((1 << fi.mant_bits) + x.mant),
                           x.expf - fi.bias - fi.mant_bits);
}

uint8_t encode_element(ElementFormat f, double value) {
  const FormatInfo& fi = format_info(f);
  require(std::isfinite(value), "encode_element requires a finite value");
  if (f == ElementFormat::Int8) {
    double q = std::nearbyint(std::ldexp(value, 6));  // RNE in default mode
    if (q < -128.0) q = -128.0;
    if (q > 127.0) q = 127.0;
    int8_t sv = static_cast<int8_t>(q);
    uint8_t code;
    std::memcpy(&code, &sv, 1);
    return code;
  }
  if (value == 0.0) return 0;  // -0 canonicalizes to +0
  int sign = std::signbit(value) ? 1 : 0;
  double mag = std::fabs(value);

  // Round on the grid of the value's (clamped) binade: step = 2^(e - mant_bits).
  int e = std::ilogb(mag);
  int emin = 1 - fi.bias;  // smallest normal exponent; also the subnormal grid
  if (e < emin) e = emin;
  if (e > fi.emax) e = fi.emax;
  double q = std::ldexp(mag, fi.mant_bits - e);  // exact scaling
  // Largest valid integer significand in the top binade: (2 - 2^-m) * 2^m,
  // minus one step for E4M3 where the all-ones mantissa pattern is NaN.
  uint32_t top_sig = (2u << fi.mant_bits) - 1;
  if (fi.has_nan && !fi.has_inf) top_sig -= 1;
  if (e == fi.emax && q >= static_cast<double>(top_sig) + 0.5) {
    // Saturate to max finite (RNE at the exact boundary also rounds out).
    uint32_t code = (static_cast<uint32_t>(fi.emax + fi.bias) << fi.mant_bits) |
                    (top_sig - (1u << fi.mant_bits));
    return static_cast<uint8_t>((sign << (fi.exp_bits + fi.mant_bits)) | code);
  }
  uint32_t r = static_cast<uint32_t>(std::nearbyint(q));
  if (r == 0) return 0;             // rounded to zero: canonical +0
  if (r >= (2u << fi.mant_bits)) {  // rounded up across the binade
    r >>= 1;
    ++e;  // cannot exceed emax: the saturation branch above caught that case
  }
  uint32_t expf, mant;
  if (r >= (1u << fi.mant_bits)) {  // normal
    expf = static_cast<uint32_t>(e + fi.bias);
    mant = r - (1u << fi.mant_bits);
  } else {  // subnormal (e == emin here by construction)
    expf = 0;
    mant = r;
  }
  return static_cast<uint8_t>((sign << (fi.exp_bits + fi.mant_bits)) |
                              (expf << fi.mant_bits) | mant);
}

double scale_value(SharedScale s) {
  return std::ldexp(1.0, scale_exp_unbiased(s));
}

int scale_exp_unbiased(SharedScale s) {
  require(s.exp_code != 255, "E8M0 code 255 (NaN-scale) is reserved");
  return static_cast<int>(s.exp_code) - 127;
}

SharedScale scale_for_max_abs(ElementFormat f, double max_abs) {
  require(std::isfinite(max_abs) && max_abs >= 0.0,
          "scale rule requires a finite non-negative magnitude");
  if (max_abs == 0.0) return SharedScale{127};
  int se = std::ilogb(max_abs) - format_info(f).emax;
  require(se <= 127, "shared scale overflows E8M0");
  if (se < -127) se = -127;  // clamp into the representable scale range
  return SharedScale{static_cast<uint8_t>(se + 127)};
}

std::string formats_json() {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (int i = 0; i < kNumFormats; ++i) {
    const FormatInfo& fi = kFormats[i];
    nlohmann::ordered_json j;
    j["name"] = fi.name;
    j["total_bits"] = fi.total_bits;
    j["exp_bits"] = fi.exp_bits;
    j["mant_bits"] = fi.mant_bits;
    j["bias"] = fi.bias;
    j["emax"] = fi.emax;
    j["max_finite"] = fi.max_finite;
    j["has_inf"] = fi.has_inf;
    j["has_nan"] = fi.has_nan;
    out.push_back(j);
  }
  nlohmann::ordered_json scale;
  scale["name"] = "e8m0";
  scale["description"] = "shared scale, value = 2^(code-127), code 255 reserved";
  nlohmann::ordered_json root;
  root["element_formats"] = out;
  root["shared_scale"] = scale;
  return root.dump(2) + "\n";
}

}  // namespace mxsim
