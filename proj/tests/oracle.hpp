#pragma once
// Independent oracles for the test suite.
//
// Everything in this header is written directly from the format definitions
// (sign/exponent/mantissa widths, bias, subnormal rule, special-value policy)
// and from plain exact rational arithmetic. It deliberately shares no code
// with the library under test: values are built as exact dyadic rationals
// (integer x 2^exp) using boost::multiprecision, and rounding is resolved by
// nearest-neighbour search over an enumerated value table.

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace oracle {

using boost::multiprecision::cpp_int;

// ---------------------------------------------------------------------------
// Exact dyadic rationals: value = num * 2^exp2.
// ---------------------------------------------------------------------------
struct Dyadic {
  cpp_int num;
  int exp2 = 0;

  Dyadic() = default;
  Dyadic(cpp_int n, int e) : num(std::move(n)), exp2(e) {}

  static Dyadic from_int(long long v) { return {cpp_int(v), 0}; }

  // Exact conversion: every finite double is num * 2^exp2.
  static Dyadic from_double(double v) {
    if (v == 0.0) return {};
    if (!std::isfinite(v)) throw std::invalid_argument("dyadic from non-finite");
    int e = 0;
    double frac = std::frexp(v, &e);       // v = frac * 2^e, |frac| in [0.5, 1)
    double scaled = std::ldexp(frac, 53);  // integral, |.| < 2^53
    return {cpp_int(static_cast<long long>(scaled)), e - 53};
  }

  Dyadic operator+(const Dyadic& o) const {
    int e = std::min(exp2, o.exp2);
    cpp_int a = num << (exp2 - e);
    cpp_int b = o.num << (o.exp2 - e);
    return {a + b, e};
  }
  Dyadic operator-(const Dyadic& o) const {
    Dyadic neg{-o.num, o.exp2};
    return *this + neg;
  }
  Dyadic operator*(const Dyadic& o) const { return {num * o.num, exp2 + o.exp2}; }

  Dyadic scaled_pow2(int k) const { return {num, exp2 + k}; }

  Dyadic abs() const { return {num < 0 ? cpp_int(-num) : num, exp2}; }

  bool is_zero() const { return num == 0; }

  // -1 / 0 / +1 comparison against another dyadic.
  int cmp(const Dyadic& o) const {
    Dyadic d = *this - o;
    if (d.num == 0) return 0;
    return d.num < 0 ? -1 : 1;
  }
  bool operator<(const Dyadic& o) const { return cmp(o) < 0; }
  bool operator==(const Dyadic& o) const { return cmp(o) == 0; }
  bool operator<=(const Dyadic& o) const { return cmp(o) <= 0; }

  // Approximate double value; diagnostics only, never used for pass/fail.
  double to_double_approx() const {
    if (num == 0) return 0.0;
    cpp_int a = num < 0 ? cpp_int(-num) : num;
    long bits = static_cast<long>(msb(a)) + 1;
    int drop = static_cast<int>(bits) - 53;
    if (drop > 0) a >>= drop; else drop = 0;
    double d = a.convert_to<double>();
    d = std::ldexp(d, exp2 + drop);
    return num < 0 ? -d : d;
  }
};

// ulp of FP32 at magnitude |x| (spacing of representable values in x's binade;
// subnormal/zero spacing is 2^-149).
inline Dyadic ulp32(float x) {
  float ax = std::fabs(x);
  if (!std::isfinite(ax)) throw std::invalid_argument("ulp32 of non-finite");
  if (ax < std::numeric_limits<float>::min()) return {cpp_int(1), -149};
  return {cpp_int(1), std::ilogb(ax) - 23};
}

// ---------------------------------------------------------------------------
// Element-format enumeration from first principles.
// ---------------------------------------------------------------------------
struct CodeValue {
  uint8_t code = 0;
  bool is_nan = false;
  bool is_inf = false;
  bool negative = false;
  Dyadic value;  // meaningful only when finite
};

struct OracleFormat {
  std::string name;
  int total_bits = 0, ebits = 0, mbits = 0, bias = 0;
  bool is_int8 = false, has_inf = false, has_nan = false;
  std::vector<CodeValue> codes;                // all 2^total_bits codes
  std::vector<const CodeValue*> finite_asc;    // finite codes sorted by value
  Dyadic max_finite;

  const CodeValue& at(uint8_t c) const { return codes.at(c); }

  // Independent RNE encode: nearest finite value; ties to even low code bit
  // (= even mantissa field for minifloats, even integer for INT8); saturation
  // to the extreme finite values; zero canonicalized to code 0.
  uint8_t encode_rne(double v) const { return encode_rne(Dyadic::from_double(v)); }

  uint8_t encode_rne(const Dyadic& dv) const {
    if (dv.is_zero()) return 0;
    if (dv.cmp(finite_asc.front()->value) <= 0) return finite_asc.front()->code;
    if (dv.cmp(finite_asc.back()->value) >= 0) return finite_asc.back()->code;
    // dv strictly between the extremes: find first table value >= dv.
    size_t hi = 0;
    while (finite_asc[hi]->value.cmp(dv) < 0) ++hi;
    if (finite_asc[hi]->value.cmp(dv) == 0) return canonical_zero(finite_asc[hi]);
    size_t lo = hi - 1;
    Dyadic dlo = (dv - finite_asc[lo]->value).abs();
    Dyadic dhi = (finite_asc[hi]->value - dv).abs();
    int c = dlo.cmp(dhi);
    const CodeValue* pick;
    if (c < 0) pick = finite_asc[lo];
    else if (c > 0) pick = finite_asc[hi];
    else pick = ((finite_asc[lo]->code & 1) == 0) ? finite_asc[lo] : finite_asc[hi];
    return canonical_zero(pick);
  }

 private:
  uint8_t canonical_zero(const CodeValue* cv) const {
    return cv->value.is_zero() ? 0 : cv->code;
  }
};

inline OracleFormat make_minifloat(std::string name, int ebits, int mbits, int bias,
                                   bool has_inf, bool has_nan) {
  OracleFormat f;
  f.name = std::move(name);
  f.total_bits = 1 + ebits + mbits;
  f.ebits = ebits;
  f.mbits = mbits;
  f.bias = bias;
  f.has_inf = has_inf;
  f.has_nan = has_nan;
  const int emask = (1 << ebits) - 1;
  const int mmask = (1 << mbits) - 1;
  for (int c = 0; c < (1 << f.total_bits); ++c) {
    CodeValue cv;
    cv.code = static_cast<uint8_t>(c);
    cv.negative = (c >> (ebits + mbits)) & 1;
    int expf = (c >> mbits) & emask;
    int mant = c & mmask;
    if (has_inf && expf == emask) {
      // IEEE-like top binade: all-ones exponent is inf (mant 0) or NaN.
      if (mant == 0) cv.is_inf = true; else cv.is_nan = true;
    } else if (!has_inf && has_nan && expf == emask && mant == mmask) {
      // E4M3 convention: single NaN pattern per sign, no infinity.
      cv.is_nan = true;
    } else if (expf == 0) {
      // Subnormal: no implicit bit, effective exponent (1 - bias).
      cv.value = Dyadic{cpp_int(mant), 1 - bias - mbits};
    } else {
      cv.value = Dyadic{cpp_int((1 << mbits) + mant), expf - bias - mbits};
    }
    if (cv.negative && !cv.is_nan && !cv.is_inf) cv.value.num = -cv.value.num;
    f.codes.push_back(cv);
  }
  for (const auto& cv : f.codes)
    if (!cv.is_nan && !cv.is_inf) f.finite_asc.push_back(&cv);
  std::sort(f.finite_asc.begin(), f.finite_asc.end(),
            [](const CodeValue* a, const CodeValue* b) { return a->value < b->value; });
  f.max_finite = f.finite_asc.back()->value;
  return f;
}

inline OracleFormat make_int8_fixed() {
  OracleFormat f;
  f.name = "int8";
  f.total_bits = 8;
  f.mbits = 6;  // fixed point, 6 fraction bits
  f.is_int8 = true;
  for (int c = 0; c < 256; ++c) {
    CodeValue cv;
    cv.code = static_cast<uint8_t>(c);
    int8_t sv;
    std::memcpy(&sv, &cv.code, 1);  // two's complement reinterpretation
    cv.negative = sv < 0;
    cv.value = Dyadic{cpp_int(static_cast<int>(sv)), -6};
    f.codes.push_back(cv);
  }
  for (const auto& cv : f.codes) f.finite_asc.push_back(&cv);
  std::sort(f.finite_asc.begin(), f.finite_asc.end(),
            [](const CodeValue* a, const CodeValue* b) { return a->value < b->value; });
  f.max_finite = f.finite_asc.back()->value;
  return f;
}

// The six formats, Table-I parameterization, built independently.
inline const std::vector<OracleFormat>& all_formats() {
  static const std::vector<OracleFormat> fmts = [] {
    std::vector<OracleFormat> v;
    v.push_back(make_int8_fixed());
    v.push_back(make_minifloat("fp8_e5m2", 5, 2, 15, true, true));
    v.push_back(make_minifloat("fp8_e4m3", 4, 3, 7, false, true));
    v.push_back(make_minifloat("fp6_e3m2", 3, 2, 3, false, false));
    v.push_back(make_minifloat("fp6_e2m3", 2, 3, 1, false, false));
    v.push_back(make_minifloat("fp4_e2m1", 2, 1, 1, false, false));
    return v;
  }();
  return fmts;
}

inline const OracleFormat& format_named(const std::string& name) {
  for (const auto& f : all_formats())
    if (f.name == name) return f;
  throw std::invalid_argument("unknown oracle format: " + name);
}

// ---------------------------------------------------------------------------
// Exact MAC step oracle: new_acc = acc + (sum of products) * 2^scale_exp,
// computed with no rounding at all.
// ---------------------------------------------------------------------------
inline Dyadic exact_mac_step(float acc, const std::vector<Dyadic>& products, int scale_exp) {
  Dyadic sum;
  for (const auto& p : products) sum = sum + p;
  return Dyadic::from_double(static_cast<double>(acc)) + sum.scaled_pow2(scale_exp);
}

}  // namespace oracle
