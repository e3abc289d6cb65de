// Precision-scalable MAC datapath: sixteen 2-bit multipliers, hierarchical
// L1/L2 adders (two L2 design variants plus the integer-mode bypass), exact
// shared-scale application and FP32 accumulation. See mxsim/mac.hpp for the
// mode wiring and exponent conventions.
#include "mxsim/mac.hpp"

#include <algorithm>
#include <bit>
#include <cfloat>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include <json.hpp>

namespace mxsim {
namespace {

int floor_log2_i64(int64_t mag) {
  return std::bit_width(static_cast<uint64_t>(mag)) - 1;
}

// Exact value move of sig * 2^exp onto LSB weight 2^target (right shifts only
// ever drop zero bits for the integer-mode sums this is used on).
int64_t sig_at_exp(FixedTerm t, int target) {
  int shift = t.exp - target;
  if (shift >= 0) return t.sig << shift;
  int64_t mag = t.sig < 0 ? -t.sig : t.sig;
  mag >>= -shift;
  return t.sig < 0 ? -mag : mag;
}

// MantissaAdderExtension: one alignment pass over all terms. The 26-bit
// window (24 + 2 extension bits) is anchored at the largest term's leading
// bit; every term is aligned to the window LSB with its magnitude truncated
// toward zero, then summed exactly (the sum may carry past the window top;
// the conversion to FP32 absorbs it).
FixedTerm l2_anchored(std::span<const FixedTerm> terms, MacStepTrace* trace) {
  int anchor = 0;
  bool any = false;
  for (const FixedTerm& t : terms) {
    if (t.sig == 0) continue;
    int fl = floor_log2_i64(t.sig < 0 ? -t.sig : t.sig) + t.exp;
    anchor = any ? std::max(anchor, fl) : fl;
    any = true;
  }
  if (trace) {
    trace->l2_path = "anchored";
    trace->l2_anchor_exp = any ? anchor : 0;
  }
  if (!any) return {0, 0};
  int window_lsb = anchor - 25;
  int64_t sum = 0;
  for (const FixedTerm& t : terms) {
    int shift = t.sig == 0 ? 0 : window_lsb - t.exp;
    if (trace) trace->l2_shifts.push_back(shift);
    if (t.sig == 0) continue;
    int64_t mag = t.sig < 0 ? -t.sig : t.sig;
    if (shift > 0)
      mag >>= std::min(shift, 63);
    else
      mag <<= -shift;  // <= 25 positions; bounded by the anchor
    sum += t.sig < 0 ? -mag : mag;
  }
  return {sum, window_lsb};
}

// NormalizeInputs building block: significand normalized to [2^23, 2^24).
FixedTerm normalize24(int64_t sig, int exp) {
  if (sig == 0) return {0, 0};
  int64_t mag = sig < 0 ? -sig : sig;
  int bits = std::bit_width(static_cast<uint64_t>(mag));
  if (bits <= 24) {
    mag <<= 24 - bits;
    exp -= 24 - bits;
  } else {
    // Round-to-nearest-even down to 24 bits.
    int drop = bits - 24;
    int64_t low = mag & ((int64_t(1) << drop) - 1);
    int64_t half = int64_t(1) << (drop - 1);
    mag >>= drop;
    exp += drop;
    if (low > half || (low == half && (mag & 1))) ++mag;
    if (mag == int64_t(1) << 24) {
      mag >>= 1;
      ++exp;
    }
  }
  return {sig < 0 ? -mag : mag, exp};
}

// NormalizeInputs: pre-normalize each input, then fold left with 24-bit
// adds (align to the larger exponent, add, renormalize with RNE).
FixedTerm l2_normalized(std::span<const FixedTerm> terms, MacStepTrace* trace) {
  if (trace) trace->l2_path = "normalized";
  FixedTerm acc{0, 0};
  bool first = true;
  for (const FixedTerm& raw : terms) {
    FixedTerm t = normalize24(raw.sig, raw.exp);
    if (first) {
      acc = t;
      first = false;
      continue;
    }
    if (t.sig == 0) {
      if (trace) trace->l2_shifts.push_back(0);
      continue;
    }
    if (acc.sig == 0) {
      if (trace) trace->l2_shifts.push_back(0);
      acc = t;
      continue;
    }
    FixedTerm hi = acc, lo = t;
    if (lo.exp > hi.exp) std::swap(hi, lo);
    int gap = hi.exp - lo.exp;
    if (trace) trace->l2_shifts.push_back(gap);
    if (gap > 26) {
      acc = hi;  // lo sits below the guard bits of a 24-bit add
      continue;
    }
    acc = normalize24((hi.sig << gap) + lo.sig, lo.exp);
  }
  return acc;
}

}  // namespace

const char* mode_name(MacMode m) {
  switch (m) {
    case MacMode::Int8: return "int8";
    case MacMode::Fp8Fp6: return "fp8fp6";
    case MacMode::Fp4: return "fp4";
  }
  throw contract_error("unknown mac mode");
}

MacMode mode_from_name(std::string_view name) {
  for (MacMode m : {MacMode::Int8, MacMode::Fp8Fp6, MacMode::Fp4})
    if (name == mode_name(m)) return m;
  throw std::invalid_argument("unknown mac mode: " + std::string(name));
}

MacMode mode_for_format(ElementFormat f) {
  switch (f) {
    case ElementFormat::Int8: return MacMode::Int8;
    case ElementFormat::Fp8E5M2:
    case ElementFormat::Fp8E4M3:
    case ElementFormat::Fp6E3M2:
    case ElementFormat::Fp6E2M3: return MacMode::Fp8Fp6;
    case ElementFormat::Fp4E2M1: return MacMode::Fp4;
  }
  throw contract_error("unknown element format");
}

int mode_pairs_per_step(MacMode m) {
  switch (m) {
    case MacMode::Int8: return 1;
    case MacMode::Fp8Fp6: return 4;
    case MacMode::Fp4: return 8;
  }
  throw contract_error("unknown mac mode");
}

const char* l2_policy_name(L2Policy p) {
  switch (p) {
    case L2Policy::MantissaAdderExtension: return "mantissa_adder_extension";
    case L2Policy::NormalizeInputs: return "normalize_inputs";
  }
  throw contract_error("unknown l2 policy");
}

L2Policy l2_policy_from_name(std::string_view name) {
  for (L2Policy p :
       {L2Policy::MantissaAdderExtension, L2Policy::NormalizeInputs})
    if (name == l2_policy_name(p)) return p;
  throw std::invalid_argument("unknown l2 policy: " + std::string(name));
}

int mul2bit(int a, int b) {
  require(a >= 0 && a <= 3 && b >= 0 && b <= 3,
          "mul2bit operands must be 2-bit unsigned");
  return a * b;
}

int32_t int8_multiply(int8_t a, int8_t b, const MacVariant& variant,
                      MacStepTrace* trace) {
  // Sign-magnitude conversion, then four 2-bit digits per magnitude.
  bool negative = (a < 0) != (b < 0);
  int ma = std::abs(int(a));
  int mb = std::abs(int(b));
  int da[4], db[4];
  for (int i = 0; i < 4; ++i) {
    da[i] = (ma >> (2 * i)) & 3;
    db[i] = (mb >> (2 * i)) & 3;
  }
  std::array<uint8_t, 16> partials{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      partials[i * 4 + j] = uint8_t(mul2bit(da[i], db[j]));

  // L1: row i collects the partials of digit a_i across b's digits.
  static constexpr int kRowShifts[4] = {0, 2, 4, 6};
  std::array<int32_t, 4> rows{};
  for (int i = 0; i < 4; ++i) {
    int p[4];
    for (int j = 0; j < 4; ++j) p[j] = partials[i * 4 + j];
    rows[i] = int32_t(l1_add_partials(p, kRowShifts));
  }
  if (trace) {
    trace->int8_partials = partials;
    trace->int8_l1_rows = rows;
    trace->int8_negative = negative;
  }

  // L2: rows pre-shifted to a common LSB weight (magnitudes, sign reapplied
  // after the tree, matching the sign-magnitude datapath).
  std::array<FixedTerm, 4> terms;
  for (int i = 0; i < 4; ++i) terms[i] = {int64_t(rows[i]) << (2 * i), 0};
  FixedTerm sum = l2_add(variant, MacMode::Int8, terms, trace);
  int64_t mag = sig_at_exp(sum, 0);
  return int32_t(negative ? -mag : mag);
}

FpProduct fp_multiply(ElementFormat format, uint8_t code_a, uint8_t code_b,
                      MacStepTrace* trace) {
  require(format != ElementFormat::Int8,
          "fp_multiply requires a minifloat format");
  require(!is_nan_code(format, code_a) && !is_inf_code(format, code_a) &&
              !is_nan_code(format, code_b) && !is_inf_code(format, code_b),
          "fp_multiply operands must be finite codes");
  const FormatInfo& fi = format_info(format);
  const int mmask = (1 << fi.mant_bits) - 1;
  const int emask = (1 << fi.exp_bits) - 1;
  auto split = [&](uint8_t code, int& sig, int& eff_exp, bool& neg) {
    neg = (code >> (fi.exp_bits + fi.mant_bits)) & 1;
    int expf = (code >> fi.mant_bits) & emask;
    int mant = code & mmask;
    // Subnormals: exponent field 0 counts as 1, no implicit bit.
    sig = expf == 0 ? mant : (1 << fi.mant_bits) + mant;
    eff_exp = std::max(expf, 1);
  };
  int sa, sb, ea, eb;
  bool na, nb;
  split(code_a, sa, ea, na);
  split(code_b, sb, eb, nb);

  FpProduct out;
  out.exp_field_sum = ea + eb;
  out.negative = na != nb;
  std::array<uint8_t, 4> partials{};
  if (format == ElementFormat::Fp4E2M1) {
    // 2-bit significands: a single elementary multiplier completes a product.
    partials[0] = uint8_t(mul2bit(sa, sb));
    out.sig = partials[0];
  } else {
    // Up to 4-bit significands: four 2-bit partials through one L1 adder.
    int ha = sa >> 2, la = sa & 3;
    int hb = sb >> 2, lb = sb & 3;
    partials = {uint8_t(mul2bit(ha, hb)), uint8_t(mul2bit(ha, lb)),
                uint8_t(mul2bit(la, hb)), uint8_t(mul2bit(la, lb))};
    int p[4] = {partials[0], partials[1], partials[2], partials[3]};
    static constexpr int kShifts[4] = {4, 2, 2, 0};
    out.sig = int(l1_add_partials(p, kShifts));
  }
  if (trace) {
    trace->fp_partials.push_back(partials);
    trace->fp_products.push_back(out);
  }
  return out;
}

int64_t l1_add_partials(std::span<const int> partials,
                        std::span<const int> shifts) {
  require(partials.size() == shifts.size() && !partials.empty() &&
              partials.size() <= 4,
          "l1_add_partials takes up to four partial/shift pairs");
  int64_t sum = 0;
  for (size_t i = 0; i < partials.size(); ++i) {
    require(partials[i] >= 0 && partials[i] <= 9,
            "partial product outside the 2-bit multiplier range");
    require(shifts[i] >= 0 && shifts[i] <= 12, "partial shift outside 0..12");
    sum += int64_t(partials[i]) << shifts[i];
  }
  return sum;
}

FixedTerm l1_add_fp4(std::span<const FpProduct> products) {
  require(!products.empty() && products.size() <= 4,
          "l1_add_fp4 takes up to four products");
  int64_t sum = 0;
  for (const FpProduct& p : products) {
    if (p.sig == 0) continue;  // a zero product carries no exponent meaning
    // E3M4 product exponent; the direct shift obviates a max-exponent search.
    int e = p.exp_field_sum - 2;
    require(e >= 0 && e <= 4, "FP4 product exponent outside 0..4");
    int64_t shifted = int64_t(p.sig) << e;
    sum += p.negative ? -shifted : shifted;
  }
  return {sum, -2};
}

FixedTerm l2_add(const MacVariant& variant, MacMode mode,
                 std::span<const FixedTerm> terms, MacStepTrace* trace) {
  require(!terms.empty() && terms.size() <= 4, "l2_add takes one to four terms");
  if (variant.bypass_enabled && mode != MacMode::Fp8Fp6) {
    // Integer modes arrive pre-aligned; skipping the alignment logic is a
    // timing shortcut, not a numerical one.
    for (const FixedTerm& t : terms)
      require(t.exp == terms[0].exp, "bypass requires aligned terms");
    int64_t sum = 0;
    for (const FixedTerm& t : terms) sum += t.sig;
    if (trace) {
      trace->l2_path = "bypass";
      trace->l2_anchor_exp = terms[0].exp;
      trace->l2_shifts.assign(terms.size(), 0);
    }
    return {sum, terms[0].exp};
  }
  return variant.policy == L2Policy::MantissaAdderExtension
             ? l2_anchored(terms, trace)
             : l2_normalized(terms, trace);
}

MacState mac_step(const MacState& state, const MacOperands& ops,
                  const MacVariant& variant, MacTrace* trace) {
  require(ops.mode == mode_for_format(ops.format),
          "operand format does not match the mac mode");
  const int npairs = mode_pairs_per_step(ops.mode);
  MacStepTrace step;
  step.mode = ops.mode;
  step.format = ops.format;
  step.variant = variant;
  step.shared_scale_exp = ops.shared_scale_exp;
  for (int i = 0; i < npairs; ++i)
    step.pairs.push_back({ops.a[i], ops.b[i]});

  FixedTerm product_sum;
  if (ops.mode == MacMode::Int8) {
    int32_t p = int8_multiply(int8_t(ops.a[0]), int8_t(ops.b[0]), variant,
                              &step);
    product_sum = {p, -12};  // two 2^-6 fixed-point factors
  } else if (ops.mode == MacMode::Fp8Fp6) {
    const FormatInfo& fi = format_info(ops.format);
    std::array<FixedTerm, 4> terms;
    for (int i = 0; i < 4; ++i) {
      FpProduct p = fp_multiply(ops.format, ops.a[i], ops.b[i], &step);
      terms[i] = {p.negative ? -int64_t(p.sig) : int64_t(p.sig),
                  p.exp_field_sum - 2 * fi.bias - 2 * fi.mant_bits};
    }
    product_sum = l2_add(variant, ops.mode, terms, &step);
  } else {
    std::array<FpProduct, 8> products;
    for (int i = 0; i < 8; ++i)
      products[i] = fp_multiply(ops.format, ops.a[i], ops.b[i], &step);
    // Two L1 trees of four products each, then the two halves meet in L2.
    std::array<FixedTerm, 2> halves = {
        l1_add_fp4(std::span<const FpProduct>(products.data(), 4)),
        l1_add_fp4(std::span<const FpProduct>(products.data() + 4, 4))};
    step.fp4_l1_sums.assign(halves.begin(), halves.end());
    FixedTerm r = l2_add(variant, ops.mode, halves, &step);
    product_sum = {sig_at_exp(r, -2), -2};  // canonical quarter-LSB form
  }
  step.product_sum = product_sum;

  // Shared scales apply exactly (the significand fits a double), then one
  // RNE conversion and one RNE accumulation in FP32.
  double scaled = std::ldexp(double(product_sum.sig),
                             product_sum.exp + ops.shared_scale_exp);
  bool clipped = false;
  float product_fp32 = float(scaled);
  if (!std::isfinite(product_fp32)) {
    product_fp32 = std::copysign(FLT_MAX, float(scaled > 0 ? 1.f : -1.f));
    clipped = true;
  }
  float acc = state.accumulator + product_fp32;
  if (!std::isfinite(acc)) {
    acc = std::copysign(FLT_MAX, acc);
    clipped = true;
  }
  MacState next{acc, state.saturated || clipped};
  step.product_fp32 = product_fp32;
  step.acc_before = state.accumulator;
  step.acc_after = next.accumulator;
  step.saturated = next.saturated;
  if (trace) trace->steps.push_back(std::move(step));
  return next;
}

std::string MacTrace::to_jsonl() const {
  auto hexf = [](float v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%a", double(v));
    return std::string(buf);
  };
  std::string out;
  for (const MacStepTrace& s : steps) {
    nlohmann::ordered_json j;
    j["mode"] = mode_name(s.mode);
    j["format"] = format_info(s.format).name;
    j["policy"] = l2_policy_name(s.variant.policy);
    j["bypass"] = s.variant.bypass_enabled;
    j["shared_scale_exp"] = s.shared_scale_exp;
    auto& pairs = j["pairs"] = nlohmann::ordered_json::array();
    for (const auto& p : s.pairs) pairs.push_back({p[0], p[1]});
    if (s.mode == MacMode::Int8) {
      j["int8_partials"] = s.int8_partials;
      j["int8_l1_rows"] = s.int8_l1_rows;
      j["int8_negative"] = s.int8_negative;
    } else {
      auto& fp = j["fp_products"] = nlohmann::ordered_json::array();
      for (size_t i = 0; i < s.fp_products.size(); ++i) {
        const FpProduct& p = s.fp_products[i];
        fp.push_back({{"partials", s.fp_partials[i]},
                      {"sig", p.sig},
                      {"exp_field_sum", p.exp_field_sum},
                      {"negative", p.negative}});
      }
      if (s.mode == MacMode::Fp4) {
        auto& l1 = j["fp4_l1_sums"] = nlohmann::ordered_json::array();
        for (const FixedTerm& t : s.fp4_l1_sums)
          l1.push_back({{"sig", t.sig}, {"exp", t.exp}});
      }
    }
    j["l2"] = {{"path", s.l2_path},
               {"anchor_exp", s.l2_anchor_exp},
               {"shifts", s.l2_shifts}};
    j["product_sum"] = {{"sig", s.product_sum.sig}, {"exp", s.product_sum.exp}};
    j["product_fp32"] = hexf(s.product_fp32);
    j["acc_before"] = hexf(s.acc_before);
    j["acc_after"] = hexf(s.acc_after);
    j["saturated"] = s.saturated;
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace mxsim
