#pragma once
// Functional, bit-faithful model of the precision-scalable MAC unit: sixteen
// 2-bit multipliers wired per mode, hierarchical L1/L2 adders, and an FP32
// accumulator.
//
// Modes (one mac_step each):
//   Int8   - one signed 8-bit pair; sign-magnitude conversion, sixteen 2-bit
//            partial products at shifts 2(i+j), grouped as four L1 rows.
//   Fp8Fp6 - four element-code pairs; each mantissa product runs four 2-bit
//            multipliers through one L1 (8-bit output), the four products
//            meet in the L2 adder.
//   Fp4    - eight E2M1 pairs; each product is a single 2-bit multiply, two
//            L1 trees shift-add four products each by the E3M4 product
//            exponent (field sum - 2, range 0..4, no max-exponent search),
//            L2 adds the two halves.
//
// Exponent bookkeeping: fp_multiply reports the raw exponent-field sum; the
// value it denotes is sig * 2^(exp_field_sum - 2*bias - 2*mant_bits).
// Internally terms travel as FixedTerm {sig, exp} with value sig * 2^exp, so
// Int8 products carry exp -12 (two 2^-6 fixed-point factors).
//
// The L2 adder comes in the two design variants: MantissaAdderExtension
// aligns every term into a 26-bit window anchored at the largest term,
// truncating shifted-out magnitude bits (no pre/post normalization);
// NormalizeInputs pre-normalizes each input to a 24-bit significand and adds
// pairwise in a 24-bit window, renormalizing after each add. Integer modes
// (Int8/Fp4) have equal term exponents, so alignment is a no-op and
// bypass_enabled (skip it outright) is timing-only: results are identical.
//
// mac_step applies 2^shared_scale_exp (the sum of the two blocks' unbiased
// shared-scale exponents) to the product-sum exactly in double, converts to
// FP32 round-to-nearest-even, and accumulates in FP32. Overflow clamps the
// accumulator to +-FLT_MAX and raises the saturated diagnostic, so MacState
// always holds a finite value.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mxsim/formats.hpp"

namespace mxsim {

enum class MacMode : uint8_t { Int8 = 0, Fp8Fp6, Fp4 };
const char* mode_name(MacMode m);
MacMode mode_from_name(std::string_view name);
MacMode mode_for_format(ElementFormat f);
int mode_pairs_per_step(MacMode m);  // 1 / 4 / 8 operand pairs per cycle

enum class L2Policy : uint8_t { MantissaAdderExtension = 0, NormalizeInputs };
const char* l2_policy_name(L2Policy p);
L2Policy l2_policy_from_name(std::string_view name);

struct MacVariant {
  L2Policy policy = L2Policy::MantissaAdderExtension;
  bool bypass_enabled = false;
};

// value = sig * 2^exp (exp is the weight of the significand's LSB).
struct FixedTerm {
  int64_t sig = 0;
  int exp = 0;
};

// Unnormalized element product: value = +-sig * 2^(exp_field_sum - 2*bias -
// 2*mant_bits). Subnormal operands contribute exponent field 1 (no implicit
// bit), which is what keeps the E2M1 product exponent, field sum - 2, inside
// the E3M4 range 0..4.
struct FpProduct {
  int sig = 0;
  int exp_field_sum = 0;
  bool negative = false;
};

// Per-step trace record; every internal signal needed to replay the cycle.
struct MacStepTrace {
  MacMode mode = MacMode::Int8;
  ElementFormat format = ElementFormat::Int8;
  MacVariant variant;
  int shared_scale_exp = 0;
  std::vector<std::array<uint8_t, 2>> pairs;

  // Int8 mode internals.
  std::array<uint8_t, 16> int8_partials{};  // p[i*4+j] = mul2bit(a_i, b_j)
  std::array<int32_t, 4> int8_l1_rows{};    // row i = sum_j p_ij << 2j
  bool int8_negative = false;

  // Fp8Fp6 / Fp4 internals.
  std::vector<std::array<uint8_t, 4>> fp_partials;  // per product
  std::vector<FpProduct> fp_products;
  std::vector<FixedTerm> fp4_l1_sums;  // the two four-product L1 outputs

  // L2 stage.
  std::string l2_path;  // "anchored" | "normalized" | "bypass"
  int l2_anchor_exp = 0;
  std::vector<int> l2_shifts;
  FixedTerm product_sum;

  // Accumulation.
  float product_fp32 = 0.0f;
  float acc_before = 0.0f;
  float acc_after = 0.0f;
  bool saturated = false;
};

struct MacTrace {
  std::vector<MacStepTrace> steps;
  // One JSON object per line per step; stable field order, hex-float values.
  std::string to_jsonl() const;
};

struct MacOperands {
  MacMode mode = MacMode::Int8;
  ElementFormat format = ElementFormat::Int8;
  // First mode_pairs_per_step(mode) element-code pairs are used. Int8 uses
  // raw two's-complement codes in a[0]/b[0].
  std::array<uint8_t, 8> a{};
  std::array<uint8_t, 8> b{};
  int shared_scale_exp = 0;
};

struct MacState {
  float accumulator = 0.0f;
  bool saturated = false;
};

// Elementary 2-bit multiplier: exact product 0..9.
int mul2bit(int a, int b);

// Exact a*b through sixteen 2-bit partial products, four L1 rows and the L2
// adder; equals the native product for all inputs, any variant.
int32_t int8_multiply(int8_t a, int8_t b, const MacVariant& variant,
                      MacStepTrace* trace = nullptr);

// Unnormalized minifloat product of two finite element codes.
FpProduct fp_multiply(ElementFormat format, uint8_t code_a, uint8_t code_b,
                      MacStepTrace* trace = nullptr);

// L1: exact shift-add of up to four 4-bit partial products.
int64_t l1_add_partials(std::span<const int> partials,
                        std::span<const int> shifts);

// L1, FP4 flavor: shift-add of up to four completed products by their E3M4
// product exponents (field sum - 2; contract: 0..4); common LSB weight 2^-2.
FixedTerm l1_add_fp4(std::span<const FpProduct> products);

// L2: combine terms per variant/mode; see the header comment for semantics.
FixedTerm l2_add(const MacVariant& variant, MacMode mode,
                 std::span<const FixedTerm> terms,
                 MacStepTrace* trace = nullptr);

// One accumulation cycle; pure transition (state in, state out).
MacState mac_step(const MacState& state, const MacOperands& ops,
                  const MacVariant& variant, MacTrace* trace = nullptr);

}  // namespace mxsim
