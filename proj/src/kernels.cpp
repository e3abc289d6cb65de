// Kernel dispatch plus the Datapath and Scalar block-MAC implementations.
// The scalar kernel drops all trace plumbing: Int8 products use native
// integer multiplies (proven equal to the 2-bit fabric), Fp4 steps collapse
// to one integer dot product, and Fp8Fp6 runs a compact re-statement of the
// two L2 alignment variants. Results are bit-identical to the datapath.
#include "mxsim/kernels.hpp"

#include <algorithm>
#include <bit>
#include <cstdlib>
#include <span>
#include <stdexcept>
#include <string>

#include "kernels_detail.hpp"
#include "mxsim/common.hpp"

namespace mxsim {
namespace {

using detail::accumulate_tail;
using detail::kFp4Value;

void check_codes_finite(ElementFormat fmt, const uint8_t* a,
                        const uint8_t* b) {
  const FormatInfo& fi = format_info(fmt);
  if (!fi.has_inf && !fi.has_nan) return;
  for (int i = 0; i < kBlockElems; ++i) {
    require(!is_inf_code(fmt, a[i]) && !is_nan_code(fmt, a[i]) &&
                !is_inf_code(fmt, b[i]) && !is_nan_code(fmt, b[i]),
            "block codes must be finite");
  }
}

// ---- Scalar Fp8Fp6 internals -------------------------------------------

// Signed significand and effective exponent field of one element code.
struct CodeVal {
  int32_t sig = 0;
  int32_t eff = 0;
};

std::array<CodeVal, 256> decode_table(ElementFormat fmt) {
  const FormatInfo& fi = format_info(fmt);
  const int mask = (1 << fi.total_bits) - 1;
  std::array<CodeVal, 256> t{};
  for (int c = 0; c <= mask; ++c) {
    int expf = (c >> fi.mant_bits) & ((1 << fi.exp_bits) - 1);
    int mant = c & ((1 << fi.mant_bits) - 1);
    int sig = expf ? (1 << fi.mant_bits) + mant : mant;
    bool neg = (c >> (fi.exp_bits + fi.mant_bits)) & 1;
    t[size_t(c)] = {neg ? -sig : sig, expf ? expf : 1};
  }
  for (int c = mask + 1; c < 256; ++c) t[size_t(c)] = t[size_t(c & mask)];
  return t;
}

// 26-bit alignment window anchored at the largest term; shifted-out
// magnitude bits truncate toward zero.
FixedTerm window_add(std::span<const FixedTerm> terms) {
  int anchor = 0;
  bool any = false;
  for (const FixedTerm& t : terms) {
    if (t.sig == 0) continue;
    int64_t mag = t.sig < 0 ? -t.sig : t.sig;
    int fl = std::bit_width(uint64_t(mag)) - 1 + t.exp;
    anchor = any ? std::max(anchor, fl) : fl;
    any = true;
  }
  if (!any) return {0, 0};
  const int window_lsb = anchor - 25;
  int64_t sum = 0;
  for (const FixedTerm& t : terms) {
    if (t.sig == 0) continue;
    int shift = window_lsb - t.exp;
    int64_t mag = t.sig < 0 ? -t.sig : t.sig;
    if (shift > 0)
      mag >>= std::min(shift, 63);
    else
      mag <<= -shift;
    sum += t.sig < 0 ? -mag : mag;
  }
  return {sum, window_lsb};
}

// 24-bit normalization with RNE on narrowing.
FixedTerm renorm24(int64_t sig, int exp) {
  if (sig == 0) return {0, 0};
  int64_t mag = sig < 0 ? -sig : sig;
  int bits = std::bit_width(uint64_t(mag));
  if (bits <= 24) {
    mag <<= 24 - bits;
    exp -= 24 - bits;
  } else {
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

// Pre-normalized pairwise adds in a 24-bit window; operands more than 26
// binary places apart drop the smaller one.
FixedTerm norm_fold(std::span<const FixedTerm> terms) {
  FixedTerm acc{0, 0};
  bool first = true;
  for (const FixedTerm& raw : terms) {
    FixedTerm t = renorm24(raw.sig, raw.exp);
    if (first) {
      acc = t;
      first = false;
      continue;
    }
    if (t.sig == 0) continue;
    if (acc.sig == 0) {
      acc = t;
      continue;
    }
    FixedTerm hi = acc, lo = t;
    if (lo.exp > hi.exp) std::swap(hi, lo);
    int gap = hi.exp - lo.exp;
    if (gap > 26) {
      acc = hi;
      continue;
    }
    acc = renorm24((hi.sig << gap) + lo.sig, lo.exp);
  }
  return acc;
}

void scalar_int8(const uint8_t* a, const uint8_t* b, int se, MacState* grid) {
  for (int i = 0; i < kBlockDim; ++i) {
    for (int j = 0; j < kBlockDim; ++j) {
      MacState s = grid[i * kBlockDim + j];
      for (int k = 0; k < kBlockDim; ++k) {
        int32_t p = int32_t(int8_t(a[i * kBlockDim + k])) *
                    int32_t(int8_t(b[k * kBlockDim + j]));
        accumulate_tail(s, p, -12, se);
      }
      grid[i * kBlockDim + j] = s;
    }
  }
}

void scalar_fp4(const uint8_t* a, const uint8_t* b, int se, MacState* grid) {
  int32_t va[kBlockElems], vb[kBlockElems];
  for (int i = 0; i < kBlockElems; ++i) {
    va[i] = kFp4Value[a[i] & 15];
    vb[i] = kFp4Value[b[i] & 15];
  }
  for (int i = 0; i < kBlockDim; ++i) {
    for (int j = 0; j < kBlockDim; ++j) {
      int32_t n = 0;
      for (int k = 0; k < kBlockDim; ++k)
        n += va[i * kBlockDim + k] * vb[k * kBlockDim + j];
      accumulate_tail(grid[i * kBlockDim + j], n, -2, se);
    }
  }
}

void scalar_fp8fp6(const MacVariant& variant, ElementFormat fmt,
                   const uint8_t* a, const uint8_t* b, int se,
                   MacState* grid) {
  const FormatInfo& fi = format_info(fmt);
  const int exp_off = -2 * fi.bias - 2 * fi.mant_bits;
  const std::array<CodeVal, 256> dec = decode_table(fmt);
  for (int i = 0; i < kBlockDim; ++i) {
    for (int j = 0; j < kBlockDim; ++j) {
      MacState s = grid[i * kBlockDim + j];
      for (int step = 0; step < 2; ++step) {
        std::array<FixedTerm, 4> terms;
        for (int t = 0; t < 4; ++t) {
          int k = step * 4 + t;
          CodeVal ca = dec[a[i * kBlockDim + k]];
          CodeVal cb = dec[b[k * kBlockDim + j]];
          terms[size_t(t)] = {int64_t(ca.sig) * cb.sig,
                              ca.eff + cb.eff + exp_off};
        }
        FixedTerm r = variant.policy == L2Policy::MantissaAdderExtension
                          ? window_add(terms)
                          : norm_fold(terms);
        accumulate_tail(s, r.sig, r.exp, se);
      }
      grid[i * kBlockDim + j] = s;
    }
  }
}

}  // namespace

const char* kernel_name(KernelImpl k) {
  switch (k) {
    case KernelImpl::Datapath: return "datapath";
    case KernelImpl::Scalar: return "scalar";
    case KernelImpl::Avx2: return "avx2";
  }
  throw contract_error("unknown kernel");
}

KernelImpl kernel_from_name(std::string_view name) {
  for (KernelImpl k :
       {KernelImpl::Datapath, KernelImpl::Scalar, KernelImpl::Avx2})
    if (name == kernel_name(k)) return k;
  throw std::invalid_argument("unknown kernel: " + std::string(name));
}

bool kernel_compiled(KernelImpl k) {
  if (k != KernelImpl::Avx2) return true;
#ifdef MXSIM_WITH_AVX2
  return true;
#else
  return false;
#endif
}

bool kernel_available(KernelImpl k) {
  if (!kernel_compiled(k)) return false;
  if (k == KernelImpl::Avx2) return __builtin_cpu_supports("avx2") != 0;
  return true;
}

KernelImpl select_kernel() {
  if (const char* env = std::getenv("MXSIM_KERNEL")) {
    KernelImpl k;
    try {
      k = kernel_from_name(env);
    } catch (const std::invalid_argument&) {
      throw std::runtime_error(std::string("MXSIM_KERNEL: unknown kernel '") +
                               env + "'");
    }
    if (!kernel_available(k))
      throw std::runtime_error(std::string("MXSIM_KERNEL: kernel '") + env +
                               "' is not available on this machine");
    return k;
  }
  return kernel_available(KernelImpl::Avx2) ? KernelImpl::Avx2
                                            : KernelImpl::Scalar;
}

void block_mac_datapath(const MacVariant& variant, ElementFormat fmt,
                        const uint8_t* a, const uint8_t* b,
                        int shared_scale_exp, MacState* grid) {
  const MacMode mode = mode_for_format(fmt);
  const int pairs = mode_pairs_per_step(mode);
  for (int i = 0; i < kBlockDim; ++i) {
    for (int j = 0; j < kBlockDim; ++j) {
      MacState s = grid[i * kBlockDim + j];
      for (int k0 = 0; k0 < kBlockDim; k0 += pairs) {
        MacOperands ops;
        ops.mode = mode;
        ops.format = fmt;
        ops.shared_scale_exp = shared_scale_exp;
        for (int t = 0; t < pairs; ++t) {
          ops.a[size_t(t)] = a[i * kBlockDim + k0 + t];
          ops.b[size_t(t)] = b[(k0 + t) * kBlockDim + j];
        }
        s = mac_step(s, ops, variant);
      }
      grid[i * kBlockDim + j] = s;
    }
  }
}

void block_mac_scalar(const MacVariant& variant, ElementFormat fmt,
                      const uint8_t* a, const uint8_t* b, int shared_scale_exp,
                      MacState* grid) {
  switch (mode_for_format(fmt)) {
    case MacMode::Int8: scalar_int8(a, b, shared_scale_exp, grid); return;
    case MacMode::Fp4: scalar_fp4(a, b, shared_scale_exp, grid); return;
    case MacMode::Fp8Fp6:
      scalar_fp8fp6(variant, fmt, a, b, shared_scale_exp, grid);
      return;
  }
  throw contract_error("unknown mac mode");
}

void block_mac(KernelImpl impl, const MacVariant& variant, ElementFormat fmt,
               const uint8_t* a, const uint8_t* b, int shared_scale_exp,
               MacState* grid) {
  check_codes_finite(fmt, a, b);
  switch (impl) {
    case KernelImpl::Datapath:
      block_mac_datapath(variant, fmt, a, b, shared_scale_exp, grid);
      return;
    case KernelImpl::Scalar:
      block_mac_scalar(variant, fmt, a, b, shared_scale_exp, grid);
      return;
    case KernelImpl::Avx2:
      if (!kernel_available(KernelImpl::Avx2))
        throw std::runtime_error("avx2 kernel is not available");
#ifdef MXSIM_WITH_AVX2
      block_mac_avx2(variant, fmt, a, b, shared_scale_exp, grid);
      return;
#else
      break;
#endif
  }
  throw contract_error("unknown kernel");
}

}  // namespace mxsim
