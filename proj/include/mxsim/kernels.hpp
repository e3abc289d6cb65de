#pragma once
// Block-level MAC kernels: the PE-array inner loop (one 8x8 code block pair
// accumulated into 64 FP32 outputs) in three interchangeable implementations.
//
//   Datapath - drives mac_step per cycle; the bit-faithful reference.
//   Scalar   - trace-free reimplementation with native integer products and
//              compact alignment code; the portable fast path.
//   Avx2     - vectorizes the Int8 and Fp4 modes across the eight outputs of
//              a row (product and accumulate lanes in AVX2 registers);
//              Fp8Fp6 alignment is data-dependent per output and stays on
//              the scalar path.
//
// All three produce bit-identical MacState grids for every format, variant,
// and shared-scale exponent: integer-mode products are exact in any order,
// and the FP32 tail (one RNE conversion, one RNE add, saturation clamp) is
// replicated operation for operation. Equivalence is enforced by tests.
//
// Selection: select_kernel() picks the fastest available implementation;
// the MXSIM_KERNEL environment variable ("datapath", "scalar", "avx2")
// forces one explicitly.
//
// Block layout: row-major 8x8 element codes. Output (i,j) accumulates the
// dot product of A row i and B column j over 8/pairs_per_step mac steps in
// ascending-k order, mirroring the hardware operand schedule.

#include <cstdint>

#include "mxsim/formats.hpp"
#include "mxsim/mac.hpp"

namespace mxsim {

inline constexpr int kBlockDim = 8;
inline constexpr int kBlockElems = kBlockDim * kBlockDim;

enum class KernelImpl : uint8_t { Datapath = 0, Scalar, Avx2 };

const char* kernel_name(KernelImpl k);
KernelImpl kernel_from_name(std::string_view name);

// Compiled into this binary (Avx2 requires MXSIM_WITH_AVX2).
bool kernel_compiled(KernelImpl k);
// Compiled and executable on this CPU.
bool kernel_available(KernelImpl k);

// MXSIM_KERNEL override if set (unknown or unavailable names throw
// std::runtime_error), otherwise the fastest available implementation.
KernelImpl select_kernel();

// Accumulate the mode-scheduled products of two row-major 8x8 code blocks
// into the 64-entry row-major MacState grid. The element format selects the
// mac mode; shared_scale_exp is the sum of the two blocks' unbiased shared
// exponents. Codes must be finite (the quantizer never emits Inf/NaN).
void block_mac(KernelImpl impl, const MacVariant& variant, ElementFormat fmt,
               const uint8_t* a, const uint8_t* b, int shared_scale_exp,
               MacState* grid);

// Implementation entry points (block_mac dispatches; exposed for the
// equivalence tests).
void block_mac_datapath(const MacVariant& variant, ElementFormat fmt,
                        const uint8_t* a, const uint8_t* b,
                        int shared_scale_exp, MacState* grid);
void block_mac_scalar(const MacVariant& variant, ElementFormat fmt,
                      const uint8_t* a, const uint8_t* b, int shared_scale_exp,
                      MacState* grid);
#ifdef MXSIM_WITH_AVX2
void block_mac_avx2(const MacVariant& variant, ElementFormat fmt,
                    const uint8_t* a, const uint8_t* b, int shared_scale_exp,
                    MacState* grid);
#endif

}  // namespace mxsim
