#pragma once
// One PE array: 64 MAC units on an 8x8 output grid multiplying two square
// MX blocks under their shared exponents. The mode fixes both the cycle
// count per block multiplication (Int8 8, Fp8Fp6 2, Fp4 1) and the operand
// schedule: ascending k, 1/4/8 element pairs per cycle, matching the MAC
// wiring. The sum of the two blocks' unbiased shared exponents is applied
// at every mac step (PE level), never inside the adder tree.

#include <array>

#include "mxsim/kernels.hpp"
#include "mxsim/mac.hpp"
#include "mxsim/quant.hpp"

namespace mxsim {

struct PeArrayConfig {
  MacMode mode = MacMode::Int8;
  MacVariant variant;
  KernelImpl kernel = KernelImpl::Scalar;
};

struct PeArray {
  PeArrayConfig cfg;
  std::array<MacState, kBlockElems> macs{};  // 8x8 output grid, row-major
};

struct BlockMultJob {
  MxBlock a_block;
  MxBlock b_block;
  bool accumulate = true;  // false clears the output grid first
};

// Block-multiplication latency in cycles: 8 / 2 / 1.
int cycles_for_mode(MacMode m);

// Accumulate a_block x b_block into the MAC grid; returns cycles consumed.
// Requires square-geometry blocks of one format matching the array's mode.
int block_multiply(PeArray& pe, const BlockMultJob& job);

}  // namespace mxsim
