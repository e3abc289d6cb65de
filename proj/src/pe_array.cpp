// PE-array block multiplication: contract checks, shared-exponent summing,
// and dispatch into the block-MAC kernels.
#include "mxsim/pe_array.hpp"

#include "mxsim/common.hpp"

namespace mxsim {

int cycles_for_mode(MacMode m) {
  switch (m) {
    case MacMode::Int8: return 8;
    case MacMode::Fp8Fp6: return 2;
    case MacMode::Fp4: return 1;
  }
  throw contract_error("unknown mac mode");
}

int block_multiply(PeArray& pe, const BlockMultJob& job) {
  require(job.a_block.geometry == BlockGeometry::Square8x8 &&
              job.b_block.geometry == BlockGeometry::Square8x8,
          "pe array multiplies square blocks");
  require(job.a_block.format == job.b_block.format,
          "operand block formats differ");
  require(mode_for_format(job.a_block.format) == pe.cfg.mode,
          "block format does not match the array mode");
  if (!job.accumulate) pe.macs.fill(MacState{});
  const int se = scale_exp_unbiased(job.a_block.scale) +
                 scale_exp_unbiased(job.b_block.scale);
  block_mac(pe.cfg.kernel, pe.cfg.variant, job.a_block.format,
            job.a_block.codes.data(), job.b_block.codes.data(), se,
            pe.macs.data());
  return cycles_for_mode(pe.cfg.mode);
}

}  // namespace mxsim
