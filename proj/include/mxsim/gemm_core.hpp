#pragma once
// Learning-enabled MX GeMM core: a 4x16 grid of PE arrays with an
// output-stationary dataflow. Output tiles are processed in waves of at
// most 64 blocks; each wave runs ceil(K/8) block multiplications at the
// mode's cycle count. Input blocks broadcast along grid rows (A) and
// columns (B), so a full wave fetches 20 distinct blocks per block step;
// FP6 codes travel in the Fp8Fp6 datapath's 8-bit lanes, which is what
// pins the input rate at 1300 (Int8), 5200 (Fp8Fp6) and exactly 5280
// (Fp4) bits/cycle against the 5280 bits/cycle ceiling.
//
// FP32 writeback shares that ceiling and is modeled non-overlapped: each
// wave adds ceil(blocks_in_wave * 64 outputs * 32 bits / max_bw) stall
// cycles (the reference configuration; overlap_writeback is a what-if
// switch that lets writeback hide under compute per wave).
//
// Cycle accounting is a pure function of dims and mode. functional_gemm
// runs the same tile schedule numerically through PE arrays; waves only
// ever affect timing, never values. Square8x8 operands take the PE-array
// tile path; Vector32 operands (left row-blocked / right column-blocked
// along the reduction dim) run each output cell through its own MAC with
// per-block-pair shared scales — the geometry that cannot transpose
// without requantizing.

#include <array>
#include <cstdint>
#include <string>

#include "mxsim/matrix.hpp"
#include "mxsim/pe_array.hpp"
#include "mxsim/quant.hpp"
#include "mxsim/workload.hpp"

namespace mxsim {

enum class TrainStage : uint8_t { Forward = 0, Backward, WeightGrad };
inline constexpr int kNumStages = 3;
const char* stage_name(TrainStage s);

struct CoreConfig {
  int grid_rows = 4;
  int grid_cols = 16;
  int freq_mhz = 500;
  int max_bw_bits_per_cycle = 5280;
  MacMode mode = MacMode::Int8;
  MacVariant variant;
  KernelImpl kernel = KernelImpl::Scalar;  // numeric path only
  bool overlap_writeback = false;          // reference configuration: off
};

struct GemmJob {
  int64_t m = 0;  // output rows
  int64_t k = 0;  // reduction dim
  int64_t n = 0;  // output cols
  TrainStage stage = TrainStage::Forward;
};

struct StageReport {
  int64_t compute_cycles = 0;
  int64_t stall_cycles = 0;
  int64_t total_cycles = 0;
  int64_t waves = 0;
  int64_t output_blocks = 0;
  double utilization = 0.0;  // compute / total
  double bw_input_bits_per_cycle = 0.0;  // input rate during compute
  double latency_us = 0.0;
};

struct SimReport {
  MacMode mode = MacMode::Int8;
  int freq_mhz = 500;
  std::array<StageReport, kNumStages> stages{};  // indexed by TrainStage
  StageReport overall;
  std::string to_json() const;
  std::string to_csv() const;  // one row per stage plus overall
};

// Wire bits of one square block on the input bus: 64 element containers
// (8 bits in Int8/Fp8Fp6 mode, 4 in Fp4) plus the shared-scale byte.
int block_wire_bits(MacMode mode);
double input_bw_bits_per_cycle(MacMode mode);

// Cycle/bandwidth accounting for one GeMM (values never touched).
// Non-positive dims yield a zero-wave report.
StageReport schedule_gemm(const CoreConfig& cfg, const GemmJob& job);

// One training iteration: Forward (M=batch,K=in,N=out) per layer, Backward
// error (M=batch,K=out,N=in) per layer except the first, WeightGrad
// (M=in,K=batch,N=out) per layer. Per-stage aggregates plus the overall sum.
SimReport simulate_training_iteration(const CoreConfig& cfg,
                                      const WorkloadSpec& w);

// Numeric companion: A (MxK) times B (KxN), both square-geometry quantized
// in the core's mode, through the PE-array tile schedule. Returns the FP32
// result; saturated_out (optional) reports whether any MAC clamped.
Matrix functional_gemm(const CoreConfig& cfg, const QuantizedMatrix& a,
                       const QuantizedMatrix& b,
                       bool* saturated_out = nullptr);

}  // namespace mxsim
