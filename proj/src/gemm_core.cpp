// GeMM-core simulator: wave scheduling and stall accounting (pure cycle
// math) plus the numeric tile path through PE arrays.
#include "mxsim/gemm_core.hpp"

#include <algorithm>
#include <cstdio>

#include <json.hpp>

#include "mxsim/common.hpp"

namespace mxsim {
namespace {

int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }

void finalize(StageReport& r, const CoreConfig& cfg) {
  r.utilization =
      r.total_cycles ? double(r.compute_cycles) / double(r.total_cycles) : 0.0;
  r.bw_input_bits_per_cycle =
      r.waves ? input_bw_bits_per_cycle(cfg.mode) : 0.0;
  r.latency_us = double(r.total_cycles) / double(cfg.freq_mhz);
}

nlohmann::ordered_json stage_json(const StageReport& r) {
  nlohmann::ordered_json j;
  j["compute_cycles"] = r.compute_cycles;
  j["stall_cycles"] = r.stall_cycles;
  j["total_cycles"] = r.total_cycles;
  j["waves"] = r.waves;
  j["output_blocks"] = r.output_blocks;
  j["utilization"] = r.utilization;
  j["bw_input_bits_per_cycle"] = r.bw_input_bits_per_cycle;
  j["latency_us"] = r.latency_us;
  return j;
}

void stage_csv(std::string& out, const char* name, const StageReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%lld,%lld,%lld,%lld,%lld,%.6f,%.1f,%.6f\n",
                name, static_cast<long long>(r.compute_cycles),
                static_cast<long long>(r.stall_cycles),
                static_cast<long long>(r.total_cycles),
                static_cast<long long>(r.waves),
                static_cast<long long>(r.output_blocks), r.utilization,
                r.bw_input_bits_per_cycle, r.latency_us);
  out += buf;
}

}  // namespace

const char* stage_name(TrainStage s) {
  switch (s) {
    case TrainStage::Forward: return "forward";
    case TrainStage::Backward: return "backward";
    case TrainStage::WeightGrad: return "weight_grad";
  }
  throw contract_error("unknown train stage");
}

int block_wire_bits(MacMode mode) {
  const int elem_bits = mode == MacMode::Fp4 ? 4 : 8;
  return 64 * elem_bits + 8;
}

double input_bw_bits_per_cycle(MacMode mode) {
  // 4 A blocks + 16 B blocks broadcast per block step of a full wave.
  return double(20 * block_wire_bits(mode)) / cycles_for_mode(mode);
}

StageReport schedule_gemm(const CoreConfig& cfg, const GemmJob& job) {
  StageReport r;
  if (job.m <= 0 || job.k <= 0 || job.n <= 0) return r;  // zero-wave report
  const int64_t blocks_m = ceil_div(job.m, kBlockDim);
  const int64_t blocks_n = ceil_div(job.n, kBlockDim);
  const int64_t ksteps = ceil_div(job.k, kBlockDim);
  const int64_t capacity = int64_t(cfg.grid_rows) * cfg.grid_cols;
  const int64_t wave_compute = ksteps * cycles_for_mode(cfg.mode);

  r.output_blocks = blocks_m * blocks_n;
  r.waves = ceil_div(r.output_blocks, capacity);
  r.compute_cycles = r.waves * wave_compute;
  for (int64_t left = r.output_blocks; left > 0; left -= capacity) {
    const int64_t in_wave = std::min(left, capacity);
    const int64_t stall =
        ceil_div(in_wave * kBlockElems * 32, cfg.max_bw_bits_per_cycle);
    r.stall_cycles += stall;
    r.total_cycles += cfg.overlap_writeback ? std::max(wave_compute, stall)
                                            : wave_compute + stall;
  }
  finalize(r, cfg);
  return r;
}

SimReport simulate_training_iteration(const CoreConfig& cfg,
                                      const WorkloadSpec& w) {
  SimReport rep;
  rep.mode = cfg.mode;
  rep.freq_mhz = cfg.freq_mhz;
  auto add = [&](TrainStage stage, int64_t m, int64_t k, int64_t n) {
    StageReport s = schedule_gemm(cfg, {m, k, n, stage});
    StageReport& agg = rep.stages[size_t(stage)];
    agg.compute_cycles += s.compute_cycles;
    agg.stall_cycles += s.stall_cycles;
    agg.total_cycles += s.total_cycles;
    agg.waves += s.waves;
    agg.output_blocks += s.output_blocks;
  };
  for (const auto& l : w.layers)
    add(TrainStage::Forward, w.batch, l[0], l[1]);
  for (size_t i = 1; i < w.layers.size(); ++i)
    add(TrainStage::Backward, w.batch, w.layers[i][1], w.layers[i][0]);
  for (const auto& l : w.layers)
    add(TrainStage::WeightGrad, l[0], w.batch, l[1]);
  for (StageReport& s : rep.stages) {
    finalize(s, cfg);
    rep.overall.compute_cycles += s.compute_cycles;
    rep.overall.stall_cycles += s.stall_cycles;
    rep.overall.total_cycles += s.total_cycles;
    rep.overall.waves += s.waves;
    rep.overall.output_blocks += s.output_blocks;
  }
  finalize(rep.overall, cfg);
  return rep;
}

std::string SimReport::to_json() const {
  nlohmann::ordered_json j;
  j["mode"] = mode_name(mode);
  j["freq_mhz"] = freq_mhz;
  nlohmann::ordered_json st;
  for (int s = 0; s < kNumStages; ++s)
    st[stage_name(TrainStage(s))] = stage_json(stages[size_t(s)]);
  j["stages"] = st;
  j["overall"] = stage_json(overall);
  return j.dump(2) + "\n";
}

std::string SimReport::to_csv() const {
  std::string out =
      "stage,compute_cycles,stall_cycles,total_cycles,waves,output_blocks,"
      "utilization,bw_input_bits_per_cycle,latency_us\n";
  for (int s = 0; s < kNumStages; ++s)
    stage_csv(out, stage_name(TrainStage(s)), stages[size_t(s)]);
  stage_csv(out, "overall", overall);
  return out;
}

namespace {

// Vector32 path: every output cell owns one MAC; each 32-element block pair
// contributes 32 / pairs_per_step steps at that pair's shared scale. Same
// mac_step numerics as the square path, only the scale grouping differs.
Matrix functional_gemm_vector32(const CoreConfig& cfg, const QuantizedMatrix& a,
                                const QuantizedMatrix& b,
                                bool* saturated_out) {
  require(a.orientation == BlockOrientation::RowBlocks,
          "left vector operand must be row-blocked along the reduction dim");
  require(b.orientation == BlockOrientation::ColBlocks,
          "right vector operand must be column-blocked down the reduction dim");
  Matrix out(a.rows, b.cols);
  bool saturated = false;
  const int pairs = mode_pairs_per_step(cfg.mode);
  const int elems = geometry_elems(BlockGeometry::Vector32);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < b.cols; ++j) {
      MacState s;
      for (int kb = 0; kb < a.grid_cols; ++kb) {
        const MxBlock& ab = a.block_at(i, kb);
        const MxBlock& bb = b.block_at(kb, j);
        MacOperands ops;
        ops.mode = cfg.mode;
        ops.format = a.format;
        ops.shared_scale_exp =
            scale_exp_unbiased(ab.scale) + scale_exp_unbiased(bb.scale);
        for (int e = 0; e < elems; e += pairs) {
          for (int p = 0; p < pairs; ++p) {
            ops.a[size_t(p)] = ab.codes[size_t(e + p)];
            ops.b[size_t(p)] = bb.codes[size_t(e + p)];
          }
          s = mac_step(s, ops, cfg.variant);
        }
      }
      out.at(i, j) = s.accumulator;
      saturated = saturated || s.saturated;
    }
  }
  if (saturated_out) *saturated_out = saturated;
  return out;
}

}  // namespace

Matrix functional_gemm(const CoreConfig& cfg, const QuantizedMatrix& a,
                       const QuantizedMatrix& b, bool* saturated_out) {
  require(a.format == b.format, "operand formats differ");
  require(mode_for_format(a.format) == cfg.mode,
          "operand format does not match the core mode");
  require(a.cols == b.rows, "inner dims disagree");
  if (a.geometry == BlockGeometry::Vector32 &&
      b.geometry == BlockGeometry::Vector32)
    return functional_gemm_vector32(cfg, a, b, saturated_out);
  require(a.geometry == BlockGeometry::Square8x8 &&
              b.geometry == BlockGeometry::Square8x8,
          "functional gemm needs square8x8 or vector32 operands");
  require(a.orientation == BlockOrientation::Square &&
              b.orientation == BlockOrientation::Square,
          "functional gemm needs square orientation");

  Matrix out(a.rows, b.cols);
  bool saturated = false;
  const int ksteps = a.grid_cols;
  // Output-stationary: each tile owns one PE array for its whole reduction;
  // the wave partition affects timing only, so plain tile loops reproduce
  // the scheduled numerics exactly.
  for (int ti = 0; ti < a.grid_rows; ++ti) {
    for (int tj = 0; tj < b.grid_cols; ++tj) {
      PeArray pe{{cfg.mode, cfg.variant, cfg.kernel}, {}};
      for (int t = 0; t < ksteps; ++t)
        block_multiply(pe, {a.block_at(ti, t), b.block_at(t, tj), true});
      for (int r = 0; r < kBlockDim; ++r) {
        const int gr = ti * kBlockDim + r;
        if (gr >= out.rows) break;
        for (int c = 0; c < kBlockDim; ++c) {
          const int gc = tj * kBlockDim + c;
          if (gc >= out.cols) break;
          const MacState& s = pe.macs[size_t(r * kBlockDim + c)];
          out.at(gr, gc) = s.accumulator;
          saturated = saturated || s.saturated;
        }
      }
    }
  }
  if (saturated_out) *saturated_out = saturated;
  return out;
}

}  // namespace mxsim
