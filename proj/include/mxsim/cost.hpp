#pragma once
// Analytical memory-footprint model and the accelerator comparison report.
//
// Footprint accounting (per storage policy, KB = 1024 bytes):
//   W    weights for inference
//   A    quantized inference activation copy (largest live layer input)
//   Wt   transposed weight copy for backprop (zero when square blocks
//        transpose in place)
//   At   stored layer inputs for backprop (sum of input dims x batch)
//   Erow row-layout error tensor (largest propagated error dim x batch)
//   Ecol column-layout error copy (vector-block policies only)
// Display cells round to 0.1 KB half away from zero, exactly in tenth-KB
// integer arithmetic; the Total column is the sum of the rounded cells and
// ratio columns divide rounded totals (rounded to 0.01). That is the
// rounding pipeline that reproduces every published table cell.
//
// The comparison report combines simulated training latency and footprint
// with fixed published reference constants (area, energy/op, the competing
// accelerator's column); those constants are carried verbatim and flagged
// "published, not computed".

#include <array>
#include <string>
#include <vector>

#include "mxsim/formats.hpp"
#include "mxsim/workload.hpp"

namespace mxsim {

enum class PolicyKind : uint8_t { Fp32Baseline = 0, DacapoVector, OursSquare };

struct StoragePolicy {
  PolicyKind kind = PolicyKind::Fp32Baseline;
  std::string name = "fp32";
  double bits_per_element = 32.0;  // exact dyadic (32, 9, 8.125, ...)
  bool stores_transposed_weights = false;
  bool stores_inference_act_copy = false;
  bool reuses_act_for_row_errors = false;
};

StoragePolicy fp32_policy();
// 8-bit elements, an 8-bit exponent per 16-element vector block and a 1-bit
// micro exponent per 2 elements: 9.0 bits/element.
StoragePolicy dacapo_mx9_policy();
// Square-block MX: element bits plus one 8-bit scale per 64 elements
// (8.125 bits/element for MXINT8). Transposes without extra copies.
StoragePolicy ours_square_policy(ElementFormat fmt);

struct FootprintRow {
  std::string method;
  // Display-rounded cells in KB (0.1 KB grid).
  double w_kb = 0.0;
  double a_kb = 0.0;
  double wt_kb = 0.0;
  double at_kb = 0.0;
  double erow_kb = 0.0;
  double ecol_kb = 0.0;
  double total_kb = 0.0;      // sum of the rounded cells
  double ratio_vs_fp32 = 0.0; // rounded totals ratio, 0.01 grid (0 = unset)
  bool erow_reuses_act = false;  // vector policies print "reuse A"
};

FootprintRow footprint(const StoragePolicy& policy, const WorkloadSpec& w);

// FP32 baseline, Dacapo MX9, square MXINT8 — ratios filled vs the first row.
std::vector<FootprintRow> footprint_comparison(const WorkloadSpec& w);

std::string footprint_table_markdown(const WorkloadSpec& base,
                                     const std::vector<int>& batches);
std::string footprint_table_csv(const WorkloadSpec& base,
                                const std::vector<int>& batches);
std::string footprint_table_json(const WorkloadSpec& base,
                                 const std::vector<int>& batches);

// Fixed reference constants (published, not computed).
struct PublishedConstants {
  int freq_mhz_ours = 500;
  int freq_mhz_dacapo = 500;
  double area_mm2_ours = 6.44;
  double area_mm2_dacapo = 8.66;
  int max_bw_gbs_ours = 330;
  int max_bw_gbs_dacapo = 640;
  double mem_kb_ours = 179.78;
  double mem_kb_dacapo = 370.13;
  int macs_ours = 4096;
  int macs_dacapo = 4096;
  // Energy per operation rows: {ours low, ours high, reference}.
  struct EopRow {
    const char* label;
    double ours_lo, ours_hi, dacapo;
  };
  std::array<EopRow, 3> eop = {{{"MXINT8 vs. MX9", 3.20, 3.20, 3.08},
                                {"MXFP8/FP6 vs. MX6", 1.87, 1.88, 1.80},
                                {"MXFP4 vs. MX4", 0.43, 0.43, 0.48}}};
  // Reference training latency per batch, same mode order as below.
  std::array<double, 3> latency_us_dacapo = {40.4, 24.56, 20.6};
};
const PublishedConstants& published_constants();

struct ComparisonReport {
  WorkloadSpec workload;
  // Simulated on this model, mode order Int8 / Fp8Fp6 / Fp4.
  std::array<double, 3> ours_latency_us{};
  FootprintRow ours_footprint;  // square MXINT8, computed
  // Ratios of the published constants (memory, bandwidth, area).
  double mem_ratio = 0.0;
  double bw_ratio = 0.0;
  double area_ratio = 0.0;
  std::string to_markdown() const;
  std::string to_json() const;
};

ComparisonReport comparison_report(const WorkloadSpec& w);

}  // namespace mxsim
