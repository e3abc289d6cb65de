// Footprint accounting in exact tenth-KB integer arithmetic plus the
// comparison-report assembly (simulated latency + published constants).
#include "mxsim/cost.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "mxsim/common.hpp"
#include "mxsim/gemm_core.hpp"

namespace mxsim {
namespace {

// Bit counts are exact doubles (bits_per_element is dyadic), 1 KB = 8192
// bits, and division by 2^13 is exact — so the tie cases (1462.5, 562.5,
// ...) reach std::round untouched and resolve half away from zero, which
// is the rounding that reproduces the published cells.
long long tenth_kb(double bits) { return std::llround(bits * 10.0 / 8192.0); }

double round2(double x) { return std::round(x * 100.0) / 100.0; }

struct WorkloadDims {
  double weight_elems = 0.0;
  double act_input_elems = 0.0;  // sum of layer input dims
  double max_input = 0.0;        // largest live activation dim
  double max_err = 0.0;          // largest propagated error dim
};

WorkloadDims dims_of(const WorkloadSpec& w) {
  WorkloadDims d;
  for (size_t i = 0; i < w.layers.size(); ++i) {
    d.weight_elems += double(w.layers[i][0]) * w.layers[i][1];
    d.act_input_elems += w.layers[i][0];
    d.max_input = std::max(d.max_input, double(w.layers[i][0]));
    if (i >= 1) d.max_err = std::max(d.max_err, double(w.layers[i][0]));
  }
  return d;
}

std::string format_cell(double kb) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", kb);
  return buf;
}

}  // namespace

StoragePolicy fp32_policy() {
  StoragePolicy p;
  p.kind = PolicyKind::Fp32Baseline;
  p.name = "fp32";
  p.bits_per_element = 32.0;
  return p;
}

StoragePolicy dacapo_mx9_policy() {
  StoragePolicy p;
  p.kind = PolicyKind::DacapoVector;
  p.name = "dacapo_mx9";
  p.bits_per_element = 8.0 + 8.0 / 16.0 + 1.0 / 2.0;  // 9.0
  p.stores_transposed_weights = true;
  p.stores_inference_act_copy = true;
  p.reuses_act_for_row_errors = true;
  return p;
}

StoragePolicy ours_square_policy(ElementFormat fmt) {
  StoragePolicy p;
  p.kind = PolicyKind::OursSquare;
  p.name = std::string("ours_square_") + format_info(fmt).name;
  p.bits_per_element = double(format_info(fmt).total_bits) + 8.0 / 64.0;
  return p;
}

FootprintRow footprint(const StoragePolicy& policy, const WorkloadSpec& w) {
  require(!w.layers.empty() && w.batch >= 1, "invalid workload");
  const WorkloadDims d = dims_of(w);
  const double bpe = policy.bits_per_element;
  const double batch = w.batch;

  const double w_bits = d.weight_elems * bpe;
  const double wt_bits = policy.stores_transposed_weights ? w_bits : 0.0;
  const double a_bits =
      policy.stores_inference_act_copy ? d.max_input * batch * bpe : 0.0;
  const double at_bits = d.act_input_elems * batch * bpe;
  const double err_bits = d.max_err * batch * bpe;
  const double erow_bits = policy.reuses_act_for_row_errors ? 0.0 : err_bits;
  const double ecol_bits =
      policy.kind == PolicyKind::DacapoVector ? err_bits : 0.0;

  const long long cells10[6] = {tenth_kb(w_bits),    tenth_kb(a_bits),
                                tenth_kb(wt_bits),   tenth_kb(at_bits),
                                tenth_kb(erow_bits), tenth_kb(ecol_bits)};
  long long total10 = 0;
  for (long long c : cells10) total10 += c;

  FootprintRow row;
  row.method = policy.name;
  row.w_kb = double(cells10[0]) / 10.0;
  row.a_kb = double(cells10[1]) / 10.0;
  row.wt_kb = double(cells10[2]) / 10.0;
  row.at_kb = double(cells10[3]) / 10.0;
  row.erow_kb = double(cells10[4]) / 10.0;
  row.ecol_kb = double(cells10[5]) / 10.0;
  row.total_kb = double(total10) / 10.0;
  row.erow_reuses_act = policy.reuses_act_for_row_errors;
  return row;
}

std::vector<FootprintRow> footprint_comparison(const WorkloadSpec& w) {
  std::vector<FootprintRow> rows;
  rows.push_back(footprint(fp32_policy(), w));
  rows.push_back(footprint(dacapo_mx9_policy(), w));
  rows.push_back(footprint(ours_square_policy(ElementFormat::Int8), w));
  for (FootprintRow& r : rows)
    r.ratio_vs_fp32 = round2(rows[0].total_kb / r.total_kb);
  return rows;
}

std::string footprint_table_markdown(const WorkloadSpec& base,
                                     const std::vector<int>& batches) {
  std::string out =
      "| Batch | Method | W | A | W^T | A^T | E (row.) | E (col.) | "
      "Total [KB] |\n"
      "|---|---|---|---|---|---|---|---|---|\n";
  for (int b : batches) {
    WorkloadSpec w = base;
    w.batch = b;
    for (const FootprintRow& r : footprint_comparison(w)) {
      char buf[256];
      std::snprintf(buf, sizeof buf,
                    "| %d | %s | %s | %s | %s | %s | %s | %s | %s (%.2fx) |\n",
                    b, r.method.c_str(), format_cell(r.w_kb).c_str(),
                    format_cell(r.a_kb).c_str(), format_cell(r.wt_kb).c_str(),
                    format_cell(r.at_kb).c_str(),
                    r.erow_reuses_act ? "reuse A"
                                      : format_cell(r.erow_kb).c_str(),
                    format_cell(r.ecol_kb).c_str(),
                    format_cell(r.total_kb).c_str(), r.ratio_vs_fp32);
      out += buf;
    }
  }
  return out;
}

std::string footprint_table_csv(const WorkloadSpec& base,
                                const std::vector<int>& batches) {
  std::string out =
      "batch,method,w_kb,a_kb,wt_kb,at_kb,erow_kb,ecol_kb,total_kb,"
      "ratio_vs_fp32,erow_reuses_act\n";
  for (int b : batches) {
    WorkloadSpec w = base;
    w.batch = b;
    for (const FootprintRow& r : footprint_comparison(w)) {
      char buf[256];
      std::snprintf(buf, sizeof buf,
                    "%d,%s,%.1f,%.1f,%.1f,%.1f,%.1f,%.1f,%.1f,%.2f,%d\n", b,
                    r.method.c_str(), r.w_kb, r.a_kb, r.wt_kb, r.at_kb,
                    r.erow_kb, r.ecol_kb, r.total_kb, r.ratio_vs_fp32,
                    int(r.erow_reuses_act));
      out += buf;
    }
  }
  return out;
}

std::string footprint_table_json(const WorkloadSpec& base,
                                 const std::vector<int>& batches) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (int b : batches) {
    WorkloadSpec w = base;
    w.batch = b;
    for (const FootprintRow& r : footprint_comparison(w)) {
      nlohmann::ordered_json j;
      j["batch"] = b;
      j["method"] = r.method;
      j["w_kb"] = r.w_kb;
      j["a_kb"] = r.a_kb;
      j["wt_kb"] = r.wt_kb;
      j["at_kb"] = r.at_kb;
      j["erow_kb"] = r.erow_kb;
      j["erow_reuses_act"] = r.erow_reuses_act;
      j["ecol_kb"] = r.ecol_kb;
      j["total_kb"] = r.total_kb;
      j["ratio_vs_fp32"] = r.ratio_vs_fp32;
      rows.push_back(j);
    }
  }
  return rows.dump(2) + "\n";
}

const PublishedConstants& published_constants() {
  static const PublishedConstants k;
  return k;
}

ComparisonReport comparison_report(const WorkloadSpec& w) {
  ComparisonReport rep;
  rep.workload = w;
  const MacMode modes[3] = {MacMode::Int8, MacMode::Fp8Fp6, MacMode::Fp4};
  for (int i = 0; i < 3; ++i) {
    CoreConfig cfg;
    cfg.mode = modes[i];
    rep.ours_latency_us[size_t(i)] =
        simulate_training_iteration(cfg, w).overall.latency_us;
  }
  rep.ours_footprint = footprint_comparison(w)[2];
  const PublishedConstants& pc = published_constants();
  rep.mem_ratio = round2(pc.mem_kb_dacapo / pc.mem_kb_ours);
  rep.bw_ratio = round2(double(pc.max_bw_gbs_dacapo) / pc.max_bw_gbs_ours);
  rep.area_ratio = round2(pc.area_mm2_dacapo / pc.area_mm2_ours);
  return rep;
}

std::string ComparisonReport::to_markdown() const {
  const PublishedConstants& pc = published_constants();
  char buf[256];
  std::string out = "| Specification | Ours | Dacapo | Source |\n"
                    "|---|---|---|---|\n";
  std::snprintf(buf, sizeof buf,
                "| Freq. [MHz] | %d | %d | published, not computed |\n",
                pc.freq_mhz_ours, pc.freq_mhz_dacapo);
  out += buf;
  std::snprintf(buf, sizeof buf,
                "| Area [mm^2] | %.2f | %.2f | published, not computed |\n",
                pc.area_mm2_ours, pc.area_mm2_dacapo);
  out += buf;
  std::snprintf(buf, sizeof buf,
                "| Max. BW [GB/s] | %d | %d | published, not computed |\n",
                pc.max_bw_gbs_ours, pc.max_bw_gbs_dacapo);
  out += buf;
  std::snprintf(buf, sizeof buf,
                "| Mem. [KB] | %.2f | %.2f | published, not computed |\n",
                pc.mem_kb_ours, pc.mem_kb_dacapo);
  out += buf;
  std::snprintf(buf, sizeof buf,
                "| Amount of MACs | %d | %d | published, not computed |\n",
                pc.macs_ours, pc.macs_dacapo);
  out += buf;
  for (const auto& row : pc.eop) {
    char ours[32];
    if (row.ours_lo == row.ours_hi)
      std::snprintf(ours, sizeof ours, "%.2f", row.ours_lo);
    else
      std::snprintf(ours, sizeof ours, "%.2f - %.2f", row.ours_lo,
                    row.ours_hi);
    std::snprintf(buf, sizeof buf,
                  "| E/op [pJ] %s | %s | %.2f | published, not computed |\n",
                  row.label, ours, row.dacapo);
    out += buf;
  }
  const char* mode_labels[3] = {"MXINT8", "MXFP8/FP6", "MXFP4"};
  for (int i = 0; i < 3; ++i) {
    std::snprintf(buf, sizeof buf,
                  "| Train Latency/Batch [us] %s | %.2f | %.2f | ours "
                  "simulated; Dacapo published |\n",
                  mode_labels[i], ours_latency_us[size_t(i)],
                  pc.latency_us_dacapo[size_t(i)]);
    out += buf;
  }
  std::snprintf(buf, sizeof buf,
                "\nPublished-constant ratios: memory %.2fx, bandwidth %.2fx, "
                "area %.2fx.\n",
                mem_ratio, bw_ratio, area_ratio);
  out += buf;
  std::snprintf(buf, sizeof buf,
                "Computed square-MXINT8 footprint (batch %d): %.1f KB, "
                "%.2fx vs FP32.\n",
                workload.batch, ours_footprint.total_kb,
                ours_footprint.ratio_vs_fp32);
  out += buf;
  return out;
}

std::string ComparisonReport::to_json() const {
  const PublishedConstants& pc = published_constants();
  nlohmann::ordered_json j;
  j["workload"] = workload.name;
  j["batch"] = workload.batch;
  nlohmann::ordered_json sim;
  sim["latency_us"] = {ours_latency_us[0], ours_latency_us[1],
                       ours_latency_us[2]};
  sim["footprint_total_kb"] = ours_footprint.total_kb;
  sim["footprint_ratio_vs_fp32"] = ours_footprint.ratio_vs_fp32;
  j["simulated"] = sim;
  nlohmann::ordered_json pub;
  pub["note"] = "published, not computed";
  pub["freq_mhz"] = {pc.freq_mhz_ours, pc.freq_mhz_dacapo};
  pub["area_mm2"] = {pc.area_mm2_ours, pc.area_mm2_dacapo};
  pub["max_bw_gbs"] = {pc.max_bw_gbs_ours, pc.max_bw_gbs_dacapo};
  pub["mem_kb"] = {pc.mem_kb_ours, pc.mem_kb_dacapo};
  pub["macs"] = {pc.macs_ours, pc.macs_dacapo};
  pub["latency_us_dacapo"] = {pc.latency_us_dacapo[0], pc.latency_us_dacapo[1],
                              pc.latency_us_dacapo[2]};
  nlohmann::ordered_json eop = nlohmann::ordered_json::array();
  for (const auto& row : pc.eop) {
    nlohmann::ordered_json e;
    e["pair"] = row.label;
    e["ours_lo"] = row.ours_lo;
    e["ours_hi"] = row.ours_hi;
    e["dacapo"] = row.dacapo;
    eop.push_back(e);
  }
  pub["e_op_pj"] = eop;
  j["published"] = pub;
  nlohmann::ordered_json ratios;
  ratios["memory"] = mem_ratio;
  ratios["bandwidth"] = bw_ratio;
  ratios["area"] = area_ratio;
  j["published_ratios"] = ratios;
  return j.dump(2) + "\n";
}

}  // namespace mxsim
