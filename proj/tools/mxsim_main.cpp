// Command-line front end: element-format tables, matrix quantization, MAC
// traces, schedule simulation, footprint/comparison tables and the training
// harness. Every command is deterministic for a given flag set; reports go
// to stdout or --out. Exit codes: 0 ok, 1 invalid input, 2 contract
// violation (diagnostics on stderr).
#include <chrono>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mxsim/common.hpp"
#include "mxsim/cost.hpp"
#include "mxsim/formats.hpp"
#include "mxsim/gemm_core.hpp"
#include "mxsim/kernels.hpp"
#include "mxsim/mac.hpp"
#include "mxsim/matrix.hpp"
#include "mxsim/quant.hpp"
#include "mxsim/train.hpp"
#include "mxsim/workload.hpp"

namespace {

using namespace mxsim;
using nlohmann::ordered_json;

constexpr ElementFormat kAllFormats[kNumFormats] = {
    ElementFormat::Int8,    ElementFormat::Fp8E5M2, ElementFormat::Fp8E4M3,
    ElementFormat::Fp6E3M2, ElementFormat::Fp6E2M3, ElementFormat::Fp4E2M1};

void write_report(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::fwrite(text.data(), 1, text.size(), stdout);
    return;
  }
  std::ofstream f(out_path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open output file: " + out_path);
  f.write(text.data(), std::streamsize(text.size()));
}

void check_emit(const std::string& emit,
                const std::vector<std::string>& allowed) {
  for (const std::string& a : allowed)
    if (emit == a) return;
  std::string msg = "unsupported --emit value '" + emit + "' (expected";
  for (const std::string& a : allowed) msg += " " + a;
  throw std::invalid_argument(msg + ")");
}

std::string run_formats(const std::string& emit) {
  check_emit(emit, {"json", "md", "csv"});
  if (emit == "json") {
    ordered_json arr = ordered_json::array();
    for (ElementFormat f : kAllFormats) {
      const FormatInfo& fi = format_info(f);
      ordered_json j;
      j["name"] = fi.name;
      j["total_bits"] = fi.total_bits;
      j["exp_bits"] = fi.exp_bits;
      j["mant_bits"] = fi.mant_bits;
      j["bias"] = fi.bias;
      j["emax"] = fi.emax;
      j["max_finite"] = fi.max_finite;
      j["has_inf"] = fi.has_inf;
      j["has_nan"] = fi.has_nan;
      arr.push_back(j);
    }
    return arr.dump(2) + "\n";
  }
  std::string out;
  char buf[160];
  if (emit == "md") {
    out = "| Format | Bits | Exp | Mant | Bias | emax | Max finite | Inf | "
          "NaN |\n|---|---|---|---|---|---|---|---|---|\n";
    for (ElementFormat f : kAllFormats) {
      const FormatInfo& fi = format_info(f);
      std::snprintf(buf, sizeof buf,
                    "| %s | %d | %d | %d | %d | %d | %g | %s | %s |\n",
                    fi.name, fi.total_bits, fi.exp_bits, fi.mant_bits,
                    fi.bias, fi.emax, fi.max_finite, fi.has_inf ? "yes" : "no",
                    fi.has_nan ? "yes" : "no");
      out += buf;
    }
  } else {
    out = "name,total_bits,exp_bits,mant_bits,bias,emax,max_finite,has_inf,"
          "has_nan\n";
    for (ElementFormat f : kAllFormats) {
      const FormatInfo& fi = format_info(f);
      std::snprintf(buf, sizeof buf, "%s,%d,%d,%d,%d,%d,%g,%d,%d\n", fi.name,
                    fi.total_bits, fi.exp_bits, fi.mant_bits, fi.bias,
                    fi.emax, fi.max_finite, int(fi.has_inf), int(fi.has_nan));
      out += buf;
    }
  }
  return out;
}

std::string run_quantize(const std::string& input, const std::string& fmt_s,
                         const std::string& geom_s, std::string orient_s,
                         const std::string& save_path,
                         const std::string& emit) {
  check_emit(emit, {"json"});
  const ElementFormat fmt = format_from_name(fmt_s);
  const BlockGeometry geom = geometry_from_name(geom_s);
  if (orient_s.empty())
    orient_s = geom == BlockGeometry::Square8x8 ? "square" : "row_blocks";
  const BlockOrientation orient = orientation_from_name(orient_s);

  const Matrix m = load_matrix(input);
  const QuantizedMatrix q = quantize_matrix(m, fmt, geom, orient);
  const std::vector<uint8_t> bytes = serialize(q);
  if (!save_path.empty()) {
    std::ofstream f(save_path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open output file: " + save_path);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            std::streamsize(bytes.size()));
  }

  const Matrix back = dequantize_matrix(q);
  double mse = 0.0, max_abs = 0.0;
  bool all_zero_codes = true;
  for (size_t i = 0; i < m.data.size(); ++i) {
    const double d = double(back.data[i]) - m.data[i];
    mse += d * d;
    max_abs = std::max(max_abs, std::fabs(d));
  }
  mse /= double(m.data.size() ? m.data.size() : 1);
  int min_se = 255, max_se = -255;
  for (const MxBlock& b : q.blocks) {
    const int se = scale_exp_unbiased(b.scale);
    min_se = std::min(min_se, se);
    max_se = std::max(max_se, se);
    for (int e = 0; e < geometry_elems(geom); ++e)
      all_zero_codes = all_zero_codes && b.codes[size_t(e)] == 0;
  }

  ordered_json j;
  j["rows"] = q.rows;
  j["cols"] = q.cols;
  j["format"] = format_info(fmt).name;
  j["geometry"] = geometry_name(geom);
  j["orientation"] = orientation_name(orient);
  j["grid"] = {q.grid_rows, q.grid_cols};
  j["blocks"] = q.blocks.size();
  j["serialized_bytes"] = bytes.size();
  j["scale_exp_min"] = min_se;
  j["scale_exp_max"] = max_se;
  j["all_zero_codes"] = all_zero_codes;
  j["error"] = {{"mse", mse}, {"max_abs", max_abs}};
  return j.dump(2) + "\n";
}

std::string run_mac_trace(const std::string& script_path,
                          const std::string& emit) {
  check_emit(emit, {"json", "jsonl"});
  std::ifstream f(script_path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open script: " + script_path);
  std::stringstream ss;
  ss << f.rdbuf();
  ordered_json script;
  try {
    script = ordered_json::parse(ss.str());
  } catch (const ordered_json::parse_error& e) {
    throw std::invalid_argument(std::string("script is not valid JSON: ") +
                                e.what());
  }
  if (!script.contains("format") || !script.contains("steps"))
    throw std::invalid_argument("script needs 'format' and 'steps'");
  const ElementFormat fmt =
      format_from_name(script["format"].get<std::string>());
  const MacMode mode = script.contains("mode")
                           ? mode_from_name(script["mode"].get<std::string>())
                           : mode_for_format(fmt);
  if (mode != mode_for_format(fmt))
    throw std::invalid_argument("mode does not match the element format");
  MacVariant variant;
  if (script.contains("policy"))
    variant.policy = l2_policy_from_name(script["policy"].get<std::string>());
  if (script.contains("bypass")) variant.bypass_enabled = script["bypass"];

  const int pairs = mode_pairs_per_step(mode);
  MacState state;
  MacTrace trace;
  for (const auto& step : script["steps"]) {
    MacOperands ops;
    ops.mode = mode;
    ops.format = fmt;
    ops.shared_scale_exp = step.value("se", 0);
    const auto& a = step.at("a");
    const auto& b = step.at("b");
    if (int(a.size()) != pairs || int(b.size()) != pairs)
      throw std::invalid_argument(
          "each step needs exactly " + std::to_string(pairs) +
          " codes per operand in this mode");
    for (int p = 0; p < pairs; ++p) {
      const int ca = a[size_t(p)].get<int>();
      const int cb = b[size_t(p)].get<int>();
      if (ca < 0 || ca > 255 || cb < 0 || cb > 255)
        throw std::invalid_argument("element codes must be in [0, 255]");
      ops.a[size_t(p)] = uint8_t(ca);
      ops.b[size_t(p)] = uint8_t(cb);
    }
    state = mac_step(state, ops, variant, &trace);
  }
  return trace.to_jsonl();
}

CoreConfig core_from_flags(const WorkloadSpec& w, const std::string& mode_s,
                           int freq_mhz, int max_bw, bool overlap) {
  CoreConfig cfg;
  cfg.mode = mode_s.empty() ? mode_for_format(w.format)
                            : mode_from_name(mode_s);
  cfg.freq_mhz = freq_mhz;
  cfg.max_bw_bits_per_cycle = max_bw;
  cfg.overlap_writeback = overlap;
  return cfg;
}

std::string run_simulate(const std::string& workload_path,
                         const std::string& mode_s, int batch, int freq_mhz,
                         int max_bw, bool overlap, const std::string& emit) {
  check_emit(emit, {"json", "csv"});
  WorkloadSpec w = load_workload(workload_path);
  if (batch > 0) w.batch = batch;
  const CoreConfig cfg = core_from_flags(w, mode_s, freq_mhz, max_bw, overlap);
  const SimReport rep = simulate_training_iteration(cfg, w);
  return emit == "json" ? rep.to_json() : rep.to_csv();
}

std::string run_footprint(const std::string& workload_path,
                          std::vector<int> batches, const std::string& emit) {
  check_emit(emit, {"json", "csv", "md"});
  const WorkloadSpec w = load_workload(workload_path);
  if (batches.empty()) batches = {w.batch};
  if (emit == "md") return footprint_table_markdown(w, batches);
  if (emit == "csv") return footprint_table_csv(w, batches);
  return footprint_table_json(w, batches);
}

std::string run_compare(const std::string& workload_path,
                        const std::string& emit) {
  check_emit(emit, {"json", "md"});
  const ComparisonReport rep = comparison_report(load_workload(workload_path));
  return emit == "md" ? rep.to_markdown() : rep.to_json();
}

std::string run_train(const std::string& workload_path,
                      const std::string& fmt_s, const std::string& geom_s,
                      const std::string& act_s, const std::string& task_s,
                      float lr, int epochs, uint32_t seed, int samples,
                      int val_samples, float noise,
                      const std::string& kernel_s, const std::string& emit) {
  check_emit(emit, {"json", "csv"});
  const WorkloadSpec w = load_workload(workload_path);
  TrainConfig cfg;
  if (fmt_s == "fp32")
    cfg.format.reset();
  else
    cfg.format = format_from_name(fmt_s);
  cfg.geometry = geometry_from_name(geom_s);
  cfg.lr = lr;
  cfg.epochs = epochs;
  cfg.seed = seed;
  cfg.task = task_from_name(task_s);
  cfg.train_samples = samples;
  cfg.val_samples = val_samples;
  cfg.target_noise = noise;
  if (!kernel_s.empty()) {
    cfg.kernel = kernel_from_name(kernel_s);
    if (!kernel_available(cfg.kernel))
      throw std::invalid_argument("kernel not available on this machine: " +
                                  kernel_s);
  }
  const MlpModel model = make_mlp(w, activation_from_name(act_s), seed);

  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult res = train(model, cfg);
  const double wall_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - t0)
                             .count();
  std::fprintf(stderr, "wall_time_ms=%.1f\n", wall_ms);
  if (res.diverged)
    std::fprintf(stderr, "warning: training diverged (non-finite loss)\n");

  if (emit == "csv") return loss_curve_csv(res);
  ordered_json j;
  j["workload"] = w.name;
  j["format"] = fmt_s;
  j["geometry"] = geom_s;
  j["activation"] = act_s;
  j["task"] = task_s;
  j["lr"] = lr;
  j["epochs"] = epochs;
  j["seed"] = seed;
  j["final_loss"] = res.final_loss;
  j["diverged"] = res.diverged;
  j["iterations"] = res.iterations;
  j["simulated_time_us"] = res.simulated_time_us;
  ordered_json counters;
  counters["requantize_ops"] = res.counters.requantize_ops;
  counters["backward_weight_requants"] =
      res.counters.backward_weight_requants;
  counters["weight_copies"] = res.counters.weight_copies;
  counters["bytes_stored_weights"] = res.counters.bytes_stored_weights;
  j["counters"] = counters;
  ordered_json curve = ordered_json::array();
  for (const EpochRecord& r : res.curve)
    curve.push_back({{"epoch", r.epoch},
                     {"val_loss", r.val_loss},
                     {"simulated_time_us", r.simulated_time_us}});
  j["curve"] = curve;
  return j.dump(2) + "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bit-accurate MX training-stack model"};
  app.require_subcommand(1);
  std::string out_path;

  // formats
  auto* c_formats = app.add_subcommand(
      "formats", "Dump the element-format descriptor table");
  std::string formats_emit = "md";
  c_formats->add_option("--emit", formats_emit, "json|md|csv");
  c_formats->add_option("--out", out_path, "write the report to a file");

  // quantize
  auto* c_quant = app.add_subcommand(
      "quantize", "Quantize a matrix (CSV or MXM1 binary) into MX blocks");
  std::string q_input, q_format = "int8", q_geometry = "square8x8";
  std::string q_orientation, q_save, q_emit = "json";
  c_quant->add_option("--input", q_input, "matrix file (CSV or MXM1 binary)")
      ->required();
  c_quant->add_option("--format", q_format, "element format name");
  c_quant->add_option("--geometry", q_geometry,
                      "square8x8|vector32|vector16_bdr");
  c_quant->add_option("--orientation", q_orientation,
                      "square|row_blocks|col_blocks (default by geometry)");
  c_quant->add_option("--save", q_save, "write the serialized blocks here");
  c_quant->add_option("--emit", q_emit, "json");
  c_quant->add_option("--out", out_path, "write the report to a file");

  // mac-trace
  auto* c_mac = app.add_subcommand(
      "mac-trace", "Run scripted MAC steps and emit a JSON-lines trace");
  std::string m_script, m_emit = "jsonl";
  c_mac->add_option("--script", m_script, "JSON step script")->required();
  c_mac->add_option("--emit", m_emit, "jsonl|json");
  c_mac->add_option("--out", out_path, "write the report to a file");

  // simulate
  auto* c_sim = app.add_subcommand(
      "simulate", "Schedule one training iteration on the GeMM core");
  std::string s_workload, s_mode, s_emit = "json";
  int s_batch = 0, s_freq = 500, s_bw = 5280;
  bool s_overlap = false;
  c_sim->add_option("--workload", s_workload, "workload JSON")->required();
  c_sim->add_option("--mode", s_mode, "int8|fp8fp6|fp4 (default: workload)");
  c_sim->add_option("--batch", s_batch, "override the workload batch");
  c_sim->add_option("--freq-mhz", s_freq, "core frequency");
  c_sim->add_option("--max-bw", s_bw, "memory bandwidth in bits/cycle");
  c_sim->add_flag("--overlap-writeback", s_overlap,
                  "hide writeback under compute per wave");
  c_sim->add_option("--emit", s_emit, "json|csv");
  c_sim->add_option("--out", out_path, "write the report to a file");

  // footprint
  auto* c_foot = app.add_subcommand(
      "footprint", "Training memory-footprint table (FP32 / vector / square)");
  std::string f_workload, f_emit = "md";
  std::vector<int> f_batches;
  c_foot->add_option("--workload", f_workload, "workload JSON")->required();
  c_foot->add_option("--batch", f_batches,
                     "batch size(s); repeatable (default: workload batch)");
  c_foot->add_option("--emit", f_emit, "json|csv|md");
  c_foot->add_option("--out", out_path, "write the report to a file");

  // compare
  auto* c_cmp = app.add_subcommand(
      "compare", "Accelerator comparison: simulated latency + published "
                 "reference constants");
  std::string cmp_workload, cmp_emit = "md";
  c_cmp->add_option("--workload", cmp_workload, "workload JSON")->required();
  c_cmp->add_option("--emit", cmp_emit, "json|md");
  c_cmp->add_option("--out", out_path, "write the report to a file");

  // train
  auto* c_train = app.add_subcommand(
      "train", "Train the MLP on the synthetic task through the MX GeMM path");
  std::string t_workload, t_format = "int8", t_geometry = "square8x8";
  std::string t_act = "tanh", t_task = "dynamics", t_kernel, t_emit = "csv";
  float t_lr = 0.2f, t_noise = 0.05f;
  int t_epochs = 15, t_samples = 256, t_val = 64;
  uint32_t t_seed = 7;
  c_train->add_option("--workload", t_workload, "workload JSON")->required();
  c_train->add_option("--format", t_format, "fp32 or an element format name");
  c_train->add_option("--geometry", t_geometry, "square8x8|vector32");
  c_train->add_option("--activation", t_act, "tanh|relu");
  c_train->add_option("--task", t_task, "dynamics|linear");
  c_train->add_option("--lr", t_lr, "learning rate");
  c_train->add_option("--epochs", t_epochs, "training epochs");
  c_train->add_option("--seed", t_seed, "RNG seed");
  c_train->add_option("--samples", t_samples, "training samples");
  c_train->add_option("--val-samples", t_val, "validation samples");
  c_train->add_option("--noise", t_noise, "target noise (dynamics task)");
  c_train->add_option("--kernel", t_kernel,
                      "datapath|scalar|avx2 (default: auto)");
  c_train->add_option("--emit", t_emit, "csv|json");
  c_train->add_option("--out", out_path, "write the report to a file");

  try {
    app.parse(argc, argv);
    std::string report;
    if (c_formats->parsed()) {
      report = run_formats(formats_emit);
    } else if (c_quant->parsed()) {
      report = run_quantize(q_input, q_format, q_geometry, q_orientation,
                            q_save, q_emit);
    } else if (c_mac->parsed()) {
      report = run_mac_trace(m_script, m_emit);
    } else if (c_sim->parsed()) {
      report = run_simulate(s_workload, s_mode, s_batch, s_freq, s_bw,
                            s_overlap, s_emit);
    } else if (c_foot->parsed()) {
      report = run_footprint(f_workload, f_batches, f_emit);
    } else if (c_cmp->parsed()) {
      report = run_compare(cmp_workload, cmp_emit);
    } else if (c_train->parsed()) {
      report = run_train(t_workload, t_format, t_geometry, t_act, t_task,
                         t_lr, t_epochs, t_seed, t_samples, t_val, t_noise,
                         t_kernel, t_emit);
    }
    write_report(out_path, report);
    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const contract_error& e) {
    std::fprintf(stderr, "contract violation: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
