// Training-harness tests: the recorded convergence/closeness properties on
// the pusher shape, requantization counters per geometry, transpose
// consistency, determinism, divergence reporting, and the CSV artifact.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <optional>
#include <string>

#include "mxsim/common.hpp"
#include "mxsim/gemm_core.hpp"
#include "mxsim/quant.hpp"
#include "mxsim/train.hpp"

using namespace mxsim;

namespace {

// Recorded calibration (seed 7, lr 0.2, 15 epochs, 256/64 samples,
// noise 0.05): FP32 lands at ~0.040 MSE; this is the convergence bar.
constexpr double kFp32ConvergenceThreshold = 0.05;

WorkloadSpec small_net() {
  WorkloadSpec w;
  w.name = "small";
  w.layers = {{32, 64}, {64, 32}};
  w.batch = 32;
  return w;
}

TrainConfig small_cfg(std::optional<ElementFormat> fmt, BlockGeometry geom) {
  TrainConfig c;
  c.format = fmt;
  c.geometry = geom;
  c.epochs = 2;
  c.train_samples = 64;
  c.val_samples = 16;
  c.lr = 0.1f;
  return c;
}

}  // namespace

TEST_CASE("activation and task names round-trip") {
  CHECK(std::string(activation_name(Activation::ReLU)) == "relu");
  CHECK(std::string(activation_name(Activation::Tanh)) == "tanh");
  CHECK(activation_from_name("relu") == Activation::ReLU);
  CHECK(activation_from_name("tanh") == Activation::Tanh);
  CHECK_THROWS_AS(activation_from_name("gelu"), std::invalid_argument);
  CHECK(std::string(task_name(TaskKind::Dynamics)) == "dynamics");
  CHECK(std::string(task_name(TaskKind::Linear)) == "linear");
  CHECK(task_from_name("dynamics") == TaskKind::Dynamics);
  CHECK(task_from_name("linear") == TaskKind::Linear);
  CHECK_THROWS_AS(task_from_name("mnist"), std::invalid_argument);
}

TEST_CASE("model init and data synthesis are deterministic in the seed") {
  const MlpModel a = make_mlp(pusher_workload(), Activation::Tanh, 7);
  const MlpModel b = make_mlp(pusher_workload(), Activation::Tanh, 7);
  const MlpModel c = make_mlp(pusher_workload(), Activation::Tanh, 8);
  REQUIRE(a.weights.size() == 4);
  CHECK(a.weights[0].rows == 32);
  CHECK(a.weights[0].cols == 256);
  CHECK(a.weights[3].rows == 256);
  CHECK(a.weights[3].cols == 32);
  for (size_t l = 0; l < a.weights.size(); ++l)
    CHECK(bit_equal(a.weights[l], b.weights[l]));
  CHECK(!bit_equal(a.weights[0], c.weights[0]));

  const Dataset d1 = make_task_dataset(TaskKind::Dynamics, 10, 32, 32,
                                       0.05f, 21);
  const Dataset d2 = make_task_dataset(TaskKind::Dynamics, 10, 32, 32,
                                       0.05f, 21);
  CHECK(bit_equal(d1.inputs, d2.inputs));
  CHECK(bit_equal(d1.targets, d2.targets));
  CHECK(d1.inputs.rows == 10);
  CHECK(d1.targets.cols == 32);
  // Dynamics targets stay near tanh range plus noise.
  for (float t : d1.targets.data) CHECK(std::fabs(t) < 1.5f);
}

TEST_CASE("fp32 on the linear task decreases monotonically") {
  WorkloadSpec w;
  w.name = "lin";
  w.layers = {{32, 32}};
  w.batch = 32;
  TrainConfig cfg;
  cfg.format.reset();
  cfg.task = TaskKind::Linear;
  cfg.lr = 5.0f;
  cfg.epochs = 20;
  cfg.train_samples = 32;  // full-batch gradient descent
  cfg.val_samples = 32;
  const TrainResult r = train(make_mlp(w, Activation::Tanh, 7), cfg);
  CHECK(!r.diverged);
  REQUIRE(r.curve.size() == 21);
  for (size_t i = 1; i < r.curve.size(); ++i)
    CHECK(r.curve[i].val_loss < r.curve[i - 1].val_loss);
  CHECK(r.final_loss < 0.25 * r.curve.front().val_loss);
}

TEST_CASE("recorded pusher calibration: convergence, closeness, ordering") {
  const MlpModel model = make_mlp(pusher_workload(), Activation::Tanh, 7);
  TrainConfig cfg;  // defaults are the recorded calibration

  cfg.format.reset();
  const TrainResult fp32 = train(model, cfg);
  CHECK(!fp32.diverged);
  CHECK(fp32.iterations == 120);
  CHECK(fp32.final_loss < kFp32ConvergenceThreshold);
  CHECK(fp32.final_loss < 0.2 * fp32.curve.front().val_loss);
  CHECK(fp32.counters.requantize_ops == 0);
  CHECK(fp32.simulated_time_us == 0.0);

  cfg.format = ElementFormat::Int8;
  const TrainResult int8 = train(model, cfg);
  cfg.format = ElementFormat::Fp8E4M3;
  const TrainResult e4m3 = train(model, cfg);
  cfg.format = ElementFormat::Fp4E2M1;
  const TrainResult fp4 = train(model, cfg);

  CHECK(!int8.diverged);
  CHECK(!e4m3.diverged);
  CHECK(std::fabs(int8.final_loss - fp32.final_loss) <=
        0.10 * fp32.final_loss);
  CHECK(std::fabs(e4m3.final_loss - fp32.final_loss) <=
        0.10 * fp32.final_loss);

  // Weak format ordering; FP4 may trail badly but here it still trains.
  const double slack = 0.005;
  CHECK(fp32.final_loss <= int8.final_loss + slack);
  const bool fp4_ok = !fp4.diverged &&
                      int8.final_loss <= fp4.final_loss + slack;
  CHECK(fp4_ok);

  // Square geometry: transpose-free backward.
  for (const TrainResult* r : {&int8, &e4m3, &fp4}) {
    CHECK(r->counters.backward_weight_requants == 0);
    CHECK(r->counters.requantize_ops == 0);
    CHECK(r->counters.weight_copies == 1);
    CHECK(r->iterations == 120);
  }

  // Simulated time is iterations x the scheduled per-iteration latency.
  CoreConfig core;
  core.mode = MacMode::Int8;
  const double per_iter =
      simulate_training_iteration(core, pusher_workload()).overall.latency_us;
  CHECK(int8.simulated_time_us == doctest::Approx(120.0 * per_iter));
  CHECK(int8.curve.back().simulated_time_us == int8.simulated_time_us);
  CHECK(fp4.simulated_time_us < int8.simulated_time_us);
}

TEST_CASE("vector geometry requantizes per layer per iteration") {
  const MlpModel model = make_mlp(small_net(), Activation::Tanh, 7);
  const TrainResult vec =
      train(model, small_cfg(ElementFormat::Int8, BlockGeometry::Vector32));
  const TrainResult sq =
      train(model, small_cfg(ElementFormat::Int8, BlockGeometry::Square8x8));

  const long long layers = 2;
  CHECK(vec.iterations == 4);
  CHECK(vec.counters.backward_weight_requants == layers * vec.iterations);
  // Per iteration: W^T refresh per layer, X^T relayout per layer, dZ column
  // relayout per backward-participating layer.
  CHECK(vec.counters.requantize_ops ==
        (3 * (layers - 1) + 2) * vec.iterations);
  CHECK(vec.counters.weight_copies == 2);

  CHECK(sq.counters.backward_weight_requants == 0);
  CHECK(sq.counters.requantize_ops == 0);
  CHECK(sq.counters.weight_copies == 1);

  // Dual-layout storage costs about twice the square single copy.
  const double ratio = double(vec.counters.bytes_stored_weights) /
                       double(sq.counters.bytes_stored_weights);
  CHECK(ratio > 1.9);
  CHECK(ratio < 2.1);

  // Both geometries still train.
  CHECK(!vec.diverged);
  CHECK(!sq.diverged);
  CHECK(vec.final_loss < vec.curve.front().val_loss);
}

TEST_CASE("square quantized weights are transpose-consistent bitwise") {
  const MlpModel model = make_mlp(pusher_workload(), Activation::Tanh, 7);
  for (ElementFormat fmt :
       {ElementFormat::Int8, ElementFormat::Fp8E4M3, ElementFormat::Fp4E2M1}) {
    const QuantizedMatrix q =
        quantize_matrix(model.weights[1], fmt, BlockGeometry::Square8x8,
                        BlockOrientation::Square);
    CHECK(bit_equal(dequantize_matrix(transpose_quantized(q)),
                    transpose(dequantize_matrix(q))));
  }
}

TEST_CASE("identical seeds give byte-identical loss curves") {
  const MlpModel model = make_mlp(small_net(), Activation::Tanh, 7);
  for (BlockGeometry g : {BlockGeometry::Square8x8, BlockGeometry::Vector32}) {
    const TrainConfig cfg = small_cfg(ElementFormat::Int8, g);
    const std::string a = loss_curve_csv(train(model, cfg));
    const std::string b = loss_curve_csv(train(model, cfg));
    CHECK(a == b);
    CHECK(a.rfind("epoch,val_loss,simulated_time_us\n", 0) == 0);
  }
  TrainConfig fcfg = small_cfg(std::nullopt, BlockGeometry::Square8x8);
  CHECK(loss_curve_csv(train(model, fcfg)) ==
        loss_curve_csv(train(model, fcfg)));
}

TEST_CASE("divergence is reported, not swallowed") {
  TrainConfig cfg;
  cfg.format.reset();
  cfg.lr = 1e6f;
  cfg.epochs = 3;
  const TrainResult r = train(make_mlp(pusher_workload(), Activation::Tanh, 7),
                              cfg);
  CHECK(r.diverged);
  CHECK(!std::isfinite(r.final_loss));
  CHECK(r.iterations < 3 * 8);  // stopped early
}

TEST_CASE("invalid training configs are rejected") {
  const MlpModel model = make_mlp(small_net(), Activation::Tanh, 7);
  TrainConfig cfg = small_cfg(ElementFormat::Int8, BlockGeometry::Square8x8);

  TrainConfig bad = cfg;
  bad.epochs = 0;
  CHECK_THROWS_AS(train(model, bad), contract_error);
  bad = cfg;
  bad.train_samples = 33;  // not a multiple of batch 32
  CHECK_THROWS_AS(train(model, bad), contract_error);
  bad = cfg;
  bad.geometry = BlockGeometry::Vector16Bdr;
  CHECK_THROWS_AS(train(model, bad), contract_error);

  MlpModel broken = model;
  broken.weights.pop_back();
  CHECK_THROWS_AS(train(broken, cfg), contract_error);
}
