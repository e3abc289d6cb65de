// MLP training loop over the functional GeMM paths: FP32 dense baseline,
// square-block MX (transpose-free backward), and vector-block MX (relayout
// requantizations counted per iteration).
#include "mxsim/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <utility>

#include "mxsim/common.hpp"
#include "mxsim/gemm_core.hpp"

namespace mxsim {
namespace {

constexpr double kTwoPi = 6.283185307179586476925287;

// Explicit draws on top of mt19937 (std::*_distribution sequences are
// implementation-defined; these are not).
double uniform01(std::mt19937& rng) {
  return (double(rng()) + 0.5) / 4294967296.0;
}

float uniform_sym(std::mt19937& rng, double scale) {
  return float((uniform01(rng) * 2.0 - 1.0) * scale);
}

float gauss(std::mt19937& rng) {
  const double u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return float(std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2));
}

Matrix matmul_fp32(const Matrix& a, const Matrix& b) {
  require(a.cols == b.rows, "inner dims disagree");
  Matrix out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int k = 0; k < a.cols; ++k) {
      const float av = a.at(i, k);
      if (av == 0.0f) continue;
      for (int j = 0; j < b.cols; ++j) out.at(i, j) += av * b.at(k, j);
    }
  return out;
}

Matrix row_slice(const Matrix& m, int r0, int nrows) {
  Matrix out(nrows, m.cols);
  std::copy_n(m.data.begin() + size_t(r0) * m.cols,
              size_t(nrows) * m.cols, out.data.begin());
  return out;
}

Matrix activated(Matrix z, Activation a) {
  for (float& v : z.data)
    v = a == Activation::Tanh ? std::tanh(v) : (v > 0.0f ? v : 0.0f);
  return z;
}

// dLoss/dZ from dLoss/dX_next and the post-activation values.
Matrix act_backward(const Matrix& gx, const Matrix& x_next, Activation a) {
  Matrix out = gx;
  for (size_t i = 0; i < out.data.size(); ++i) {
    const float x = x_next.data[i];
    out.data[i] *= a == Activation::Tanh ? 1.0f - x * x : (x > 0.0f ? 1.0f : 0.0f);
  }
  return out;
}

double mse(const Matrix& pred, const Matrix& target) {
  double s = 0.0;
  for (size_t i = 0; i < pred.data.size(); ++i) {
    const double d = double(pred.data[i]) - target.data[i];
    s += d * d;
  }
  return s / double(pred.data.size());
}

}  // namespace

const char* activation_name(Activation a) {
  return a == Activation::ReLU ? "relu" : "tanh";
}

Activation activation_from_name(std::string_view name) {
  if (name == "relu") return Activation::ReLU;
  if (name == "tanh") return Activation::Tanh;
  throw std::invalid_argument("unknown activation: " + std::string(name));
}

const char* task_name(TaskKind t) {
  return t == TaskKind::Dynamics ? "dynamics" : "linear";
}

TaskKind task_from_name(std::string_view name) {
  if (name == "dynamics") return TaskKind::Dynamics;
  if (name == "linear") return TaskKind::Linear;
  throw std::invalid_argument("unknown task: " + std::string(name));
}

MlpModel make_mlp(const WorkloadSpec& workload, Activation activation,
                  uint32_t seed) {
  MlpModel m;
  m.workload = workload;
  m.activation = activation;
  std::mt19937 rng(seed);
  for (const auto& layer : workload.layers) {
    Matrix w(layer[0], layer[1]);
    const double scale = std::sqrt(6.0 / (layer[0] + layer[1]));
    for (float& v : w.data) v = uniform_sym(rng, scale);
    m.weights.push_back(std::move(w));
  }
  return m;
}

Dataset make_task_dataset(TaskKind task, int samples, int in_dim, int out_dim,
                          float target_noise, uint32_t seed) {
  require(samples >= 1 && in_dim >= 1 && out_dim >= 1, "bad dataset dims");
  std::mt19937 rng(seed);
  Matrix a(out_dim, in_dim);  // stable map: rows have ~unit norm
  const double scale = 1.0 / std::sqrt(double(in_dim));
  for (float& v : a.data) v = float(gauss(rng) * scale);

  Dataset d;
  d.inputs = Matrix(samples, in_dim);
  d.targets = Matrix(samples, out_dim);
  for (int s = 0; s < samples; ++s) {
    for (int k = 0; k < in_dim; ++k) d.inputs.at(s, k) = gauss(rng);
    for (int j = 0; j < out_dim; ++j) {
      float z = 0.0f;
      for (int k = 0; k < in_dim; ++k) z += a.at(j, k) * d.inputs.at(s, k);
      if (task == TaskKind::Dynamics)
        d.targets.at(s, j) = std::tanh(z) + target_noise * gauss(rng);
      else
        d.targets.at(s, j) = z;
    }
  }
  return d;
}

TrainResult train(const MlpModel& model0, const TrainConfig& cfg) {
  const WorkloadSpec& w = model0.workload;
  require(model0.weights.size() == w.layers.size(),
          "model weights do not match the workload");
  require(cfg.epochs >= 1 && cfg.lr > 0.0f, "bad training config");
  require(cfg.train_samples >= w.batch && cfg.train_samples % w.batch == 0,
          "train_samples must be a positive multiple of the batch size");
  require(cfg.val_samples >= 1, "bad val_samples");
  require(!cfg.format.has_value() ||
              cfg.geometry == BlockGeometry::Square8x8 ||
              cfg.geometry == BlockGeometry::Vector32,
          "training supports square8x8 or vector32 geometry");

  MlpModel model = model0;
  const int L = int(model.weights.size());
  const int batch = w.batch;
  const int in_dim = w.layers.front()[0];
  const int out_dim = w.layers.back()[1];
  const bool quant = cfg.format.has_value();
  const bool square = cfg.geometry == BlockGeometry::Square8x8;

  // One generator call = one underlying system; train and validation are
  // disjoint sample ranges of it.
  const Dataset all = make_task_dataset(
      cfg.task, cfg.train_samples + cfg.val_samples, in_dim, out_dim,
      cfg.target_noise, cfg.seed + 1);
  Dataset trainset, valset;
  trainset.inputs = row_slice(all.inputs, 0, cfg.train_samples);
  trainset.targets = row_slice(all.targets, 0, cfg.train_samples);
  valset.inputs = row_slice(all.inputs, cfg.train_samples, cfg.val_samples);
  valset.targets = row_slice(all.targets, cfg.train_samples, cfg.val_samples);

  CoreConfig core;
  double iter_us = 0.0;
  if (quant) {
    core.mode = mode_for_format(*cfg.format);
    core.kernel = cfg.kernel;
    WorkloadSpec tw = w;
    tw.format = *cfg.format;
    iter_us = simulate_training_iteration(core, tw).overall.latency_us;
  }

  const auto q_square = [&](const Matrix& m) {
    return quantize_matrix(m, *cfg.format, BlockGeometry::Square8x8,
                           BlockOrientation::Square);
  };
  const auto q_row = [&](const Matrix& m) {
    return quantize_matrix(m, *cfg.format, BlockGeometry::Vector32,
                           BlockOrientation::RowBlocks);
  };
  const auto q_col = [&](const Matrix& m) {
    return quantize_matrix(m, *cfg.format, BlockGeometry::Vector32,
                           BlockOrientation::ColBlocks);
  };

  TrainResult res;
  res.counters.weight_copies = quant && !square ? 2 : 1;
  for (const Matrix& wm : model.weights) {
    if (!quant) {
      res.counters.bytes_stored_weights += (long long)wm.data.size() * 4;
    } else if (square) {
      res.counters.bytes_stored_weights +=
          (long long)serialize(q_square(wm)).size();
    } else {
      res.counters.bytes_stored_weights +=
          (long long)serialize(q_col(wm)).size() +
          (long long)serialize(q_col(transpose(wm))).size();
    }
  }

  // Forward through the run's own GeMM path. Square keeps the quantized
  // operand copies so backward can transpose them in place.
  const auto forward = [&](const Matrix& x0, std::vector<Matrix>* acts,
                           std::vector<QuantizedMatrix>* wq,
                           std::vector<QuantizedMatrix>* xq) {
    acts->assign(size_t(L) + 1, Matrix());
    (*acts)[0] = x0;
    for (int l = 0; l < L; ++l) {
      Matrix z;
      if (!quant) {
        z = matmul_fp32((*acts)[size_t(l)], model.weights[size_t(l)]);
      } else if (square) {
        QuantizedMatrix qx = q_square((*acts)[size_t(l)]);
        QuantizedMatrix qw = q_square(model.weights[size_t(l)]);
        z = functional_gemm(core, qx, qw);
        if (xq) (*xq)[size_t(l)] = std::move(qx);
        if (wq) (*wq)[size_t(l)] = std::move(qw);
      } else {
        z = functional_gemm(core, q_row((*acts)[size_t(l)]),
                            q_col(model.weights[size_t(l)]));
      }
      (*acts)[size_t(l) + 1] =
          l + 1 < L ? activated(std::move(z), model.activation) : std::move(z);
    }
  };

  const auto val_loss = [&]() {
    std::vector<Matrix> acts;
    forward(valset.inputs, &acts, nullptr, nullptr);
    return mse(acts.back(), valset.targets);
  };

  // One minibatch SGD step; returns the training loss before the update.
  const auto step = [&](const Matrix& xb, const Matrix& yb) {
    std::vector<Matrix> acts;
    std::vector<QuantizedMatrix> wq(static_cast<size_t>(L));
    std::vector<QuantizedMatrix> xq(static_cast<size_t>(L));
    forward(xb, &acts, &wq, &xq);
    const double loss = mse(acts.back(), yb);
    if (!std::isfinite(loss)) return loss;

    // dLoss/dX for the layer output currently being processed.
    Matrix gx(batch, out_dim);
    const float gscale = 2.0f / float(double(batch) * out_dim);
    for (size_t i = 0; i < gx.data.size(); ++i)
      gx.data[i] = gscale * (acts.back().data[i] - yb.data[i]);

    for (int l = L - 1; l >= 0; --l) {
      const Matrix dz = l == L - 1
                            ? std::move(gx)
                            : act_backward(gx, acts[size_t(l) + 1],
                                           model.activation);
      Matrix dw;
      if (!quant) {
        if (l > 0) gx = matmul_fp32(dz, transpose(model.weights[size_t(l)]));
        dw = matmul_fp32(transpose(acts[size_t(l)]), dz);
      } else if (square) {
        const QuantizedMatrix dzq = q_square(dz);
        if (l > 0)
          gx = functional_gemm(core, dzq, transpose_quantized(wq[size_t(l)]));
        dw = functional_gemm(core, transpose_quantized(xq[size_t(l)]), dzq);
      } else {
        // Vector blocks cannot transpose in place: the transposed weight
        // copy, the batch-major activation and the column-major error all
        // take a fresh quantization pass.
        res.counters.backward_weight_requants += 1;
        res.counters.requantize_ops += 1;
        if (l > 0)
          gx = functional_gemm(core, q_row(dz),
                               q_col(transpose(model.weights[size_t(l)])));
        res.counters.requantize_ops += l > 0 ? 2 : 1;
        dw = functional_gemm(core, q_row(transpose(acts[size_t(l)])),
                             q_col(dz));
      }
      Matrix& wm = model.weights[size_t(l)];
      for (size_t i = 0; i < wm.data.size(); ++i)
        wm.data[i] -= cfg.lr * dw.data[i];
    }
    return loss;
  };

  res.curve.push_back({0, val_loss(), 0.0});
  const int batches = cfg.train_samples / batch;
  for (int epoch = 1; epoch <= cfg.epochs && !res.diverged; ++epoch) {
    for (int b = 0; b < batches; ++b) {
      const double loss = step(row_slice(trainset.inputs, b * batch, batch),
                               row_slice(trainset.targets, b * batch, batch));
      res.iterations += 1;
      res.simulated_time_us += iter_us;
      if (!std::isfinite(loss)) {
        res.diverged = true;
        break;
      }
    }
    const double vl = val_loss();
    res.curve.push_back({epoch, vl, res.simulated_time_us});
    if (!std::isfinite(vl)) res.diverged = true;
  }
  res.final_loss = res.curve.back().val_loss;
  return res;
}

std::string loss_curve_csv(const TrainResult& result) {
  std::string out = "epoch,val_loss,simulated_time_us\n";
  for (const EpochRecord& r : result.curve) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%d,%.9e,%.3f\n", r.epoch, r.val_loss,
                  r.simulated_time_us);
    out += buf;
  }
  return out;
}

}  // namespace mxsim
