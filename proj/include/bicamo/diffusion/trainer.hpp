#pragma once

// Training loop: uniform timestep sampling, forward corruption, multi-scale
// loss, reverse pass through the denoiser, and AdamW with a cosine-annealed
// learning rate stepped once per epoch.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bicamo/diffusion/schedule.hpp"
#include "bicamo/grid.hpp"
#include "bicamo/injection.hpp"
#include "bicamo/losses.hpp"

namespace bicamo {

struct TrainerConfig {
  double learning_rate = 5e-5;
  int epochs = 150;
  int batch_size = 32;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.01;
  double lr_floor = 0.0;
  int steps_per_epoch = 0;  // 0: ceil(dataset size / batch size)

  void validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
      throw std::invalid_argument("TrainerConfig: learning_rate must be positive");
    if (epochs < 1) throw std::invalid_argument("TrainerConfig: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("TrainerConfig: batch_size must be >= 1");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
      throw std::invalid_argument("TrainerConfig: moment decay rates must lie in [0,1)");
    if (!(adam_eps > 0.0)) throw std::invalid_argument("TrainerConfig: adam_eps must be positive");
    if (!(weight_decay >= 0.0)) throw std::invalid_argument("TrainerConfig: weight_decay must be >= 0");
    if (!(lr_floor >= 0.0 && lr_floor <= learning_rate))
      throw std::invalid_argument("TrainerConfig: lr_floor must lie in [0, learning_rate]");
    if (steps_per_epoch < 0) throw std::invalid_argument("TrainerConfig: steps_per_epoch must be >= 0");
  }
};

// floor + (lr0 - floor)(1 + cos(pi e / (E - 1))) / 2; the last epoch sits at the floor.
inline double cosine_learning_rate(const TrainerConfig& tc, int epoch) {
  if (tc.epochs == 1) return tc.learning_rate;
  constexpr double kPi = 3.14159265358979323846;
  const double phase = static_cast<double>(epoch) / (tc.epochs - 1);
  return tc.lr_floor + 0.5 * (tc.learning_rate - tc.lr_floor) * (1.0 + std::cos(kPi * phase));
}

// Adaptive moments with decoupled weight decay.
struct AdamW {
  std::vector<double> m, v;
  std::uint64_t step = 0;

  void step_update(std::span<double> params, std::span<const double> grad, double lr,
                   const TrainerConfig& tc) {
    if (grad.size() != params.size()) throw std::invalid_argument("AdamW: gradient size mismatch");
    if (m.size() != params.size()) {
      m.assign(params.size(), 0.0);
      v.assign(params.size(), 0.0);
    }
    ++step;
    const double c1 = 1.0 - std::pow(tc.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(tc.beta2, static_cast<double>(step));
    for (std::size_t k = 0; k < params.size(); ++k) {
      m[k] = tc.beta1 * m[k] + (1.0 - tc.beta1) * grad[k];
      v[k] = tc.beta2 * v[k] + (1.0 - tc.beta2) * grad[k] * grad[k];
      const double mhat = m[k] / c1, vhat = v[k] / c2;
      params[k] -= lr * (mhat / (std::sqrt(vhat) + tc.adam_eps) + tc.weight_decay * params[k]);
    }
  }
  bool operator==(const AdamW&) const = default;
};

struct TrainingExample {
  Grid gray;   // luminance of the conditioning image
  Grid mask;   // binary ground truth
  Grid prior;  // edge prior E of the image
};

// A noised instance with its timestep and noise fixed.
struct CorruptedItem {
  const TrainingExample* example = nullptr;
  DiffusionState state;
};

template <typename M>
concept TrainableModel = requires(M& m, const M& cm, const Grid& g, int t,
                                  const InjectionConfig& inj, std::span<double> grad) {
  { cm.forward(g, g, g, t, inj).logits } -> std::convertible_to<Grid>;
  cm.backward(cm.forward(g, g, g, t, inj), g, grad);
  { m.parameters() } -> std::convertible_to<std::span<double>>;
  { cm.parameter_count() } -> std::convertible_to<std::size_t>;
};

struct BatchLoss {
  double fs = 0.0, gt_edge = 0.0, ual = 0.0, rgb = 0.0, total = 0.0;
  double t_mean = 0.0;
};

// Mean loss over the batch; when `grad` is non-empty, adds d(mean loss)/dparams to it.
template <TrainableModel M>
BatchLoss batch_loss_and_gradient(const M& model, const std::vector<CorruptedItem>& items,
                                  const LossCoefficients& coeffs, const InjectionConfig& inj,
                                  std::span<double> grad) {
  if (items.empty()) throw std::invalid_argument("batch_loss_and_gradient: empty batch");
  const double inv = 1.0 / static_cast<double>(items.size());
  BatchLoss out;
  for (const CorruptedItem& it : items) {
    const TrainingExample& ex = *it.example;
    const auto trace = model.forward(it.state.x_t, ex.gray, ex.prior, it.state.t, inj);
    auto [breakdown, dz] = loss_and_gradient(trace.logits, ex.mask, ex.prior, coeffs);
    if (!std::isfinite(breakdown.total)) {
      throw std::runtime_error("non-finite loss at t=" + std::to_string(it.state.t));
    }
    out.fs += inv * breakdown.weighted_mean([](const ScaleTerms& s) { return s.fs; });
    out.gt_edge += inv * breakdown.weighted_mean([](const ScaleTerms& s) { return s.gt_edge; });
    out.ual += inv * breakdown.weighted_mean([](const ScaleTerms& s) { return s.ual; });
    out.rgb += inv * breakdown.weighted_mean([](const ScaleTerms& s) { return s.rgb; });
    out.total += inv * breakdown.total;
    out.t_mean += inv * it.state.t;
    if (!grad.empty()) {
      for (double& g : dz.values()) g *= inv;
      model.backward(trace, dz, grad);
    }
  }
  return out;
}

struct TrainingLogRow {
  int step = 0;
  int epoch = 0;
  double lr = 0.0;
  BatchLoss loss;
  bool operator==(const TrainingLogRow& o) const {
    return step == o.step && epoch == o.epoch && lr == o.lr && loss.fs == o.loss.fs &&
           loss.gt_edge == o.loss.gt_edge && loss.ual == o.loss.ual && loss.rgb == o.loss.rgb &&
           loss.total == o.loss.total && loss.t_mean == o.loss.t_mean;
  }
};

struct TrainingLog {
  std::vector<TrainingLogRow> rows;

  void write_csv(std::ostream& os) const {
    os << "step,epoch,lr,t_mean,fs,gt_edge,ual,rgb,total\n";
    char buf[320];
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "%d,%d,%.10e,%.4f,%.10e,%.10e,%.10e,%.10e,%.10e\n", r.step,
                    r.epoch, r.lr, r.loss.t_mean, r.loss.fs, r.loss.gt_edge, r.loss.ual,
                    r.loss.rgb, r.loss.total);
      os << buf;
    }
  }
};

inline int steps_per_epoch(const TrainerConfig& tc, std::size_t dataset_size) {
  if (tc.steps_per_epoch > 0) return tc.steps_per_epoch;
  return static_cast<int>((dataset_size + tc.batch_size - 1) / tc.batch_size);
}

// Draws t ~ U{1..T} and the corruption noise for each example.
inline std::vector<CorruptedItem> corrupt_batch(const std::vector<const TrainingExample*>& batch,
                                                const NoiseSchedule& sched, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick_t(1, sched.steps());
  std::vector<CorruptedItem> items;
  items.reserve(batch.size());
  for (const TrainingExample* ex : batch) {
    const int t = pick_t(rng);
    items.push_back({ex, forward_corrupt(ex->mask, t, sched, rng)});
  }
  return items;
}

// Batches are drawn from a per-epoch shuffle and wrap around, so every batch
// holds exactly batch_size examples.
template <TrainableModel M>
TrainingLog train(M& model, const std::vector<TrainingExample>& data,
                  const LossCoefficients& coeffs, const TrainerConfig& tc,
                  const NoiseSchedule& sched, const InjectionConfig& inj, AdamW& opt) {
  tc.validate();
  coeffs.validate();
  inj.validate();
  if (data.empty()) throw std::invalid_argument("train: dataset is empty");
  std::mt19937_64 rng(tc.seed);
  const int per_epoch = steps_per_epoch(tc, data.size());
  std::vector<std::size_t> order(data.size());
  std::vector<double> grad(model.parameter_count());
  TrainingLog log;
  int step = 0;
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = cosine_learning_rate(tc, epoch);
    std::size_t cursor = 0;
    for (int k = 0; k < per_epoch; ++k) {
      std::vector<const TrainingExample*> batch;
      for (int b = 0; b < tc.batch_size; ++b) batch.push_back(&data[order[cursor++ % order.size()]]);
      const std::vector<CorruptedItem> items = corrupt_batch(batch, sched, rng);
      std::fill(grad.begin(), grad.end(), 0.0);
      BatchLoss loss;
      try {
        loss = batch_loss_and_gradient(model, items, coeffs, inj, grad);
      } catch (const std::exception& e) {
        throw std::runtime_error("train: aborted at step " + std::to_string(step) + " (epoch " +
                                 std::to_string(epoch) + ", lr " + std::to_string(lr) +
                                 "): " + e.what());
      }
      for (double g : grad) {
        if (!std::isfinite(g)) {
          throw std::runtime_error("train: non-finite gradient at step " + std::to_string(step));
        }
      }
      opt.step_update(model.parameters(), grad, lr, tc);
      log.rows.push_back({step, epoch, lr, loss});
      ++step;
    }
  }
  return log;
}

template <TrainableModel M>
TrainingLog train(M& model, const std::vector<TrainingExample>& data,
                  const LossCoefficients& coeffs, const TrainerConfig& tc,
                  const NoiseSchedule& sched, const InjectionConfig& inj) {
  AdamW opt;
  return train(model, data, coeffs, tc, sched, inj, opt);
}

}  // namespace bicamo
