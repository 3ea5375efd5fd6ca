#pragma once

// One experiment: build the data split, train a denoiser, sample every
// held-out image with the clipped x0 sampler and score the predictions.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "bicamo/data/dataset.hpp"
#include "bicamo/data/synthetic.hpp"
#include "bicamo/diffusion/checkpoint.hpp"
#include "bicamo/diffusion/denoiser.hpp"
#include "bicamo/diffusion/sampler.hpp"
#include "bicamo/diffusion/schedule.hpp"
#include "bicamo/diffusion/trainer.hpp"
#include "bicamo/edge_prior.hpp"
#include "bicamo/injection.hpp"
#include "bicamo/losses.hpp"
#include "bicamo/metrics.hpp"
#include "bicamo/parallel.hpp"

namespace bicamo {

enum class DataSource { Synthetic, Directory };

inline SyntheticConfig default_synthetic() {
  SyntheticConfig s;
  s.count = 200;
  return s;
}

struct DataConfig {
  DataSource source = DataSource::Synthetic;
  SyntheticConfig synthetic = default_synthetic();
  int holdout = 40;  // synthetic only: indices [count, count + holdout) form the test split
  std::string train_root;
  std::string test_root;

  void validate() const {
    if (source == DataSource::Synthetic) {
      synthetic.validate();
      if (holdout < 1) throw std::invalid_argument("DataConfig: holdout must be >= 1");
    } else if (train_root.empty() || test_root.empty()) {
      throw std::invalid_argument("DataConfig: directory source needs train_root and test_root");
    }
  }
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 0;
  DataConfig data;
  DenoiserConfig model;
  TrainerConfig trainer;
  LossCoefficients losses;
  InjectionConfig injection;
  EdgeOperator edge;
  int diffusion_steps = 1000;
  int sampling_steps = kDefaultSamplingSteps;
  int probe_size = 32;  // fixed corrupted batch used to compare initial and final loss
  int workers = 1;

  void validate() const {
    data.validate();
    model.validate();
    trainer.validate();
    losses.validate();
    injection.validate();
    edge.validate();
    if (diffusion_steps < 1) throw std::invalid_argument("ExperimentConfig: diffusion steps must be >= 1");
    if (sampling_steps < 1 || sampling_steps > diffusion_steps)
      throw std::invalid_argument("ExperimentConfig: sampling_steps must lie in [1, diffusion steps]");
    if (probe_size < 1) throw std::invalid_argument("ExperimentConfig: probe_size must be >= 1");
    if (workers < 1) throw std::invalid_argument("ExperimentConfig: workers must be >= 1");
  }
};

struct DataSplit {
  std::vector<Sample> train;
  std::vector<Sample> test;
};

inline DataSplit load_split(const DataConfig& dc) {
  dc.validate();
  DataSplit split;
  if (dc.source == DataSource::Directory) {
    split.train = load_dataset(dc.train_root);
    split.test = load_dataset(dc.test_root);
  } else {
    split.train = generate_synthetic(dc.synthetic);
    for (int k = 0; k < dc.holdout; ++k) split.test.push_back(generate_one(dc.synthetic, dc.synthetic.count + k));
  }
  if (split.train.empty()) throw std::runtime_error("experiment: training split is empty");
  if (split.test.empty()) throw std::runtime_error("experiment: test split is empty");
  return split;
}

// Independent streams for model init, training and per-image sampling.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return detail::splitmix64(detail::splitmix64(seed) ^ (0xa0761d6478bd642fULL * (stream + 1)));
}
inline constexpr std::uint64_t kInitStream = 0, kTrainStream = 1, kProbeStream = 2, kSampleStream = 3;

inline std::vector<TrainingExample> training_examples(const std::vector<Sample>& samples,
                                                      const EdgeOperator& op) {
  std::vector<TrainingExample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({s.gray(), s.mask(), s.prior(op).map});
  return out;
}

// Sampling seeds depend only on (seed, index), never on the worker count.
inline std::vector<Grid> predict_all(const Denoiser& model, const std::vector<Sample>& samples,
                                     const EdgeOperator& op, const NoiseSchedule& sched, int steps,
                                     std::uint64_t seed, const InjectionConfig& inj, int workers) {
  std::vector<const Grid*> priors;
  for (const auto& s : samples) priors.push_back(&s.prior(op).map);  // fill the cache before fan-out
  std::vector<Grid> out(samples.size());
  parallel_for(samples.size(), workers, [&](std::size_t k) {
    out[k] = sample(model, samples[k].gray(), *priors[k], sched, steps,
                    derive_seed(seed, kSampleStream + 16 * static_cast<std::uint64_t>(k)), inj);
  });
  return out;
}

struct TrainedModel {
  Denoiser model;
  AdamW optimizer;
  NoiseSchedule schedule;
  TrainingLog log;
  double probe_initial = 0.0;
  double probe_final = 0.0;

  Checkpoint checkpoint(const ExperimentConfig& cfg) const {
    return Checkpoint{model.config(),
                      std::vector<double>(model.parameters().begin(), model.parameters().end()),
                      optimizer, schedule, cfg.injection, cfg.edge};
  }
};

struct Evaluation {
  std::vector<std::string> ids;
  std::vector<Grid> predictions;
  MetricsReport report;
  double gt_edge = 0.0;  // mean gt_edge loss of the sampled probability maps
};

struct ExperimentResult {
  TrainedModel trained;
  Evaluation heldout;
};

inline double probe_loss(const Denoiser& model, const std::vector<CorruptedItem>& probe,
                         const ExperimentConfig& cfg) {
  return batch_loss_and_gradient(model, probe, cfg.losses, cfg.injection, std::span<double>{}).total;
}

inline TrainedModel train_model(const ExperimentConfig& cfg, const std::vector<Sample>& train_set) {
  cfg.validate();
  if (train_set.empty()) throw std::invalid_argument("train_model: training split is empty");
  TrainedModel r{Denoiser(cfg.model, derive_seed(cfg.seed, kInitStream)), AdamW{},
                 make_schedule(cfg.diffusion_steps), TrainingLog{}};
  const std::vector<TrainingExample> data = training_examples(train_set, cfg.edge);

  std::vector<const TrainingExample*> probe_src;
  for (std::size_t k = 0; k < data.size() && probe_src.size() < static_cast<std::size_t>(cfg.probe_size); ++k)
    probe_src.push_back(&data[k]);
  std::mt19937_64 probe_rng(derive_seed(cfg.seed, kProbeStream));
  const std::vector<CorruptedItem> probe = corrupt_batch(probe_src, r.schedule, probe_rng);
  r.probe_initial = probe_loss(r.model, probe, cfg);

  TrainerConfig tc = cfg.trainer;
  tc.seed = derive_seed(cfg.seed, kTrainStream);
  r.log = train(r.model, data, cfg.losses, tc, r.schedule, cfg.injection, r.optimizer);
  r.probe_final = probe_loss(r.model, probe, cfg);
  return r;
}

inline Evaluation evaluate_model(const Denoiser& model, const NoiseSchedule& sched,
                                 const std::vector<Sample>& test_set, const EdgeOperator& op,
                                 const InjectionConfig& inj, int sampling_steps, std::uint64_t seed,
                                 int workers) {
  if (test_set.empty()) throw std::invalid_argument("evaluate_model: test split is empty");
  Evaluation ev;
  ev.predictions = predict_all(model, test_set, op, sched, sampling_steps, seed, inj, workers);
  std::vector<Grid> gts;
  double edge = 0.0;
  for (std::size_t k = 0; k < test_set.size(); ++k) {
    ev.ids.push_back(test_set[k].id());
    gts.push_back(test_set[k].mask());
    edge += gt_edge_on_probabilities(ev.predictions[k], test_set[k].mask());
  }
  ev.gt_edge = edge / static_cast<double>(test_set.size());
  ev.report = evaluate(ev.predictions, gts, workers);
  return ev;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const DataSplit& split) {
  ExperimentResult r{train_model(cfg, split.train), {}};
  r.heldout = evaluate_model(r.trained.model, r.trained.schedule, split.test, cfg.edge, cfg.injection,
                             cfg.sampling_steps, cfg.seed, cfg.workers);
  return r;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  return run_experiment(cfg, load_split(cfg.data));
}

}  // namespace bicamo
