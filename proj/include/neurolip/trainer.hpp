#pragma once

// Training loop, evaluation and few-shot fine-tuning over an in-memory dataset.

#include <functional>
#include <map>
#include <vector>

#include <json.hpp>

#include "neurolip/dataset.hpp"
#include "neurolip/model.hpp"
#include "neurolip/preprocess.hpp"

namespace neurolip {

struct TrainConfig {
  int epochs = 30;
  double lr = 1e-4;
  std::size_t batch = 8;
  double lr_decay = 0.5;
  int decay_every = 10;
  std::uint64_t seed = 0;
  bool augment = true;
  /// Keeps the polarity reconstruction head out of the optimizer.
  bool freeze_pcr_head = false;
  int fewshot_epochs = 20;
  double fewshot_lr = 0.0;  // 0 = same as lr

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0;
  double lambda = 0;
  double train_l_ce = 0;
  double train_l_pcr = 0;
  double train_l_total = 0;
  bool has_val = false;
  double val_l_ce = 0;
  double val_l_pcr = 0;
  double val_l_total = 0;
  double val_accuracy = 0;

  nlohmann::ordered_json to_json() const;
};

struct TrainResult {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;  // -1 when there was no validation split
  double best_val_loss = 0;
};

/// Denoises every stream once, as done at load time before any split.
Dataset denoise_dataset(const Dataset& data, const DenoiseConfig& cfg);

/// Adam with step decay; picks the epoch with the lowest validation l_total
/// (no augmentation, BN in eval mode) and leaves the model in that state. With
/// an empty validation set the final state is kept.
TrainResult train_model(Model<float>& model, const Dataset& data, const std::vector<std::size_t>& labels,
                        const std::vector<std::size_t>& train, const std::vector<std::size_t>& val,
                        const TrainConfig& cfg, const AugmentConfig& aug,
                        const std::function<void(const EpochRecord&)>& on_epoch = {});

struct EvalResult {
  std::vector<std::size_t> indices;
  std::vector<std::size_t> labels;
  std::vector<std::size_t> predictions;
  double l_ce = 0;
  double l_pcr = 0;
  double l_total = 0;
  double accuracy = 0;
};

/// Eval-mode pass in fixed-size batches. Throws on an empty index set.
EvalResult evaluate_model(Model<float>& model, const Dataset& data, const std::vector<std::size_t>& labels,
                          const std::vector<std::size_t>& indices, std::size_t batch = 8);

/// Fine-tunes all parameters on the shots for cfg.fewshot_epochs epochs. No-op for no shots.
TrainResult fewshot_finetune(Model<float>& model, const Dataset& data, const std::vector<std::size_t>& labels,
                             const std::vector<std::size_t>& shots, const TrainConfig& cfg, const AugmentConfig& aug);

struct Tally {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

struct MetricsReport {
  double accuracy = 0;
  std::size_t samples = 0;
  double l_ce = 0;
  double l_pcr = 0;
  double l_total = 0;
  std::map<int, Tally> per_digit;
  std::map<std::string, Tally> per_scene;
  std::map<int, Tally> per_subject;
  std::vector<int> classes;  // subject id of each class index
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]

  nlohmann::ordered_json to_json() const;
};

MetricsReport make_report(const Dataset& data, const EvalResult& eval, const std::vector<int>& classes);

nlohmann::ordered_json loss_curves(const std::vector<EpochRecord>& epochs);

}  // namespace neurolip
