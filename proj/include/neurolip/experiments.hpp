#pragma once

// Run orchestration shared by the command-line tool and the acceptance suite:
// a full training run with its outputs, scene-transfer evaluation, few-shot
// curves, parameter sweeps and component ablations.

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "neurolip/checkpoint.hpp"
#include "neurolip/config.hpp"

namespace neurolip {

/// Applies the load-time preprocessing (denoising) a config asks for.
Dataset prepare_dataset(const Dataset& raw, const RunConfig& cfg);

/// Hash of the dataset's manifest lines, for provenance when no manifest file exists.
std::string dataset_sha1(const Dataset& data);

struct RunOutcome {
  RunConfig config;            // with num_classes resolved
  std::vector<int> classes;    // subject id per class index
  Split split;
  TrainResult train;
  TrainResult finetune;        // fewshot protocol only
  MetricsReport test;
  std::unique_ptr<Model<float>> model;
  TensorFile checkpoint;
  nlohmann::ordered_json metrics;
};

/// Split, train, optionally fine-tune (fewshot protocol) and evaluate the test
/// split. `data` must already be prepared.
RunOutcome run_training(const Dataset& data, const RunConfig& cfg, const std::string& inputs_sha1,
                        const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Writes config.json, checkpoint.nlt, metrics.json and train_log.jsonl.
void write_run(const RunOutcome& run, const std::filesystem::path& dir);

TensorFile make_checkpoint(Model<float>& model, const std::vector<int>& classes, const std::string& config_sha1);
/// Rebuilds a model from a checkpoint; `classes` receives the label map.
std::unique_ptr<Model<float>> load_model(const TensorFile& checkpoint, std::vector<int>& classes);

/// Accuracy over every sample of one scene.
MetricsReport evaluate_scene(Model<float>& model, const Dataset& data, const std::vector<int>& classes,
                             const std::string& scene);

/// One trained model: matched accuracy on the source test split plus accuracy
/// on every listed target scene.
struct TransferRow {
  std::string label;
  std::string config_sha1;
  double matched = 0;
  std::vector<std::pair<std::string, double>> targets;
  std::shared_ptr<const RunOutcome> run;
};

TransferRow run_transfer(const Dataset& data, RunConfig cfg, const std::vector<std::string>& target_scenes,
                         const std::string& inputs_sha1, std::string label);

std::string transfer_csv(const std::string& first_column, const std::vector<TransferRow>& rows);

/// Few-shot curve: from one source-trained model, fine-tune on the first K
/// target samples per subject for each K and evaluate on the target samples
/// left after the largest K (so every point sees the same evaluation set).
struct FewshotPoint {
  std::size_t shots = 0;
  double accuracy = 0;
  std::size_t eval_samples = 0;
};

std::vector<FewshotPoint> fewshot_curve(const TensorFile& source, const Dataset& data, const RunConfig& cfg,
                                        const std::string& target_scene, const std::vector<std::size_t>& shots);

enum class SweepAxis { Lambda, Channels, Samples };
SweepAxis parse_sweep_axis(const std::string& name);
std::string sweep_axis_name(SweepAxis axis);
RunConfig apply_sweep_value(RunConfig cfg, SweepAxis axis, double value);

/// One transfer run per value; `jobs` > 1 runs values concurrently.
std::vector<TransferRow> sweep(const Dataset& data, const RunConfig& base, SweepAxis axis,
                               const std::vector<double>& values, const std::vector<std::string>& target_scenes,
                               const std::string& inputs_sha1, unsigned jobs = 1);

enum class Variant { Full, NoLta, NoSsePcr, NoPcr };
inline constexpr std::array<Variant, 4> kAllVariants = {Variant::Full, Variant::NoLta, Variant::NoSsePcr,
                                                        Variant::NoPcr};
std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);
RunConfig apply_variant(RunConfig cfg, Variant v);

std::vector<TransferRow> ablate(const Dataset& data, const RunConfig& base, const std::vector<Variant>& variants,
                                const std::vector<std::string>& target_scenes, const std::string& inputs_sha1,
                                unsigned jobs = 1);

}  // namespace neurolip
