// neurolip: command-line entry point for data generation, preprocessing,
// training, evaluation and the experiment harnesses.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "neurolip/checkpoint.hpp"
#include "neurolip/error.hpp"
#include "neurolip/experiments.hpp"
#include "neurolip/gradsuite.hpp"
#include "neurolip/synthgen.hpp"

namespace fs = std::filesystem;
using namespace neurolip;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

// Failure of a check the user asked for (as opposed to bad input).
struct ValidationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw ConfigError("not a number: " + item);
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("empty value list");
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw IoError("cannot write " + path.string());
}

void log(const std::string& line) { std::cerr << line << std::endl; }

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

// Options shared by every command that builds a RunConfig.
struct RunOptions {
  std::string manifest;
  std::string config;
  std::string protocol;
  std::string source_scene;
  std::string target_scene;
  long long shots = -1;
  long long seed = -1;
  int epochs = -1;
  std::string out;

  void add(CLI::App* app, bool need_out = true) {
    app->add_option("--manifest", manifest, "Dataset manifest (JSON lines)")->required()->check(CLI::ExistingFile);
    app->add_option("--config", config, "RunConfig JSON file")->check(CLI::ExistingFile);
    app->add_option("--protocol", protocol, "matched | cross | fewshot");
    app->add_option("--source-scene", source_scene, "Training scene tag");
    app->add_option("--target-scene", target_scene, "Held-out scene tag");
    app->add_option("--shots", shots, "Few-shot samples per subject");
    app->add_option("--seed", seed, "Run seed");
    app->add_option("--epochs", epochs, "Override train.epochs");
    auto* o = app->add_option("--out", out, "Output directory");
    if (need_out) o->required();
  }

  RunConfig resolve() const {
    RunConfig cfg = config.empty() ? RunConfig{} : load_run_config(config);
    if (!protocol.empty()) cfg.split.protocol = parse_protocol(protocol);
    if (!source_scene.empty()) cfg.split.source_scene = source_scene;
    if (!target_scene.empty()) cfg.split.target_scene = target_scene;
    if (shots >= 0) cfg.split.shots = static_cast<std::size_t>(shots);
    if (seed >= 0) cfg.train.seed = static_cast<std::uint64_t>(seed);
    if (epochs >= 0) cfg.train.epochs = epochs;
    return cfg;
  }
};

Dataset load_prepared(const std::string& manifest, const RunConfig& cfg) {
  log("loading " + manifest);
  return prepare_dataset(load_dataset(manifest), cfg);
}

void write_provenance(const fs::path& dir, const RunConfig& cfg, const std::string& inputs_sha1,
                      nlohmann::ordered_json& metrics) {
  fs::create_directories(dir);
  const std::string text = config_text(cfg);
  write_text(dir / "config.json", text);
  metrics["config_sha1"] = git_blob_sha1(text);
  metrics["inputs_sha1"] = inputs_sha1;
}

int cmd_gen(int subjects, int per_scene, const std::string& scenes, long long seed, const std::string& out) {
  DatasetSpec spec;
  spec.subjects = subjects;
  spec.per_scene = per_scene;
  spec.seed = static_cast<std::uint64_t>(seed);
  if (!scenes.empty()) {
    spec.scenes.clear();
    for (const auto& tag : split_list(scenes)) spec.scenes.push_back(parse_scene(tag));
  }
  log("generating " + std::to_string(spec.subjects * spec.per_scene * static_cast<int>(spec.scenes.size())) +
      " samples");
  const auto data = generate_dataset(spec);
  const auto manifest = write_dataset(data, out);
  nlohmann::ordered_json j{{"manifest", manifest.string()},
                           {"samples", data.streams.size()},
                           {"manifest_sha1", git_blob_sha1_file(manifest)}};
  std::cout << j.dump() << std::endl;
  return 0;
}

int cmd_denoise(const std::string& in, const std::string& out, std::uint64_t tf_us) {
  const EventStream stream = load_stream(in);
  const EventStream kept = denoise(stream, DenoiseConfig{tf_us});
  if (!out.empty()) save_stream(kept, out);
  nlohmann::ordered_json j{{"total", stream.size()}, {"retained", kept.size()}};
  std::cout << j.dump() << std::endl;
  return 0;
}

int cmd_encode(const std::string& in, const std::string& out, bool oracle, std::size_t bins, std::uint32_t downscale,
               long long seed) {
  const EventStream stream = load_stream(in);
  TveConfig cfg;
  cfg.bins = bins;
  cfg.downscale = downscale;
  cfg.sensor = stream.geometry();
  cfg.lta = oracle ? LtaMode::Oracle : LtaMode::Learned;
  cfg.validate();
  Encoder<float> enc(cfg);
  Rng rng(derive_seed(static_cast<std::uint64_t>(seed), {1}));
  enc.params().init(rng);
  const auto trace = enc.forward(stream);
  TensorFile file;
  file.meta["bins"] = bins;
  file.meta["lta"] = oracle ? "oracle" : "learned";
  file.meta["events"] = stream.size();
  file.tensors.emplace_back("voxel", trace.voxel);
  file.tensors.emplace_back("v_att", trace.v_att());
  save_tensor_file(file, out);
  nlohmann::ordered_json j{{"out", out}, {"shape", trace.v_att().shape()}, {"events", stream.size()}};
  std::cout << j.dump() << std::endl;
  return 0;
}

int cmd_train(const RunOptions& o) {
  const RunConfig cfg = o.resolve();
  const Dataset data = load_prepared(o.manifest, cfg);
  const std::string inputs = git_blob_sha1_file(o.manifest);
  const RunOutcome run = run_training(data, cfg, inputs, [](const EpochRecord& e) {
    log("epoch " + std::to_string(e.epoch) + " l_total " + pct(e.train_l_total) +
        (e.has_val ? " val_l_total " + pct(e.val_l_total) + " val_acc " + pct(e.val_accuracy) : ""));
  });
  write_run(run, o.out);
  log("test accuracy " + pct(run.test.accuracy) + " (" + std::to_string(run.test.samples) + " samples)");
  std::cout << nlohmann::ordered_json{{"accuracy", run.test.accuracy}, {"out", o.out}}.dump() << std::endl;
  return 0;
}

int cmd_eval(const RunOptions& o, const std::string& checkpoint_path, const std::string& scene) {
  const RunConfig cfg = o.resolve();
  const Dataset data = load_prepared(o.manifest, cfg);
  std::vector<int> classes;
  auto model = load_model(load_tensor_file(checkpoint_path), classes);
  MetricsReport report;
  if (!scene.empty()) {
    report = evaluate_scene(*model, data, classes, scene);
  } else {
    const Split split = make_split(data, cfg.split, cfg.train.seed);
    report = make_report(data, evaluate_model(*model, data, class_labels(data, classes), split.test), classes);
  }
  nlohmann::ordered_json metrics;
  if (!o.out.empty()) {
    write_provenance(o.out, cfg, git_blob_sha1_file(o.manifest), metrics);
    metrics["checkpoint_sha1"] = git_blob_sha1_file(checkpoint_path);
    metrics["scene"] = scene;
    metrics["test"] = report.to_json();
    write_text(fs::path(o.out) / "metrics.json", metrics.dump(2) + "\n");
  }
  log("accuracy " + pct(report.accuracy) + " (" + std::to_string(report.samples) + " samples)");
  std::cout << nlohmann::ordered_json{{"accuracy", report.accuracy}, {"samples", report.samples}}.dump()
            << std::endl;
  return 0;
}

int cmd_fewshot(const RunOptions& o, const std::string& checkpoint_path, const std::string& curve) {
  RunConfig cfg = o.resolve();
  cfg.split.protocol = Protocol::Fewshot;
  cfg.validate();
  const Dataset data = load_prepared(o.manifest, cfg);
  const TensorFile source = load_tensor_file(checkpoint_path);
  nlohmann::ordered_json metrics;
  write_provenance(o.out, cfg, git_blob_sha1_file(o.manifest), metrics);
  metrics["checkpoint_sha1"] = git_blob_sha1_file(checkpoint_path);
  metrics["target_scene"] = cfg.split.target_scene;

  if (!curve.empty()) {
    std::vector<std::size_t> ks;
    for (double v : parse_values(curve)) {
      if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v))) throw ConfigError("shots must be >= 0");
      ks.push_back(static_cast<std::size_t>(v));
    }
    const auto points = fewshot_curve(source, data, cfg, cfg.split.target_scene, ks);
    std::string csv = "shots,accuracy,eval_samples\n";
    for (const auto& p : points) {
      csv += std::to_string(p.shots) + "," + pct(p.accuracy) + "," + std::to_string(p.eval_samples) + "\n";
      metrics["curve"].push_back({{"shots", p.shots}, {"accuracy", p.accuracy}, {"eval_samples", p.eval_samples}});
    }
    write_text(fs::path(o.out) / "fewshot_curve.csv", csv);
    write_text(fs::path(o.out) / "metrics.json", metrics.dump(2) + "\n");
    std::cout << csv;
    return 0;
  }

  std::vector<int> classes;
  auto model = load_model(source, classes);
  const Split split = make_split(data, cfg.split, cfg.train.seed);
  const auto labels = class_labels(data, classes);
  const TrainResult ft = fewshot_finetune(*model, data, labels, split.shots, cfg.train, cfg.augment);
  const MetricsReport report = make_report(data, evaluate_model(*model, data, labels, split.test), classes);
  metrics["shots"] = cfg.split.shots;
  metrics["shot_samples"] = split.shots.size();
  metrics["test"] = report.to_json();
  metrics["finetune_curves"] = loss_curves(ft.epochs);
  save_tensor_file(make_checkpoint(*model, classes, metrics["config_sha1"].get<std::string>()),
                   fs::path(o.out) / "checkpoint.nlt");
  write_text(fs::path(o.out) / "metrics.json", metrics.dump(2) + "\n");
  log("adapted accuracy " + pct(report.accuracy) + " with " + std::to_string(split.shots.size()) + " shots");
  std::cout << nlohmann::ordered_json{{"accuracy", report.accuracy}, {"shots", cfg.split.shots}}.dump() << std::endl;
  return 0;
}

int cmd_gradcheck(std::size_t max_per_tensor) {
  GradCheckOptions opts;
  opts.max_per_tensor = max_per_tensor;
  nlohmann::ordered_json j;
  bool ok = true;
  for (const auto& c : gradient_suite(opts)) {
    ok = ok && c.passed();
    j["cases"].push_back({{"name", c.name},
                          {"max_rel_error", c.result.max_rel_error},
                          {"worst", c.result.worst_name},
                          {"coordinates", c.result.coordinates},
                          {"passed", c.passed()}});
  }
  const auto sentinel = corrupted_backward_sentinel();
  const bool caught = sentinel.result.max_rel_error > kGradSentinelThreshold;
  j["sentinel"] = {{"max_rel_error", sentinel.result.max_rel_error}, {"detected", caught}};
  j["tolerance"] = kGradTolerance;
  j["passed"] = ok && caught;
  std::cout << j.dump(2) << std::endl;
  if (!(ok && caught)) throw ValidationFailure("gradient check failed");
  return 0;
}

std::vector<std::string> target_scenes(const Dataset& data, const RunConfig& cfg, const std::string& requested) {
  if (!requested.empty()) return split_list(requested);
  std::vector<std::string> out;
  for (const auto& s : data.scenes())
    if (s != cfg.split.source_scene) out.push_back(s);
  return out;
}

void write_rows(const fs::path& dir, const std::vector<TransferRow>& rows, const std::string& csv_name,
                const std::string& csv) {
  for (const auto& r : rows) write_run(*r.run, dir / r.label);
  write_text(dir / csv_name, csv);
  std::cout << csv;
}

int cmd_sweep(const RunOptions& o, const std::string& axis_name, const std::string& values, const std::string& scenes,
              unsigned jobs) {
  const RunConfig cfg = o.resolve();
  const SweepAxis axis = parse_sweep_axis(axis_name);
  const auto vals = parse_values(values);
  const Dataset data = load_prepared(o.manifest, cfg);
  const auto rows = sweep(data, cfg, axis, vals, target_scenes(data, cfg, scenes), git_blob_sha1_file(o.manifest),
                          jobs);
  write_rows(o.out, rows, "sweep_" + sweep_axis_name(axis) + ".csv", transfer_csv(sweep_axis_name(axis), rows));
  return 0;
}

int cmd_ablate(const RunOptions& o, const std::vector<std::string>& names, const std::string& scenes, unsigned jobs) {
  const RunConfig cfg = o.resolve();
  std::vector<Variant> variants;
  if (names.empty() || (names.size() == 1 && names[0] == "all"))
    variants.assign(kAllVariants.begin(), kAllVariants.end());
  else
    for (const auto& n : names) variants.push_back(parse_variant(n));
  const Dataset data = load_prepared(o.manifest, cfg);
  const auto rows = ablate(data, cfg, variants, target_scenes(data, cfg, scenes), git_blob_sha1_file(o.manifest), jobs);
  write_rows(o.out, rows, "ablation.csv", transfer_csv("variant", rows));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-based lip-motion speaker recognition"};
  app.require_subcommand(1);

  int subjects = 10, per_scene = 40;
  std::string scenes, out_dir;
  long long gen_seed = 0;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic multi-scene dataset");
  gen->add_option("--subjects", subjects, "Number of subjects")->check(CLI::PositiveNumber);
  gen->add_option("--per-scene", per_scene, "Samples per subject per scene")->check(CLI::PositiveNumber);
  gen->add_option("--scenes", scenes, "Comma-separated scene tags (default: all four)");
  gen->add_option("--seed", gen_seed, "Global seed")->check(CLI::NonNegativeNumber);
  gen->add_option("--out", out_dir, "Output directory")->required();

  std::string in_path, out_path;
  std::uint64_t tf_us = DenoiseConfig{}.tf_us;
  auto* den = app.add_subcommand("denoise", "Remove isolated events from one stream");
  den->add_option("--in", in_path, "Input stream (.evb or .csv)")->required()->check(CLI::ExistingFile);
  den->add_option("--out", out_path, "Output stream");
  den->add_option("--tf-us", tf_us, "Neighbour time window in microseconds");

  bool oracle = false;
  std::size_t bins = TveConfig{}.bins;
  std::uint32_t downscale = TveConfig{}.downscale;
  long long enc_seed = 0;
  auto* enc = app.add_subcommand("encode", "Voxelize one stream");
  enc->add_option("--in", in_path, "Input stream")->required()->check(CLI::ExistingFile);
  enc->add_option("--out", out_path, "Output tensor file")->required();
  enc->add_flag("--oracle", oracle, "Hard binning instead of the learned allocation");
  enc->add_option("--bins", bins, "Temporal bins");
  enc->add_option("--downscale", downscale, "Coordinate divisor");
  enc->add_option("--seed", enc_seed, "Seed for the learned allocation weights");

  RunOptions train_opts, eval_opts, few_opts, sweep_opts, ablate_opts;
  auto* train = app.add_subcommand("train", "Train and evaluate one configuration");
  train_opts.add(train);

  std::string checkpoint, eval_scene, curve;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_opts.add(eval, false);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--scene", eval_scene, "Evaluate every sample of this scene instead of the split's test set");

  auto* few = app.add_subcommand("fewshot", "Adapt a checkpoint with K target samples per subject");
  few_opts.add(few);
  few->add_option("--checkpoint", checkpoint, "Source checkpoint")->required()->check(CLI::ExistingFile);
  few->add_option("--curve", curve, "Comma-separated K values; emits an accuracy curve instead");

  std::size_t max_per_tensor = 0;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  grad->add_option("--max-per-tensor", max_per_tensor, "Coordinates checked per tensor (0 = all)");

  std::string axis, values, targets;
  unsigned jobs = 1;
  auto* sw = app.add_subcommand("sweep", "Train and evaluate across one parameter axis");
  sweep_opts.add(sw);
  sw->add_option("--axis", axis, "lambda | channels | samples")->required();
  sw->add_option("--values", values, "Comma-separated values")->required();
  sw->add_option("--targets", targets, "Comma-separated target scenes (default: all other scenes)");
  sw->add_option("--jobs", jobs, "Configurations run concurrently")->check(CLI::PositiveNumber);

  std::vector<std::string> variants;
  auto* abl = app.add_subcommand("ablate", "Component ablation report");
  ablate_opts.add(abl);
  abl->add_option("--variant", variants, "full, A_no_lta, B_no_sse_pcr, C_no_pcr or all (repeatable)");
  abl->add_option("--targets", targets, "Comma-separated target scenes (default: all other scenes)");
  abl->add_option("--jobs", jobs, "Variants run concurrently")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitIo;
  }

  try {
    if (*gen) return cmd_gen(subjects, per_scene, scenes, gen_seed, out_dir);
    if (*den) return cmd_denoise(in_path, out_path, tf_us);
    if (*enc) return cmd_encode(in_path, out_path, oracle, bins, downscale, enc_seed);
    if (*train) return cmd_train(train_opts);
    if (*eval) return cmd_eval(eval_opts, checkpoint, eval_scene);
    if (*few) return cmd_fewshot(few_opts, checkpoint, curve);
    if (*grad) return cmd_gradcheck(max_per_tensor);
    if (*sw) return cmd_sweep(sweep_opts, axis, values, targets, jobs);
    if (*abl) return cmd_ablate(ablate_opts, variants, targets, jobs);
  } catch (const ValidationFailure& e) {
    log(std::string("error: ") + e.what());
    return kExitValidation;
  } catch (const SplitError& e) {
    log(std::string("error: ") + e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    log(std::string("error: ") + e.what());
    return kExitIo;
  }
  return 0;
}
