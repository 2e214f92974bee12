#include "neurolip/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "neurolip/error.hpp"

namespace neurolip {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(6);
  ss << std::fixed << v;
  return ss.str();
}

std::string value_label(double v) {
  std::ostringstream ss;
  ss << v;
  return ss.str();
}

}  // namespace

Dataset prepare_dataset(const Dataset& raw, const RunConfig& cfg) {
  return cfg.denoise_enabled ? denoise_dataset(raw, cfg.denoise) : raw;
}

std::string dataset_sha1(const Dataset& data) {
  std::string text;
  for (std::size_t i = 0; i < data.size(); ++i) {
    ManifestEntry e{"#" + std::to_string(i), data.meta[i]};
    text += manifest_line(e);
    text += '\n';
    const auto bytes = encode_evb(data.streams[i]);
    text += git_blob_sha1(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    text += '\n';
  }
  return git_blob_sha1(text);
}

TensorFile make_checkpoint(Model<float>& model, const std::vector<int>& classes, const std::string& config_sha1) {
  TensorFile file = snapshot_state(model.state());
  file.meta["model"] = nlohmann::json::parse(to_json(model.config()).dump());
  file.meta["classes"] = classes;
  file.meta["config_sha1"] = config_sha1;
  return file;
}

std::unique_ptr<Model<float>> load_model(const TensorFile& checkpoint, std::vector<int>& classes) {
  if (!checkpoint.meta.contains("model") || !checkpoint.meta.contains("classes"))
    throw ConfigError("checkpoint lacks model metadata");
  auto model = std::make_unique<Model<float>>(model_config_from_json(checkpoint.meta.at("model")));
  classes = checkpoint.meta.at("classes").get<std::vector<int>>();
  restore_state(checkpoint, model->state());
  return model;
}

RunOutcome run_training(const Dataset& data, const RunConfig& cfg_in, const std::string& inputs_sha1,
                        const std::function<void(const EpochRecord&)>& on_epoch) {
  RunOutcome out;
  out.config = cfg_in;
  out.classes = data.subjects();
  if (out.config.model.num_classes == 0) out.config.model.num_classes = out.classes.size();
  if (out.config.model.num_classes != out.classes.size())
    throw ConfigError("model.num_classes is " + std::to_string(out.config.model.num_classes) + " but the data has " +
                      std::to_string(out.classes.size()) + " subjects");
  const RunConfig& cfg = out.config;
  cfg.validate();

  out.split = make_split(data, cfg.split, cfg.train.seed);
  const auto labels = class_labels(data, out.classes);
  out.model = std::make_unique<Model<float>>(cfg.model);
  out.model->init(cfg.train.seed);
  out.train = train_model(*out.model, data, labels, out.split.train, out.split.val, cfg.train, cfg.augment, on_epoch);
  if (cfg.split.protocol == Protocol::Fewshot)
    out.finetune = fewshot_finetune(*out.model, data, labels, out.split.shots, cfg.train, cfg.augment);
  out.test = make_report(data, evaluate_model(*out.model, data, labels, out.split.test), out.classes);

  const std::string config_sha1 = git_blob_sha1(config_text(cfg));
  out.checkpoint = make_checkpoint(*out.model, out.classes, config_sha1);

  auto& m = out.metrics;
  m["config_sha1"] = config_sha1;
  m["inputs_sha1"] = inputs_sha1;
  m["protocol"] = protocol_name(cfg.split.protocol);
  m["source_scene"] = cfg.split.source_scene;
  m["target_scene"] = cfg.split.target_scene;
  m["shots"] = cfg.split.shots;
  m["split_sizes"] = {{"train", out.split.train.size()},
                      {"val", out.split.val.size()},
                      {"test", out.split.test.size()},
                      {"shots", out.split.shots.size()}};
  m["best_epoch"] = out.train.best_epoch;
  m["best_val_l_total"] = out.train.best_val_loss;
  m["test"] = out.test.to_json();
  m["curves"] = loss_curves(out.train.epochs);
  if (!out.finetune.epochs.empty()) m["finetune_curves"] = loss_curves(out.finetune.epochs);
  return out;
}

void write_run(const RunOutcome& run, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "config.json", config_text(run.config));
  save_tensor_file(run.checkpoint, dir / "checkpoint.nlt");
  write_text(dir / "metrics.json", run.metrics.dump(2) + "\n");
  std::string log;
  auto append = [&](const char* phase, const std::vector<EpochRecord>& epochs) {
    for (const auto& e : epochs) {
      nlohmann::ordered_json line;
      line["phase"] = phase;
      const auto record = e.to_json();
      for (const auto& [k, v] : record.items()) line[k] = v;
      log += line.dump() + "\n";
    }
  };
  append("train", run.train.epochs);
  append("finetune", run.finetune.epochs);
  write_text(dir / "train_log.jsonl", log);
}

MetricsReport evaluate_scene(Model<float>& model, const Dataset& data, const std::vector<int>& classes,
                             const std::string& scene) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data.meta[i].scene == scene) idx.push_back(i);
  if (idx.empty()) throw SplitError("no samples for scene " + scene);
  const auto labels = class_labels(data, classes);
  return make_report(data, evaluate_model(model, data, labels, idx), classes);
}

TransferRow run_transfer(const Dataset& data, RunConfig cfg, const std::vector<std::string>& target_scenes,
                         const std::string& inputs_sha1, std::string label) {
  cfg.split.protocol = Protocol::Matched;
  cfg.split.target_scene.clear();
  cfg.split.shots = 0;
  auto run = std::make_shared<RunOutcome>(run_training(data, cfg, inputs_sha1));
  TransferRow row;
  row.label = std::move(label);
  row.config_sha1 = run->metrics.at("config_sha1").get<std::string>();
  row.matched = run->test.accuracy;
  for (const auto& scene : target_scenes) {
    if (scene == cfg.split.source_scene) continue;
    row.targets.emplace_back(scene, evaluate_scene(*run->model, data, run->classes, scene).accuracy);
  }
  row.run = std::move(run);
  return row;
}

std::string transfer_csv(const std::string& first_column, const std::vector<TransferRow>& rows) {
  std::string csv = first_column + ",matched";
  if (!rows.empty())
    for (const auto& [scene, acc] : rows.front().targets) csv += "," + scene;
  csv += ",config_sha1\n";
  for (const auto& r : rows) {
    csv += r.label + "," + fmt(r.matched);
    for (const auto& [scene, acc] : r.targets) csv += "," + fmt(acc);
    csv += "," + r.config_sha1 + "\n";
  }
  return csv;
}

std::vector<FewshotPoint> fewshot_curve(const TensorFile& source, const Dataset& data, const RunConfig& cfg,
                                        const std::string& target_scene, const std::vector<std::size_t>& shots) {
  if (shots.empty()) return {};
  const std::size_t max_k = *std::max_element(shots.begin(), shots.end());
  const auto pools = shuffled_pools(data, target_scene, cfg.train.seed, kTargetPoolSalt);
  if (pools.empty()) throw SplitError("no samples for target scene " + target_scene);

  std::vector<std::size_t> eval;
  for (const auto& [subject, pool] : pools) {
    if (pool.size() < max_k + 2)
      throw SplitError("subject " + std::to_string(subject) + " has too few target samples for " +
                       std::to_string(max_k) + " shots");
    eval.insert(eval.end(), pool.begin() + static_cast<std::ptrdiff_t>(max_k), pool.end());
  }
  std::sort(eval.begin(), eval.end());

  std::vector<FewshotPoint> curve;
  for (std::size_t k : shots) {
    std::vector<int> classes;
    auto model = load_model(source, classes);
    const auto labels = class_labels(data, classes);
    std::vector<std::size_t> picked;
    for (const auto& [subject, pool] : pools)
      picked.insert(picked.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(picked.begin(), picked.end());
    fewshot_finetune(*model, data, labels, picked, cfg.train, cfg.augment);
    const auto ev = evaluate_model(*model, data, labels, eval);
    curve.push_back({k, ev.accuracy, eval.size()});
  }
  return curve;
}

SweepAxis parse_sweep_axis(const std::string& name) {
  if (name == "lambda") return SweepAxis::Lambda;
  if (name == "channels") return SweepAxis::Channels;
  if (name == "samples") return SweepAxis::Samples;
  throw ConfigError("unknown sweep axis: " + name);
}

std::string sweep_axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::Lambda: return "lambda";
    case SweepAxis::Channels: return "channels";
    case SweepAxis::Samples: return "samples";
  }
  return "lambda";
}

RunConfig apply_sweep_value(RunConfig cfg, SweepAxis axis, double value) {
  auto count = [&](const char* what) {
    if (!(value >= 1) || value != std::floor(value)) throw ConfigError(std::string(what) + " must be a positive integer");
    return static_cast<std::size_t>(value);
  };
  switch (axis) {
    case SweepAxis::Lambda:
      if (!(value >= 0)) throw ConfigError("lambda must be >= 0");
      cfg.model.pcr.lambda = value;
      break;
    case SweepAxis::Channels: cfg.model.enhancer.channels = count("channels"); break;
    case SweepAxis::Samples: cfg.split.source_limit = count("samples"); break;
  }
  return cfg;
}

namespace {

// Runs fn(i) for i in [0, n) on up to `jobs` threads; rethrows the first failure.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < std::min<std::size_t>(jobs, n); ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

std::vector<TransferRow> sweep(const Dataset& data, const RunConfig& base, SweepAxis axis,
                               const std::vector<double>& values, const std::vector<std::string>& target_scenes,
                               const std::string& inputs_sha1, unsigned jobs) {
  std::vector<RunConfig> cfgs;
  for (double v : values) cfgs.push_back(apply_sweep_value(base, axis, v));
  std::vector<TransferRow> rows(values.size());
  parallel_for(values.size(), jobs, [&](std::size_t i) {
    rows[i] = run_transfer(data, cfgs[i], target_scenes, inputs_sha1, value_label(values[i]));
  });
  return rows;
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::NoLta: return "A_no_lta";
    case Variant::NoSsePcr: return "B_no_sse_pcr";
    case Variant::NoPcr: return "C_no_pcr";
  }
  return "full";
}

Variant parse_variant(const std::string& name) {
  for (Variant v : kAllVariants)
    if (variant_name(v) == name) return v;
  throw ConfigError("unknown ablation variant: " + name);
}

RunConfig apply_variant(RunConfig cfg, Variant v) {
  switch (v) {
    case Variant::Full: break;
    case Variant::NoLta: cfg.model.tve.lta = LtaMode::Oracle; break;
    case Variant::NoSsePcr:
      cfg.model.enhancer.mode = EnhancerMode::Average;
      cfg.model.pcr.lambda = 0.0;
      break;
    case Variant::NoPcr: cfg.model.pcr.lambda = 0.0; break;
  }
  return cfg;
}

std::vector<TransferRow> ablate(const Dataset& data, const RunConfig& base, const std::vector<Variant>& variants,
                                const std::vector<std::string>& target_scenes, const std::string& inputs_sha1,
                                unsigned jobs) {
  std::vector<TransferRow> rows(variants.size());
  parallel_for(variants.size(), jobs, [&](std::size_t i) {
    rows[i] = run_transfer(data, apply_variant(base, variants[i]), target_scenes, inputs_sha1,
                           variant_name(variants[i]));
  });
  return rows;
}

}  // namespace neurolip
