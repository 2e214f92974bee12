#include "neurolip/trainer.hpp"

#include <algorithm>

#include "neurolip/adam.hpp"
#include "neurolip/checkpoint.hpp"
#include "neurolip/error.hpp"

namespace neurolip {

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("train.epochs must be >= 0");
  if (!(lr > 0)) throw ConfigError("train.lr must be positive");
  if (batch == 0) throw ConfigError("train.batch must be positive");
  if (!(lr_decay > 0) || lr_decay > 1) throw ConfigError("train.lr_decay must be in (0, 1]");
  if (decay_every <= 0) throw ConfigError("train.decay_every must be positive");
  if (fewshot_epochs < 0) throw ConfigError("train.fewshot_epochs must be >= 0");
  if (fewshot_lr < 0) throw ConfigError("train.fewshot_lr must be >= 0");
}

nlohmann::ordered_json EpochRecord::to_json() const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["lr"] = lr;
  j["lambda"] = lambda;
  j["l_ce"] = train_l_ce;
  j["l_pcr"] = train_l_pcr;
  j["l_total"] = train_l_total;
  if (has_val) {
    j["val_l_ce"] = val_l_ce;
    j["val_l_pcr"] = val_l_pcr;
    j["val_l_total"] = val_l_total;
    j["val_accuracy"] = val_accuracy;
  }
  return j;
}

Dataset denoise_dataset(const Dataset& data, const DenoiseConfig& cfg) {
  Dataset out;
  out.meta = data.meta;
  out.streams.reserve(data.size());
  for (const auto& s : data.streams) out.streams.push_back(denoise(s, cfg));
  return out;
}

namespace {

std::vector<const EventStream*> pointers(const std::vector<EventStream>& v) {
  std::vector<const EventStream*> p;
  p.reserve(v.size());
  for (const auto& s : v) p.push_back(&s);
  return p;
}

TrainResult run_epochs(Model<float>& model, const Dataset& data, const std::vector<std::size_t>& labels,
                       const std::vector<std::size_t>& train, const std::vector<std::size_t>& val, int epochs,
                       double base_lr, const TrainConfig& cfg, const AugmentConfig& aug,
                       const std::function<void(const EpochRecord&)>& on_epoch) {
  if (train.empty()) throw SplitError("training split is empty");
  const double lambda = model.config().pcr.lambda;
  Adam<float> opt(model.state(!cfg.freeze_pcr_head).params, AdamConfig{base_lr});
  const std::uint64_t aug_seed = derive_seed(cfg.seed, {0xA5, aug.seed});

  TrainResult result;
  TensorFile best;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = step_decay_lr(base_lr, cfg.lr_decay, cfg.decay_every, epoch);
    rec.lambda = lambda;
    opt.set_lr(rec.lr);

    std::vector<std::size_t> order = train;
    Rng shuffle_rng(derive_seed(cfg.seed, {0x7E, static_cast<std::uint64_t>(epoch)}));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(uniform_int(shuffle_rng, 0, static_cast<std::int64_t>(i) - 1))]);

    for (std::size_t b = 0; b < order.size(); b += cfg.batch) {
      const std::size_t n = std::min(cfg.batch, order.size() - b);
      std::vector<EventStream> batch;
      std::vector<std::size_t> y;
      batch.reserve(n);
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t idx = order[b + k];
        if (cfg.augment) {
          Rng rng = augment_rng(aug_seed, static_cast<std::uint64_t>(epoch), idx);
          batch.push_back(augment(data.streams[idx], aug, rng));
        } else {
          batch.push_back(data.streams[idx]);
        }
        y.push_back(labels[idx]);
      }
      const auto ptrs = pointers(batch);
      opt.zero_grad();
      const auto out = model.forward(ptrs, y, kernels::Mode::Train);
      model.backward(out, lambda);
      opt.step();
      const double w = static_cast<double>(n);
      rec.train_l_ce += w * out.ce.loss;
      rec.train_l_pcr += w * out.pcr.loss;
      rec.train_l_total += w * out.l_total;
    }
    const double total = static_cast<double>(order.size());
    rec.train_l_ce /= total;
    rec.train_l_pcr /= total;
    rec.train_l_total /= total;

    if (!val.empty()) {
      const EvalResult ev = evaluate_model(model, data, labels, val);
      rec.has_val = true;
      rec.val_l_ce = ev.l_ce;
      rec.val_l_pcr = ev.l_pcr;
      rec.val_l_total = ev.l_total;
      rec.val_accuracy = ev.accuracy;
      if (result.best_epoch < 0 || ev.l_total < result.best_val_loss) {
        result.best_epoch = epoch;
        result.best_val_loss = ev.l_total;
        best = snapshot_state(model.state());
      }
    }
    result.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  if (result.best_epoch >= 0) restore_state(best, model.state());
  return result;
}

}  // namespace

TrainResult train_model(Model<float>& model, const Dataset& data, const std::vector<std::size_t>& labels,
                        const std::vector<std::size_t>& train, const std::vector<std::size_t>& val,
                        const TrainConfig& cfg, const AugmentConfig& aug,
                        const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  aug.validate();
  return run_epochs(model, data, labels, train, val, cfg.epochs, cfg.lr, cfg, aug, on_epoch);
}

TrainResult fewshot_finetune(Model<float>& model, const Dataset& data, const std::vector<std::size_t>& labels,
                             const std::vector<std::size_t>& shots, const TrainConfig& cfg, const AugmentConfig& aug) {
  cfg.validate();
  aug.validate();
  if (shots.empty() || cfg.fewshot_epochs == 0) return {};
  TrainConfig ft = cfg;
  ft.seed = derive_seed(cfg.seed, {0xF5});
  const double lr = cfg.fewshot_lr > 0 ? cfg.fewshot_lr : cfg.lr;
  return run_epochs(model, data, labels, shots, {}, cfg.fewshot_epochs, lr, ft, aug, {});
}

EvalResult evaluate_model(Model<float>& model, const Dataset& data, const std::vector<std::size_t>& labels,
                          const std::vector<std::size_t>& indices, std::size_t batch) {
  if (indices.empty()) throw SplitError("evaluation set is empty");
  if (batch == 0) batch = 1;
  EvalResult ev;
  ev.indices = indices;
  std::size_t correct = 0;
  for (std::size_t b = 0; b < indices.size(); b += batch) {
    const std::size_t n = std::min(batch, indices.size() - b);
    std::vector<const EventStream*> ptrs;
    std::vector<std::size_t> y;
    for (std::size_t k = 0; k < n; ++k) {
      ptrs.push_back(&data.streams[indices[b + k]]);
      y.push_back(labels[indices[b + k]]);
    }
    const auto out = model.forward(ptrs, y, kernels::Mode::Eval);
    const double w = static_cast<double>(n);
    ev.l_ce += w * out.ce.loss;
    ev.l_pcr += w * out.pcr.loss;
    ev.l_total += w * out.l_total;
    for (std::size_t k = 0; k < n; ++k) {
      ev.labels.push_back(y[k]);
      ev.predictions.push_back(out.ce.predictions[k]);
      correct += out.ce.predictions[k] == y[k];
    }
  }
  const double total = static_cast<double>(indices.size());
  ev.l_ce /= total;
  ev.l_pcr /= total;
  ev.l_total /= total;
  ev.accuracy = static_cast<double>(correct) / total;
  return ev;
}

MetricsReport make_report(const Dataset& data, const EvalResult& eval, const std::vector<int>& classes) {
  MetricsReport r;
  r.accuracy = eval.accuracy;
  r.samples = eval.indices.size();
  r.l_ce = eval.l_ce;
  r.l_pcr = eval.l_pcr;
  r.l_total = eval.l_total;
  r.classes = classes;
  r.confusion.assign(classes.size(), std::vector<std::size_t>(classes.size(), 0));
  for (std::size_t i = 0; i < eval.indices.size(); ++i) {
    const auto& m = data.meta[eval.indices[i]];
    const bool ok = eval.predictions[i] == eval.labels[i];
    for (Tally* t : {&r.per_digit[m.digit], &r.per_scene[m.scene], &r.per_subject[m.subject]}) {
      t->total += 1;
      t->correct += ok;
    }
    r.confusion.at(eval.labels[i]).at(eval.predictions[i]) += 1;
  }
  return r;
}

namespace {

template <typename Key>
nlohmann::ordered_json tallies(const std::map<Key, Tally>& m) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [k, t] : m) {
    std::string key;
    if constexpr (std::is_same_v<Key, std::string>) key = k;
    else key = std::to_string(k);
    j[key] = {{"correct", t.correct}, {"total", t.total}, {"accuracy", t.accuracy()}};
  }
  return j;
}

}  // namespace

nlohmann::ordered_json MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["accuracy"] = accuracy;
  j["samples"] = samples;
  j["l_ce"] = l_ce;
  j["l_pcr"] = l_pcr;
  j["l_total"] = l_total;
  j["per_digit"] = tallies(per_digit);
  j["per_scene"] = tallies(per_scene);
  j["per_subject"] = tallies(per_subject);
  j["classes"] = classes;
  j["confusion"] = confusion;
  return j;
}

nlohmann::ordered_json loss_curves(const std::vector<EpochRecord>& epochs) {
  nlohmann::ordered_json j;
  for (const char* k : {"l_ce", "l_pcr", "l_total", "val_l_ce", "val_l_pcr", "val_l_total", "val_accuracy"})
    j[k] = nlohmann::ordered_json::array();
  for (const auto& e : epochs) {
    j["l_ce"].push_back(e.train_l_ce);
    j["l_pcr"].push_back(e.train_l_pcr);
    j["l_total"].push_back(e.train_l_total);
    if (e.has_val) {
      j["val_l_ce"].push_back(e.val_l_ce);
      j["val_l_pcr"].push_back(e.val_l_pcr);
      j["val_l_total"].push_back(e.val_l_total);
      j["val_accuracy"].push_back(e.val_accuracy);
    }
  }
  return j;
}

}  // namespace neurolip
