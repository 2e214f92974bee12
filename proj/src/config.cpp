#include "neurolip/config.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <set>
#include <sstream>

#include "neurolip/error.hpp"

namespace neurolip {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// Reads known keys from one JSON object and rejects the rest.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError("config section '" + name_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      if (!v.is_number_unsigned()) throw ConfigError(path(key) + " must be a non-negative integer");
    } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (!v.is_number_integer()) throw ConfigError(path(key) + " must be an integer");
    }
    try {
      out = v.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path(key) + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) throw ConfigError("unknown config key '" + path(item.key().c_str()) + "'");
  }

 private:
  std::string path(const char* key) const { return name_.empty() ? key : name_ + "." + key; }

  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

const char* lta_name(LtaMode m) { return m == LtaMode::Learned ? "learned" : "oracle"; }
LtaMode parse_lta(const std::string& s) {
  if (s == "learned") return LtaMode::Learned;
  if (s == "oracle") return LtaMode::Oracle;
  throw ConfigError("tve.lta must be 'learned' or 'oracle'");
}

const char* enhancer_name(EnhancerMode m) { return m == EnhancerMode::Learned ? "learned" : "average"; }
EnhancerMode parse_enhancer(const std::string& s) {
  if (s == "learned") return EnhancerMode::Learned;
  if (s == "average") return EnhancerMode::Average;
  throw ConfigError("enhancer.mode must be 'learned' or 'average'");
}

void read_tve(const json& j, TveConfig& c) {
  Section s(j, "tve");
  std::string lta = lta_name(c.lta);
  s.get("bins", c.bins);
  s.get("sensor_width", c.sensor.width);
  s.get("sensor_height", c.sensor.height);
  s.get("downscale", c.downscale);
  s.get("tcr_kernel", c.tcr_kernel);
  s.get("mlp_hidden", c.mlp_hidden);
  s.get("lta", lta);
  s.finish();
  c.lta = parse_lta(lta);
}

void read_enhancer(const json& j, EnhancerConfig& c) {
  Section s(j, "enhancer");
  std::string mode = enhancer_name(c.mode);
  s.get("channels", c.channels);
  s.get("att_kernel", c.att_kernel);
  s.get("mode", mode);
  s.finish();
  c.mode = parse_enhancer(mode);
}

void read_pcr(const json& j, PcrConfig& c) {
  Section s(j, "pcr");
  s.get("lambda", c.lambda);
  s.get("mid_channels", c.mid_channels);
  s.finish();
}

void read_backbone(const json& j, ModelConfig& c) {
  Section s(j, "model");
  s.get("num_classes", c.num_classes);
  s.get("backbone_depth", c.backbone_depth);
  s.get("base_width", c.base_width);
  s.finish();
}

ordered_json tve_json(const TveConfig& c) {
  return {{"bins", c.bins},           {"sensor_width", c.sensor.width}, {"sensor_height", c.sensor.height},
          {"downscale", c.downscale}, {"tcr_kernel", c.tcr_kernel},     {"mlp_hidden", c.mlp_hidden},
          {"lta", lta_name(c.lta)}};
}

ordered_json enhancer_json(const EnhancerConfig& c) {
  return {{"channels", c.channels}, {"att_kernel", c.att_kernel}, {"mode", enhancer_name(c.mode)}};
}

ordered_json pcr_json(const PcrConfig& c) { return {{"lambda", c.lambda}, {"mid_channels", c.mid_channels}}; }

ordered_json backbone_json(const ModelConfig& c) {
  return {{"num_classes", c.num_classes}, {"backbone_depth", c.backbone_depth}, {"base_width", c.base_width}};
}

}  // namespace

void RunConfig::validate() const {
  if (denoise.tf_us == 0) throw ConfigError("denoise.tf_us must be positive");
  augment.validate();
  model.tve.validate();
  model.enhancer.validate();
  model.pcr.validate();
  if (model.num_classes != 0) model.backbone().validate();
  train.validate();
  split.validate();
}

ordered_json to_json(const ModelConfig& cfg) {
  return {{"tve", tve_json(cfg.tve)},
          {"enhancer", enhancer_json(cfg.enhancer)},
          {"pcr", pcr_json(cfg.pcr)},
          {"model", backbone_json(cfg)}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  Section s(j, "");
  if (const json* v = s.child("tve")) read_tve(*v, c.tve);
  if (const json* v = s.child("enhancer")) read_enhancer(*v, c.enhancer);
  if (const json* v = s.child("pcr")) read_pcr(*v, c.pcr);
  if (const json* v = s.child("model")) read_backbone(*v, c);
  s.finish();
  return c;
}

ordered_json to_json(const RunConfig& cfg) {
  const auto& a = cfg.augment;
  const auto& t = cfg.train;
  const auto& sp = cfg.split;
  ordered_json j;
  j["denoise"] = {{"enabled", cfg.denoise_enabled}, {"tf_us", cfg.denoise.tf_us}};
  j["augment"] = {{"max_shift", a.max_shift},         {"mirror_prob", a.mirror_prob},
                  {"sparsify_prob", a.sparsify_prob}, {"drop_ratio_lo", a.drop_ratio_lo},
                  {"drop_ratio_hi", a.drop_ratio_hi}, {"seed", a.seed}};
  j["tve"] = tve_json(cfg.model.tve);
  j["enhancer"] = enhancer_json(cfg.model.enhancer);
  j["pcr"] = pcr_json(cfg.model.pcr);
  j["model"] = backbone_json(cfg.model);
  j["train"] = {{"epochs", t.epochs},
                {"lr", t.lr},
                {"batch", t.batch},
                {"lr_decay", t.lr_decay},
                {"decay_every", t.decay_every},
                {"seed", t.seed},
                {"augment", t.augment},
                {"freeze_pcr_head", t.freeze_pcr_head},
                {"fewshot_epochs", t.fewshot_epochs},
                {"fewshot_lr", t.fewshot_lr}};
  j["split"] = {{"protocol", protocol_name(sp.protocol)}, {"source_scene", sp.source_scene},
                {"target_scene", sp.target_scene},         {"shots", sp.shots},
                {"shots_per_digit", sp.shots_per_digit},   {"source_limit", sp.source_limit}};
  return j;
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  Section root(j, "");
  if (const json* v = root.child("denoise")) {
    Section s(*v, "denoise");
    s.get("enabled", c.denoise_enabled);
    s.get("tf_us", c.denoise.tf_us);
    s.finish();
  }
  if (const json* v = root.child("augment")) {
    Section s(*v, "augment");
    s.get("max_shift", c.augment.max_shift);
    s.get("mirror_prob", c.augment.mirror_prob);
    s.get("sparsify_prob", c.augment.sparsify_prob);
    s.get("drop_ratio_lo", c.augment.drop_ratio_lo);
    s.get("drop_ratio_hi", c.augment.drop_ratio_hi);
    s.get("seed", c.augment.seed);
    s.finish();
  }
  if (const json* v = root.child("tve")) read_tve(*v, c.model.tve);
  if (const json* v = root.child("enhancer")) read_enhancer(*v, c.model.enhancer);
  if (const json* v = root.child("pcr")) read_pcr(*v, c.model.pcr);
  if (const json* v = root.child("model")) read_backbone(*v, c.model);
  if (const json* v = root.child("train")) {
    Section s(*v, "train");
    s.get("epochs", c.train.epochs);
    s.get("lr", c.train.lr);
    s.get("batch", c.train.batch);
    s.get("lr_decay", c.train.lr_decay);
    s.get("decay_every", c.train.decay_every);
    s.get("seed", c.train.seed);
    s.get("augment", c.train.augment);
    s.get("freeze_pcr_head", c.train.freeze_pcr_head);
    s.get("fewshot_epochs", c.train.fewshot_epochs);
    s.get("fewshot_lr", c.train.fewshot_lr);
    s.finish();
  }
  if (const json* v = root.child("split")) {
    Section s(*v, "split");
    std::string protocol = protocol_name(c.split.protocol);
    s.get("protocol", protocol);
    s.get("source_scene", c.split.source_scene);
    s.get("target_scene", c.split.target_scene);
    s.get("shots", c.split.shots);
    s.get("shots_per_digit", c.split.shots_per_digit);
    s.get("source_limit", c.split.source_limit);
    s.finish();
    c.split.protocol = parse_protocol(protocol);
  }
  root.finish();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

std::string config_text(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

std::string git_blob_sha1(std::string_view bytes) {
  const std::string header = "blob " + std::to_string(bytes.size()) + std::string(1, '\0');
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  const bool ok = ctx && EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) &&
                  EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) && EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  if (!ok) throw Error("sha1 digest failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    const unsigned char b = digest[i];
    out += kHex[b >> 4];
    out += kHex[b & 15];
  }
  return out;
}

std::string git_blob_sha1_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return git_blob_sha1(ss.str());
}

}  // namespace neurolip
