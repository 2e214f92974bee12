#include "neurolip/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "neurolip/error.hpp"
#include "neurolip/rng.hpp"

namespace neurolip {

std::vector<int> Dataset::subjects() const {
  std::set<int> ids;
  for (const auto& m : meta) ids.insert(m.subject);
  return {ids.begin(), ids.end()};
}

std::vector<std::string> Dataset::scenes() const {
  std::set<std::string> tags;
  for (const auto& m : meta) tags.insert(m.scene);
  return {tags.begin(), tags.end()};
}

Dataset load_dataset(const std::filesystem::path& manifest) {
  const auto entries = read_manifest(manifest);
  const auto base = manifest.parent_path();
  Dataset data;
  data.streams.reserve(entries.size());
  for (const auto& e : entries) {
    const std::filesystem::path file = e.file;
    EventStream s = load_stream(file.is_absolute() ? file : base / file);
    s.set_meta(e.meta);
    data.streams.push_back(std::move(s));
    data.meta.push_back(e.meta);
  }
  return data;
}

Dataset dataset_from(std::vector<EventStream> streams) {
  Dataset data;
  for (const auto& s : streams) {
    if (!s.meta()) throw ConfigError("dataset streams need metadata");
    data.meta.push_back(*s.meta());
  }
  data.streams = std::move(streams);
  return data;
}

std::string protocol_name(Protocol p) {
  switch (p) {
    case Protocol::Matched: return "matched";
    case Protocol::Cross: return "cross";
    case Protocol::Fewshot: return "fewshot";
  }
  return "matched";
}

Protocol parse_protocol(const std::string& name) {
  if (name == "matched") return Protocol::Matched;
  if (name == "cross") return Protocol::Cross;
  if (name == "fewshot") return Protocol::Fewshot;
  throw ConfigError("unknown protocol: " + name);
}

void SplitSpec::validate() const {
  if (source_scene.empty()) throw ConfigError("split needs a source scene");
  if (protocol != Protocol::Matched) {
    if (target_scene.empty()) throw ConfigError("cross and fewshot protocols need a target scene");
    if (target_scene == source_scene) throw ConfigError("target scene must differ from the source scene");
  }
}

namespace {

using Pools = std::map<int, std::vector<std::size_t>>;

Pools pools_by_subject(const Dataset& data, const std::string& scene) {
  Pools pools;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data.meta[i].scene == scene) pools[data.meta[i].subject].push_back(i);
  return pools;
}

void shuffle(std::vector<std::size_t>& v, std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i) - 1));
    std::swap(v[i - 1], v[j]);
  }
}

void require_count(std::size_t n, int subject, const char* role) {
  if (n < 2)
    throw SplitError("subject " + std::to_string(subject) + " has " + std::to_string(n) + " sample(s) in " + role +
                     ", need at least 2");
}

}  // namespace

std::map<int, std::vector<std::size_t>> shuffled_pools(const Dataset& data, const std::string& scene,
                                                       std::uint64_t seed, std::uint64_t salt) {
  Pools pools = pools_by_subject(data, scene);
  for (auto& [subject, pool] : pools) shuffle(pool, derive_seed(seed, {salt, static_cast<std::uint64_t>(subject)}));
  return pools;
}

Split make_split(const Dataset& data, const SplitSpec& spec, std::uint64_t seed) {
  spec.validate();
  Pools source = pools_by_subject(data, spec.source_scene);
  if (source.empty()) throw SplitError("no samples for source scene " + spec.source_scene);

  Split split;
  for (auto& [subject, pool] : source) {
    if (spec.source_limit > 0 && pool.size() > spec.source_limit) pool.resize(spec.source_limit);
    shuffle(pool, derive_seed(seed, {kSourcePoolSalt, static_cast<std::uint64_t>(subject)}));
    const double n = static_cast<double>(pool.size());
    if (spec.protocol == Protocol::Matched) {
      const auto n_train = static_cast<std::size_t>(std::llround(0.6 * n));
      const auto n_val = static_cast<std::size_t>(std::llround(0.2 * n));
      const std::size_t n_test = pool.size() - std::min(pool.size(), n_train + n_val);
      require_count(n_train, subject, "train");
      require_count(n_val, subject, "val");
      require_count(n_test, subject, "test");
      split.train.insert(split.train.end(), pool.begin(), pool.begin() + n_train);
      split.val.insert(split.val.end(), pool.begin() + n_train, pool.begin() + n_train + n_val);
      split.test.insert(split.test.end(), pool.begin() + n_train + n_val, pool.end());
    } else {
      const auto n_train = static_cast<std::size_t>(std::llround(0.8 * n));
      require_count(n_train, subject, "train");
      require_count(pool.size() - n_train, subject, "val");
      split.train.insert(split.train.end(), pool.begin(), pool.begin() + n_train);
      split.val.insert(split.val.end(), pool.begin() + n_train, pool.end());
    }
  }

  if (spec.protocol != Protocol::Matched) {
    Pools target = shuffled_pools(data, spec.target_scene, seed, kTargetPoolSalt);
    if (target.empty()) throw SplitError("no samples for target scene " + spec.target_scene);
    for (auto& [subject, pool] : target) {
      if (spec.protocol == Protocol::Cross || spec.shots == 0) {
        split.test.insert(split.test.end(), pool.begin(), pool.end());
        continue;
      }
      std::map<int, std::size_t> taken;  // per digit, or a single bucket
      std::vector<std::size_t> rest;
      for (std::size_t idx : pool) {
        std::size_t& t = taken[spec.shots_per_digit ? data.meta[idx].digit : 0];
        if (t < spec.shots) {
          split.shots.push_back(idx);
          ++t;
        } else {
          rest.push_back(idx);
        }
      }
      require_count(rest.size(), subject, "target evaluation");
      split.test.insert(split.test.end(), rest.begin(), rest.end());
    }
  }

  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  std::sort(split.shots.begin(), split.shots.end());
  return split;
}

std::vector<std::size_t> class_labels(const Dataset& data, const std::vector<int>& subjects) {
  std::vector<std::size_t> labels(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto it = std::lower_bound(subjects.begin(), subjects.end(), data.meta[i].subject);
    if (it == subjects.end() || *it != data.meta[i].subject)
      throw ConfigError("subject " + std::to_string(data.meta[i].subject) + " is not a known class");
    labels[i] = static_cast<std::size_t>(it - subjects.begin());
  }
  return labels;
}

}  // namespace neurolip
