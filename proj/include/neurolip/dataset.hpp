#pragma once

// In-memory labelled datasets and the matched / cross / few-shot splits.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "neurolip/events.hpp"

namespace neurolip {

/// Streams with metadata. Labels are subject identities mapped to dense
/// class indices in ascending subject-id order.
struct Dataset {
  std::vector<EventStream> streams;
  std::vector<SampleMeta> meta;

  std::size_t size() const noexcept { return streams.size(); }
  /// Sorted distinct subject ids; position = class index.
  std::vector<int> subjects() const;
  std::vector<std::string> scenes() const;
};

/// Loads every manifest entry (paths relative to the manifest directory).
Dataset load_dataset(const std::filesystem::path& manifest);
Dataset dataset_from(std::vector<EventStream> streams);

enum class Protocol { Matched, Cross, Fewshot };

std::string protocol_name(Protocol p);
Protocol parse_protocol(const std::string& name);

struct SplitSpec {
  Protocol protocol = Protocol::Matched;
  std::string source_scene = "frontal";
  std::string target_scene;  // cross / fewshot only
  std::size_t shots = 0;     // fewshot: samples per subject taken from the target scene
  /// Shots counted per (subject, digit) instead of per subject.
  bool shots_per_digit = false;
  /// Caps the source pool at the first n samples per subject (0 = all), in dataset order.
  std::size_t source_limit = 0;

  void validate() const;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
  std::vector<std::size_t> shots;  // fewshot only; disjoint from test
};

/// Subject-balanced split. Each subject's pool is shuffled with a seed-derived
/// permutation and cut 6:2:2 (matched) or 8:2 (source side of cross/fewshot).
/// Throws SplitError when a subject ends up with fewer than two samples in
/// any non-empty role.
Split make_split(const Dataset& data, const SplitSpec& spec, std::uint64_t seed);

/// Indices of one scene grouped by subject, each group in a permutation drawn
/// from (seed, salt, subject). Few-shot shots are prefixes of the salt-0x52 pools.
std::map<int, std::vector<std::size_t>> shuffled_pools(const Dataset& data, const std::string& scene,
                                                       std::uint64_t seed, std::uint64_t salt);
inline constexpr std::uint64_t kSourcePoolSalt = 0x51;
inline constexpr std::uint64_t kTargetPoolSalt = 0x52;

/// Class index of every sample, from the dataset's subject list.
std::vector<std::size_t> class_labels(const Dataset& data, const std::vector<int>& subjects);

}  // namespace neurolip
