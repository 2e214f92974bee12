// Acceptance suite. Prints one PASS/FAIL line per criterion; details go on
// indented lines underneath. Usage:
//   neurolip_acceptance [--criteria 1,2,3] [--out DIR]

#include <sys/wait.h>

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include "neurolip/encoder.hpp"
#include "neurolip/experiments.hpp"
#include "neurolip/gradsuite.hpp"
#include "neurolip/preprocess.hpp"
#include "neurolip/regularizer.hpp"
#include "neurolip/synthgen.hpp"
#include "support.hpp"

using namespace neurolip;
namespace fs = std::filesystem;

namespace {

// ---- pinned parameters and tolerances ------------------------------------
constexpr int kDenoiseStreams = 100;
constexpr std::size_t kDenoiseMaxEvents = 2000;
constexpr double kDenoiseBudgetSec = 10.0;

constexpr double kGradBudgetSec = 60.0;

constexpr int kOracleStreams = 50;
constexpr double kOracleTolerance = 1e-12;

constexpr int kPcrRandomPairs = 1000;
constexpr double kPcrScaleTolerance = 1e-6;
constexpr double kPcrExactTolerance = 1e-12;

constexpr int kEncoderStreams = 20;
constexpr int kTcrGrids = 100;
constexpr double kMirrorTolerance = 1e-6;
constexpr double kMassRelTolerance = 1e-5;

// Desk-scale training. The learning rate is raised from the 1e-4 default:
// at 1e-4 the 30-epoch budget ends far from convergence on this dataset.
constexpr double kDeskLr = 1e-3;
constexpr int kDeskEpochs = 30;
constexpr std::uint64_t kDatasetSeed = 0;
constexpr std::array<std::uint64_t, 3> kMatchedSeeds = {0, 1, 2};
constexpr double kMatchedAccuracy = 0.95;
constexpr double kRunBudgetSec = 15 * 60.0;
constexpr double kCrossAccuracy = 0.30;  // 3x chance at 10 classes
constexpr std::array<std::uint64_t, 5> kFewshotSeeds = {0, 1, 2, 3, 4};
constexpr std::size_t kFewshotShots = 2;
constexpr std::size_t kFewshotMaxShots = 5;
constexpr int kFewshotRequiredWins = 4;

constexpr int kAblationEpochs = 3;

// ---------------------------------------------------------------------------

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct Verdict {
  bool pass = true;
  std::string summary;
  std::vector<std::string> details;
};

void report(int id, const std::string& title, const Verdict& v) {
  std::cout << "criterion " << id << " " << (v.pass ? "PASS" : "FAIL") << "  " << title << ": " << v.summary
            << std::endl;
  for (const auto& d : v.details) std::cout << "    " << d << std::endl;
}

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

// ---- 1 -------------------------------------------------------------------
Verdict denoiser_equivalence() {
  Rng rng(derive_seed(2024, {1}));
  const std::array<SensorGeometry, 4> grids = {SensorGeometry{8, 8}, SensorGeometry{32, 24}, SensorGeometry{64, 48},
                                               kDvSpeakerGeometry};
  const std::array<std::uint64_t, 3> spans = {20'000, 200'000, 3'000'000};
  int mismatches = 0, not_idempotent = 0;
  std::size_t events = 0, kept = 0;
  double fast_sec = 0;
  const auto t0 = Clock::now();
  for (int i = 0; i < kDenoiseStreams; ++i) {
    const auto n = static_cast<std::size_t>(uniform_int(rng, 1, kDenoiseMaxEvents));
    const auto s = oracle::random_stream(rng, n, grids[i % grids.size()], spans[(i / 4) % spans.size()]);
    const auto tf = Clock::now();
    const auto out = denoise(s);
    fast_sec += seconds_since(tf);
    mismatches += out != oracle::denoise_oracle(s, DenoiseConfig{}.tf_us);
    not_idempotent += denoise(out) != out;
    events += n;
    kept += out.size();
  }
  const double total = seconds_since(t0);
  Verdict v;
  v.pass = mismatches == 0 && not_idempotent == 0 && total < kDenoiseBudgetSec;
  v.summary = std::to_string(kDenoiseStreams) + " streams, " + std::to_string(mismatches) + " oracle mismatches, " +
              std::to_string(not_idempotent) + " idempotence failures, " + fmt("%.2f s", total);
  v.details.push_back(std::to_string(events) + " events in, " + std::to_string(kept) + " retained; fast path " +
                      fmt("%.3f s", fast_sec));
  return v;
}

// ---- 2 -------------------------------------------------------------------
Verdict gradient_suite_check() {
  const auto t0 = Clock::now();
  const auto cases = gradient_suite();
  const auto sentinel = corrupted_backward_sentinel();
  const double sec = seconds_since(t0);
  Verdict v;
  double worst = 0;
  for (const auto& c : cases) {
    worst = std::max(worst, c.result.max_rel_error);
    v.pass = v.pass && c.passed();
    v.details.push_back(c.name + fmt(" %.3e", c.result.max_rel_error) + " over " +
                        std::to_string(c.result.coordinates) + " coordinates" + (c.passed() ? "" : "  <-- FAIL"));
  }
  const bool caught = sentinel.result.max_rel_error > kGradSentinelThreshold;
  v.pass = v.pass && caught && sec < kGradBudgetSec;
  v.summary = std::to_string(cases.size()) + " cases, worst " + fmt("%.3e", worst) + " (< " +
              fmt("%.0e", kGradTolerance) + "), sentinel " + fmt("%.3e", sentinel.result.max_rel_error) +
              (caught ? " detected" : " MISSED") + ", " + fmt("%.2f s", sec);
  return v;
}

// ---- 3 -------------------------------------------------------------------
Verdict oracle_voxelization() {
  Rng rng(derive_seed(2024, {3}));
  const std::size_t bins = 16;
  double worst = 0;
  int edge_events = 0;
  for (int i = 0; i < kOracleStreams; ++i) {
    const SensorGeometry g{static_cast<std::uint32_t>(uniform_int(rng, 4, 60)),
                           static_cast<std::uint32_t>(uniform_int(rng, 4, 40))};
    const std::uint64_t span = 16 * static_cast<std::uint64_t>(uniform_int(rng, 1, 20'000));
    auto base = oracle::random_stream(rng, static_cast<std::size_t>(uniform_int(rng, 1, 3000)), g, span);
    std::vector<Event> ev = base.events();
    // pin both ends of the time range and put events exactly on bin edges
    ev.push_back({0, 0, 0, 1});
    ev.push_back({span, static_cast<std::uint16_t>(g.width - 1), static_cast<std::uint16_t>(g.height - 1), -1});
    for (std::uint64_t b = 1; b < bins; b += 5) ev.push_back({span * b / bins, 1, 1, b % 2 ? std::int8_t(1) : std::int8_t(-1)});
    const EventStream s(std::move(ev), g);
    for (const Event& e : s.events()) edge_events += (e.t * bins) % span == 0;

    TveConfig cfg;
    cfg.bins = bins;
    cfg.sensor = g;
    cfg.downscale = 1;
    cfg.lta = LtaMode::Oracle;
    Encoder<double> enc(cfg);
    const auto voxel = enc.forward(s).voxel;
    const auto expected = oracle::histogram_voxels(s, bins);
    for (std::size_t k = 0; k < voxel.size(); ++k) worst = std::max(worst, std::abs(voxel[k] - expected[k]));
  }
  Verdict v;
  v.pass = worst <= kOracleTolerance;
  v.summary = std::to_string(kOracleStreams) + " streams, B=16, max |diff| " + fmt("%.3e", worst) + " (tol " +
              fmt("%.0e", kOracleTolerance) + ")";
  v.details.push_back(std::to_string(edge_events) + " events on bin edges, incl. t = t_max in the closed last bin");
  return v;
}

// ---- 4 -------------------------------------------------------------------
Verdict pcr_properties() {
  Rng rng(derive_seed(2024, {4}));
  auto random_map = [&](std::size_t h, std::size_t w) {
    Tensor<double> t({1, 2, h, w});
    for (auto& x : t.vec()) x = uniform01(rng) * (uniform01(rng) < 0.2 ? 0.0 : 1.0);
    return t;
  };
  Verdict v;

  double identical = 0;
  for (int i = 0; i < 20; ++i) {
    const auto m = random_map(1 + i % 7, 1 + i % 5);
    identical = std::max(identical, std::abs(pcr_loss(m, m).loss));
  }
  const bool zero_ok = identical <= kPcrExactTolerance;

  Tensor<double> r({1, 2, 1, 2}), ref({1, 2, 1, 2});
  r.vec() = {1, 0, 1, 0};
  ref.vec() = {0, 1, 0, 1};
  const double disjoint = pcr_loss(r, ref).loss;
  const bool disjoint_ok = std::abs(disjoint - 1.0) <= kPcrExactTolerance;

  int over_bound = 0, oracle_mismatch = 0;
  double max_ratio = 0, worst_scale = 0;
  for (int i = 0; i < kPcrRandomPairs; ++i) {
    const auto h = static_cast<std::size_t>(uniform_int(rng, 1, 12)), w = static_cast<std::size_t>(uniform_int(rng, 1, 12));
    const auto a = random_map(h, w), b = random_map(h, w);
    const double l = pcr_loss(a, b).loss;
    const double bound = 2.0 / double(h * w);
    max_ratio = std::max(max_ratio, l / bound);
    over_bound += l > bound + kPcrExactTolerance;
    oracle_mismatch += std::abs(l - oracle::pcr_oracle(a.vec(), b.vec(), h, w)) > kPcrExactTolerance;
    for (double c : {0.5, 3.0, 100.0}) {
      Tensor<double> scaled = a;
      for (auto& x : scaled.vec()) x *= c;
      worst_scale = std::max(worst_scale, std::abs(pcr_loss(scaled, b).loss - l));
    }
  }
  const bool scale_ok = worst_scale <= kPcrScaleTolerance;
  v.pass = zero_ok && disjoint_ok && over_bound == 0 && oracle_mismatch == 0 && scale_ok;
  v.summary = "identical " + fmt("%.1e", identical) + ", disjoint 1x2 " + fmt("%.12f", disjoint) + ", " +
              std::to_string(over_bound) + "/" + std::to_string(kPcrRandomPairs) + " above 2/(HW), scale drift " +
              fmt("%.1e", worst_scale);
  v.details.push_back("max l_pcr / bound " + fmt("%.4f", max_ratio) + "; " + std::to_string(oracle_mismatch) +
                      " mismatches against the reference computation");
  return v;
}

// ---- 5 -------------------------------------------------------------------
Verdict encoder_invariants() {
  Rng rng(derive_seed(2024, {5}));
  TveConfig cfg;  // production geometry, B=16, downscale 4, learned LTA
  Encoder<float> enc(cfg);
  enc.params().init(rng);
  double mirror_err = 0, mass_err = 0;
  for (int i = 0; i < kEncoderStreams; ++i) {
    const auto s = oracle::random_stream(rng, static_cast<std::size_t>(uniform_int(rng, 50, 4000)), cfg.sensor,
                                          3'000'000);
    const auto a = enc.forward(s), b = enc.forward(mirror(s, 0.0));
    const std::size_t W = a.voxel.dim(3);
    for (std::size_t c = 0; c < a.voxel.dim(1); ++c)
      for (std::size_t y = 0; y < a.voxel.dim(2); ++y)
        for (std::size_t x = 0; x < W; ++x)
          mirror_err = std::max(mirror_err, double(std::abs(b.voxel.at(0, c, y, x) - a.voxel.at(0, c, y, W - 1 - x))));
    double vsum = 0, wsum = 0;
    for (float x : a.voxel.vec()) vsum += x;
    for (float x : a.weights.vec()) wsum += x;
    mass_err = std::max(mass_err, std::abs(vsum - wsum) / std::max(1e-12, std::abs(wsum)));
  }
  int violations = 0;
  for (int i = 0; i < kTcrGrids; ++i) {
    Parameter<double> k("k", {static_cast<std::size_t>(1 + 2 * (i % 3))}), b("b", {1});
    for (auto& x : k.value.vec()) x = 6.0 * uniform01(rng) - 3.0;
    b.value[0] = 4.0 * uniform01(rng) - 2.0;
    Tensor<double> g({1, static_cast<std::size_t>(uniform_int(rng, 2, 32)), 5, 7});
    for (auto& x : g.vec()) x = 10.0 * uniform01(rng) - 5.0;
    const auto out = channel_gate_forward(g, k, b).output;
    for (std::size_t j = 0; j < g.size(); ++j) violations += std::abs(out[j]) > std::abs(g[j]);
  }
  Verdict v;
  v.pass = mirror_err <= kMirrorTolerance && mass_err <= kMassRelTolerance && violations == 0;
  v.summary = "mirror max |diff| " + fmt("%.2e", mirror_err) + ", mass rel err " + fmt("%.2e", mass_err) + ", " +
              std::to_string(violations) + " shrinkage violations over " + std::to_string(kTcrGrids) + " grids";
  return v;
}

// ---- 6, 7, 8 -------------------------------------------------------------
struct DeskRun {
  std::uint64_t seed = 0;
  TransferRow row;
  double seconds = 0;
};

RunConfig desk_config(std::uint64_t seed) {
  RunConfig cfg;
  cfg.train.lr = kDeskLr;
  cfg.train.epochs = kDeskEpochs;
  cfg.train.seed = seed;
  return cfg;
}

double target_accuracy(const TransferRow& row, const std::string& scene) {
  for (const auto& [s, a] : row.targets)
    if (s == scene) return a;
  return -1;
}

const Dataset& desk_dataset() {
  static const Dataset data = [] {
    DatasetSpec spec;
    spec.seed = kDatasetSeed;
    return prepare_dataset(dataset_from(generate_dataset(spec).streams), RunConfig{});
  }();
  return data;
}

std::vector<DeskRun> desk_runs(const std::vector<std::uint64_t>& seeds, const fs::path& out) {
  std::vector<DeskRun> runs;
  for (auto seed : seeds) {
    const auto t0 = Clock::now();
    DeskRun r;
    r.seed = seed;
    r.row = run_transfer(desk_dataset(), desk_config(seed), {"view45", "lowlight", "view90"}, "synthetic",
                         "seed" + std::to_string(seed));
    r.seconds = seconds_since(t0);
    write_run(*r.row.run, out / ("seed" + std::to_string(seed)));
    std::cerr << "  trained seed " << seed << " in " << fmt("%.0f s", r.seconds) << ", matched "
              << fmt("%.3f", r.row.matched) << std::endl;
    runs.push_back(std::move(r));
  }
  return runs;
}

Verdict matched_training(const std::vector<DeskRun>& runs) {
  Verdict v;
  double total = 0, worst = 1;
  for (const auto& r : runs) {
    const bool ok = r.row.matched >= kMatchedAccuracy && r.seconds <= kRunBudgetSec;
    v.pass = v.pass && ok;
    total += r.seconds;
    worst = std::min(worst, r.row.matched);
    v.details.push_back("seed " + std::to_string(r.seed) + ": test accuracy " + fmt("%.4f", r.row.matched) + " in " +
                        fmt("%.0f s", r.seconds) + " (best epoch " +
                        std::to_string(r.row.run->train.best_epoch) + ")" + (ok ? "" : "  <-- FAIL"));
  }
  v.summary = std::to_string(runs.size()) + " seeds, min accuracy " + fmt("%.4f", worst) + " (>= " +
              fmt("%.2f", kMatchedAccuracy) + "), " + fmt("%.0f s", total) + " total on " +
              std::to_string(std::max(1u, std::thread::hardware_concurrency())) + " core(s)";
  return v;
}

Verdict cross_scene(const std::vector<DeskRun>& runs, const fs::path& out) {
  Verdict v;
  double worst45 = 1, worst_ll = 1;
  std::vector<TransferRow> rows;
  for (const auto& r : runs) {
    const double a45 = target_accuracy(r.row, "view45"), all = target_accuracy(r.row, "lowlight");
    const double a90 = target_accuracy(r.row, "view90");
    const bool ok = a45 >= kCrossAccuracy && all >= kCrossAccuracy;
    v.pass = v.pass && ok;
    worst45 = std::min(worst45, a45);
    worst_ll = std::min(worst_ll, all);
    v.details.push_back("seed " + std::to_string(r.seed) + ": view45 " + fmt("%.4f", a45) + ", lowlight " +
                        fmt("%.4f", all) + ", view90 " + fmt("%.4f", a90) + " (not gated)" + (ok ? "" : "  <-- FAIL"));
    rows.push_back(r.row);
  }
  write_file(out / "transfer.csv", transfer_csv("seed", rows));
  v.summary = "min view45 " + fmt("%.4f", worst45) + ", min lowlight " + fmt("%.4f", worst_ll) + " (>= " +
              fmt("%.2f", kCrossAccuracy) + ")";
  return v;
}

Verdict fewshot(const std::vector<DeskRun>& runs, const fs::path& out) {
  Verdict v;
  int wins = 0;
  std::string curve_csv = "seed,shots,accuracy,eval_samples\n";
  for (const auto& r : runs) {
    std::vector<std::size_t> ks;
    if (r.seed == runs.front().seed)
      for (std::size_t k = 0; k <= kFewshotMaxShots; ++k) ks.push_back(k);
    else
      ks = {0, kFewshotShots};
    const auto curve = fewshot_curve(r.row.run->checkpoint, desk_dataset(), desk_config(r.seed), "view45", ks);
    double acc0 = 0, acc_k = 0;
    std::string points;
    for (const auto& p : curve) {
      if (p.shots == 0) acc0 = p.accuracy;
      if (p.shots == kFewshotShots) acc_k = p.accuracy;
      points += " K=" + std::to_string(p.shots) + ":" + fmt("%.4f", p.accuracy);
      curve_csv += std::to_string(r.seed) + "," + std::to_string(p.shots) + "," + fmt("%.4f", p.accuracy) + "," +
                   std::to_string(p.eval_samples) + "\n";
    }
    const bool won = acc_k > acc0;
    wins += won;
    v.details.push_back("seed " + std::to_string(r.seed) + ":" + points + " on " +
                        std::to_string(curve.front().eval_samples) + " samples" + (won ? "" : "  (no gain)"));
  }
  write_file(out / "fewshot_curve.csv", curve_csv);
  v.pass = wins >= kFewshotRequiredWins;
  v.summary = "K=" + std::to_string(kFewshotShots) + " beats K=0 on view45 in " + std::to_string(wins) + "/" +
              std::to_string(runs.size()) + " seeds (need " + std::to_string(kFewshotRequiredWins) + ")";
  return v;
}

// ---- 9 -------------------------------------------------------------------
Verdict ablation(const fs::path& out) {
  RunConfig cfg = desk_config(0);
  cfg.train.epochs = kAblationEpochs;
  const std::vector<std::string> targets{"view45", "lowlight"};
  const auto rows = ablate(desk_dataset(), cfg, {kAllVariants.begin(), kAllVariants.end()}, targets, "synthetic");
  const std::string csv = transfer_csv("variant", rows);
  write_file(out / "ablation.csv", csv);
  for (const auto& r : rows) write_run(*r.run, out / "ablation" / r.label);

  const auto plain = run_training(desk_dataset(), cfg, "synthetic");
  const bool identical = encode_tensor_file(plain.checkpoint) == encode_tensor_file(rows[0].run->checkpoint) &&
                         plain.metrics.dump() == rows[0].run->metrics.dump();

  bool shape_ok = rows.size() == 4;
  for (const auto& r : rows) shape_ok = shape_ok && r.targets.size() == targets.size();
  const auto& c_log = rows.size() == 4 ? rows[3].run->train.epochs : std::vector<EpochRecord>{};
  const bool c_ok = !c_log.empty() && c_log.front().lambda == 0.0 && c_log.front().train_l_pcr > 0.0;

  Verdict v;
  v.pass = shape_ok && identical && c_ok;
  v.summary = std::to_string(rows.size()) + " variants x " + std::to_string(1 + targets.size()) +
              " test columns, full vs plain run " + (identical ? "bit-identical" : "DIFFERENT") +
              ", variant C logs lambda=0 with l_pcr computed: " + (c_ok ? "yes" : "no");
  std::istringstream lines(csv);
  for (std::string l; std::getline(lines, l);) v.details.push_back(l);
  v.details.push_back("(" + std::to_string(kAblationEpochs) + " epochs per variant)");
  return v;
}

// ---- 10 ------------------------------------------------------------------
int shell(const std::string& cmd) {
  const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict determinism(const fs::path& out) {
  const fs::path dir = out / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cli = NEUROLIP_CLI;
  Verdict v;
  if (shell(cli + " gen --subjects 4 --per-scene 10 --scenes frontal,view45 --seed 9 --out " + (dir / "data").string()) !=
      0) {
    v.pass = false;
    v.summary = "dataset generation failed";
    return v;
  }
  write_file(dir / "cfg.json", R"({"tve": {"bins": 8}, "enhancer": {"channels": 8}, "train": {"epochs": 2, "lr": 0.001}})");
  const std::string base = cli + " train --manifest " + (dir / "data" / "manifest.jsonl").string() + " --config " +
                           (dir / "cfg.json").string() + " --seed 7";
  const std::vector<std::pair<std::string, std::string>> invocations = {
      {"matched", ""}, {"fewshot", " --protocol fewshot --target-scene view45 --shots 2"}};
  int compared = 0, differing = 0;
  for (const auto& [name, extra] : invocations) {
    for (const char* rep : {"a", "b"})
      if (shell(base + extra + " --out " + (dir / (name + "_" + rep)).string()) != 0) {
        v.pass = false;
        v.details.push_back(name + " run " + rep + " failed");
      }
    for (const char* f : {"checkpoint.nlt", "metrics.json", "train_log.jsonl", "config.json"}) {
      const auto a = slurp(dir / (name + "_a") / f), b = slurp(dir / (name + "_b") / f);
      ++compared;
      const bool same = !a.empty() && a == b;
      differing += !same;
      v.details.push_back(name + "/" + f + ": " + std::to_string(a.size()) + " bytes, " +
                          (same ? "identical" : "DIFFERENT"));
    }
  }
  v.pass = v.pass && differing == 0;
  v.summary = std::to_string(compared) + " output files compared across repeated CLI runs, " +
              std::to_string(differing) + " differ";
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  std::string criteria = "1,2,3,4,5,6,7,8,9,10";
  std::string out = "acceptance_out";
  app.add_option("--criteria", criteria, "Comma-separated criterion ids");
  app.add_option("--out", out, "Directory for tables and run outputs");
  CLI11_PARSE(app, argc, argv);

  std::set<int> want;
  {
    std::stringstream ss(criteria);
    for (std::string t; std::getline(ss, t, ',');)
      if (!t.empty()) want.insert(std::stoi(t));
  }
  const fs::path dir = out;
  fs::create_directories(dir);
  bool all = true;
  auto note = [&](int id, const std::string& title, const Verdict& v) {
    report(id, title, v);
    all = all && v.pass;
  };

  if (want.count(1)) note(1, "denoiser oracle equivalence", denoiser_equivalence());
  if (want.count(2)) note(2, "gradient suite", gradient_suite_check());
  if (want.count(3)) note(3, "oracle voxelization equivalence", oracle_voxelization());
  if (want.count(4)) note(4, "PCR loss properties", pcr_properties());
  if (want.count(5)) note(5, "encoder invariants", encoder_invariants());

  if (want.count(6) || want.count(7) || want.count(8)) {
    std::vector<std::uint64_t> seeds(kMatchedSeeds.begin(), kMatchedSeeds.end());
    if (want.count(8))
      for (auto s : kFewshotSeeds)
        if (std::find(seeds.begin(), seeds.end(), s) == seeds.end()) seeds.push_back(s);
    const auto runs = desk_runs(seeds, dir / "desk");
    std::vector<DeskRun> matched;
    for (const auto& r : runs)
      if (std::find(kMatchedSeeds.begin(), kMatchedSeeds.end(), r.seed) != kMatchedSeeds.end()) matched.push_back(r);
    if (want.count(6)) note(6, "desk-scale matched-scene training", matched_training(matched));
    if (want.count(7)) note(7, "cross-scene proxy", cross_scene(matched, dir));
    if (want.count(8)) note(8, "few-shot proxy", fewshot(runs, dir));
  }
  if (want.count(9)) note(9, "ablation harness", ablation(dir));
  if (want.count(10)) note(10, "determinism", determinism(dir));
  return all ? 0 : 1;
}
