#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>

#include "neurolip/config.hpp"
#include "neurolip/error.hpp"
#include "support.hpp"

using namespace neurolip;

namespace {

std::string shell_output(const std::string& cmd) {
  std::string out;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return out;
  char buf[256];
  while (fgets(buf, sizeof buf, pipe)) out += buf;
  pclose(pipe);
  while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
  return out;
}

}  // namespace

TEST(RunConfig, DefaultsRoundTrip) {
  const RunConfig cfg;
  const auto j = to_json(cfg);
  EXPECT_EQ(to_json(run_config_from_json(j)), j);
  EXPECT_EQ(j["tve"]["bins"], 16);
  EXPECT_EQ(j["enhancer"]["channels"], 16);
  EXPECT_EQ(j["pcr"]["lambda"], 0.05);
  EXPECT_EQ(j["train"]["epochs"], 30);
  EXPECT_EQ(j["train"]["batch"], 8);
}

TEST(RunConfig, EditedValuesRoundTrip) {
  RunConfig cfg;
  cfg.model.tve.lta = LtaMode::Oracle;
  cfg.model.enhancer.mode = EnhancerMode::Average;
  cfg.model.pcr.lambda = 0.15;
  cfg.train.seed = 42;
  cfg.split.protocol = Protocol::Fewshot;
  cfg.split.target_scene = "view45";
  cfg.split.shots = 3;
  const auto back = run_config_from_json(to_json(cfg));
  EXPECT_EQ(config_text(back), config_text(cfg));
  EXPECT_EQ(back.model.tve.lta, LtaMode::Oracle);
  EXPECT_EQ(back.split.shots, 3u);
}

TEST(RunConfig, PartialDocumentKeepsDefaults) {
  const auto cfg = run_config_from_json(nlohmann::json::parse(R"({"train": {"epochs": 3}})"));
  EXPECT_EQ(cfg.train.epochs, 3);
  EXPECT_EQ(cfg.train.batch, 8u);
}

TEST(RunConfig, RejectsUnknownKeysAndBadTypes) {
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"trian": {}})")), ConfigError);
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"train": {"epoch": 3}})")), ConfigError);
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"train": {"epochs": "3"}})")), ConfigError);
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"tve": {"bins": -2}})")), ConfigError);
}

TEST(GitHash, MatchesGitHashObject) {
  const auto dir = oracle::scratch_dir("git_hash");
  const auto path = dir / "blob.txt";
  const std::string text = config_text(RunConfig{});
  std::ofstream(path, std::ios::binary) << text;
  const std::string expected = shell_output("git hash-object " + path.string() + " 2>/dev/null");
  if (expected.empty()) GTEST_SKIP() << "git not available";
  EXPECT_EQ(git_blob_sha1(text), expected);
  EXPECT_EQ(git_blob_sha1_file(path), expected);
  EXPECT_EQ(git_blob_sha1(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
}
