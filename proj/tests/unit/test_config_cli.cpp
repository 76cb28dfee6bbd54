/*
 * Copyright 2026 The AuxSeg Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <algorithm>

#include <gtest/gtest.h>

#include "auxseg/archive.hpp"
#include "auxseg/cli.hpp"
#include "auxseg/config.hpp"
#include "auxseg/errors.hpp"
#include "test_support.hpp"

namespace auxseg {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string config_error_message(const json& j) {
  try {
    run_config_from_json(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

TEST(Config, EmptyObjectGivesDefaults) {
  const RunConfig c = run_config_from_json(json::object());
  const RunConfig d;
  EXPECT_EQ(c.stages, d.stages);
  EXPECT_EQ(c.crop, d.crop);
  EXPECT_EQ(c.model.stride, d.model.stride);
  EXPECT_EQ(c.affinity, AffinityMode::kCrossTask);
  EXPECT_EQ(to_json(c), to_json(d));
}

TEST(Config, JsonRoundTrip) {
  RunConfig c = make_run_config(json::object(), {"stages=2", "pgt.theta_fg=0.45", "affinity=\"seg\""});
  EXPECT_EQ(c.stages, 2);
  EXPECT_FLOAT_EQ(c.pgt.thresholds.foreground, 0.45f);
  const RunConfig back = run_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
}

TEST(Config, CropNotDivisibleByStrideIsRejected) {
  const std::string msg = config_error_message({{"crop", 321}, {"model", {{"stride", 8}}}});
  EXPECT_NE(msg.find("crop"), std::string::npos) << msg;
}

TEST(Config, NegativeLossWeightIsRejected) {
  const std::string msg = config_error_message({{"loss", {{"lambda_sal", -1}}}});
  EXPECT_NE(msg.find("sal"), std::string::npos) << msg;
}

TEST(Config, AllProblemsAreListedTogether) {
  const std::string msg = config_error_message(
      {{"bogus_key", 1}, {"stages", "three"}, {"optim", {{"momentum", 2.0}}}});
  EXPECT_NE(msg.find("bogus_key"), std::string::npos) << msg;
  EXPECT_NE(msg.find("stages"), std::string::npos) << msg;
  EXPECT_NE(msg.find("momentum"), std::string::npos) << msg;
}

TEST(Config, UnknownAffinityMode) {
  EXPECT_NE(config_error_message({{"affinity", "sideways"}}).find("affinity"), std::string::npos);
}

TEST(Config, OverrideParsing) {
  json j = json::object();
  apply_override(j, "a.b.c=3");
  apply_override(j, "name=hello");
  apply_override(j, "flag=true");
  EXPECT_EQ(j["a"]["b"]["c"], 3);
  EXPECT_EQ(j["name"], "hello");
  EXPECT_EQ(j["flag"], true);
  EXPECT_THROW(apply_override(j, "noequals"), ConfigError);
  EXPECT_THROW(apply_override(j, "a..b=1"), ConfigError);
  EXPECT_THROW(apply_override(j, "name.x=1"), ConfigError);
}

TEST(Config, MissingFileIsConfigError) {
  EXPECT_THROW(load_run_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, ShippedPresetsLoad) {
  const RunConfig c = load_run_config(fs::path(AUXSEG_SOURCE_DIR) / "configs" / "desk.json");
  EXPECT_EQ(c.model.stride, 4);
  EXPECT_EQ(c.crop % c.model.stride, 0);
}

class CliHelp : public ::testing::TestWithParam<std::string> {};

TEST_P(CliHelp, ExitsZero) {
  std::vector<std::string> args;
  if (!GetParam().empty()) args.push_back(GetParam());
  args.push_back("--help");
  ::testing::internal::CaptureStdout();
  const int code = cli::dispatch(args);
  const std::string out = ::testing::internal::GetCapturedStdout();
  EXPECT_EQ(code, cli::kExitOk);
  EXPECT_FALSE(out.empty());
}

INSTANTIATE_TEST_SUITE_P(Commands, CliHelp,
                         ::testing::Values("", "synth-data", "train", "refine-cam", "gen-pgt", "eval",
                                           "infer", "plot-metrics"),
                         [](const auto& info) {
                           std::string n = info.param.empty() ? "top" : info.param;
                           std::replace(n.begin(), n.end(), '-', '_');
                           return n;
                         });

TEST(Cli, UnknownFlagIsValidationError) {
  ::testing::internal::CaptureStderr();
  const int code = cli::dispatch({"eval", "--bogus-flag"});
  ::testing::internal::GetCapturedStderr();
  EXPECT_EQ(code, cli::kExitValidation);
}

TEST(Cli, MissingSubcommandIsValidationError) {
  ::testing::internal::CaptureStderr();
  EXPECT_EQ(cli::dispatch({}), cli::kExitValidation);
  ::testing::internal::GetCapturedStderr();
}

TEST(Cli, MissingInputDirectoryNamesThePath) {
  testing::TempDir dir;
  const std::string cams = (dir / "no_such_cams").string();
  ::testing::internal::CaptureStderr();
  const int code = cli::dispatch({"gen-pgt", "--cams", cams, "--data", (dir / "no_data").string(), "--out",
                                  (dir / "out").string()});
  const std::string err = ::testing::internal::GetCapturedStderr();
  EXPECT_EQ(code, cli::kExitValidation);
  EXPECT_NE(err.find("no_such_cams"), std::string::npos) << err;
}

TEST(Cli, BadConfigIsValidationError) {
  testing::TempDir dir;
  write_file_atomic(dir / "bad.json", R"({"crop": 321, "model": {"stride": 8}})");
  ::testing::internal::CaptureStderr();
  const int code = cli::dispatch({"train", "--config", (dir / "bad.json").string(), "--run-dir",
                                  (dir / "run").string()});
  const std::string err = ::testing::internal::GetCapturedStderr();
  EXPECT_EQ(code, cli::kExitValidation);
  EXPECT_NE(err.find("crop"), std::string::npos) << err;
}

TEST(Cli, SynthDataWritesDataset) {
  testing::TempDir dir;
  ::testing::internal::CaptureStderr();
  const int code = cli::dispatch({"synth-data", "--out", (dir / "d").string(), "--num-images", "3",
                                  "--image-size", "32", "--seed", "5"});
  ::testing::internal::GetCapturedStderr();
  ASSERT_EQ(code, cli::kExitOk);
  EXPECT_TRUE(fs::exists(dir / "d" / "labels" / "labels.json"));
  int pngs = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "d")) pngs += e.path().extension() == ".png";
  EXPECT_EQ(pngs, 9);  // image, gt and saliency per sample
}

}  // namespace
}  // namespace auxseg
