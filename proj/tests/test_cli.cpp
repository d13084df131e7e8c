/* unitcorr - accent correction for discrete acoustic units.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "test_util.hpp"
#include "unitcorr/config.hpp"

using namespace unitcorr;
namespace fs = std::filesystem;

namespace {

fs::path work_dir() {
  auto dir = fs::temp_directory_path() / "unitcorr_test" / "cli";
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args, const std::string& log_name = "out.txt") {
  auto log = work_dir() / log_name;
  std::string cmd = std::string(UNITCORR_CLI_BIN) + " " + args + " > " + log.string() + " 2>&1";
  int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string last_output(const std::string& log_name = "out.txt") {
  return testutil::read_file((work_dir() / log_name).string());
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  os << text;
}

}  // namespace

TEST_CASE("defaults follow the reference pipeline settings") {
  auto cfg = config::PipelineConfig::from_json_text("");
  CHECK(cfg.quantizer.v == 500);
  CHECK(cfg.mlm.policy.span_len == 10);
  CHECK(cfg.mlm.policy.p_mask == 0.2);
  CHECK(cfg.mlm.policy.replace_mask == 0.8);
  CHECK(cfg.corrector.k == 10);
  CHECK(cfg.corrector.p_mask == 0.2);
  CHECK(cfg.adapt.bottleneck == 1024);
  CHECK(cfg.adapt.lr.peak_lr == 1.5e-3);
  CHECK(cfg.adapt.lr.warmup_steps == 5000);
  CHECK(cfg.adapt.steps == 30000);
  CHECK(cfg.mlm.encoder.layers == 6);
}

TEST_CASE("validation errors carry the field path") {
  CHECK_THROWS_WITH_AS(config::PipelineConfig::from_json_text(R"({"corrector":{"K":0}})"),
                       doctest::Contains("corrector.K"), ConfigError);
  CHECK_THROWS_WITH_AS(config::PipelineConfig::from_json_text(R"({"corrector":{"bogus":1}})"),
                       doctest::Contains("corrector.bogus"), ConfigError);
  CHECK_THROWS_WITH_AS(config::PipelineConfig::from_json_text(R"({"nope":{}})"),
                       doctest::Contains("nope"), ConfigError);
  CHECK_THROWS_AS(config::PipelineConfig::from_json_text("{nonsense"), ConfigError);
}

TEST_CASE("canonical serialization round-trips") {
  std::string text = R"({"seed": 7, "corrector": {"K": 4, "p_mask": 0.3, "fill": "fill-all"},
                         "corpus": {"V": 50, "disjoint_words": true}})";
  auto cfg = config::PipelineConfig::from_json_text(text);
  std::string canon = cfg.canonical_json();
  auto back = config::PipelineConfig::from_json_text(canon);
  CHECK(back.canonical_json() == canon);
  CHECK(back.corrector.k == 4);
  CHECK(back.corrector.variant.fill == corrector::FillMode::FillAll);
}

TEST_CASE("version flag prints toolkit and format versions") {
  CHECK(run_cli("--version") == 0);
  CHECK(last_output().find("unitcorr") != std::string::npos);
  CHECK(last_output().find("ACFT") != std::string::npos);
}

TEST_CASE("usage errors exit with code 1") {
  CHECK(run_cli("no-such-command") == 1);
  CHECK(run_cli("correct") == 1);  // missing required options
  auto bad_cfg = work_dir() / "bad.json";
  write_file(bad_cfg, R"({"corrector":{"K":0}})");
  CHECK(run_cli("--config " + bad_cfg.string() + " gen-corpus --out " +
                (work_dir() / "x").string()) == 1);
}

TEST_CASE("data errors exit with code 2") {
  CHECK(run_cli("score --scorer /nonexistent.json --clusters /nonexistent.txt --out " +
                (work_dir() / "y.txt").string()) == 2);
}

TEST_CASE("pipeline commands run end to end") {
  auto dir = work_dir();
  auto cfg_path = dir / "cfg.json";
  write_file(cfg_path, R"({
    "seed": 5,
    "corpus": {"n_phones": 12, "V": 15, "word_len_min": 3, "word_len_max": 4,
               "duration_min": 1, "duration_max": 1, "feature_dim": 4,
               "disjoint_words": true, "cv_words": true,
               "n_standard": 60, "n_accent": 20, "words_min": 4, "words_max": 8,
               "shift": {"substitutions": {"AA": "AE"}, "apply_prob": 0.5}},
    "quantizer": {"V": 15, "max_iters": 50, "tol": 1e-6},
    "mlm": {"count_smoothing": 0.01},
    "corrector": {"K": 4, "p_mask": 0.2}
  })");
  std::string base = "--config " + cfg_path.string() + " ";
  auto corpus = dir / "corpus";

  REQUIRE(run_cli(base + "gen-corpus --out " + corpus.string()) == 0);
  REQUIRE(run_cli(base + "kmeans-fit --data " + (corpus / "standard").string() + " --out " +
                  (dir / "book.kmcb").string()) == 0);
  REQUIRE(run_cli(base + "kmeans-assign --data " + (corpus / "standard").string() +
                  " --codebook " + (dir / "book.kmcb").string() + " --out " +
                  (dir / "assigned.txt").string()) == 0);
  REQUIRE(run_cli(base + "mlm-train --kind count --clusters " +
                  (corpus / "standard" / "clusters.txt").string() + " --v 15 --out " +
                  (dir / "count.json").string()) == 0);
  REQUIRE(run_cli(base + "phonemap-learn --clusters " +
                  (corpus / "standard" / "clusters.txt").string() + " --frame-phones " +
                  (corpus / "standard" / "frame_phones.txt").string() + " --v 15 --out " +
                  (dir / "map.json").string()) == 0);
  REQUIRE(run_cli(base + "score --scorer " + (dir / "count.json").string() + " --clusters " +
                  (corpus / "shifted" / "clusters.txt").string() + " --v 15 --out " +
                  (dir / "conf.txt").string()) == 0);
  REQUIRE(run_cli(base + "correct --scorer " + (dir / "count.json").string() + " --clusters " +
                  (corpus / "shifted" / "clusters.txt").string() + " --v 15 --out " +
                  (dir / "corrected.txt").string() + " --trace " + (dir / "trace.jsonl").string()) ==
          0);

  // corrected output has the same line count as its input
  auto count_lines = [](const std::string& path) {
    std::istringstream ss(testutil::read_file(path));
    std::string line;
    size_t n = 0;
    while (std::getline(ss, line))
      if (!line.empty()) ++n;
    return n;
  };
  CHECK(count_lines((corpus / "shifted" / "clusters.txt").string()) ==
        count_lines((dir / "corrected.txt").string()));

  REQUIRE(run_cli(base + "eval-per --hyp-clusters " + (dir / "corrected.txt").string() +
                  " --phone-map " + (dir / "map.json").string() + " --v 15 --ref " +
                  (corpus / "shifted" / "ref_phones.txt").string() + " --out " +
                  (dir / "per.csv").string()) == 0);
  CHECK(testutil::read_file((dir / "per.csv").string()).find("ALL,") != std::string::npos);

  // identical hyp and ref give a corpus error rate of exactly zero
  REQUIRE(run_cli(base + "eval-per --hyp " + (corpus / "shifted" / "ref_phones.txt").string() +
                  " --ref " + (corpus / "shifted" / "ref_phones.txt").string()) == 0);
  CHECK(last_output().find("corpus PER 0.00") != std::string::npos);
}

TEST_CASE("rerunning a command with the same config is byte-identical") {
  auto dir = work_dir();
  auto cfg_path = dir / "cfg_det.json";
  write_file(cfg_path, R"({
    "seed": 11,
    "corpus": {"n_phones": 8, "V": 10, "duration_min": 1, "duration_max": 2,
               "feature_dim": 3, "disjoint_words": true,
               "n_standard": 10, "n_accent": 5,
               "shift": {"substitutions": {"AA": "AE"}, "apply_prob": 0.5}}
  })");
  std::string base = "--config " + cfg_path.string() + " ";
  REQUIRE(run_cli(base + "gen-corpus --out " + (dir / "det_a").string()) == 0);
  REQUIRE(run_cli(base + "gen-corpus --out " + (dir / "det_b").string()) == 0);
  for (const char* rel : {"standard/clusters.txt", "standard/manifest.jsonl",
                          "shifted/clusters.txt", "shifted/standard_clusters.txt"}) {
    CHECK(testutil::read_file((dir / "det_a" / rel).string()) ==
          testutil::read_file((dir / "det_b" / rel).string()));
  }
}
