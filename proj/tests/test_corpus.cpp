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

#include <cmath>
#include <filesystem>

#include "test_util.hpp"
#include "unitcorr/corpus.hpp"

using namespace unitcorr;
using namespace unitcorr::corpus;

namespace {

// Two phones, one word "A B", deterministic emissions, fixed durations.
LexiconSpec tiny_spec(int32_t duration) {
  LexiconSpec spec;
  spec.phones = {"A", "B"};
  spec.vowel = {1, 0};
  spec.words = {{0, 1}};
  spec.emission_ids = {{0}, {1}};
  spec.emission_probs = {{1.0}, {1.0}};
  spec.vocab_size = 2;
  spec.duration_min = duration;
  spec.duration_max = duration;
  spec.feature_dim = 3;
  spec.centroid_spread = 10.0;
  spec.noise_sigma = 0.5;
  return spec;
}

std::filesystem::path temp_dir(const char* name) {
  auto dir = std::filesystem::temp_directory_path() / "unitcorr_test" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("degenerate deterministic spec renders A A B B") {
  Dataset ds = generate_standard(tiny_spec(2), 3, 1, 1, 99);
  REQUIRE(ds.utts.size() == 3);
  for (const Utterance& u : ds.utts) {
    CHECK(u.clusters == std::vector<int32_t>{0, 0, 1, 1});
    CHECK(u.frame_phones == std::vector<int32_t>{0, 0, 1, 1});
    CHECK(u.phone_seq == std::vector<int32_t>{0, 1});
    CHECK(u.features.rows == 4);
  }
}

TEST_CASE("generation is deterministic under a fixed seed") {
  LexiconGenParams params;
  params.n_phones = 10;
  params.vocab_size = 14;
  params.n_words = 12;
  LexiconSpec spec = generate_lexicon(params, 5);
  Dataset a = generate_standard(spec, 20, 2, 5, 123);
  Dataset b = generate_standard(spec, 20, 2, 5, 123);
  REQUIRE(a.utts.size() == b.utts.size());
  CHECK(a.centroids.data == b.centroids.data);
  for (size_t i = 0; i < a.utts.size(); ++i) {
    CHECK(a.utts[i].clusters == b.utts[i].clusters);
    CHECK(a.utts[i].features.data == b.utts[i].features.data);
  }
}

TEST_CASE("uniform two-cluster emissions stay within the binomial bound") {
  LexiconSpec spec = tiny_spec(2);
  spec.vocab_size = 3;
  spec.emission_ids = {{0, 1}, {2}};  // phone A owns two clusters, uniform
  spec.emission_probs = {{0.5, 0.5}, {1.0}};
  Dataset ds = generate_standard(spec, 4500, 1, 2, 17);
  int64_t a_frames = 0, zero_frames = 0;
  for (const Utterance& u : ds.utts)
    for (size_t i = 0; i < u.clusters.size(); ++i)
      if (u.frame_phones[i] == 0) {
        ++a_frames;
        if (u.clusters[i] == 0) ++zero_frames;
      }
  REQUIRE(a_frames > 10000);
  // binomial oracle: |p_hat - 0.5| within 3 sigma, sigma = sqrt(0.25/n)
  double p_hat = static_cast<double>(zero_frames) / static_cast<double>(a_frames);
  double sigma = std::sqrt(0.25 / static_cast<double>(a_frames));
  CHECK(std::abs(p_hat - 0.5) < 3.0 * sigma);
}

TEST_CASE("identity substitutions do not touch the rendering") {
  Dataset ds = generate_standard(tiny_spec(3), 10, 1, 3, 7);
  ShiftSpec shift;
  shift.substitutions = {{"A", "A"}};
  shift.apply_prob = 1.0;
  Dataset out = apply_accent_shift(ds, shift, 55);
  for (size_t i = 0; i < ds.utts.size(); ++i) {
    CHECK(out.utts[i].clusters == ds.utts[i].clusters);
    CHECK(out.utts[i].features.data == ds.utts[i].features.data);
  }
}

TEST_CASE("forced substitution re-renders every target segment") {
  Dataset ds = generate_standard(tiny_spec(2), 5, 1, 1, 3);
  ShiftSpec shift;
  shift.substitutions = {{"A", "B"}};
  shift.apply_prob = 1.0;
  Dataset out = apply_accent_shift(ds, shift, 4);
  for (const Utterance& u : out.utts) {
    CHECK(u.frame_phones == std::vector<int32_t>{1, 1, 1, 1});
    CHECK(u.clusters == std::vector<int32_t>{1, 1, 1, 1});
    // ground truth and reference stay standard
    CHECK(u.standard_clusters == std::vector<int32_t>{0, 0, 1, 1});
    CHECK(u.phone_seq == std::vector<int32_t>{0, 1});
  }
}

TEST_CASE("apply_prob=0.5 hits half the instances within 3 sigma") {
  Dataset ds = generate_standard(tiny_spec(1), 6000, 2, 4, 31);
  ShiftSpec shift;
  shift.substitutions = {{"A", "B"}};
  shift.apply_prob = 0.5;
  Dataset out = apply_accent_shift(ds, shift, 77);
  int64_t instances = 0, hit = 0;
  for (size_t i = 0; i < out.utts.size(); ++i) {
    for (size_t s = 0; s < out.utts[i].realized_phones.size(); ++s) {
      if (ds.utts[i].phone_seq[s] != 0) continue;
      ++instances;
      if (out.utts[i].realized_phones[s] == 1) ++hit;
    }
  }
  REQUIRE(instances > 10000);
  double p_hat = static_cast<double>(hit) / static_cast<double>(instances);
  double sigma = std::sqrt(0.25 / static_cast<double>(instances));
  CHECK(std::abs(p_hat - 0.5) < 3.0 * sigma);
}

TEST_CASE("shift preserves frame counts") {
  LexiconGenParams params;
  params.n_phones = 12;
  params.vocab_size = 16;
  LexiconSpec spec = generate_lexicon(params, 21);
  Dataset ds = generate_standard(spec, 50, 2, 6, 13);
  ShiftSpec shift;
  shift.substitutions = {{spec.phones[0], spec.phones[1]}, {spec.phones[3], spec.phones[2]}};
  shift.apply_prob = 0.7;
  Dataset out = apply_accent_shift(ds, shift, 5);
  for (size_t i = 0; i < ds.utts.size(); ++i) {
    CHECK(out.utts[i].frames() == ds.utts[i].frames());
    CHECK(out.utts[i].features.rows == ds.utts[i].features.rows);
    CHECK(out.utts[i].durations == ds.utts[i].durations);
  }
}

TEST_CASE("frame counts agree across every layer") {
  LexiconGenParams params;
  params.n_phones = 8;
  params.vocab_size = 10;
  LexiconSpec spec = generate_lexicon(params, 2);
  Dataset ds = generate_standard(spec, 30, 1, 4, 9);
  for (const Utterance& u : ds.utts) {
    size_t total = 0;
    for (int32_t d : u.durations) total += static_cast<size_t>(d);
    CHECK(u.clusters.size() == total);
    CHECK(u.frame_phones.size() == total);
    CHECK(u.standard_clusters.size() == total);
    CHECK(u.features.rows == total);
  }
}

TEST_CASE("dataset directory round-trips and validates") {
  LexiconGenParams params;
  params.n_phones = 6;
  params.vocab_size = 8;
  LexiconSpec spec = generate_lexicon(params, 4);
  Dataset ds = generate_standard(spec, 12, 1, 3, 42);
  auto dir = temp_dir("roundtrip");
  write_dataset(ds, dir.string());
  validate_dataset_dir(dir.string());
  Dataset back = read_dataset(dir.string());
  REQUIRE(back.utts.size() == ds.utts.size());
  for (size_t i = 0; i < ds.utts.size(); ++i) {
    CHECK(back.utts[i].utt_id == ds.utts[i].utt_id);
    CHECK(back.utts[i].clusters == ds.utts[i].clusters);
    CHECK(back.utts[i].standard_clusters == ds.utts[i].standard_clusters);
    CHECK(back.utts[i].frame_phones == ds.utts[i].frame_phones);
    CHECK(back.utts[i].phone_seq == ds.utts[i].phone_seq);
    CHECK(back.utts[i].features.data == ds.utts[i].features.data);
  }
  CHECK(back.centroids.data == ds.centroids.data);
}

TEST_CASE("feature files carry the declared magic and layout") {
  Mat<float> feats(2, 3);
  for (size_t i = 0; i < feats.data.size(); ++i) feats.data[i] = static_cast<float>(i);
  auto dir = temp_dir("acft");
  std::string path = (dir / "x.acft").string();
  write_features_file(path, feats);
  std::string bytes = testutil::read_file(path);
  REQUIRE(bytes.size() == 4 + 4 + 8 + 4 + 6 * 4);
  CHECK(bytes.substr(0, 4) == "ACFT");
  Mat<float> back = read_features_file(path);
  CHECK(back.rows == 2);
  CHECK(back.cols == 3);
  CHECK(back.data == feats.data);
}

TEST_CASE("disjoint cv lexicon partitions the inventory without vowel contact") {
  LexiconGenParams params;
  params.n_phones = 40;
  params.vocab_size = 50;
  params.disjoint_words = true;
  params.cv_words = true;
  params.word_len_min = 3;
  params.word_len_max = 5;
  LexiconSpec spec = generate_lexicon(params, 1234);

  std::vector<int> seen(40, 0);
  for (const auto& word : spec.words) {
    REQUIRE(!word.empty());
    CHECK(!spec.vowel[static_cast<size_t>(word.front())]);
    CHECK(!spec.vowel[static_cast<size_t>(word.back())]);
    for (size_t i = 0; i < word.size(); ++i) {
      ++seen[static_cast<size_t>(word[i])];
      if (i > 0)
        CHECK(!(spec.vowel[static_cast<size_t>(word[i])] &&
                spec.vowel[static_cast<size_t>(word[i - 1])]));
    }
  }
  for (int s : seen) CHECK(s == 1);  // every phone in exactly one word, once
}

TEST_CASE("invalid specs are rejected") {
  LexiconSpec spec = tiny_spec(2);
  spec.words.clear();
  CHECK_THROWS_AS(spec.validate(), ContractError);
  spec = tiny_spec(2);
  spec.duration_min = 0;
  CHECK_THROWS_AS(spec.validate(), ContractError);
  spec = tiny_spec(2);
  spec.emission_ids = {{0}, {0}};  // cluster owned twice
  CHECK_THROWS_AS(spec.validate(), ContractError);
  CHECK_THROWS_AS(generate_standard(tiny_spec(2), 3, 2, 1, 0), ContractError);
  ShiftSpec bad;
  bad.substitutions = {{"A", "Q"}};
  Dataset ds = generate_standard(tiny_spec(2), 1, 1, 1, 0);
  CHECK_THROWS_AS(apply_accent_shift(ds, bad, 0), ContractError);
}
