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

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "unitcorr/mat.hpp"
#include "unitcorr/phonemap.hpp"
#include "unitcorr/rng.hpp"
#include "unitcorr/seqcore.hpp"

namespace unitcorr::corpus {

// Synthetic language definition: a phone inventory, a word list over it, and
// a rendering model. Cluster ids partition [0, vocab_size) across phones;
// each frame of a phone segment draws a cluster from that phone's emission
// distribution and a feature vector from the cluster's Gaussian.
struct LexiconSpec {
  std::vector<std::string> phones;
  std::vector<uint8_t> vowel;                      // aligned to phones
  std::vector<std::vector<int32_t>> words;         // each word: phone ids
  std::vector<std::vector<int32_t>> emission_ids;  // per phone: owned cluster ids
  std::vector<std::vector<double>> emission_probs; // per phone: categorical over emission_ids
  int32_t vocab_size = 0;
  int32_t duration_min = 2;  // frames per phone segment
  int32_t duration_max = 6;
  int32_t feature_dim = 8;
  double centroid_spread = 10.0;
  double noise_sigma = 1.0;

  void validate() const;
  int32_t phone_id(const std::string& sym) const;  // -1 when absent
  int32_t phone_of_cluster(int32_t cluster) const;
};

struct LexiconGenParams {
  int32_t n_phones = 40;
  int32_t vocab_size = 500;
  int32_t n_words = 120;
  int32_t word_len_min = 2;
  int32_t word_len_max = 5;
  int32_t duration_min = 2;
  int32_t duration_max = 6;
  int32_t feature_dim = 8;
  double centroid_spread = 10.0;
  double noise_sigma = 1.0;
  // Extra clusters (when vocab_size is not a multiple of n_phones) go to
  // vowels first, giving them within-phone cluster variability.
  bool extra_clusters_to_vowels = true;
  // Partition the inventory into words with disjoint phone sets. Any single
  // neighbor then identifies a word position, which gives the language
  // deterministic local phonotactics. n_words / word lengths are derived
  // from the partition; word_len_min/max still bound the chunk sizes.
  bool disjoint_words = false;
  // With disjoint_words: build words as consonant-vowel alternations that
  // start and end on consonants, so vowels are never adjacent anywhere in a
  // rendered utterance. Leftover consonants form consonant-only words.
  bool cv_words = false;
};

// Deterministic lexicon builder over the 40-symbol ARPABET+SIL inventory
// (or its first n_phones symbols). Every phone is used by at least one word.
LexiconSpec generate_lexicon(const LexiconGenParams& params, uint64_t seed);

// Accent model: phone substitutions applied per phone instance.
struct ShiftSpec {
  std::map<std::string, std::string> substitutions;
  double apply_prob = 1.0;
};

// One rendered utterance with every generation layer retained.
struct Utterance {
  std::string utt_id;
  std::vector<int32_t> phone_seq;        // standard pronunciation, one per segment
  std::vector<int32_t> realized_phones;  // per segment, after any accent shift
  std::vector<int32_t> durations;        // frames per segment
  std::vector<int32_t> frame_phones;     // realized phone per frame
  std::vector<int32_t> clusters;         // realized cluster per frame
  std::vector<int32_t> standard_clusters;  // ground-truth standard rendering
  Mat<float> features;                   // frames x feature_dim

  size_t frames() const { return clusters.size(); }
};

struct Dataset {
  LexiconSpec spec;
  std::string accent_tag;  // "standard" or "shifted"
  Mat<double> centroids;   // vocab_size x feature_dim cluster centers
  std::vector<Utterance> utts;
};

// Renders n_utts standard-accent utterances. Per-utterance randomness is a
// child stream of (seed, utterance index), so parallel generation reproduces
// the serial output bit for bit.
Dataset generate_standard(const LexiconSpec& spec, size_t n_utts, int32_t words_min,
                          int32_t words_max, uint64_t seed, const std::string& id_prefix = "utt");

// Re-renders substituted phone segments with the target phone's emissions
// and features. Durations and frame counts are untouched; the ground-truth
// standard clusters and reference phones stay with each utterance. Identity
// substitutions are no-ops.
Dataset apply_accent_shift(const Dataset& input, const ShiftSpec& shift, uint64_t seed);

// ---- on-disk layout ----
// <dir>/manifest.jsonl        one JSON object per utterance
// <dir>/features/<utt>.acft   binary frame features
// <dir>/clusters.txt          realized cluster lines (seqcore text format)
// <dir>/standard_clusters.txt ground-truth standard cluster lines
// <dir>/frame_phones.txt      realized phone symbol per frame
// <dir>/ref_phones.txt        standard pronunciation phone string
// <dir>/lexicon.json          spec + cluster centers

void write_dataset(const Dataset& ds, const std::string& dir);
Dataset read_dataset(const std::string& dir);

// Checks the cross-file frame-count agreement promised by the manifest.
void validate_dataset_dir(const std::string& dir);

void write_features_file(const std::string& path, const Mat<float>& feats);
Mat<float> read_features_file(const std::string& path);

// Frame-phone and reference-phone views used by the pipeline.
std::vector<ClusterSequence> cluster_sequences(const Dataset& ds);
std::vector<ClusterSequence> standard_cluster_sequences(const Dataset& ds);
std::vector<PhoneSeq> frame_phone_lines(const Dataset& ds);
std::vector<PhoneSeq> ref_phone_lines(const Dataset& ds);

}  // namespace unitcorr::corpus
