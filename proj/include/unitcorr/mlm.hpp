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

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "unitcorr/mat.hpp"
#include "unitcorr/neural.hpp"
#include "unitcorr/rng.hpp"
#include "unitcorr/seqcore.hpp"

namespace unitcorr::mlm {

// BERT-style corruption policy over whole spans.
struct SpanMaskPolicy {
  int32_t span_len = 10;
  double p_mask = 0.2;
  double replace_mask = 0.8;
  double replace_random = 0.1;
  double replace_keep = 0.1;

  void validate() const;
};

struct SpanMaskResult {
  std::vector<int32_t> corrupted;
  std::vector<size_t> positions;  // every selected position, ascending
  size_t target = 0;              // floor(p_mask * T)

  bool target_met() const { return positions.size() >= target; }
};

// Selects starts uniformly among the placements that do not overlap an
// already chosen span (spans truncate at the sequence end), until at least
// floor(p_mask*T) positions are covered or no placement is left. Each
// selected position is then independently masked / randomised / kept.
SpanMaskResult apply_span_mask(const ClusterSequence& seq, const SpanMaskPolicy& policy,
                               const UnitVocab& vocab, uint64_t seed);
SpanMaskResult apply_span_mask(const ClusterSequence& seq, const SpanMaskPolicy& policy,
                               const UnitVocab& vocab, Rng& rng);

// Span selection alone (shared with the feature-masking trainer).
std::vector<size_t> select_mask_spans(size_t frames, int32_t span_len, double p_mask, Rng& rng);

// A model that turns a (possibly masked) token view into a per-frame
// distribution over the real units. The mask id never appears in the
// support. For masked positions the context is taken from the nearest
// unmasked neighbors; sequence edges use dedicated boundary symbols.
class UnitScorer {
 public:
  virtual ~UnitScorer() = default;
  virtual int32_t vocab_size() const = 0;
  // T x V row-stochastic matrix.
  virtual Mat<double> distributions(std::span<const int32_t> tokens) const = 0;
};

// Confidence of each input token under the unmasked forward pass.
std::vector<double> score_confidences(const UnitScorer& scorer, const ClusterSequence& seq);

struct MaskedPrediction {
  std::vector<size_t> positions;
  std::vector<int32_t> units;        // argmax over real units
  std::vector<double> confidences;   // probability of that argmax
};

// Predictions for every mask position in the view.
MaskedPrediction predict_masked(const UnitScorer& scorer, std::span<const int32_t> tokens,
                                const UnitVocab& vocab);

// ---- neural realization ----

class NeuralScorer : public UnitScorer {
 public:
  explicit NeuralScorer(neural::Encoder<float> model);

  int32_t vocab_size() const override { return model_.cfg.vocab_in; }
  Mat<double> distributions(std::span<const int32_t> tokens) const override;

  const neural::Encoder<float>& model() const { return model_; }

 private:
  neural::Encoder<float> model_;
};

struct MlmTrainConfig {
  neural::EncoderConfig encoder;  // vocab_in/vocab_out are overwritten from the unit vocab
  SpanMaskPolicy policy;
  neural::LrSchedule lr;
  int32_t batch_size = 32;
  int64_t steps = 1000;
};

struct TrainLogEntry {
  int64_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
};

std::string format_train_log(std::span<const TrainLogEntry> log);  // CSV step,loss,lr

struct MlmTrainResult {
  neural::Encoder<float> model;
  std::vector<TrainLogEntry> log;
};

// Masked-prediction training from random initialization; loss is computed
// on the selected positions only.
MlmTrainResult train_mlm(std::span<const ClusterSequence> corpus, const UnitVocab& vocab,
                         const MlmTrainConfig& cfg, uint64_t seed);

// ---- count realization ----

// Exact context-count model: P(unit | left, right) from trigram-style
// counts with add-k smoothing. Only truly adjacent evidence is used: when a
// neighbor is masked, the model drops to the one-sided bigram of the
// adjacent side, and to unigram counts when both neighbors are masked away.
// A seen-but-sparse trigram context backs off to an even bigram mixture.
class CountScorer : public UnitScorer {
 public:
  CountScorer(int32_t vocab, double add_k);

  int32_t vocab_size() const override { return vocab_; }
  Mat<double> distributions(std::span<const int32_t> tokens) const override;

  // Distribution for one explicit adjacent context; bos()/eos() mark
  // sequence edges.
  std::vector<double> context_distribution(int32_t left, int32_t right) const;

  int32_t bos() const { return vocab_; }
  int32_t eos() const { return vocab_ + 1; }

  void fit(std::span<const ClusterSequence> corpus);

  void save_json(const std::string& path) const;
  static CountScorer load_json(const std::string& path);

 private:
  std::vector<double> one_sided(int32_t ctx, bool left_side) const;
  std::vector<double> unigram() const;

  int32_t vocab_;
  double add_k_;
  // context symbol -> unit -> count; std::map keeps serialization ordered
  std::map<std::pair<int32_t, int32_t>, std::map<int32_t, int64_t>> tri_;
  std::map<int32_t, std::map<int32_t, int64_t>> after_left_;
  std::map<int32_t, std::map<int32_t, int64_t>> before_right_;
  std::map<int32_t, int64_t> unigram_;
};

CountScorer fit_count_scorer(std::span<const ClusterSequence> corpus, const UnitVocab& vocab,
                             double add_k);

// Loads either an ENCP checkpoint (neural) or a count-model JSON file.
std::unique_ptr<UnitScorer> load_scorer(const std::string& path);

}  // namespace unitcorr::mlm
