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

#include <span>
#include <string>
#include <vector>

#include "unitcorr/mat.hpp"
#include "unitcorr/neural.hpp"

namespace unitcorr::adapt {

// Frame features paired with aligned unit targets.
struct AdaptExample {
  std::string utt_id;
  Mat<float> features;
  std::vector<int32_t> targets;
};

// Continuous inputs have no analog of random-token corruption, so masked
// spans are always replaced by the learned mask embedding.
struct FeatureMaskPolicy {
  int32_t span_len = 10;
  double p_mask = 0.2;

  void validate() const;
};

struct TrainSchedule {
  neural::LrSchedule lr;
  int32_t batch_size = 32;
  int64_t steps = 1000;

  void validate() const;
};

struct AdaptLogEntry {
  int64_t step = 0;
  double loss = 0.0;
  double masked_acc = 0.0;
  double lr = 0.0;
};

std::string format_adapt_log(std::span<const AdaptLogEntry> log);  // CSV step,loss,masked_acc,lr

struct PretrainResult {
  neural::Encoder<float> model;
  std::vector<AdaptLogEntry> log;
};

// Masked unit prediction over feature inputs: spans of input frames are
// replaced by the mask embedding and the model is trained to recover the
// aligned cluster targets at those frames. Returns the trained backbone.
PretrainResult pretrain_base(const neural::EncoderConfig& encoder, const FeatureMaskPolicy& mask,
                             const TrainSchedule& schedule,
                             std::span<const AdaptExample> examples, int32_t vocab_size,
                             uint64_t seed);

struct AdapterInsertion {
  int64_t trainable = 0;
  int64_t total = 0;

  double trainable_fraction() const {
    return static_cast<double>(trainable) / static_cast<double>(total);
  }
};

// Freezes the backbone and appends near-identity adapters at both
// placements of every layer; reports the trainable parameter budget.
AdapterInsertion insert_adapters(neural::Encoder<float>* model, const neural::AdapterConfig& acfg,
                                 uint64_t seed);

// Adapter-only continual pre-training on (typically corrected) targets.
// Fails hard if any backbone parameter is trainable.
std::vector<AdaptLogEntry> continual_pretrain(neural::Encoder<float>* model,
                                              const FeatureMaskPolicy& mask,
                                              const TrainSchedule& schedule,
                                              std::span<const AdaptExample> examples,
                                              uint64_t seed);

// Masked-frame prediction accuracy with deterministic span masking.
double evaluate_masked_accuracy(const neural::Encoder<float>& model, const FeatureMaskPolicy& mask,
                                std::span<const AdaptExample> examples, uint64_t seed);

}  // namespace unitcorr::adapt
