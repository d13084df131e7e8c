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
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "unitcorr/mlm.hpp"
#include "unitcorr/phonemap.hpp"
#include "unitcorr/seqcore.hpp"

namespace unitcorr::corrector {

// Shrinking mask budgets for one utterance: a total budget of
// floor(p_mask*T) frames, per-iteration targets floor(n_max*(K-k+1)/K)
// clamped to at least one frame, and a fill quota of max(1, n_max/K).
// n_max = 0 yields an empty schedule and correction is a no-op.
struct MaskSchedule {
  size_t frames = 0;
  int32_t iterations = 0;  // K
  double p_mask = 0.0;
  size_t n_max = 0;
  std::vector<size_t> n_k;  // n_k[k-1] is the target for iteration k
  size_t m = 0;

  bool empty() const { return n_max == 0; }
};

MaskSchedule build_schedule(size_t frames, int32_t iterations, double p_mask);

enum class Grouping { ByCluster, ByPhone };
enum class FillMode { TopM, FillAll };

struct CorrectionVariant {
  Grouping grouping = Grouping::ByCluster;
  FillMode fill = FillMode::TopM;
  // When set, iterations k > vowels_after may only mask groups whose key
  // maps to a vowel phone; earlier iterations behave like the plain variant.
  std::optional<int32_t> vowels_after;

  bool needs_phone_map() const {
    return grouping == Grouping::ByPhone || vowels_after.has_value();
  }
};

// Lowest-scoring candidate groups (ties to the earlier start) until at
// least min_frames frames are covered; all candidates when they cannot
// reach the target. Every group must carry a score.
std::vector<size_t> select_mask_groups(const GroupedSequence& grouped, size_t min_frames,
                                       const std::vector<uint8_t>& candidate);

struct TraceSpan {
  size_t start = 0;
  size_t length = 0;
  int32_t key = 0;
  double value = 0.0;  // group score for masked spans, fill confidence for filled spans
};

struct IterationTrace {
  int32_t k = 0;
  size_t n_k = 0;
  size_t m = 0;
  std::vector<TraceSpan> masked;
  std::vector<TraceSpan> filled;
};

using TraceSink = std::function<void(const IterationTrace&)>;

// One mask-and-decode step: score, group, mask the lowest-scoring groups,
// predict, then fill whole groups in descending mean prediction confidence
// until the fill quota is met (or every masked group in fill-all mode).
// Unfilled masked frames revert to their previous tokens.
std::vector<int32_t> correct_iteration(std::span<const int32_t> tokens,
                                       const mlm::UnitScorer& scorer, const UnitVocab& vocab,
                                       const MaskSchedule& schedule, int32_t k,
                                       const CorrectionVariant& variant, const PhoneMap* phone_map,
                                       const TraceSink* trace = nullptr);

// Runs K iterations, re-scoring and re-grouping the corrected sequence each
// time. Output length always equals input length and contains no mask ids.
ClusterSequence correct(const ClusterSequence& seq, const mlm::UnitScorer& scorer,
                        const UnitVocab& vocab, int32_t iterations, double p_mask,
                        const CorrectionVariant& variant, const PhoneMap* phone_map = nullptr,
                        const TraceSink* trace = nullptr);

}  // namespace unitcorr::corrector
