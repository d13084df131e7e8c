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

#include "unitcorr/corrector.hpp"

#include <algorithm>
#include <cmath>

namespace unitcorr::corrector {

MaskSchedule build_schedule(size_t frames, int32_t iterations, double p_mask) {
  require(frames >= 1, "corrector: schedule needs at least one frame");
  require(iterations >= 1, "corrector: K must be >= 1");
  require(p_mask > 0.0 && p_mask < 1.0, "corrector: p_mask must be in (0,1)");

  MaskSchedule sched;
  sched.frames = frames;
  sched.iterations = iterations;
  sched.p_mask = p_mask;
  sched.n_max = static_cast<size_t>(std::floor(p_mask * static_cast<double>(frames) + 1e-9));
  if (sched.n_max == 0) return sched;  // no-op schedule

  int64_t k64 = iterations;
  for (int64_t k = 1; k <= k64; ++k) {
    int64_t target = static_cast<int64_t>(sched.n_max) * (k64 - k + 1) / k64;
    sched.n_k.push_back(static_cast<size_t>(std::max<int64_t>(target, 1)));
  }
  sched.m = std::max<size_t>(sched.n_max / static_cast<size_t>(iterations), 1);
  return sched;
}

std::vector<size_t> select_mask_groups(const GroupedSequence& grouped, size_t min_frames,
                                       const std::vector<uint8_t>& candidate) {
  require(candidate.size() == grouped.groups.size(), "corrector: candidate flags misaligned");
  std::vector<size_t> order;
  for (size_t g = 0; g < grouped.groups.size(); ++g) {
    if (!candidate[g]) continue;
    require(grouped.groups[g].score.has_value(), "corrector: unscored group in selection");
    order.push_back(g);
  }
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    double sa = *grouped.groups[a].score, sb = *grouped.groups[b].score;
    if (sa != sb) return sa < sb;
    return grouped.groups[a].start < grouped.groups[b].start;
  });

  std::vector<size_t> picked;
  size_t covered = 0;
  for (size_t g : order) {
    if (covered >= min_frames) break;
    picked.push_back(g);
    covered += grouped.groups[g].length;
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

std::vector<int32_t> correct_iteration(std::span<const int32_t> tokens,
                                       const mlm::UnitScorer& scorer, const UnitVocab& vocab,
                                       const MaskSchedule& schedule, int32_t k,
                                       const CorrectionVariant& variant, const PhoneMap* phone_map,
                                       const TraceSink* trace) {
  require(k >= 1 && k <= schedule.iterations, "corrector: iteration index out of schedule");
  if (variant.needs_phone_map())
    require(phone_map != nullptr, "corrector: variant requires a phone map");
  for (int32_t tok : tokens)
    require(vocab.is_unit(tok), "corrector: iteration input contains mask ids");

  std::vector<int32_t> state(tokens.begin(), tokens.end());
  IterationTrace it;
  it.k = k;
  it.n_k = schedule.n_k[static_cast<size_t>(k - 1)];
  it.m = schedule.m;

  ClusterSequence view{"", state};
  std::vector<double> conf = mlm::score_confidences(scorer, view);

  std::vector<int32_t> keys;
  if (variant.grouping == Grouping::ByPhone) {
    keys.reserve(state.size());
    for (int32_t tok : state) keys.push_back(phone_map->phone_of(tok));
  }
  GroupedSequence grouped = group_runs(view, keys);
  for (Group& g : grouped.groups) {
    double best = conf[g.start];
    for (size_t i = 1; i < g.length; ++i) best = std::max(best, conf[g.start + i]);
    g.score = best;  // group confidence is the max over its frames
  }

  std::vector<uint8_t> candidate(grouped.groups.size(), 1);
  if (variant.vowels_after.has_value() && k > *variant.vowels_after) {
    for (size_t g = 0; g < grouped.groups.size(); ++g) {
      int32_t key = grouped.groups[g].key;
      bool vowel = variant.grouping == Grouping::ByPhone ? phone_map->phone_is_vowel(key)
                                                         : phone_map->cluster_is_vowel(key);
      candidate[g] = vowel ? 1 : 0;
    }
  }

  std::vector<size_t> selected = select_mask_groups(grouped, it.n_k, candidate);
  if (selected.empty()) {
    if (trace && *trace) (*trace)(it);
    return state;
  }

  std::vector<int32_t> masked = state;
  for (size_t g : selected) {
    const Group& grp = grouped.groups[g];
    for (size_t i = 0; i < grp.length; ++i) masked[grp.start + i] = vocab.mask_id();
    it.masked.push_back({grp.start, grp.length, grp.key, *grp.score});
  }

  mlm::MaskedPrediction pred = mlm::predict_masked(scorer, masked, vocab);
  std::vector<int32_t> pred_unit(state.size(), -1);
  std::vector<double> pred_conf(state.size(), 0.0);
  for (size_t i = 0; i < pred.positions.size(); ++i) {
    pred_unit[pred.positions[i]] = pred.units[i];
    pred_conf[pred.positions[i]] = pred.confidences[i];
  }

  // fill confidence per masked group: mean of member-frame confidences
  struct FillCand {
    size_t group;
    double conf;
  };
  std::vector<FillCand> fills;
  for (size_t g : selected) {
    const Group& grp = grouped.groups[g];
    double mean = 0.0;
    for (size_t i = 0; i < grp.length; ++i) mean += pred_conf[grp.start + i];
    mean /= static_cast<double>(grp.length);
    fills.push_back({g, mean});
  }
  std::sort(fills.begin(), fills.end(), [&](const FillCand& a, const FillCand& b) {
    if (a.conf != b.conf) return a.conf > b.conf;
    return grouped.groups[a.group].start < grouped.groups[b.group].start;
  });

  size_t filled_frames = 0;
  for (const FillCand& f : fills) {
    if (variant.fill == FillMode::TopM && filled_frames >= schedule.m) break;
    const Group& grp = grouped.groups[f.group];
    for (size_t i = 0; i < grp.length; ++i) {
      size_t pos = grp.start + i;
      state[pos] = pred_unit[pos];  // per-frame argmax; frames may differ within a group
    }
    filled_frames += grp.length;
    it.filled.push_back({grp.start, grp.length, grp.key, f.conf});
  }
  // unfilled masked frames keep their previous tokens (state was a copy)

  if (trace && *trace) (*trace)(it);
  return state;
}

ClusterSequence correct(const ClusterSequence& seq, const mlm::UnitScorer& scorer,
                        const UnitVocab& vocab, int32_t iterations, double p_mask,
                        const CorrectionVariant& variant, const PhoneMap* phone_map,
                        const TraceSink* trace) {
  if (seq.tokens.empty()) return seq;
  MaskSchedule schedule = build_schedule(seq.tokens.size(), iterations, p_mask);
  ClusterSequence out = seq;
  if (schedule.empty()) return out;
  for (int32_t k = 1; k <= iterations; ++k)
    out.tokens = correct_iteration(out.tokens, scorer, vocab, schedule, k, variant, phone_map,
                                   trace);
  return out;
}

}  // namespace unitcorr::corrector
