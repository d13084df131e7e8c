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
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "unitcorr/error.hpp"

namespace unitcorr {

// The unit alphabet. Real units are [0, size); the mask token is the one
// extra id `size`, kept non-negative so masked views stay plain int
// sequences and serialize through the same formats.
struct UnitVocab {
  int32_t size = 500;

  explicit UnitVocab(int32_t s = 500) : size(s) { require(s >= 2, "seqcore: vocab size must be >= 2"); }

  int32_t mask_id() const { return size; }
  bool is_unit(int32_t id) const { return id >= 0 && id < size; }
};

// One utterance as unit ids, one per 20 ms frame.
struct ClusterSequence {
  std::string utt_id;
  std::vector<int32_t> tokens;

  size_t frames() const { return tokens.size(); }
};

// A maximal run of frames sharing one grouping key. `score` is filled by the
// corrector after confidence aggregation; unset until then.
struct Group {
  int32_t key = 0;
  size_t start = 0;
  size_t length = 0;
  std::optional<double> score;
};

// Run-length view of a sequence: contiguous, non-overlapping, covering
// [0, total_frames), with adjacent groups carrying distinct keys.
struct GroupedSequence {
  std::vector<Group> groups;
  size_t total_frames = 0;

  void validate() const;
};

// Splits a sequence into maximal runs. When `keys` is given it supplies the
// grouping key per frame (e.g. mapped phone ids) and must match the token
// count; otherwise the tokens themselves are the keys.
GroupedSequence group_runs(const ClusterSequence& seq,
                           std::span<const int32_t> keys = {});

// Expands a grouped view back to one key per frame.
std::vector<int32_t> ungroup(const GroupedSequence& grouped);

// ---- cluster sequence text format ----
// One utterance per line: `<utt_id> <tok_0> <tok_1> ...`, ASCII decimal,
// single spaces, newline-terminated. The mask id of `vocab` prints as `M`
// when masked intermediate views are dumped.

std::string format_sequence_line(const ClusterSequence& seq, const UnitVocab& vocab);
ClusterSequence parse_sequence_line(const std::string& line, const UnitVocab& vocab);

void write_sequences(std::ostream& os, std::span<const ClusterSequence> seqs, const UnitVocab& vocab);
std::vector<ClusterSequence> read_sequences(std::istream& is, const UnitVocab& vocab);

void write_sequences_file(const std::string& path, std::span<const ClusterSequence> seqs,
                          const UnitVocab& vocab);
std::vector<ClusterSequence> read_sequences_file(const std::string& path, const UnitVocab& vocab);

}  // namespace unitcorr
