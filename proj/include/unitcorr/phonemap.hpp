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
#include <span>
#include <string>
#include <vector>

#include "unitcorr/mat.hpp"
#include "unitcorr/seqcore.hpp"

namespace unitcorr {

// Phone symbol set. The default inventory is the 39 ARPABET classes plus
// silence (40 symbols); one extra reserved symbol marks clusters that were
// never observed during map learning.
struct PhoneInventory {
  std::vector<std::string> phones;  // id -> symbol; last entry is the unknown symbol
  std::vector<uint8_t> vowel;       // id -> 1 if vowel

  static constexpr const char* kUnknownSymbol = "<unk>";

  static PhoneInventory arpabet40();
  // Sorted unique symbols from data; vowels taken from the ARPABET vowel set.
  static PhoneInventory from_symbols(std::span<const std::string> symbols);

  int32_t unknown_id() const { return static_cast<int32_t>(phones.size()) - 1; }
  int32_t id_of(const std::string& sym) const;  // -1 when absent
  size_t size() const { return phones.size(); }
};

// Frame-aligned phone labels for one utterance.
struct PhoneSeq {
  std::string utt_id;
  std::vector<std::string> syms;
};

std::vector<PhoneSeq> read_phone_lines(std::istream& is);
std::vector<PhoneSeq> read_phone_lines_file(const std::string& path);
void write_phone_lines(std::ostream& os, std::span<const PhoneSeq> seqs);
void write_phone_lines_file(const std::string& path, std::span<const PhoneSeq> seqs);

// Most-likely cluster-to-phone assignment with the co-occurrence counts it
// was derived from. mapping[c] is always the argmax of counts row c (lowest
// phone index on ties); unseen clusters map to the unknown phone.
struct PhoneMap {
  PhoneInventory inventory;
  std::vector<int32_t> mapping;  // cluster id -> phone id
  Mat<int64_t> counts;           // V x P frame co-occurrences

  int32_t phone_of(int32_t cluster) const;
  bool cluster_is_vowel(int32_t cluster) const;
  bool phone_is_vowel(int32_t phone) const;

  void save_json(const std::string& path) const;
  static PhoneMap load_json(const std::string& path);
};

// Accumulates frame-wise co-occurrences between cluster lines and aligned
// frame-phone lines (matched by utterance id; lengths must agree).
PhoneMap learn_phone_map(std::span<const ClusterSequence> clusters,
                         std::span<const PhoneSeq> frame_phones,
                         const PhoneInventory& inventory, int32_t vocab_size);

// Same, with the inventory discovered from the frame-phone symbols.
PhoneMap learn_phone_map(std::span<const ClusterSequence> clusters,
                         std::span<const PhoneSeq> frame_phones, int32_t vocab_size);

// Frame-wise cluster-to-phone substitution; with collapse, consecutive
// identical phones merge into one symbol.
std::vector<int32_t> frames_to_phone_ids(const ClusterSequence& seq, const PhoneMap& map,
                                         bool collapse);
std::vector<std::string> frames_to_phones(const ClusterSequence& seq, const PhoneMap& map,
                                          bool collapse);

std::vector<int32_t> collapse_runs(std::span<const int32_t> ids);

// ---- phone error rate ----

struct EditStats {
  int64_t subs = 0;
  int64_t dels = 0;
  int64_t ins = 0;
  int64_t ref_len = 0;

  int64_t edits() const { return subs + dels + ins; }
  double per() const { return 100.0 * static_cast<double>(edits()) / static_cast<double>(ref_len); }

  EditStats& operator+=(const EditStats& o) {
    subs += o.subs;
    dels += o.dels;
    ins += o.ins;
    ref_len += o.ref_len;
    return *this;
  }
};

// Unit-cost Levenshtein alignment. Among all minimum-cost alignments the
// match-maximising one is scored, which pins the S/D/I split uniquely and
// keeps it symmetric under hyp/ref exchange.
EditStats phone_error_rate(std::span<const int32_t> hyp, std::span<const int32_t> ref);
EditStats phone_error_rate(std::span<const std::string> hyp, std::span<const std::string> ref);

// CSV report `utt_id,per,S,D,I,ref_len` with a trailing ALL summary row.
struct PerReportRow {
  std::string utt_id;
  EditStats stats;
};
std::string format_per_report(std::span<const PerReportRow> rows);

}  // namespace unitcorr
