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

#include "unitcorr/seqcore.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace unitcorr {

void GroupedSequence::validate() const {
  size_t pos = 0;
  for (size_t g = 0; g < groups.size(); ++g) {
    const Group& grp = groups[g];
    require(grp.start == pos, "seqcore: groups must be contiguous");
    require(grp.length >= 1, "seqcore: empty group");
    if (g > 0) require(groups[g - 1].key != grp.key, "seqcore: adjacent groups share a key");
    pos += grp.length;
  }
  require(pos == total_frames, "seqcore: groups do not cover the sequence");
}

GroupedSequence group_runs(const ClusterSequence& seq, std::span<const int32_t> keys) {
  if (!keys.empty())
    require(keys.size() == seq.tokens.size(), "seqcore: keys/tokens length mismatch");
  auto key_at = [&](size_t i) { return keys.empty() ? seq.tokens[i] : keys[i]; };

  GroupedSequence out;
  out.total_frames = seq.tokens.size();
  size_t i = 0;
  while (i < seq.tokens.size()) {
    size_t j = i + 1;
    while (j < seq.tokens.size() && key_at(j) == key_at(i)) ++j;
    out.groups.push_back(Group{key_at(i), i, j - i, std::nullopt});
    i = j;
  }
  return out;
}

std::vector<int32_t> ungroup(const GroupedSequence& grouped) {
  std::vector<int32_t> out;
  out.reserve(grouped.total_frames);
  for (const Group& g : grouped.groups)
    out.insert(out.end(), g.length, g.key);
  return out;
}

std::string format_sequence_line(const ClusterSequence& seq, const UnitVocab& vocab) {
  std::string line = seq.utt_id;
  for (int32_t tok : seq.tokens) {
    line += ' ';
    if (tok == vocab.mask_id())
      line += 'M';
    else
      line += std::to_string(tok);
  }
  line += '\n';
  return line;
}

ClusterSequence parse_sequence_line(const std::string& line, const UnitVocab& vocab) {
  std::istringstream iss(line);
  ClusterSequence seq;
  if (!(iss >> seq.utt_id)) throw IoError("seqcore: sequence line without utterance id");
  std::string tok;
  while (iss >> tok) {
    if (tok == "M") {
      seq.tokens.push_back(vocab.mask_id());
      continue;
    }
    int32_t value = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
      throw IoError("seqcore: bad token '" + tok + "' in line for " + seq.utt_id);
    if (!vocab.is_unit(value) && value != vocab.mask_id())
      throw IoError("seqcore: token " + tok + " out of vocabulary in " + seq.utt_id);
    seq.tokens.push_back(value);
  }
  return seq;
}

void write_sequences(std::ostream& os, std::span<const ClusterSequence> seqs, const UnitVocab& vocab) {
  for (const ClusterSequence& s : seqs) os << format_sequence_line(s, vocab);
}

std::vector<ClusterSequence> read_sequences(std::istream& is, const UnitVocab& vocab) {
  std::vector<ClusterSequence> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    out.push_back(parse_sequence_line(line, vocab));
  }
  return out;
}

void write_sequences_file(const std::string& path, std::span<const ClusterSequence> seqs,
                          const UnitVocab& vocab) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("seqcore: cannot open " + path + " for writing");
  write_sequences(os, seqs, vocab);
}

std::vector<ClusterSequence> read_sequences_file(const std::string& path, const UnitVocab& vocab) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("seqcore: cannot open " + path);
  return read_sequences(is, vocab);
}

}  // namespace unitcorr
