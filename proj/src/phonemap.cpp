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

#include "unitcorr/phonemap.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace unitcorr {

namespace {

const std::vector<std::string>& arpabet_vowels() {
  static const std::vector<std::string> v = {"AA", "AE", "AH", "AO", "AW", "AY", "EH", "ER",
                                             "EY", "IH", "IY", "OW", "OY", "UH", "UW"};
  return v;
}

bool is_arpabet_vowel(const std::string& sym) {
  const auto& v = arpabet_vowels();
  return std::find(v.begin(), v.end(), sym) != v.end();
}

}  // namespace

PhoneInventory PhoneInventory::arpabet40() {
  PhoneInventory inv;
  inv.phones = {"AA", "AE", "AH", "AO", "AW", "AY", "B",  "CH", "D",  "DH", "EH", "ER", "EY", "F",
                "G",  "HH", "IH", "IY", "JH", "K",  "L",  "M",  "N",  "NG", "OW", "OY", "P",  "R",
                "S",  "SH", "T",  "TH", "UH", "UW", "V",  "W",  "Y",  "Z",  "ZH", "SIL"};
  inv.phones.push_back(kUnknownSymbol);
  inv.vowel.resize(inv.phones.size(), 0);
  for (size_t i = 0; i < inv.phones.size(); ++i)
    inv.vowel[i] = is_arpabet_vowel(inv.phones[i]) ? 1 : 0;
  return inv;
}

PhoneInventory PhoneInventory::from_symbols(std::span<const std::string> symbols) {
  std::set<std::string> uniq(symbols.begin(), symbols.end());
  PhoneInventory inv;
  inv.phones.assign(uniq.begin(), uniq.end());
  inv.phones.push_back(kUnknownSymbol);
  inv.vowel.resize(inv.phones.size(), 0);
  for (size_t i = 0; i < inv.phones.size(); ++i)
    inv.vowel[i] = is_arpabet_vowel(inv.phones[i]) ? 1 : 0;
  return inv;
}

int32_t PhoneInventory::id_of(const std::string& sym) const {
  for (size_t i = 0; i < phones.size(); ++i)
    if (phones[i] == sym) return static_cast<int32_t>(i);
  return -1;
}

std::vector<PhoneSeq> read_phone_lines(std::istream& is) {
  std::vector<PhoneSeq> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream iss(line);
    PhoneSeq seq;
    if (!(iss >> seq.utt_id)) throw IoError("phonemap: phone line without utterance id");
    std::string sym;
    while (iss >> sym) seq.syms.push_back(sym);
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<PhoneSeq> read_phone_lines_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("phonemap: cannot open " + path);
  return read_phone_lines(is);
}

void write_phone_lines(std::ostream& os, std::span<const PhoneSeq> seqs) {
  for (const PhoneSeq& s : seqs) {
    os << s.utt_id;
    for (const std::string& sym : s.syms) os << ' ' << sym;
    os << '\n';
  }
}

void write_phone_lines_file(const std::string& path, std::span<const PhoneSeq> seqs) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("phonemap: cannot open " + path + " for writing");
  write_phone_lines(os, seqs);
}

int32_t PhoneMap::phone_of(int32_t cluster) const {
  require(cluster >= 0 && static_cast<size_t>(cluster) < mapping.size(),
          "phonemap: cluster id " + std::to_string(cluster) + " outside the learned map");
  return mapping[cluster];
}

bool PhoneMap::cluster_is_vowel(int32_t cluster) const { return phone_is_vowel(phone_of(cluster)); }

bool PhoneMap::phone_is_vowel(int32_t phone) const {
  return phone >= 0 && static_cast<size_t>(phone) < inventory.vowel.size() &&
         inventory.vowel[phone] != 0;
}

void PhoneMap::save_json(const std::string& path) const {
  nlohmann::json j;
  j["phones"] = inventory.phones;
  std::vector<std::string> vowels;
  for (size_t i = 0; i < inventory.phones.size(); ++i)
    if (inventory.vowel[i]) vowels.push_back(inventory.phones[i]);
  j["vowels"] = vowels;
  j["mapping"] = mapping;
  std::vector<std::vector<int64_t>> count_rows(counts.rows);
  for (size_t r = 0; r < counts.rows; ++r)
    count_rows[r].assign(counts.row(r), counts.row(r) + counts.cols);
  j["counts"] = count_rows;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("phonemap: cannot open " + path + " for writing");
  os << j.dump(2) << '\n';
}

PhoneMap PhoneMap::load_json(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("phonemap: cannot open " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("phonemap: bad JSON in " + path + ": " + e.what());
  }
  PhoneMap map;
  map.inventory.phones = j.at("phones").get<std::vector<std::string>>();
  auto vowels = j.at("vowels").get<std::vector<std::string>>();
  map.inventory.vowel.resize(map.inventory.phones.size(), 0);
  for (size_t i = 0; i < map.inventory.phones.size(); ++i)
    map.inventory.vowel[i] =
        std::find(vowels.begin(), vowels.end(), map.inventory.phones[i]) != vowels.end() ? 1 : 0;
  map.mapping = j.at("mapping").get<std::vector<int32_t>>();
  auto count_rows = j.at("counts").get<std::vector<std::vector<int64_t>>>();
  size_t cols = map.inventory.phones.size();
  map.counts = Mat<int64_t>(count_rows.size(), cols);
  for (size_t r = 0; r < count_rows.size(); ++r) {
    require(count_rows[r].size() == cols, "phonemap: counts row width mismatch in " + path);
    std::copy(count_rows[r].begin(), count_rows[r].end(), map.counts.row(r));
  }
  return map;
}

PhoneMap learn_phone_map(std::span<const ClusterSequence> clusters,
                         std::span<const PhoneSeq> frame_phones,
                         const PhoneInventory& inventory, int32_t vocab_size) {
  std::unordered_map<std::string, const PhoneSeq*> by_id;
  for (const PhoneSeq& p : frame_phones) by_id[p.utt_id] = &p;

  PhoneMap map;
  map.inventory = inventory;
  size_t P = inventory.size();
  map.counts = Mat<int64_t>(static_cast<size_t>(vocab_size), P);

  for (const ClusterSequence& seq : clusters) {
    auto it = by_id.find(seq.utt_id);
    require(it != by_id.end(), "phonemap: no frame phones for utterance " + seq.utt_id);
    const PhoneSeq& ph = *it->second;
    require(ph.syms.size() == seq.tokens.size(),
            "phonemap: frame count mismatch for utterance " + seq.utt_id);
    for (size_t i = 0; i < seq.tokens.size(); ++i) {
      int32_t c = seq.tokens[i];
      require(c >= 0 && c < vocab_size, "phonemap: cluster id out of range in " + seq.utt_id);
      int32_t p = inventory.id_of(ph.syms[i]);
      require(p >= 0, "phonemap: phone symbol '" + ph.syms[i] + "' not in inventory");
      ++map.counts(static_cast<size_t>(c), static_cast<size_t>(p));
    }
  }

  map.mapping.assign(static_cast<size_t>(vocab_size), map.inventory.unknown_id());
  for (size_t c = 0; c < static_cast<size_t>(vocab_size); ++c) {
    int64_t best = 0;
    int32_t best_p = map.inventory.unknown_id();
    for (size_t p = 0; p < P; ++p) {
      if (map.counts(c, p) > best) {  // strict: ties keep the lowest phone index
        best = map.counts(c, p);
        best_p = static_cast<int32_t>(p);
      }
    }
    map.mapping[c] = best_p;
  }
  return map;
}

PhoneMap learn_phone_map(std::span<const ClusterSequence> clusters,
                         std::span<const PhoneSeq> frame_phones, int32_t vocab_size) {
  std::vector<std::string> all;
  for (const PhoneSeq& p : frame_phones) all.insert(all.end(), p.syms.begin(), p.syms.end());
  return learn_phone_map(clusters, frame_phones, PhoneInventory::from_symbols(all), vocab_size);
}

std::vector<int32_t> collapse_runs(std::span<const int32_t> ids) {
  std::vector<int32_t> out;
  for (size_t i = 0; i < ids.size(); ++i)
    if (i == 0 || ids[i] != ids[i - 1]) out.push_back(ids[i]);
  return out;
}

std::vector<int32_t> frames_to_phone_ids(const ClusterSequence& seq, const PhoneMap& map,
                                         bool collapse) {
  std::vector<int32_t> ids;
  ids.reserve(seq.tokens.size());
  for (int32_t tok : seq.tokens) ids.push_back(map.phone_of(tok));
  if (collapse) return collapse_runs(ids);
  return ids;
}

std::vector<std::string> frames_to_phones(const ClusterSequence& seq, const PhoneMap& map,
                                          bool collapse) {
  std::vector<std::string> out;
  for (int32_t id : frames_to_phone_ids(seq, map, collapse))
    out.push_back(map.inventory.phones[static_cast<size_t>(id)]);
  return out;
}

EditStats phone_error_rate(std::span<const int32_t> hyp, std::span<const int32_t> ref) {
  require(!ref.empty(), "phonemap: empty reference in phone_error_rate");
  size_t n = hyp.size(), m = ref.size();

  // Cell value: (edit cost, matches); lexicographic minimum of
  // (cost, -matches). Two rolling rows.
  struct Cell {
    int64_t cost;
    int64_t matches;
  };
  auto better = [](const Cell& a, const Cell& b) {
    return a.cost < b.cost || (a.cost == b.cost && a.matches > b.matches);
  };

  std::vector<Cell> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = {static_cast<int64_t>(j), 0};
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = {static_cast<int64_t>(i), 0};
    for (size_t j = 1; j <= m; ++j) {
      bool eq = hyp[i - 1] == ref[j - 1];
      Cell best = {prev[j - 1].cost + (eq ? 0 : 1), prev[j - 1].matches + (eq ? 1 : 0)};
      Cell del = {prev[j].cost + 1, prev[j].matches};
      Cell ins = {cur[j - 1].cost + 1, cur[j - 1].matches};
      if (better(del, best)) best = del;
      if (better(ins, best)) best = ins;
      cur[j] = best;
    }
    std::swap(prev, cur);
  }

  int64_t cost = prev[m].cost;
  int64_t matches = prev[m].matches;
  EditStats stats;
  stats.ref_len = static_cast<int64_t>(m);
  stats.ins = cost - static_cast<int64_t>(n) + matches;
  stats.dels = cost - static_cast<int64_t>(m) + matches;
  stats.subs = static_cast<int64_t>(n + m) - 2 * matches - cost;
  return stats;
}

EditStats phone_error_rate(std::span<const std::string> hyp, std::span<const std::string> ref) {
  // Intern over the union of both sequences.
  std::unordered_map<std::string, int32_t> ids;
  auto intern = [&](std::span<const std::string> syms) {
    std::vector<int32_t> out;
    out.reserve(syms.size());
    for (const std::string& s : syms) {
      auto [it, _] = ids.emplace(s, static_cast<int32_t>(ids.size()));
      out.push_back(it->second);
    }
    return out;
  };
  std::vector<int32_t> h = intern(hyp), r = intern(ref);
  return phone_error_rate(std::span<const int32_t>(h), std::span<const int32_t>(r));
}

std::string format_per_report(std::span<const PerReportRow> rows) {
  std::string out = "utt_id,per,S,D,I,ref_len\n";
  char buf[160];
  EditStats total;
  for (const PerReportRow& row : rows) {
    total += row.stats;
    std::snprintf(buf, sizeof(buf), "%s,%.2f,%lld,%lld,%lld,%lld\n", row.utt_id.c_str(),
                  row.stats.per(), static_cast<long long>(row.stats.subs),
                  static_cast<long long>(row.stats.dels), static_cast<long long>(row.stats.ins),
                  static_cast<long long>(row.stats.ref_len));
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "ALL,%.2f,%lld,%lld,%lld,%lld\n", total.per(),
                static_cast<long long>(total.subs), static_cast<long long>(total.dels),
                static_cast<long long>(total.ins), static_cast<long long>(total.ref_len));
  out += buf;
  return out;
}

}  // namespace unitcorr
