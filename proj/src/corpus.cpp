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

#include "unitcorr/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "unitcorr/io.hpp"
#include "unitcorr/kernels.hpp"

namespace unitcorr::corpus {

namespace fs = std::filesystem;

namespace {

constexpr uint64_t kCentroidStream = 0xC3;
constexpr uint64_t kUttStream = 0x07;
constexpr uint64_t kShiftStream = 0x5F;

int32_t sample_categorical(Rng& rng, const std::vector<int32_t>& ids,
                           const std::vector<double>& probs) {
  double u = rng.next_double();
  double acc = 0.0;
  for (size_t i = 0; i < ids.size(); ++i) {
    acc += probs[i];
    if (u < acc) return ids[i];
  }
  return ids.back();
}

std::string padded_id(const std::string& prefix, size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06zu", index);
  return prefix + "-" + buf;
}

void render_segment(Rng& rng, const LexiconSpec& spec, const Mat<double>& centroids, int32_t phone,
                    int32_t duration, std::vector<int32_t>* clusters, Mat<float>* features,
                    size_t frame_offset) {
  for (int32_t f = 0; f < duration; ++f) {
    int32_t c = sample_categorical(rng, spec.emission_ids[phone], spec.emission_probs[phone]);
    (*clusters)[frame_offset + f] = c;
    const double* center = centroids.row(static_cast<size_t>(c));
    float* out = features->row(frame_offset + f);
    for (int32_t j = 0; j < spec.feature_dim; ++j)
      out[j] = static_cast<float>(center[j] + spec.noise_sigma * rng.next_gaussian());
  }
}

}  // namespace

void LexiconSpec::validate() const {
  require(!phones.empty(), "corpus: empty phone inventory");
  require(vowel.size() == phones.size(), "corpus: vowel flags misaligned");
  require(!words.empty(), "corpus: empty word list");
  require(duration_min >= 1 && duration_max >= duration_min, "corpus: invalid duration range");
  require(feature_dim >= 1, "corpus: feature_dim must be >= 1");
  require(centroid_spread > 0.0, "corpus: centroid_spread must be > 0");
  require(noise_sigma >= 0.0, "corpus: noise_sigma must be >= 0");
  require(emission_ids.size() == phones.size() && emission_probs.size() == phones.size(),
          "corpus: emissions misaligned with phones");

  std::vector<int32_t> owner(static_cast<size_t>(vocab_size), -1);
  for (size_t p = 0; p < phones.size(); ++p) {
    require(!emission_ids[p].empty(), "corpus: phone " + phones[p] + " owns no clusters");
    require(emission_ids[p].size() == emission_probs[p].size(),
            "corpus: emission probs misaligned for phone " + phones[p]);
    double total = 0.0;
    for (size_t i = 0; i < emission_ids[p].size(); ++i) {
      int32_t c = emission_ids[p][i];
      require(c >= 0 && c < vocab_size, "corpus: emission cluster id out of range");
      require(owner[c] == -1, "corpus: cluster " + std::to_string(c) + " owned by two phones");
      owner[c] = static_cast<int32_t>(p);
      total += emission_probs[p][i];
    }
    require(std::abs(total - 1.0) < 1e-9, "corpus: emission probs for " + phones[p] +
                                              " do not sum to 1");
  }
  for (int32_t c = 0; c < vocab_size; ++c)
    require(owner[c] >= 0, "corpus: cluster " + std::to_string(c) + " owned by no phone");

  for (const auto& w : words) {
    require(!w.empty(), "corpus: empty word");
    for (int32_t p : w)
      require(p >= 0 && static_cast<size_t>(p) < phones.size(), "corpus: word uses unknown phone");
  }
}

int32_t LexiconSpec::phone_id(const std::string& sym) const {
  for (size_t i = 0; i < phones.size(); ++i)
    if (phones[i] == sym) return static_cast<int32_t>(i);
  return -1;
}

int32_t LexiconSpec::phone_of_cluster(int32_t cluster) const {
  for (size_t p = 0; p < emission_ids.size(); ++p)
    for (int32_t c : emission_ids[p])
      if (c == cluster) return static_cast<int32_t>(p);
  return -1;
}

LexiconSpec generate_lexicon(const LexiconGenParams& params, uint64_t seed) {
  require(params.n_phones >= 2, "corpus: need at least two phones");
  require(params.vocab_size >= params.n_phones, "corpus: vocab smaller than phone count");
  PhoneInventory inv = PhoneInventory::arpabet40();
  size_t usable = inv.phones.size() - 1;  // drop the reserved unknown symbol
  require(static_cast<size_t>(params.n_phones) <= usable,
          "corpus: at most " + std::to_string(usable) + " phones available");

  LexiconSpec spec;
  for (int32_t p = 0; p < params.n_phones; ++p) {
    spec.phones.push_back(inv.phones[static_cast<size_t>(p)]);
    spec.vowel.push_back(inv.vowel[static_cast<size_t>(p)]);
  }
  spec.vocab_size = params.vocab_size;
  spec.duration_min = params.duration_min;
  spec.duration_max = params.duration_max;
  spec.feature_dim = params.feature_dim;
  spec.centroid_spread = params.centroid_spread;
  spec.noise_sigma = params.noise_sigma;

  // Partition clusters: every phone gets the base share, the remainder goes
  // one-per-phone, vowels first when requested.
  int32_t base = params.vocab_size / params.n_phones;
  int32_t extra = params.vocab_size % params.n_phones;
  std::vector<int32_t> share(static_cast<size_t>(params.n_phones), base);
  std::vector<size_t> order(static_cast<size_t>(params.n_phones));
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (params.extra_clusters_to_vowels)
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return spec.vowel[a] > spec.vowel[b]; });
  for (int32_t e = 0; e < extra; ++e) ++share[order[static_cast<size_t>(e) % order.size()]];

  int32_t next_cluster = 0;
  spec.emission_ids.resize(spec.phones.size());
  spec.emission_probs.resize(spec.phones.size());
  for (size_t p = 0; p < spec.phones.size(); ++p) {
    for (int32_t k = 0; k < share[p]; ++k) spec.emission_ids[p].push_back(next_cluster++);
    spec.emission_probs[p].assign(spec.emission_ids[p].size(),
                                  1.0 / static_cast<double>(spec.emission_ids[p].size()));
  }

  Rng rng = Rng(seed).derive(0x11);
  if (params.disjoint_words && params.cv_words) {
    // Alternating consonant-vowel words, consonant-initial and -final, from
    // shuffled disjoint pools. Leftover consonants become C-only words.
    std::vector<int32_t> cons, vows;
    for (size_t p = 0; p < spec.phones.size(); ++p)
      (spec.vowel[p] ? vows : cons).push_back(static_cast<int32_t>(p));
    auto shuffle = [&rng](std::vector<int32_t>* v) {
      for (size_t i = v->size(); i-- > 1;) std::swap((*v)[i], (*v)[rng.next_index(i + 1)]);
    };
    shuffle(&cons);
    shuffle(&vows);
    size_t ci = 0, vi = 0;
    while (vi < vows.size() && ci + 1 < cons.size()) {
      std::vector<int32_t> word{cons[ci++]};
      while (vi < vows.size() && ci < cons.size() &&
             word.size() + 2 <= static_cast<size_t>(params.word_len_max)) {
        word.push_back(vows[vi++]);
        word.push_back(cons[ci++]);
      }
      spec.words.push_back(std::move(word));
    }
    while (ci < cons.size()) {
      std::vector<int32_t> word;
      size_t len = std::min<size_t>(3, cons.size() - ci);
      for (size_t i = 0; i < len; ++i) word.push_back(cons[ci++]);
      spec.words.push_back(std::move(word));
    }
  } else if (params.disjoint_words) {
    // Shuffle the inventory and chunk it into words; every phone belongs to
    // exactly one word.
    std::vector<int32_t> order(spec.phones.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int32_t>(i);
    for (size_t i = order.size(); i-- > 1;)
      std::swap(order[i], order[rng.next_index(i + 1)]);
    size_t pos = 0;
    while (pos < order.size()) {
      size_t len = static_cast<size_t>(rng.next_int(params.word_len_min, params.word_len_max));
      len = std::min(len, order.size() - pos);
      if (order.size() - pos - len < static_cast<size_t>(params.word_len_min))
        len = order.size() - pos;  // absorb a too-short tail
      spec.words.emplace_back(order.begin() + pos, order.begin() + pos + len);
      pos += len;
    }
  } else {
    // Random words without immediate phone repeats; then cover unused phones.
    std::vector<uint8_t> used(spec.phones.size(), 0);
    for (int32_t w = 0; w < params.n_words; ++w) {
      int32_t len = static_cast<int32_t>(rng.next_int(params.word_len_min, params.word_len_max));
      std::vector<int32_t> word;
      for (int32_t i = 0; i < len; ++i) {
        int32_t p;
        do {
          p = static_cast<int32_t>(rng.next_index(spec.phones.size()));
        } while (!word.empty() && p == word.back());
        word.push_back(p);
        used[static_cast<size_t>(p)] = 1;
      }
      spec.words.push_back(std::move(word));
    }
    for (size_t p = 0; p < spec.phones.size(); ++p) {
      if (used[p]) continue;
      int32_t other;
      do {
        other = static_cast<int32_t>(rng.next_index(spec.phones.size()));
      } while (other == static_cast<int32_t>(p));
      spec.words.push_back({static_cast<int32_t>(p), other});
    }
  }

  spec.validate();
  return spec;
}

Dataset generate_standard(const LexiconSpec& spec, size_t n_utts, int32_t words_min,
                          int32_t words_max, uint64_t seed, const std::string& id_prefix) {
  spec.validate();
  require(words_min >= 1 && words_max >= words_min, "corpus: invalid words-per-utterance range");

  Dataset ds;
  ds.spec = spec;
  ds.accent_tag = "standard";

  Rng root(seed);
  Rng crng = root.derive(kCentroidStream);
  ds.centroids = Mat<double>(static_cast<size_t>(spec.vocab_size),
                             static_cast<size_t>(spec.feature_dim));
  for (size_t c = 0; c < ds.centroids.rows; ++c)
    for (size_t j = 0; j < ds.centroids.cols; ++j)
      ds.centroids(c, j) = spec.centroid_spread * crng.next_gaussian();

  ds.utts.resize(n_utts);
  kernels::parallel_for(n_utts, [&](size_t i) {
    Rng rng = root.derive(kUttStream, i);
    Utterance& utt = ds.utts[i];
    utt.utt_id = padded_id(id_prefix, i);

    int32_t n_words = static_cast<int32_t>(rng.next_int(words_min, words_max));
    for (int32_t w = 0; w < n_words; ++w) {
      const auto& word = spec.words[rng.next_index(spec.words.size())];
      utt.phone_seq.insert(utt.phone_seq.end(), word.begin(), word.end());
    }
    utt.realized_phones = utt.phone_seq;

    size_t total = 0;
    for (size_t s = 0; s < utt.phone_seq.size(); ++s) {
      int32_t d = static_cast<int32_t>(rng.next_int(spec.duration_min, spec.duration_max));
      utt.durations.push_back(d);
      total += static_cast<size_t>(d);
    }

    utt.clusters.resize(total);
    utt.frame_phones.resize(total);
    utt.features = Mat<float>(total, static_cast<size_t>(spec.feature_dim));
    size_t offset = 0;
    for (size_t s = 0; s < utt.phone_seq.size(); ++s) {
      int32_t phone = utt.phone_seq[s];
      std::fill(utt.frame_phones.begin() + offset,
                utt.frame_phones.begin() + offset + utt.durations[s], phone);
      render_segment(rng, spec, ds.centroids, phone, utt.durations[s], &utt.clusters,
                     &utt.features, offset);
      offset += static_cast<size_t>(utt.durations[s]);
    }
    utt.standard_clusters = utt.clusters;
  });
  return ds;
}

Dataset apply_accent_shift(const Dataset& input, const ShiftSpec& shift, uint64_t seed) {
  require(shift.apply_prob >= 0.0 && shift.apply_prob <= 1.0, "corpus: apply_prob outside [0,1]");
  std::vector<std::pair<int32_t, int32_t>> subs;
  for (const auto& [from, to] : shift.substitutions) {
    int32_t a = input.spec.phone_id(from);
    int32_t b = input.spec.phone_id(to);
    require(a >= 0, "corpus: shift source phone '" + from + "' not in lexicon");
    require(b >= 0, "corpus: shift target phone '" + to + "' not in lexicon");
    subs.emplace_back(a, b);
  }
  std::sort(subs.begin(), subs.end());
  std::vector<int32_t> target(input.spec.phones.size(), -1);
  for (auto [a, b] : subs) target[static_cast<size_t>(a)] = b;

  Dataset out;
  out.spec = input.spec;
  out.centroids = input.centroids;
  out.accent_tag = "shifted";
  out.utts = input.utts;

  Rng root(seed);
  kernels::parallel_for(out.utts.size(), [&](size_t i) {
    Rng rng = root.derive(kShiftStream, i);
    Utterance& utt = out.utts[i];
    size_t offset = 0;
    for (size_t s = 0; s < utt.realized_phones.size(); ++s) {
      int32_t phone = utt.realized_phones[s];
      int32_t to = target[static_cast<size_t>(phone)];
      size_t dur = static_cast<size_t>(utt.durations[s]);
      if (to >= 0 && to != phone && rng.next_double() < shift.apply_prob) {
        utt.realized_phones[s] = to;
        std::fill(utt.frame_phones.begin() + offset, utt.frame_phones.begin() + offset + dur, to);
        render_segment(rng, out.spec, out.centroids, to, utt.durations[s], &utt.clusters,
                       &utt.features, offset);
      }
      offset += dur;
    }
  });
  return out;
}

void write_features_file(const std::string& path, const Mat<float>& feats) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("corpus: cannot open " + path + " for writing");
  io::write_magic(os, "ACFT");
  io::write_u32_le(os, 1);
  io::write_u64_le(os, feats.rows);
  io::write_u32_le(os, static_cast<uint32_t>(feats.cols));
  io::write_f32_span_le(os, {feats.data.data(), feats.data.size()});
  if (!os) throw IoError("corpus: short write to " + path);
}

Mat<float> read_features_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("corpus: cannot open " + path);
  io::expect_magic(is, "ACFT", "ACFT feature");
  uint32_t version = io::read_u32_le(is, "version");
  if (version != 1) throw IoError("corpus: unsupported ACFT version in " + path);
  uint64_t frames = io::read_u64_le(is, "frames");
  uint32_t dim = io::read_u32_le(is, "dim");
  Mat<float> feats(frames, dim);
  for (size_t i = 0; i < feats.data.size(); ++i) feats.data[i] = io::read_f32_le(is, "payload");
  return feats;
}

std::vector<ClusterSequence> cluster_sequences(const Dataset& ds) {
  std::vector<ClusterSequence> out;
  out.reserve(ds.utts.size());
  for (const Utterance& u : ds.utts) out.push_back({u.utt_id, u.clusters});
  return out;
}

std::vector<ClusterSequence> standard_cluster_sequences(const Dataset& ds) {
  std::vector<ClusterSequence> out;
  out.reserve(ds.utts.size());
  for (const Utterance& u : ds.utts) out.push_back({u.utt_id, u.standard_clusters});
  return out;
}

std::vector<PhoneSeq> frame_phone_lines(const Dataset& ds) {
  std::vector<PhoneSeq> out;
  out.reserve(ds.utts.size());
  for (const Utterance& u : ds.utts) {
    PhoneSeq seq{u.utt_id, {}};
    for (int32_t p : u.frame_phones) seq.syms.push_back(ds.spec.phones[static_cast<size_t>(p)]);
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<PhoneSeq> ref_phone_lines(const Dataset& ds) {
  std::vector<PhoneSeq> out;
  out.reserve(ds.utts.size());
  for (const Utterance& u : ds.utts) {
    PhoneSeq seq{u.utt_id, {}};
    for (int32_t p : u.phone_seq) seq.syms.push_back(ds.spec.phones[static_cast<size_t>(p)]);
    out.push_back(std::move(seq));
  }
  return out;
}

namespace {

nlohmann::json spec_to_json(const LexiconSpec& spec) {
  nlohmann::json j;
  j["phones"] = spec.phones;
  j["vowel"] = spec.vowel;
  j["words"] = spec.words;
  j["emission_ids"] = spec.emission_ids;
  j["emission_probs"] = spec.emission_probs;
  j["vocab_size"] = spec.vocab_size;
  j["duration_min"] = spec.duration_min;
  j["duration_max"] = spec.duration_max;
  j["feature_dim"] = spec.feature_dim;
  j["centroid_spread"] = spec.centroid_spread;
  j["noise_sigma"] = spec.noise_sigma;
  return j;
}

LexiconSpec spec_from_json(const nlohmann::json& j) {
  LexiconSpec spec;
  spec.phones = j.at("phones").get<std::vector<std::string>>();
  spec.vowel = j.at("vowel").get<std::vector<uint8_t>>();
  spec.words = j.at("words").get<std::vector<std::vector<int32_t>>>();
  spec.emission_ids = j.at("emission_ids").get<std::vector<std::vector<int32_t>>>();
  spec.emission_probs = j.at("emission_probs").get<std::vector<std::vector<double>>>();
  spec.vocab_size = j.at("vocab_size").get<int32_t>();
  spec.duration_min = j.at("duration_min").get<int32_t>();
  spec.duration_max = j.at("duration_max").get<int32_t>();
  spec.feature_dim = j.at("feature_dim").get<int32_t>();
  spec.centroid_spread = j.at("centroid_spread").get<double>();
  spec.noise_sigma = j.at("noise_sigma").get<double>();
  return spec;
}

}  // namespace

void write_dataset(const Dataset& ds, const std::string& dir) {
  fs::create_directories(fs::path(dir) / "features");
  UnitVocab vocab(ds.spec.vocab_size);

  write_sequences_file((fs::path(dir) / "clusters.txt").string(), cluster_sequences(ds), vocab);
  write_sequences_file((fs::path(dir) / "standard_clusters.txt").string(),
                       standard_cluster_sequences(ds), vocab);
  write_phone_lines_file((fs::path(dir) / "frame_phones.txt").string(), frame_phone_lines(ds));
  write_phone_lines_file((fs::path(dir) / "ref_phones.txt").string(), ref_phone_lines(ds));

  std::ofstream manifest((fs::path(dir) / "manifest.jsonl").string(), std::ios::binary);
  if (!manifest) throw IoError("corpus: cannot write manifest in " + dir);
  for (const Utterance& u : ds.utts) {
    std::string feat_rel = "features/" + u.utt_id + ".acft";
    write_features_file((fs::path(dir) / feat_rel).string(), u.features);
    nlohmann::json j;
    j["utt_id"] = u.utt_id;
    j["accent"] = ds.accent_tag;
    j["features"] = feat_rel;
    j["frames"] = u.frames();
    j["clusters"] = "clusters.txt";
    j["frame_phones"] = "frame_phones.txt";
    j["standard_clusters"] = "standard_clusters.txt";
    std::string ref;
    for (size_t s = 0; s < u.phone_seq.size(); ++s) {
      if (s) ref += ' ';
      ref += ds.spec.phones[static_cast<size_t>(u.phone_seq[s])];
    }
    j["ref_phones"] = ref;
    manifest << j.dump() << '\n';
  }

  nlohmann::json lex;
  lex["spec"] = spec_to_json(ds.spec);
  lex["accent"] = ds.accent_tag;
  std::vector<std::vector<double>> centroid_rows(ds.centroids.rows);
  for (size_t r = 0; r < ds.centroids.rows; ++r)
    centroid_rows[r].assign(ds.centroids.row(r), ds.centroids.row(r) + ds.centroids.cols);
  lex["centroids"] = centroid_rows;
  std::ofstream lexos((fs::path(dir) / "lexicon.json").string(), std::ios::binary);
  if (!lexos) throw IoError("corpus: cannot write lexicon.json in " + dir);
  lexos << lex.dump(2) << '\n';
}

Dataset read_dataset(const std::string& dir) {
  std::ifstream lexis((fs::path(dir) / "lexicon.json").string(), std::ios::binary);
  if (!lexis) throw IoError("corpus: cannot open lexicon.json in " + dir);
  nlohmann::json lex;
  lexis >> lex;

  Dataset ds;
  ds.spec = spec_from_json(lex.at("spec"));
  ds.accent_tag = lex.at("accent").get<std::string>();
  auto centroid_rows = lex.at("centroids").get<std::vector<std::vector<double>>>();
  ds.centroids = Mat<double>(centroid_rows.size(), static_cast<size_t>(ds.spec.feature_dim));
  for (size_t r = 0; r < centroid_rows.size(); ++r)
    std::copy(centroid_rows[r].begin(), centroid_rows[r].end(), ds.centroids.row(r));

  UnitVocab vocab(ds.spec.vocab_size);
  auto clusters = read_sequences_file((fs::path(dir) / "clusters.txt").string(), vocab);
  auto standard = read_sequences_file((fs::path(dir) / "standard_clusters.txt").string(), vocab);
  auto frame_phones = read_phone_lines_file((fs::path(dir) / "frame_phones.txt").string());
  auto refs = read_phone_lines_file((fs::path(dir) / "ref_phones.txt").string());

  std::ifstream manifest((fs::path(dir) / "manifest.jsonl").string(), std::ios::binary);
  if (!manifest) throw IoError("corpus: cannot open manifest.jsonl in " + dir);

  auto index_of = [&](const auto& vec, const std::string& id) -> size_t {
    for (size_t i = 0; i < vec.size(); ++i)
      if (vec[i].utt_id == id) return i;
    throw IoError("corpus: utterance " + id + " missing from sidecar file");
  };

  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    Utterance u;
    u.utt_id = j.at("utt_id").get<std::string>();
    u.features = read_features_file((fs::path(dir) / j.at("features").get<std::string>()).string());
    u.clusters = clusters[index_of(clusters, u.utt_id)].tokens;
    u.standard_clusters = standard[index_of(standard, u.utt_id)].tokens;
    const PhoneSeq& fp = frame_phones[index_of(frame_phones, u.utt_id)];
    for (const std::string& sym : fp.syms) {
      int32_t p = ds.spec.phone_id(sym);
      require(p >= 0, "corpus: unknown phone symbol " + sym + " in " + u.utt_id);
      u.frame_phones.push_back(p);
    }
    const PhoneSeq& rp = refs[index_of(refs, u.utt_id)];
    for (const std::string& sym : rp.syms) {
      int32_t p = ds.spec.phone_id(sym);
      require(p >= 0, "corpus: unknown phone symbol " + sym + " in refs of " + u.utt_id);
      u.phone_seq.push_back(p);
    }
    u.realized_phones.clear();  // per-segment realization is not persisted
    size_t frames = j.at("frames").get<size_t>();
    require(frames == u.clusters.size() && frames == u.standard_clusters.size() &&
                frames == u.frame_phones.size() && frames == u.features.rows,
            "corpus: frame count disagreement for utterance " + u.utt_id);
    ds.utts.push_back(std::move(u));
  }
  return ds;
}

void validate_dataset_dir(const std::string& dir) {
  read_dataset(dir);  // read_dataset enforces every agreement invariant
}

}  // namespace unitcorr::corpus
