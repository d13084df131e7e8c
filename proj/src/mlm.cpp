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

#include "unitcorr/mlm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "unitcorr/error.hpp"

namespace unitcorr::mlm {

void SpanMaskPolicy::validate() const {
  require(span_len >= 1, "mlm: span_len must be >= 1");
  require(p_mask > 0.0 && p_mask < 1.0, "mlm: p_mask must be in (0,1)");
  require(replace_mask >= 0.0 && replace_random >= 0.0 && replace_keep >= 0.0,
          "mlm: replacement probabilities must be non-negative");
  require(std::abs(replace_mask + replace_random + replace_keep - 1.0) < 1e-9,
          "mlm: replacement probabilities must sum to 1");
}

std::vector<size_t> select_mask_spans(size_t frames, int32_t span_len, double p_mask, Rng& rng) {
  size_t target = static_cast<size_t>(std::floor(p_mask * static_cast<double>(frames) + 1e-9));
  std::vector<uint8_t> selected(frames, 0);
  size_t covered = 0;
  size_t len = static_cast<size_t>(span_len);

  std::vector<size_t> starts;
  starts.reserve(frames);
  while (covered < target) {
    // placements whose span (truncated at the end) is fully unselected
    starts.clear();
    size_t free_run = 0;
    for (size_t pos = frames; pos-- > 0;) {
      free_run = selected[pos] ? 0 : free_run + 1;
      bool fits = free_run >= len || (!selected[pos] && pos + free_run == frames);
      if (fits) starts.push_back(pos);
    }
    if (starts.empty()) break;
    std::reverse(starts.begin(), starts.end());  // ascending for the draw
    size_t s = starts[rng.next_index(starts.size())];
    size_t e = std::min(s + len, frames);
    for (size_t i = s; i < e; ++i) selected[i] = 1;
    covered += e - s;
  }

  std::vector<size_t> positions;
  positions.reserve(covered);
  for (size_t i = 0; i < frames; ++i)
    if (selected[i]) positions.push_back(i);
  return positions;
}

SpanMaskResult apply_span_mask(const ClusterSequence& seq, const SpanMaskPolicy& policy,
                               const UnitVocab& vocab, Rng& rng) {
  policy.validate();
  require(!seq.tokens.empty(), "mlm: cannot mask an empty sequence");
  for (int32_t tok : seq.tokens)
    require(vocab.is_unit(tok), "mlm: masking input already contains non-unit tokens");

  SpanMaskResult result;
  result.target = static_cast<size_t>(
      std::floor(policy.p_mask * static_cast<double>(seq.tokens.size()) + 1e-9));
  result.corrupted = seq.tokens;
  result.positions = select_mask_spans(seq.tokens.size(), policy.span_len, policy.p_mask, rng);

  for (size_t pos : result.positions) {
    double u = rng.next_double();
    if (u < policy.replace_mask) {
      result.corrupted[pos] = vocab.mask_id();
    } else if (u < policy.replace_mask + policy.replace_random) {
      result.corrupted[pos] = static_cast<int32_t>(rng.next_index(static_cast<size_t>(vocab.size)));
    }  // else keep the original token
  }
  return result;
}

SpanMaskResult apply_span_mask(const ClusterSequence& seq, const SpanMaskPolicy& policy,
                               const UnitVocab& vocab, uint64_t seed) {
  Rng rng(seed);
  return apply_span_mask(seq, policy, vocab, rng);
}

std::vector<double> score_confidences(const UnitScorer& scorer, const ClusterSequence& seq) {
  for (int32_t tok : seq.tokens)
    require(tok >= 0 && tok < scorer.vocab_size(),
            "mlm: mask or out-of-vocabulary token in scoring input");
  Mat<double> dist = scorer.distributions(seq.tokens);
  std::vector<double> conf(seq.tokens.size());
  for (size_t i = 0; i < seq.tokens.size(); ++i)
    conf[i] = dist(i, static_cast<size_t>(seq.tokens[i]));
  return conf;
}

MaskedPrediction predict_masked(const UnitScorer& scorer, std::span<const int32_t> tokens,
                                const UnitVocab& vocab) {
  MaskedPrediction pred;
  for (size_t i = 0; i < tokens.size(); ++i)
    if (tokens[i] == vocab.mask_id()) pred.positions.push_back(i);
  require(!pred.positions.empty(), "mlm: predict_masked needs at least one mask");

  Mat<double> dist = scorer.distributions(tokens);
  for (size_t pos : pred.positions) {
    const double* row = dist.row(pos);
    size_t best = 0;
    for (size_t u = 1; u < dist.cols; ++u)
      if (row[u] > row[best]) best = u;
    pred.units.push_back(static_cast<int32_t>(best));
    pred.confidences.push_back(row[best]);
  }
  return pred;
}

// ---- neural scorer ----

NeuralScorer::NeuralScorer(neural::Encoder<float> model) : model_(std::move(model)) {
  require(model_.cfg.input_kind == neural::InputKind::Tokens,
          "mlm: neural scorer needs a token-input encoder");
  require(model_.cfg.vocab_out == model_.cfg.vocab_in,
          "mlm: scorer output support must match the unit vocabulary");
}

Mat<double> NeuralScorer::distributions(std::span<const int32_t> tokens) const {
  neural::EncoderInput input;
  input.tokens.assign(tokens.begin(), tokens.end());
  auto out = model_.forward(input, false, nullptr);
  Mat<double> dist(out.logits.rows, out.logits.cols);
  for (size_t i = 0; i < out.logits.rows; ++i) {
    const float* z = out.logits.row(i);
    double mx = static_cast<double>(z[0]);
    for (size_t j = 1; j < out.logits.cols; ++j) mx = std::max(mx, static_cast<double>(z[j]));
    double sum = 0.0;
    for (size_t j = 0; j < out.logits.cols; ++j) {
      double e = std::exp(static_cast<double>(z[j]) - mx);
      dist(i, j) = e;
      sum += e;
    }
    double inv = 1.0 / sum;
    for (size_t j = 0; j < out.logits.cols; ++j) dist(i, j) *= inv;
  }
  return dist;
}

std::string format_train_log(std::span<const TrainLogEntry> log) {
  std::string out = "step,loss,lr\n";
  char buf[96];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g\n", static_cast<long long>(e.step), e.loss,
                  e.lr);
    out += buf;
  }
  return out;
}

MlmTrainResult train_mlm(std::span<const ClusterSequence> corpus, const UnitVocab& vocab,
                         const MlmTrainConfig& cfg, uint64_t seed) {
  require(!corpus.empty(), "mlm: empty training corpus");
  for (const auto& seq : corpus)
    for (int32_t tok : seq.tokens)
      require(vocab.is_unit(tok), "mlm: training corpus contains non-unit tokens");

  neural::EncoderConfig ecfg = cfg.encoder;
  ecfg.input_kind = neural::InputKind::Tokens;
  ecfg.vocab_in = vocab.size;
  ecfg.vocab_out = vocab.size;
  ecfg.validate();
  cfg.policy.validate();
  cfg.lr.validate();
  require(cfg.batch_size >= 1, "mlm: batch_size must be >= 1");

  MlmTrainResult result;
  result.model = neural::Encoder<float>::random_init(ecfg, seed);
  Rng root(seed);

  for (int64_t step = 1; step <= cfg.steps; ++step) {
    Rng step_rng = root.derive(0x5E9, static_cast<uint64_t>(step));
    std::vector<neural::TrainExample> batch;
    Rng drop_rng = step_rng.derive(0xD0);
    for (int32_t b = 0; b < cfg.batch_size; ++b) {
      const ClusterSequence& seq = corpus[step_rng.next_index(corpus.size())];
      if (seq.tokens.empty()) continue;
      Rng mask_rng = step_rng.derive(0xFA, static_cast<uint64_t>(b));
      SpanMaskResult masked = apply_span_mask(seq, cfg.policy, vocab, mask_rng);
      if (masked.positions.empty()) continue;  // too short for this policy
      neural::TrainExample ex;
      ex.input.tokens = masked.corrupted;
      ex.targets = seq.tokens;
      ex.loss_mask.assign(seq.tokens.size(), 0);
      for (size_t pos : masked.positions) ex.loss_mask[pos] = 1;
      batch.push_back(std::move(ex));
    }
    if (batch.empty()) continue;
    double loss = result.model.loss_and_grads(batch, &drop_rng);
    result.model.optimizer_step(step, cfg.lr);
    result.log.push_back({step, loss, cfg.lr.lr_at(step)});
  }
  return result;
}

// ---- count scorer ----

CountScorer::CountScorer(int32_t vocab, double add_k) : vocab_(vocab), add_k_(add_k) {
  require(vocab >= 1, "mlm: count scorer needs a positive vocabulary");
  require(add_k > 0.0, "mlm: add-k smoothing must be > 0");
}

void CountScorer::fit(std::span<const ClusterSequence> corpus) {
  require(!corpus.empty(), "mlm: empty corpus for count scorer");
  for (const auto& seq : corpus) {
    const auto& toks = seq.tokens;
    for (size_t i = 0; i < toks.size(); ++i) {
      require(toks[i] >= 0 && toks[i] < vocab_, "mlm: count scorer saw an out-of-range unit");
      int32_t l = i > 0 ? toks[i - 1] : bos();
      int32_t r = i + 1 < toks.size() ? toks[i + 1] : eos();
      ++tri_[{l, r}][toks[i]];
      ++after_left_[l][toks[i]];
      ++before_right_[r][toks[i]];
      ++unigram_[toks[i]];
    }
  }
}

CountScorer fit_count_scorer(std::span<const ClusterSequence> corpus, const UnitVocab& vocab,
                             double add_k) {
  CountScorer scorer(vocab.size, add_k);
  scorer.fit(corpus);
  return scorer;
}

namespace {

// (count + k) / (total + kV) over the unit support.
void add_k_distribution(const std::map<int32_t, int64_t>* counts, int32_t vocab, double k,
                        double weight, std::vector<double>* out) {
  int64_t total = 0;
  if (counts)
    for (const auto& [u, n] : *counts) total += n;
  double denom = static_cast<double>(total) + k * static_cast<double>(vocab);
  double base = weight * k / denom;
  for (int32_t u = 0; u < vocab; ++u) (*out)[static_cast<size_t>(u)] += base;
  if (counts)
    for (const auto& [u, n] : *counts)
      (*out)[static_cast<size_t>(u)] += weight * static_cast<double>(n) / denom;
}

}  // namespace

std::vector<double> CountScorer::one_sided(int32_t ctx, bool left_side) const {
  std::vector<double> p(static_cast<size_t>(vocab_), 0.0);
  const auto& table = left_side ? after_left_ : before_right_;
  auto it = table.find(ctx);
  add_k_distribution(it != table.end() ? &it->second : nullptr, vocab_, add_k_, 1.0, &p);
  return p;
}

std::vector<double> CountScorer::unigram() const {
  std::vector<double> p(static_cast<size_t>(vocab_), 0.0);
  add_k_distribution(&unigram_, vocab_, add_k_, 1.0, &p);
  return p;
}

std::vector<double> CountScorer::context_distribution(int32_t left, int32_t right) const {
  std::vector<double> p(static_cast<size_t>(vocab_), 0.0);
  auto tri_it = tri_.find({left, right});
  if (tri_it != tri_.end() && !tri_it->second.empty()) {
    add_k_distribution(&tri_it->second, vocab_, add_k_, 1.0, &p);
    return p;
  }
  auto l_it = after_left_.find(left);
  auto r_it = before_right_.find(right);
  add_k_distribution(l_it != after_left_.end() ? &l_it->second : nullptr, vocab_, add_k_, 0.5, &p);
  add_k_distribution(r_it != before_right_.end() ? &r_it->second : nullptr, vocab_, add_k_, 0.5,
                     &p);
  return p;
}

Mat<double> CountScorer::distributions(std::span<const int32_t> tokens) const {
  int32_t mask_id = vocab_;
  Mat<double> dist(tokens.size(), static_cast<size_t>(vocab_));
  for (size_t i = 0; i < tokens.size(); ++i) {
    bool left_adjacent = i == 0 || tokens[i - 1] != mask_id;
    bool right_adjacent = i + 1 >= tokens.size() || tokens[i + 1] != mask_id;
    std::vector<double> p;
    if (left_adjacent && right_adjacent) {
      int32_t l = i == 0 ? bos() : tokens[i - 1];
      int32_t r = i + 1 >= tokens.size() ? eos() : tokens[i + 1];
      p = context_distribution(l, r);
    } else if (left_adjacent) {
      p = one_sided(i == 0 ? bos() : tokens[i - 1], true);
    } else if (right_adjacent) {
      p = one_sided(i + 1 >= tokens.size() ? eos() : tokens[i + 1], false);
    } else {
      p = unigram();
    }
    std::copy(p.begin(), p.end(), dist.row(i));
  }
  return dist;
}

namespace {

nlohmann::json table_to_json(const std::map<int32_t, std::map<int32_t, int64_t>>& table) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [ctx, counts] : table) {
    nlohmann::json entry = nlohmann::json::array();
    entry.push_back(ctx);
    nlohmann::json cj = nlohmann::json::array();
    for (const auto& [u, n] : counts) cj.push_back({u, n});
    entry.push_back(cj);
    arr.push_back(entry);
  }
  return arr;
}

void table_from_json(const nlohmann::json& arr,
                     std::map<int32_t, std::map<int32_t, int64_t>>* table) {
  for (const auto& entry : arr) {
    int32_t ctx = entry.at(0).get<int32_t>();
    for (const auto& cj : entry.at(1))
      (*table)[ctx][cj.at(0).get<int32_t>()] = cj.at(1).get<int64_t>();
  }
}

}  // namespace

void CountScorer::save_json(const std::string& path) const {
  nlohmann::json j;
  j["kind"] = "count";
  j["vocab"] = vocab_;
  j["add_k"] = add_k_;
  nlohmann::json tri = nlohmann::json::array();
  for (const auto& [ctx, counts] : tri_) {
    nlohmann::json entry = nlohmann::json::array();
    entry.push_back(ctx.first);
    entry.push_back(ctx.second);
    nlohmann::json cj = nlohmann::json::array();
    for (const auto& [u, n] : counts) cj.push_back({u, n});
    entry.push_back(cj);
    tri.push_back(entry);
  }
  j["tri"] = tri;
  j["after_left"] = table_to_json(after_left_);
  j["before_right"] = table_to_json(before_right_);
  nlohmann::json uni = nlohmann::json::array();
  for (const auto& [u, n] : unigram_) uni.push_back({u, n});
  j["unigram"] = uni;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("mlm: cannot open " + path + " for writing");
  os << j.dump() << '\n';
}

CountScorer CountScorer::load_json(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("mlm: cannot open " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("mlm: bad count scorer JSON in " + path + ": " + e.what());
  }
  if (!j.contains("kind") || j.at("kind").get<std::string>() != "count")
    throw IoError("mlm: " + path + " is not a count scorer file");
  CountScorer scorer(j.at("vocab").get<int32_t>(), j.at("add_k").get<double>());
  for (const auto& entry : j.at("tri")) {
    std::pair<int32_t, int32_t> ctx{entry.at(0).get<int32_t>(), entry.at(1).get<int32_t>()};
    for (const auto& cj : entry.at(2))
      scorer.tri_[ctx][cj.at(0).get<int32_t>()] = cj.at(1).get<int64_t>();
  }
  table_from_json(j.at("after_left"), &scorer.after_left_);
  table_from_json(j.at("before_right"), &scorer.before_right_);
  for (const auto& cj : j.at("unigram"))
    scorer.unigram_[cj.at(0).get<int32_t>()] = cj.at(1).get<int64_t>();
  return scorer;
}

std::unique_ptr<UnitScorer> load_scorer(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("mlm: cannot open scorer " + path);
  char magic[4] = {0, 0, 0, 0};
  is.read(magic, 4);
  is.close();
  if (std::memcmp(magic, "ENCP", 4) == 0)
    return std::make_unique<NeuralScorer>(neural::Encoder<float>::load(path));
  return std::make_unique<CountScorer>(CountScorer::load_json(path));
}

}  // namespace unitcorr::mlm
