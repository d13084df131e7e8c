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

// Integration acceptance suite. Each criterion prints one PASS/FAIL line;
// the process exits non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "acceptance_lib.hpp"
#include "test_util.hpp"
#include "unitcorr/quantizer.hpp"

namespace fs = std::filesystem;
using namespace unitcorr;

namespace {

struct Failure : std::runtime_error {
  explicit Failure(const std::string& msg) : std::runtime_error(msg) {}
};

void expect(bool cond, const std::string& msg) {
  if (!cond) throw Failure(msg);
}

struct Suite {
  int failures = 0;

  void criterion(int id, const std::string& name, const std::function<void()>& body) {
    auto start = std::chrono::steady_clock::now();
    try {
      body();
      double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::printf("[PASS] criterion %2d: %s (%.1fs)\n", id, name.c_str(), secs);
    } catch (const std::exception& e) {
      ++failures;
      std::printf("[FAIL] criterion %2d: %s: %s\n", id, name.c_str(), e.what());
    }
    std::fflush(stdout);
  }
};

fs::path work_dir() {
  auto dir = fs::temp_directory_path() / "unitcorr_acceptance";
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// ---- shared fixtures, computed at most once ----

const acceptance::E2eData& e2e() {
  static acceptance::E2eData data = acceptance::run_e2e();
  return data;
}

const acceptance::AdaptOutcome& adapter_outcome() {
  static acceptance::AdaptOutcome out =
      acceptance::run_adapter_experiment(e2e(), work_dir().string());
  return out;
}

nlohmann::json recorded_run() {
  std::ifstream is(UNITCORR_RECORDED_RUN, std::ios::binary);
  if (!is) throw Failure("missing recorded oracle run at " UNITCORR_RECORDED_RUN);
  nlohmann::json j;
  is >> j;
  return j;
}

// Deterministic pseudo-random row-stochastic scorer for the property suite.
class HashScorer : public mlm::UnitScorer {
 public:
  explicit HashScorer(int32_t vocab, uint64_t salt) : vocab_(vocab), salt_(salt) {}
  int32_t vocab_size() const override { return vocab_; }
  Mat<double> distributions(std::span<const int32_t> tokens) const override {
    Mat<double> dist(tokens.size(), static_cast<size_t>(vocab_));
    for (size_t i = 0; i < tokens.size(); ++i) {
      double sum = 0;
      for (size_t u = 0; u < static_cast<size_t>(vocab_); ++u) {
        double v = 0.05 + 0.9 * Rng(salt_).derive(i, u).next_double();
        dist(i, u) = v;
        sum += v;
      }
      for (size_t u = 0; u < static_cast<size_t>(vocab_); ++u) dist(i, u) /= sum;
    }
    return dist;
  }

 private:
  int32_t vocab_;
  uint64_t salt_;
};

class PerfectScorer : public mlm::UnitScorer {
 public:
  PerfectScorer(int32_t vocab, std::vector<int32_t> original)
      : vocab_(vocab), original_(std::move(original)) {}
  int32_t vocab_size() const override { return vocab_; }
  Mat<double> distributions(std::span<const int32_t> tokens) const override {
    Mat<double> dist(tokens.size(), static_cast<size_t>(vocab_));
    for (size_t i = 0; i < tokens.size(); ++i) {
      int32_t u = tokens[i] == vocab_ ? original_[i] : tokens[i];
      dist(i, static_cast<size_t>(u)) = 1.0;
    }
    return dist;
  }

 private:
  int32_t vocab_;
  std::vector<int32_t> original_;
};

PhoneMap modulo_phone_map(int32_t vocab) {
  PhoneMap map;
  map.inventory.phones = {"AA", "B", "C", "D", PhoneInventory::kUnknownSymbol};
  map.inventory.vowel = {1, 0, 0, 0, 0};
  map.mapping.resize(static_cast<size_t>(vocab));
  for (int32_t c = 0; c < vocab; ++c) map.mapping[static_cast<size_t>(c)] = c % 4;
  map.counts = Mat<int64_t>(static_cast<size_t>(vocab), 5);
  return map;
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(UNITCORR_CLI_BIN) + " " + args + " >> " +
                    (work_dir() / "cli_log.txt").string() + " 2>&1";
  int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

// ---- criterion bodies ----

void criterion_schedule() {
  corrector::MaskSchedule s = corrector::build_schedule(100, 10, 0.2);
  expect(s.n_max == 20, "n_max must be 20");
  expect(s.m == 2, "m must be 2");
  std::vector<size_t> expected = {20, 18, 16, 14, 12, 10, 8, 6, 4, 2};
  expect(s.n_k == expected, "n_k sequence mismatch");
}

void criterion_corrector_properties() {
  UnitVocab vocab(8);
  PhoneMap map = modulo_phone_map(8);
  Rng rng(2222);
  size_t cases = 0;
  while (cases < 1000) {
    size_t len = 1 + rng.next_index(50);
    std::vector<int32_t> tokens(len);
    for (auto& t : tokens) t = static_cast<int32_t>(rng.next_index(8));
    int32_t iters = 1 + static_cast<int32_t>(rng.next_index(8));
    double p_mask = 0.05 + 0.85 * rng.next_double();
    corrector::CorrectionVariant variant;
    variant.grouping =
        rng.next_index(2) ? corrector::Grouping::ByPhone : corrector::Grouping::ByCluster;
    variant.fill = rng.next_index(2) ? corrector::FillMode::FillAll : corrector::FillMode::TopM;
    if (rng.next_index(2)) variant.vowels_after = static_cast<int32_t>(rng.next_index(3));
    HashScorer scorer(8, 31337 + cases);

    corrector::MaskSchedule schedule = corrector::build_schedule(len, iters, p_mask);
    std::vector<int32_t> state = tokens;
    if (!schedule.empty()) {
      for (int32_t k = 1; k <= iters; ++k) {
        std::vector<corrector::IterationTrace> traces;
        corrector::TraceSink sink = [&](const corrector::IterationTrace& t) {
          traces.push_back(t);
        };
        std::vector<int32_t> keys;
        if (variant.grouping == corrector::Grouping::ByPhone)
          for (int32_t tok : state) keys.push_back(map.phone_of(tok));
        GroupedSequence grouped = group_runs(ClusterSequence{"u", state}, keys);

        std::vector<int32_t> next =
            corrector::correct_iteration(state, scorer, vocab, schedule, k, variant, &map, &sink);
        expect(traces.size() == 1, "trace per iteration");
        const auto& t = traces[0];

        size_t masked_frames = 0;
        for (const auto& span : t.masked) {
          bool whole_group = false;
          for (const Group& g : grouped.groups)
            if (g.start == span.start && g.length == span.length && g.key == span.key)
              whole_group = true;
          expect(whole_group, "masked span must be a whole group");
          masked_frames += span.length;
          if (variant.vowels_after.has_value() && k > *variant.vowels_after) {
            bool vowel = variant.grouping == corrector::Grouping::ByPhone
                             ? map.phone_is_vowel(span.key)
                             : map.cluster_is_vowel(span.key);
            expect(vowel, "late iterations may only mask vowel groups");
          }
        }
        size_t candidate_frames = 0;
        for (const Group& g : grouped.groups) {
          bool pass = true;
          if (variant.vowels_after.has_value() && k > *variant.vowels_after)
            pass = variant.grouping == corrector::Grouping::ByPhone
                       ? map.phone_is_vowel(g.key)
                       : map.cluster_is_vowel(g.key);
          if (pass) candidate_frames += g.length;
        }
        expect(masked_frames >=
                   std::min(schedule.n_k[static_cast<size_t>(k - 1)], candidate_frames),
               "masking lower bound");

        size_t filled_frames = 0;
        for (const auto& span : t.filled) filled_frames += span.length;
        if (variant.fill == corrector::FillMode::FillAll)
          expect(filled_frames == masked_frames, "fill-all must fill every masked frame");
        else if (masked_frames >= schedule.m)
          expect(filled_frames >= schedule.m, "fill lower bound");

        expect(next.size() == state.size(), "length preservation");
        for (int32_t tok : next) expect(vocab.is_unit(tok), "no mask ids in output");
        state = next;
      }
    } else {
      ClusterSequence out =
          corrector::correct(ClusterSequence{"u", tokens}, scorer, vocab, iters, p_mask, variant,
                             &map);
      expect(out.tokens == tokens, "no-op schedule must not change the input");
    }

    // fixed point under a perfect-confidence scorer
    PerfectScorer perfect(8, tokens);
    ClusterSequence fixed =
        corrector::correct(ClusterSequence{"u", tokens}, perfect, vocab, iters, p_mask,
                           corrector::CorrectionVariant{});
    expect(fixed.tokens == tokens, "perfect scorer must be a fixed point");
    ++cases;
  }
}

void criterion_worked_example() {
  UnitVocab vocab(500);
  const std::vector<int32_t> input = {7,   345, 181, 181, 181, 181, 468, 406, 406,
                                      467, 356, 356, 356, 281, 281, 453, 9,   9};
  std::vector<double> conf(18, 0.9);
  for (size_t i = 2; i <= 5; ++i) conf[i] = 0.01;
  for (size_t i = 10; i <= 12; ++i) conf[i] = 0.02;

  struct Scripted : mlm::UnitScorer {
    std::vector<double> conf;
    int32_t vocab_size() const override { return 500; }
    Mat<double> distributions(std::span<const int32_t> tokens) const override {
      Mat<double> dist(tokens.size(), 500);
      for (size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i] == 500) {
          if (i == 2 || i == 3) dist(i, 109) = 0.95;
          else if (i == 4 || i == 5) dist(i, 264) = 0.95;
          else dist(i, 356) = 0.10;
        } else {
          dist(i, static_cast<size_t>(tokens[i])) = conf[i];
        }
      }
      return dist;
    }
  } scorer;
  scorer.conf = conf;

  corrector::MaskSchedule schedule = corrector::build_schedule(18, 2, 0.35);
  std::vector<corrector::IterationTrace> traces;
  corrector::TraceSink sink = [&](const corrector::IterationTrace& t) { traces.push_back(t); };
  std::vector<int32_t> out = corrector::correct_iteration(
      input, scorer, vocab, schedule, 1, corrector::CorrectionVariant{}, nullptr, &sink);

  // reconstruct the masked view from the trace and compare with the
  // published masked-inputs row
  std::vector<int32_t> masked_view = input;
  for (const auto& span : traces.at(0).masked)
    for (size_t i = 0; i < span.length; ++i) masked_view[span.start + i] = vocab.mask_id();
  std::vector<int32_t> expected_masked = {7,   345, 500, 500, 500, 500, 468, 406, 406,
                                          467, 500, 500, 500, 281, 281, 453, 9,   9};
  expect(masked_view == expected_masked, "masked view must equal the published row");

  std::vector<int32_t> expected_out = {7,   345, 109, 109, 264, 264, 468, 406, 406,
                                       467, 356, 356, 356, 281, 281, 453, 9,   9};
  expect(out == expected_out, "output must equal the published row");
}

void criterion_per_oracle() {
  Rng rng(606);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int32_t> hyp(rng.next_index(31)), ref(1 + rng.next_index(30));
    for (auto& t : hyp) t = static_cast<int32_t>(rng.next_index(40));
    for (auto& t : ref) t = static_cast<int32_t>(rng.next_index(40));
    testutil::OracleEdit oracle = testutil::oracle_levenshtein(hyp, ref);
    EditStats stats = phone_error_rate(hyp, ref);
    expect(stats.edits() == oracle.cost, "edit totals must match the oracle");
    expect(stats.subs == oracle.subs && stats.dels == oracle.dels && stats.ins == oracle.ins,
           "edit split must match the oracle");
    EditStats self = phone_error_rate(ref, ref);
    expect(self.per() == 0.0, "identity must score zero");
  }
}

void criterion_gradients() {
  neural::EncoderConfig cfg;
  cfg.layers = 2;
  cfg.model_dim = 16;
  cfg.heads = 2;
  cfg.ffn_dim = 32;
  cfg.max_len = 12;
  cfg.input_kind = neural::InputKind::Tokens;
  cfg.vocab_in = 10;
  cfg.vocab_out = 10;
  auto enc = neural::Encoder<double>::random_init(cfg, 404);
  enc.insert_adapters(neural::AdapterConfig{4}, 405, 0.1);
  enc.freeze_all(false);  // every parameter kind contributes

  neural::TrainExample a, b;
  a.input.tokens = {1, 2, 3, 4, 5, 6};
  a.targets = {6, 5, 4, 3, 2, 1};
  a.loss_mask = {1, 0, 1, 1, 0, 1};
  b.input.tokens = {9, 0, 10, 2};  // includes the mask id
  b.targets = {0, 9, 2, 0};
  b.loss_mask = {1, 1, 1, 0};
  std::vector<neural::TrainExample> batch = {a, b};

  enc.loss_and_grads(batch);
  std::vector<Mat<double>> grads;
  for (const auto& p : enc.params) grads.push_back(p.grad);

  const double eps = 1e-5;
  double worst = 0.0;
  for (size_t pi = 0; pi < enc.params.size(); ++pi) {
    auto& p = enc.params[pi];
    for (size_t i = 0; i < p.value.data.size(); ++i) {
      double saved = p.value.data[i];
      p.value.data[i] = saved + eps;
      double up = enc.loss_only(batch);
      p.value.data[i] = saved - eps;
      double down = enc.loss_only(batch);
      p.value.data[i] = saved;
      double fd = (up - down) / (2.0 * eps);
      double g = grads[pi].data[i];
      worst = std::max(worst, std::abs(fd - g) / std::max({std::abs(fd), std::abs(g), 1e-8}));
    }
  }
  expect(worst < 1e-3, "max relative gradient error " + std::to_string(worst));
}

void criterion_kmeans() {
  // spread/noise ratio 12 >= 10
  Rng rng(77);
  size_t v = 20, per = 100, dim = 8;
  Mat<double> centers(v, dim);
  for (auto& x : centers.data) x = 12.0 * rng.next_gaussian();
  Mat<float> frames(v * per, dim);
  std::vector<int32_t> labels;
  for (size_t c = 0; c < v; ++c)
    for (size_t i = 0; i < per; ++i) {
      labels.push_back(static_cast<int32_t>(c));
      for (size_t j = 0; j < dim; ++j)
        frames(c * per + i, j) = static_cast<float>(centers(c, j) + rng.next_gaussian());
    }
  // the fit itself asserts the objective is non-increasing every iteration
  quantizer::Codebook book = quantizer::fit_kmeans(frames, static_cast<int32_t>(v), 100, 1e-9, 3);
  auto idx = quantizer::assign(book, frames);
  double ari = testutil::adjusted_rand_index(idx, labels);
  expect(ari == 1.0, "adjusted Rand index " + std::to_string(ari) + " != 1.0");
}

void criterion_frozen_backbone() {
  const auto& out = adapter_outcome();
  expect(out.adapter_steps == 500, "adapter training must run 500 steps");
  expect(out.backbone_byte_identical, "backbone serialization changed during adapter training");
  expect(out.trainable == out.expected_trainable,
         "trainable count " + std::to_string(out.trainable) + " != closed form " +
             std::to_string(out.expected_trainable));
}

void criterion_e2e_direction() {
  const auto& data = e2e();
  nlohmann::json rec = recorded_run();
  double baseline = data.per.at("baseline");
  double corrected = data.per.at("cluster_top_m");
  expect(corrected < baseline, "corrected PER must be strictly below the uncorrected PER");
  for (const char* key : {"baseline", "cluster_top_m", "cluster_fill_all", "phone_top_m",
                          "phone_fill_all"}) {
    double fresh = data.per.at(key);
    double pinned = rec.at("per").at(key).get<double>();
    expect(std::abs(fresh - pinned) <= 0.5, std::string(key) + " drifted from the recorded run: " +
                                                std::to_string(fresh) + " vs " +
                                                std::to_string(pinned));
  }
}

void criterion_variant_ordering() {
  const auto& data = e2e();
  expect(data.per.at("cluster_fill_all") <= data.per.at("cluster_top_m"),
         "fill-all must not trail top-m under cluster grouping");
  expect(data.per.at("phone_fill_all") <= data.per.at("phone_top_m"),
         "fill-all must not trail top-m under phone grouping");
  expect(data.per.at("phone_top_m") <= data.per.at("cluster_top_m"),
         "phone groups must not trail cluster groups under top-m");
  expect(data.per.at("phone_fill_all") <= data.per.at("cluster_fill_all"),
         "phone groups must not trail cluster groups under fill-all");
}

void criterion_adapter_direction() {
  const auto& out = adapter_outcome();
  nlohmann::json rec = recorded_run();
  expect(out.corrected_acc > out.uncorrected_acc,
         "corrected-target training must beat uncorrected targets (" +
             std::to_string(out.corrected_acc) + " vs " + std::to_string(out.uncorrected_acc) +
             ")");
  double rec_corrected = rec.at("adapt").at("corrected_acc").get<double>();
  double rec_uncorrected = rec.at("adapt").at("uncorrected_acc").get<double>();
  expect(std::abs(out.corrected_acc - rec_corrected) <= 0.05,
         "corrected accuracy drifted from the recorded run");
  expect(std::abs(out.uncorrected_acc - rec_uncorrected) <= 0.05,
         "uncorrected accuracy drifted from the recorded run");
  double margin = out.corrected_acc - out.uncorrected_acc;
  double rec_margin = rec_corrected - rec_uncorrected;
  expect(margin >= rec_margin - 0.05, "margin fell below the recorded threshold");
}

void criterion_determinism() {
  auto dir = work_dir();
  auto cfg_path = dir / "pipeline.json";
  {
    std::ofstream os(cfg_path, std::ios::binary);
    os << R"({
      "seed": 31,
      "corpus": {"n_phones": 12, "V": 15, "word_len_min": 3, "word_len_max": 4,
                 "duration_min": 1, "duration_max": 1, "feature_dim": 4,
                 "disjoint_words": true, "cv_words": true,
                 "n_standard": 60, "n_accent": 20, "words_min": 4, "words_max": 8,
                 "shift": {"substitutions": {"AA": "AE", "IH": "EH"}, "apply_prob": 0.5}},
      "quantizer": {"V": 15, "max_iters": 60, "tol": 1e-7},
      "mlm": {"encoder": {"layers": 1, "model_dim": 16, "heads": 2, "ffn_dim": 32, "max_len": 64},
              "policy": {"span_len": 2, "p_mask": 0.2},
              "lr": {"peak": 1e-3, "warmup": 5, "total": 40},
              "batch_size": 4, "steps": 25, "count_smoothing": 0.01},
      "corrector": {"K": 4, "p_mask": 0.2},
      "adapt": {"encoder": {"layers": 1, "model_dim": 16, "heads": 2, "ffn_dim": 32, "max_len": 64},
                "bottleneck": 2, "mask": {"span_len": 2, "p_mask": 0.3},
                "lr": {"peak": 1e-3, "warmup": 5, "total": 40},
                "batch_size": 4, "steps": 15}
    })";
  }

  auto run_pipeline = [&](const std::string& tag, int jobs) {
    fs::path out = dir / tag;
    fs::remove_all(out);
    fs::create_directories(out);
    std::string base = "--config " + cfg_path.string() + " --jobs " + std::to_string(jobs) + " ";
    std::string corpus = (out / "corpus").string();
    expect(run_cli(base + "gen-corpus --out " + corpus) == 0, "gen-corpus failed");
    expect(run_cli(base + "kmeans-fit --data " + corpus + "/standard --out " + (out / "book.kmcb").string()) == 0,
           "kmeans-fit failed");
    expect(run_cli(base + "kmeans-assign --data " + corpus + "/standard --codebook " +
                   (out / "book.kmcb").string() + " --out " + (out / "assigned.txt").string()) == 0,
           "kmeans-assign failed");
    expect(run_cli(base + "mlm-train --kind count --clusters " + corpus +
                   "/standard/clusters.txt --v 15 --out " + (out / "count.json").string()) == 0,
           "count training failed");
    expect(run_cli(base + "mlm-train --kind neural --clusters " + corpus +
                   "/standard/clusters.txt --v 15 --out " + (out / "mlm.encp").string() +
                   " --log " + (out / "mlm_log.csv").string()) == 0,
           "mlm training failed");
    expect(run_cli(base + "phonemap-learn --clusters " + corpus +
                   "/standard/clusters.txt --frame-phones " + corpus +
                   "/standard/frame_phones.txt --v 15 --out " + (out / "map.json").string()) == 0,
           "phonemap failed");
    expect(run_cli(base + "score --scorer " + (out / "count.json").string() + " --clusters " +
                   corpus + "/shifted/clusters.txt --v 15 --out " + (out / "conf.txt").string()) ==
               0,
           "score failed");
    expect(run_cli(base + "correct --scorer " + (out / "count.json").string() + " --clusters " +
                   corpus + "/shifted/clusters.txt --v 15 --out " +
                   (out / "corrected.txt").string() + " --trace " + (out / "trace.jsonl").string()) ==
               0,
           "correct failed");
    expect(run_cli(base + "eval-per --hyp-clusters " + (out / "corrected.txt").string() +
                   " --phone-map " + (out / "map.json").string() + " --v 15 --ref " + corpus +
                   "/shifted/ref_phones.txt --out " + (out / "per.csv").string()) == 0,
           "eval-per failed");
    expect(run_cli(base + "adapt-pretrain --data " + corpus + "/standard --out " +
                   (out / "backbone.encp").string() + " --log " + (out / "pre_log.csv").string()) ==
               0,
           "adapt-pretrain failed");
    expect(run_cli(base + "adapt-train --model " + (out / "backbone.encp").string() + " --data " +
                   corpus + "/shifted --targets " + (out / "corrected.txt").string() + " --out " +
                   (out / "adapted.encp").string() + " --log " + (out / "cp_log.csv").string()) ==
               0,
           "adapt-train failed");
    expect(run_cli(base + "adapt-eval --model " + (out / "adapted.encp").string() + " --data " +
                   corpus + "/shifted --targets " + corpus + "/shifted/standard_clusters.txt" +
                   " --out " + (out / "eval.json").string()) == 0,
           "adapt-eval failed");
    return out;
  };

  fs::path serial = run_pipeline("jobs1", 1);
  fs::path parallel = run_pipeline("jobs4", 4);

  size_t compared = 0;
  for (auto it = fs::recursive_directory_iterator(serial); it != fs::recursive_directory_iterator();
       ++it) {
    if (!it->is_regular_file()) continue;
    fs::path rel = fs::relative(it->path(), serial);
    fs::path twin = parallel / rel;
    expect(fs::exists(twin), "missing artifact " + rel.string());
    expect(read_file(it->path().string()) == read_file(twin.string()),
           "artifact differs between --jobs 1 and --jobs 4: " + rel.string());
    ++compared;
  }
  expect(compared > 20, "expected a full artifact tree to compare");
}

}  // namespace

int main() {
  Suite suite;
  suite.criterion(1, "schedule exactness", criterion_schedule);
  suite.criterion(2, "corrector invariant property suite (1000 cases)",
                  criterion_corrector_properties);
  suite.criterion(3, "worked-example masking and filling mechanics", criterion_worked_example);
  suite.criterion(4, "phone error rate matches the brute-force oracle", criterion_per_oracle);
  suite.criterion(5, "analytic gradients match finite differences", criterion_gradients);
  suite.criterion(6, "k-means monotone objective and exact blob recovery", criterion_kmeans);
  suite.criterion(7, "frozen backbone invariance after 500 adapter steps",
                  criterion_frozen_backbone);
  suite.criterion(8, "end-to-end correction lowers corpus PER", criterion_e2e_direction);
  suite.criterion(9, "variant ordering matches the recorded run", criterion_variant_ordering);
  suite.criterion(10, "corrected targets adapt better than uncorrected",
                  criterion_adapter_direction);
  suite.criterion(11, "byte-identical pipeline artifacts across --jobs", criterion_determinism);

  if (suite.failures > 0) {
    std::printf("%d criterion(s) failed\n", suite.failures);
    return 1;
  }
  std::printf("all acceptance criteria passed\n");
  return 0;
}
