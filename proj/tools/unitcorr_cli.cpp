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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <unordered_map>

#include <CLI11.hpp>
#include <json.hpp>

#include "unitcorr/adapt.hpp"
#include "unitcorr/config.hpp"
#include "unitcorr/corpus.hpp"
#include "unitcorr/corrector.hpp"
#include "unitcorr/kernels.hpp"
#include "unitcorr/mlm.hpp"
#include "unitcorr/neural.hpp"
#include "unitcorr/phonemap.hpp"
#include "unitcorr/quantizer.hpp"
#include "unitcorr/seqcore.hpp"

namespace fs = std::filesystem;
using namespace unitcorr;

namespace {

constexpr const char* kVersion =
    "unitcorr 1.0.0 (formats: ACFT v1, KMCB v1, ENCP v1, config v1)";

struct GlobalOpts {
  std::string config_path;
  int64_t seed = -1;  // <0: use config value
  int32_t jobs = 0;   // 0: use config value
};

config::PipelineConfig load_effective_config(const GlobalOpts& g) {
  config::PipelineConfig cfg = g.config_path.empty()
                                   ? config::PipelineConfig::from_json_text("")
                                   : config::PipelineConfig::load(g.config_path);
  if (g.seed >= 0) cfg.seed = static_cast<uint64_t>(g.seed);
  if (g.jobs > 0) cfg.jobs = g.jobs;
  cfg.validate();
  kernels::set_jobs(cfg.jobs);
  return cfg;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cli: cannot open " + path + " for writing");
  os << text;
  if (!os) throw IoError("cli: short write to " + path);
}

uint64_t derived_seed(uint64_t seed, uint64_t stream) { return Rng(seed).derive(stream).next_u64(); }

std::vector<adapt::AdaptExample> build_adapt_examples(const corpus::Dataset& ds,
                                                      const std::vector<ClusterSequence>& targets) {
  std::unordered_map<std::string, const ClusterSequence*> by_id;
  for (const auto& t : targets) by_id[t.utt_id] = &t;
  std::vector<adapt::AdaptExample> out;
  for (const auto& u : ds.utts) {
    auto it = by_id.find(u.utt_id);
    require(it != by_id.end(), "cli: no target line for utterance " + u.utt_id);
    require(it->second->tokens.size() == u.features.rows,
            "cli: target frame count mismatch for " + u.utt_id);
    out.push_back({u.utt_id, u.features, it->second->tokens});
  }
  return out;
}

Mat<float> stack_features(const corpus::Dataset& ds) {
  size_t total = 0;
  for (const auto& u : ds.utts) total += u.features.rows;
  require(total > 0, "cli: dataset has no frames");
  Mat<float> all(total, static_cast<size_t>(ds.spec.feature_dim));
  size_t row = 0;
  for (const auto& u : ds.utts) {
    std::copy(u.features.data.begin(), u.features.data.end(), all.row(row));
    row += u.features.rows;
  }
  return all;
}

// ---- subcommands ----

void cmd_gen_corpus(const config::PipelineConfig& cfg, const std::string& out_dir) {
  corpus::LexiconSpec lex = corpus::generate_lexicon(cfg.corpus.lexicon, cfg.seed);
  corpus::Dataset standard = corpus::generate_standard(
      lex, cfg.corpus.n_standard, cfg.corpus.words_min, cfg.corpus.words_max, cfg.seed, "std");
  corpus::write_dataset(standard, (fs::path(out_dir) / "standard").string());

  if (cfg.corpus.n_accent > 0) {
    corpus::Dataset accent_source =
        corpus::generate_standard(lex, cfg.corpus.n_accent, cfg.corpus.words_min,
                                  cfg.corpus.words_max, derived_seed(cfg.seed, 0xACC), "acc");
    corpus::Dataset shifted =
        corpus::apply_accent_shift(accent_source, cfg.corpus.shift, derived_seed(cfg.seed, 0x5F7));
    corpus::write_dataset(shifted, (fs::path(out_dir) / "shifted").string());
  }
  std::printf("gen-corpus: %zu standard + %zu shifted utterances -> %s\n", cfg.corpus.n_standard,
              cfg.corpus.n_accent, out_dir.c_str());
}

void cmd_kmeans_fit(const config::PipelineConfig& cfg, const std::string& data_dir,
                    const std::string& out_path) {
  corpus::Dataset ds = corpus::read_dataset(data_dir);
  Mat<float> frames = stack_features(ds);
  quantizer::Codebook book =
      quantizer::fit_kmeans(frames, cfg.quantizer.v, cfg.quantizer.max_iters, cfg.quantizer.tol,
                            cfg.seed, cfg.quantizer.n_init);
  book.save(out_path);
  std::printf("kmeans-fit: V=%zu d=%zu inertia=%.6f -> %s\n", book.clusters(), book.dim(),
              book.inertia, out_path.c_str());
}

void cmd_kmeans_assign(const std::string& data_dir, const std::string& codebook_path,
                       const std::string& out_path) {
  corpus::Dataset ds = corpus::read_dataset(data_dir);
  quantizer::Codebook book = quantizer::Codebook::load(codebook_path);
  UnitVocab vocab(static_cast<int32_t>(book.clusters()));
  std::vector<ClusterSequence> out(ds.utts.size());
  kernels::parallel_for(ds.utts.size(), [&](size_t i) {
    out[i] = {ds.utts[i].utt_id, quantizer::assign(book, ds.utts[i].features)};
  });
  write_sequences_file(out_path, out, vocab);
  std::printf("kmeans-assign: %zu utterances -> %s\n", out.size(), out_path.c_str());
}

void cmd_mlm_train(const config::PipelineConfig& cfg, const std::string& clusters_path,
                   const std::string& kind, int32_t v, const std::string& out_path,
                   const std::string& log_path) {
  UnitVocab vocab(v);
  auto seqs = read_sequences_file(clusters_path, vocab);
  if (kind == "count") {
    mlm::CountScorer scorer = mlm::fit_count_scorer(seqs, vocab, cfg.mlm.count_smoothing);
    scorer.save_json(out_path);
    std::printf("mlm-train: count scorer over %zu utterances -> %s\n", seqs.size(),
                out_path.c_str());
    return;
  }
  require(kind == "neural", "cli: --kind must be neural or count");
  mlm::MlmTrainConfig tc;
  tc.encoder = cfg.mlm.encoder;
  tc.policy = cfg.mlm.policy;
  tc.lr = cfg.mlm.lr;
  tc.batch_size = cfg.mlm.batch_size;
  tc.steps = cfg.mlm.steps;
  mlm::MlmTrainResult result = mlm::train_mlm(seqs, vocab, tc, cfg.seed);
  result.model.save(out_path);
  if (!log_path.empty()) write_text_file(log_path, mlm::format_train_log(result.log));
  double final_loss = result.log.empty() ? 0.0 : result.log.back().loss;
  std::printf("mlm-train: %lld steps, final loss %.4f -> %s\n",
              static_cast<long long>(cfg.mlm.steps), final_loss, out_path.c_str());
}

void cmd_score(const std::string& scorer_path, const std::string& clusters_path, int32_t v,
               const std::string& out_path) {
  auto scorer = mlm::load_scorer(scorer_path);
  UnitVocab vocab(v);
  auto seqs = read_sequences_file(clusters_path, vocab);
  std::vector<std::string> lines(seqs.size());
  kernels::parallel_for(seqs.size(), [&](size_t i) {
    std::vector<double> conf = mlm::score_confidences(*scorer, seqs[i]);
    std::string line = seqs[i].utt_id;
    char buf[32];
    for (double c : conf) {
      std::snprintf(buf, sizeof(buf), " %.6f", c);
      line += buf;
    }
    line += '\n';
    lines[i] = std::move(line);
  });
  std::string text;
  for (const auto& l : lines) text += l;
  write_text_file(out_path, text);
  std::printf("score: %zu utterances -> %s\n", seqs.size(), out_path.c_str());
}

void cmd_correct(const config::PipelineConfig& cfg, const std::string& scorer_path,
                 const std::string& clusters_path, int32_t v, const std::string& out_path,
                 const std::string& phone_map_path, const std::string& trace_path) {
  auto scorer = mlm::load_scorer(scorer_path);
  UnitVocab vocab(v);
  auto seqs = read_sequences_file(clusters_path, vocab);

  PhoneMap map;
  const PhoneMap* map_ptr = nullptr;
  if (cfg.corrector.variant.needs_phone_map()) {
    require(!phone_map_path.empty(), "cli: this corrector variant needs --phone-map");
  }
  if (!phone_map_path.empty()) {
    map = PhoneMap::load_json(phone_map_path);
    map_ptr = &map;
  }

  std::vector<ClusterSequence> corrected(seqs.size());
  std::vector<std::vector<corrector::IterationTrace>> traces(seqs.size());
  bool want_trace = !trace_path.empty();
  kernels::parallel_for(seqs.size(), [&](size_t i) {
    corrector::TraceSink sink;
    if (want_trace)
      sink = [&traces, i](const corrector::IterationTrace& t) { traces[i].push_back(t); };
    corrected[i] = corrector::correct(seqs[i], *scorer, vocab, cfg.corrector.k,
                                      cfg.corrector.p_mask, cfg.corrector.variant, map_ptr,
                                      want_trace ? &sink : nullptr);
  });
  write_sequences_file(out_path, corrected, vocab);

  if (want_trace) {
    std::string text;
    for (size_t i = 0; i < seqs.size(); ++i) {
      for (const auto& t : traces[i]) {
        nlohmann::json j;
        j["utt"] = seqs[i].utt_id;
        j["k"] = t.k;
        j["n_k"] = t.n_k;
        j["m"] = t.m;
        auto spans = [](const std::vector<corrector::TraceSpan>& v, const char* value_name) {
          nlohmann::json arr = nlohmann::json::array();
          for (const auto& s : v) {
            nlohmann::json e;
            e["start"] = s.start;
            e["len"] = s.length;
            e["key"] = s.key;
            e[value_name] = s.value;
            arr.push_back(e);
          }
          return arr;
        };
        j["masked"] = spans(t.masked, "score");
        j["filled"] = spans(t.filled, "conf");
        text += j.dump() + "\n";
      }
    }
    write_text_file(trace_path, text);
  }
  std::printf("correct: %zu utterances, K=%d p_mask=%.3f -> %s\n", seqs.size(), cfg.corrector.k,
              cfg.corrector.p_mask, out_path.c_str());
}

void cmd_phonemap_learn(const std::string& clusters_path, const std::string& frame_phones_path,
                        int32_t v, const std::string& inventory, const std::string& out_path) {
  UnitVocab vocab(v);
  auto clusters = read_sequences_file(clusters_path, vocab);
  auto phones = read_phone_lines_file(frame_phones_path);
  PhoneMap map;
  if (inventory == "arpabet40")
    map = learn_phone_map(clusters, phones, PhoneInventory::arpabet40(), v);
  else
    map = learn_phone_map(clusters, phones, v);
  map.save_json(out_path);
  std::printf("phonemap-learn: %zu utterances, %zu phones -> %s\n", clusters.size(),
              map.inventory.size(), out_path.c_str());
}

void cmd_eval_per(const std::string& hyp_path, const std::string& hyp_clusters_path,
                  const std::string& map_path, int32_t v, const std::string& ref_path,
                  const std::string& out_path) {
  std::vector<PhoneSeq> hyp;
  if (!hyp_clusters_path.empty()) {
    require(!map_path.empty(), "cli: --hyp-clusters needs --phone-map");
    PhoneMap map = PhoneMap::load_json(map_path);
    UnitVocab vocab(v);
    auto clusters = read_sequences_file(hyp_clusters_path, vocab);
    for (const auto& seq : clusters)
      hyp.push_back({seq.utt_id, frames_to_phones(seq, map, /*collapse=*/true)});
  } else {
    require(!hyp_path.empty(), "cli: eval-per needs --hyp or --hyp-clusters");
    hyp = read_phone_lines_file(hyp_path);
  }
  auto refs = read_phone_lines_file(ref_path);
  std::unordered_map<std::string, const PhoneSeq*> ref_by_id;
  for (const auto& r : refs) ref_by_id[r.utt_id] = &r;

  std::vector<PerReportRow> rows;
  EditStats corpus_stats;
  for (const auto& h : hyp) {
    auto it = ref_by_id.find(h.utt_id);
    require(it != ref_by_id.end(), "cli: no reference for utterance " + h.utt_id);
    EditStats stats = phone_error_rate(std::span<const std::string>(h.syms),
                                       std::span<const std::string>(it->second->syms));
    corpus_stats += stats;
    rows.push_back({h.utt_id, stats});
  }
  if (!out_path.empty()) write_text_file(out_path, format_per_report(rows));
  std::printf("eval-per: corpus PER %.2f over %zu utterances\n", corpus_stats.per(), rows.size());
}

void cmd_adapt_pretrain(const config::PipelineConfig& cfg, const std::string& data_dir,
                        const std::string& targets_path, const std::string& out_path,
                        const std::string& log_path) {
  corpus::Dataset ds = corpus::read_dataset(data_dir);
  std::vector<ClusterSequence> targets = targets_path.empty()
                                             ? corpus::cluster_sequences(ds)
                                             : read_sequences_file(targets_path,
                                                                   UnitVocab(ds.spec.vocab_size));
  auto examples = build_adapt_examples(ds, targets);

  neural::EncoderConfig ecfg = cfg.adapt.encoder;
  ecfg.input_kind = neural::InputKind::Features;
  ecfg.feature_dim = ds.spec.feature_dim;
  adapt::TrainSchedule schedule{cfg.adapt.lr, cfg.adapt.batch_size, cfg.adapt.steps};
  adapt::PretrainResult result =
      adapt::pretrain_base(ecfg, cfg.adapt.mask, schedule, examples, ds.spec.vocab_size, cfg.seed);
  result.model.save(out_path);
  if (!log_path.empty()) write_text_file(log_path, adapt::format_adapt_log(result.log));
  double acc = result.log.empty() ? 0.0 : result.log.back().masked_acc;
  std::printf("adapt-pretrain: %lld steps, final masked acc %.4f -> %s\n",
              static_cast<long long>(cfg.adapt.steps), acc, out_path.c_str());
}

void cmd_adapt_train(const config::PipelineConfig& cfg, const std::string& model_path,
                     const std::string& data_dir, const std::string& targets_path,
                     const std::string& out_path, const std::string& log_path) {
  auto model = neural::Encoder<float>::load(model_path);
  corpus::Dataset ds = corpus::read_dataset(data_dir);
  auto targets = read_sequences_file(targets_path, UnitVocab(model.cfg.vocab_out));
  auto examples = build_adapt_examples(ds, targets);

  adapt::AdapterInsertion info =
      adapt::insert_adapters(&model, neural::AdapterConfig{cfg.adapt.bottleneck}, cfg.seed);
  adapt::TrainSchedule schedule{cfg.adapt.lr, cfg.adapt.batch_size, cfg.adapt.steps};
  auto log = adapt::continual_pretrain(&model, cfg.adapt.mask, schedule, examples, cfg.seed);
  model.save(out_path);
  if (!log_path.empty()) write_text_file(log_path, adapt::format_adapt_log(log));
  std::printf("adapt-train: %lld adapter params (%.4f%% of %lld) trained %lld steps -> %s\n",
              static_cast<long long>(info.trainable), 100.0 * info.trainable_fraction(),
              static_cast<long long>(info.total), static_cast<long long>(cfg.adapt.steps),
              out_path.c_str());
}

void cmd_adapt_eval(const config::PipelineConfig& cfg, const std::string& model_path,
                    const std::string& data_dir, const std::string& targets_path,
                    const std::string& out_path) {
  auto model = neural::Encoder<float>::load(model_path);
  corpus::Dataset ds = corpus::read_dataset(data_dir);
  auto targets = read_sequences_file(targets_path, UnitVocab(model.cfg.vocab_out));
  auto examples = build_adapt_examples(ds, targets);
  double acc = adapt::evaluate_masked_accuracy(model, cfg.adapt.mask, examples, cfg.seed);
  if (!out_path.empty()) {
    nlohmann::json j;
    j["masked_acc"] = acc;
    j["utterances"] = examples.size();
    write_text_file(out_path, j.dump(2) + "\n");
  }
  std::printf("adapt-eval: masked acc %.6f over %zu utterances\n", acc, examples.size());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"unitcorr: unsupervised accent correction for discrete acoustic-unit sequences"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "pipeline config JSON");
  app.add_option("--seed", g.seed, "override the config seed");
  app.add_option("--jobs", g.jobs, "worker cap; 1 reproduces the serial reference output");

  std::string out_dir, data_dir, out_path, codebook_path, clusters_path, scorer_path;
  std::string kind = "neural", log_path, phone_map_path, trace_path, frame_phones_path;
  std::string hyp_path, hyp_clusters_path, ref_path, model_path, targets_path;
  std::string inventory = "auto";
  int32_t v_override = 0;

  // flag overrides for corrector settings
  int32_t k_flag = 0;
  double p_mask_flag = -1.0;
  std::string variant_flag, fill_flag;
  int32_t vowels_after_flag = -1;

  auto* gen = app.add_subcommand("gen-corpus", "generate the synthetic paired corpus");
  gen->add_option("--out", out_dir, "output directory")->required();

  auto* kfit = app.add_subcommand("kmeans-fit", "fit a k-means codebook on dataset features");
  kfit->add_option("--data", data_dir, "dataset directory")->required();
  kfit->add_option("--out", out_path, "codebook file")->required();

  auto* kassign = app.add_subcommand("kmeans-assign", "assign frames to codebook units");
  kassign->add_option("--data", data_dir, "dataset directory")->required();
  kassign->add_option("--codebook", codebook_path, "codebook file")->required();
  kassign->add_option("--out", out_path, "cluster line output")->required();

  auto* mtrain = app.add_subcommand("mlm-train", "train a unit scorer on standard sequences");
  mtrain->add_option("--clusters", clusters_path, "training cluster lines")->required();
  mtrain->add_option("--kind", kind, "neural | count");
  mtrain->add_option("--v", v_override, "unit vocabulary size");
  mtrain->add_option("--out", out_path, "scorer output path")->required();
  mtrain->add_option("--log", log_path, "training log CSV");

  auto* score = app.add_subcommand("score", "per-frame confidences under a scorer");
  score->add_option("--scorer", scorer_path, "scorer file")->required();
  score->add_option("--clusters", clusters_path, "input cluster lines")->required();
  score->add_option("--v", v_override, "unit vocabulary size");
  score->add_option("--out", out_path, "confidence output")->required();

  auto* correct = app.add_subcommand("correct", "iterative mask-and-decode correction");
  correct->add_option("--scorer", scorer_path, "scorer file")->required();
  correct->add_option("--clusters", clusters_path, "input cluster lines")->required();
  correct->add_option("--v", v_override, "unit vocabulary size");
  correct->add_option("--out", out_path, "corrected cluster lines")->required();
  correct->add_option("--k", k_flag, "iterations");
  correct->add_option("--p-mask", p_mask_flag, "masking ratio");
  correct->add_option("--variant", variant_flag, "cluster-groups | phone-groups");
  correct->add_option("--fill", fill_flag, "top-m | fill-all");
  correct->add_option("--vowels-after", vowels_after_flag, "mask only vowels after iteration k0");
  correct->add_option("--phone-map", phone_map_path, "phone map JSON");
  correct->add_option("--trace", trace_path, "per-iteration trace JSONL");

  auto* plearn = app.add_subcommand("phonemap-learn", "learn the cluster-to-phone mapping");
  plearn->add_option("--clusters", clusters_path, "cluster lines")->required();
  plearn->add_option("--frame-phones", frame_phones_path, "frame phone lines")->required();
  plearn->add_option("--v", v_override, "unit vocabulary size");
  plearn->add_option("--inventory", inventory, "auto | arpabet40");
  plearn->add_option("--out", out_path, "phone map JSON")->required();

  auto* evalper = app.add_subcommand("eval-per", "phone error rate against references");
  evalper->add_option("--hyp", hyp_path, "hypothesis phone lines");
  evalper->add_option("--hyp-clusters", hyp_clusters_path, "hypothesis cluster lines");
  evalper->add_option("--phone-map", phone_map_path, "phone map for --hyp-clusters");
  evalper->add_option("--v", v_override, "unit vocabulary size");
  evalper->add_option("--ref", ref_path, "reference phone lines")->required();
  evalper->add_option("--out", out_path, "per-utterance CSV report");

  auto* apret = app.add_subcommand("adapt-pretrain", "pre-train the acoustic encoder");
  apret->add_option("--data", data_dir, "dataset directory")->required();
  apret->add_option("--targets", targets_path, "target cluster lines (default: dataset clusters)");
  apret->add_option("--out", out_path, "checkpoint output")->required();
  apret->add_option("--log", log_path, "training log CSV");

  auto* atrain = app.add_subcommand("adapt-train", "adapter-only continual pre-training");
  atrain->add_option("--model", model_path, "backbone checkpoint")->required();
  atrain->add_option("--data", data_dir, "dataset directory")->required();
  atrain->add_option("--targets", targets_path, "target cluster lines")->required();
  atrain->add_option("--out", out_path, "adapted checkpoint output")->required();
  atrain->add_option("--log", log_path, "training log CSV");

  auto* aeval = app.add_subcommand("adapt-eval", "masked-frame accuracy of a checkpoint");
  aeval->add_option("--model", model_path, "checkpoint")->required();
  aeval->add_option("--data", data_dir, "dataset directory")->required();
  aeval->add_option("--targets", targets_path, "target cluster lines")->required();
  aeval->add_option("--out", out_path, "result JSON");

  try {
    app.parse(argc, argv);

    config::PipelineConfig cfg = load_effective_config(g);
    if (k_flag > 0) cfg.corrector.k = k_flag;
    if (p_mask_flag >= 0.0) cfg.corrector.p_mask = p_mask_flag;
    if (!variant_flag.empty()) {
      if (variant_flag == "cluster-groups")
        cfg.corrector.variant.grouping = corrector::Grouping::ByCluster;
      else if (variant_flag == "phone-groups")
        cfg.corrector.variant.grouping = corrector::Grouping::ByPhone;
      else
        throw ConfigError("cli: --variant must be cluster-groups or phone-groups");
    }
    if (!fill_flag.empty()) {
      if (fill_flag == "top-m")
        cfg.corrector.variant.fill = corrector::FillMode::TopM;
      else if (fill_flag == "fill-all")
        cfg.corrector.variant.fill = corrector::FillMode::FillAll;
      else
        throw ConfigError("cli: --fill must be top-m or fill-all");
    }
    if (vowels_after_flag >= 0) cfg.corrector.variant.vowels_after = vowels_after_flag;
    cfg.validate();
    int32_t v = v_override > 0 ? v_override : cfg.quantizer.v;

    if (gen->parsed()) cmd_gen_corpus(cfg, out_dir);
    if (kfit->parsed()) cmd_kmeans_fit(cfg, data_dir, out_path);
    if (kassign->parsed()) cmd_kmeans_assign(data_dir, codebook_path, out_path);
    if (mtrain->parsed()) cmd_mlm_train(cfg, clusters_path, kind, v, out_path, log_path);
    if (score->parsed()) cmd_score(scorer_path, clusters_path, v, out_path);
    if (correct->parsed())
      cmd_correct(cfg, scorer_path, clusters_path, v, out_path, phone_map_path, trace_path);
    if (plearn->parsed()) cmd_phonemap_learn(clusters_path, frame_phones_path, v, inventory,
                                             out_path);
    if (evalper->parsed())
      cmd_eval_per(hyp_path, hyp_clusters_path, phone_map_path, v, ref_path, out_path);
    if (apret->parsed()) cmd_adapt_pretrain(cfg, data_dir, targets_path, out_path, log_path);
    if (atrain->parsed()) cmd_adapt_train(cfg, model_path, data_dir, targets_path, out_path,
                                          log_path);
    if (aeval->parsed()) cmd_adapt_eval(cfg, model_path, data_dir, targets_path, out_path);
    return 0;
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
