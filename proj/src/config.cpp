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

#include "unitcorr/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace unitcorr::config {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& path) {
  if (!j.is_object()) throw ConfigError("config: " + path + " must be an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.contains(key))
      throw ConfigError("config: unknown key " + (path.empty() ? key : path + "." + key));
}

template <class T>
void read_field(const json& j, const char* key, T* out, const std::string& path) {
  if (!j.contains(key)) return;
  try {
    *out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: bad value for " + (path.empty() ? key : path + "." + key));
  }
}

void read_encoder(const json& j, neural::EncoderConfig* cfg, const std::string& path) {
  check_keys(j, {"layers", "model_dim", "heads", "ffn_dim", "max_len", "dropout"}, path);
  read_field(j, "layers", &cfg->layers, path);
  read_field(j, "model_dim", &cfg->model_dim, path);
  read_field(j, "heads", &cfg->heads, path);
  read_field(j, "ffn_dim", &cfg->ffn_dim, path);
  read_field(j, "max_len", &cfg->max_len, path);
  read_field(j, "dropout", &cfg->dropout, path);
}

json encoder_to_json(const neural::EncoderConfig& cfg) {
  json j;
  j["layers"] = cfg.layers;
  j["model_dim"] = cfg.model_dim;
  j["heads"] = cfg.heads;
  j["ffn_dim"] = cfg.ffn_dim;
  j["max_len"] = cfg.max_len;
  j["dropout"] = cfg.dropout;
  return j;
}

void read_lr(const json& j, neural::LrSchedule* lr, const std::string& path) {
  check_keys(j, {"peak", "warmup", "total"}, path);
  read_field(j, "peak", &lr->peak_lr, path);
  read_field(j, "warmup", &lr->warmup_steps, path);
  read_field(j, "total", &lr->total_steps, path);
}

json lr_to_json(const neural::LrSchedule& lr) {
  json j;
  j["peak"] = lr.peak_lr;
  j["warmup"] = lr.warmup_steps;
  j["total"] = lr.total_steps;
  return j;
}

}  // namespace

void PipelineConfig::validate() const {
  if (jobs < 1) throw ConfigError("config: jobs must be >= 1");
  if (corrector.k < 1) throw ConfigError("config: corrector.K must be >= 1");
  if (!(corrector.p_mask > 0.0 && corrector.p_mask < 1.0))
    throw ConfigError("config: corrector.p_mask must be in (0,1)");
  if (corrector.variant.vowels_after.has_value() && *corrector.variant.vowels_after < 0)
    throw ConfigError("config: corrector.vowels_after must be >= 0");
  if (quantizer.v < 1) throw ConfigError("config: quantizer.V must be >= 1");
  if (quantizer.max_iters < 1) throw ConfigError("config: quantizer.max_iters must be >= 1");
  if (quantizer.n_init < 1) throw ConfigError("config: quantizer.n_init must be >= 1");
  if (!(quantizer.tol >= 0.0)) throw ConfigError("config: quantizer.tol must be >= 0");
  if (mlm.batch_size < 1) throw ConfigError("config: mlm.batch_size must be >= 1");
  if (mlm.steps < 0) throw ConfigError("config: mlm.steps must be >= 0");
  if (!(mlm.count_smoothing > 0.0)) throw ConfigError("config: mlm.count_smoothing must be > 0");
  if (adapt.bottleneck < 1) throw ConfigError("config: adapt.bottleneck must be >= 1");
  if (adapt.batch_size < 1) throw ConfigError("config: adapt.batch_size must be >= 1");
  if (adapt.steps < 0) throw ConfigError("config: adapt.steps must be >= 0");
  if (corpus.n_standard < 1) throw ConfigError("config: corpus.n_standard must be >= 1");
  if (corpus.words_min < 1 || corpus.words_max < corpus.words_min)
    throw ConfigError("config: corpus.words_per_utt range is invalid");
  try {
    mlm.policy.validate();
    mlm.lr.validate();
    adapt.mask.validate();
    adapt.lr.validate();
  } catch (const ContractError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

PipelineConfig PipelineConfig::from_json_text(const std::string& text) {
  json j;
  bool blank = text.find_first_not_of(" \t\r\n") == std::string::npos;
  if (blank) {
    j = json::object();
  } else {
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config: parse error: ") + e.what());
    }
  }

  PipelineConfig cfg;
  cfg.mlm.encoder = neural::EncoderConfig{6, 64, 4, 256, 512, 0.0};
  cfg.adapt.encoder = neural::EncoderConfig{4, 64, 4, 256, 512, 0.0};

  check_keys(j, {"seed", "jobs", "paths", "corpus", "quantizer", "mlm", "corrector", "adapt"}, "");
  read_field(j, "seed", &cfg.seed, "");
  read_field(j, "jobs", &cfg.jobs, "");

  if (j.contains("paths")) {
    const json& p = j.at("paths");
    check_keys(p, {"corpus_dir", "checkpoints", "outputs"}, "paths");
    read_field(p, "corpus_dir", &cfg.paths.corpus_dir, "paths");
    read_field(p, "checkpoints", &cfg.paths.checkpoints, "paths");
    read_field(p, "outputs", &cfg.paths.outputs, "paths");
  }

  if (j.contains("corpus")) {
    const json& c = j.at("corpus");
    check_keys(c,
               {"n_phones", "V", "n_words", "word_len_min", "word_len_max", "duration_min",
                "duration_max", "feature_dim", "centroid_spread", "noise_sigma", "disjoint_words", "cv_words",
                "n_standard", "n_accent", "words_min", "words_max", "shift"},
               "corpus");
    read_field(c, "n_phones", &cfg.corpus.lexicon.n_phones, "corpus");
    read_field(c, "V", &cfg.corpus.lexicon.vocab_size, "corpus");
    read_field(c, "n_words", &cfg.corpus.lexicon.n_words, "corpus");
    read_field(c, "word_len_min", &cfg.corpus.lexicon.word_len_min, "corpus");
    read_field(c, "word_len_max", &cfg.corpus.lexicon.word_len_max, "corpus");
    read_field(c, "duration_min", &cfg.corpus.lexicon.duration_min, "corpus");
    read_field(c, "duration_max", &cfg.corpus.lexicon.duration_max, "corpus");
    read_field(c, "feature_dim", &cfg.corpus.lexicon.feature_dim, "corpus");
    read_field(c, "centroid_spread", &cfg.corpus.lexicon.centroid_spread, "corpus");
    read_field(c, "noise_sigma", &cfg.corpus.lexicon.noise_sigma, "corpus");
    read_field(c, "disjoint_words", &cfg.corpus.lexicon.disjoint_words, "corpus");
    read_field(c, "cv_words", &cfg.corpus.lexicon.cv_words, "corpus");
    read_field(c, "n_standard", &cfg.corpus.n_standard, "corpus");
    read_field(c, "n_accent", &cfg.corpus.n_accent, "corpus");
    read_field(c, "words_min", &cfg.corpus.words_min, "corpus");
    read_field(c, "words_max", &cfg.corpus.words_max, "corpus");
    if (c.contains("shift")) {
      const json& s = c.at("shift");
      check_keys(s, {"substitutions", "apply_prob"}, "corpus.shift");
      if (s.contains("substitutions")) {
        if (!s.at("substitutions").is_object())
          throw ConfigError("config: corpus.shift.substitutions must be an object");
        for (const auto& [from, to] : s.at("substitutions").items())
          cfg.corpus.shift.substitutions[from] = to.get<std::string>();
      }
      read_field(s, "apply_prob", &cfg.corpus.shift.apply_prob, "corpus.shift");
    }
  }

  if (j.contains("quantizer")) {
    const json& q = j.at("quantizer");
    check_keys(q, {"V", "max_iters", "tol", "n_init"}, "quantizer");
    read_field(q, "V", &cfg.quantizer.v, "quantizer");
    read_field(q, "max_iters", &cfg.quantizer.max_iters, "quantizer");
    read_field(q, "tol", &cfg.quantizer.tol, "quantizer");
    read_field(q, "n_init", &cfg.quantizer.n_init, "quantizer");
  }

  if (j.contains("mlm")) {
    const json& m = j.at("mlm");
    check_keys(m, {"encoder", "policy", "lr", "batch_size", "steps", "count_smoothing"}, "mlm");
    if (m.contains("encoder")) read_encoder(m.at("encoder"), &cfg.mlm.encoder, "mlm.encoder");
    if (m.contains("policy")) {
      const json& p = m.at("policy");
      check_keys(p, {"span_len", "p_mask", "replace_mask", "replace_random", "replace_keep"},
                 "mlm.policy");
      read_field(p, "span_len", &cfg.mlm.policy.span_len, "mlm.policy");
      read_field(p, "p_mask", &cfg.mlm.policy.p_mask, "mlm.policy");
      read_field(p, "replace_mask", &cfg.mlm.policy.replace_mask, "mlm.policy");
      read_field(p, "replace_random", &cfg.mlm.policy.replace_random, "mlm.policy");
      read_field(p, "replace_keep", &cfg.mlm.policy.replace_keep, "mlm.policy");
    }
    if (m.contains("lr")) read_lr(m.at("lr"), &cfg.mlm.lr, "mlm.lr");
    read_field(m, "batch_size", &cfg.mlm.batch_size, "mlm");
    read_field(m, "steps", &cfg.mlm.steps, "mlm");
    read_field(m, "count_smoothing", &cfg.mlm.count_smoothing, "mlm");
  }

  if (j.contains("corrector")) {
    const json& c = j.at("corrector");
    check_keys(c, {"K", "p_mask", "grouping", "fill", "vowels_after"}, "corrector");
    read_field(c, "K", &cfg.corrector.k, "corrector");
    read_field(c, "p_mask", &cfg.corrector.p_mask, "corrector");
    if (c.contains("grouping")) {
      std::string g = c.at("grouping").get<std::string>();
      if (g == "cluster-groups")
        cfg.corrector.variant.grouping = corrector::Grouping::ByCluster;
      else if (g == "phone-groups")
        cfg.corrector.variant.grouping = corrector::Grouping::ByPhone;
      else
        throw ConfigError("config: corrector.grouping must be cluster-groups or phone-groups");
    }
    if (c.contains("fill")) {
      std::string f = c.at("fill").get<std::string>();
      if (f == "top-m")
        cfg.corrector.variant.fill = corrector::FillMode::TopM;
      else if (f == "fill-all")
        cfg.corrector.variant.fill = corrector::FillMode::FillAll;
      else
        throw ConfigError("config: corrector.fill must be top-m or fill-all");
    }
    if (c.contains("vowels_after") && !c.at("vowels_after").is_null())
      cfg.corrector.variant.vowels_after = c.at("vowels_after").get<int32_t>();
  }

  if (j.contains("adapt")) {
    const json& a = j.at("adapt");
    check_keys(a, {"encoder", "bottleneck", "mask", "lr", "batch_size", "steps"}, "adapt");
    if (a.contains("encoder")) read_encoder(a.at("encoder"), &cfg.adapt.encoder, "adapt.encoder");
    read_field(a, "bottleneck", &cfg.adapt.bottleneck, "adapt");
    if (a.contains("mask")) {
      const json& mk = a.at("mask");
      check_keys(mk, {"span_len", "p_mask"}, "adapt.mask");
      read_field(mk, "span_len", &cfg.adapt.mask.span_len, "adapt.mask");
      read_field(mk, "p_mask", &cfg.adapt.mask.p_mask, "adapt.mask");
    }
    if (a.contains("lr")) read_lr(a.at("lr"), &cfg.adapt.lr, "adapt.lr");
    read_field(a, "batch_size", &cfg.adapt.batch_size, "adapt");
    read_field(a, "steps", &cfg.adapt.steps, "adapt");
  }

  cfg.validate();
  return cfg;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("config: cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return from_json_text(ss.str());
}

std::string PipelineConfig::canonical_json() const {
  json j;
  j["seed"] = seed;
  j["jobs"] = jobs;
  j["paths"] = {{"corpus_dir", paths.corpus_dir},
                {"checkpoints", paths.checkpoints},
                {"outputs", paths.outputs}};
  json shift_subs = json::object();
  for (const auto& [from, to] : corpus.shift.substitutions) shift_subs[from] = to;
  j["corpus"] = {{"n_phones", corpus.lexicon.n_phones},
                 {"V", corpus.lexicon.vocab_size},
                 {"n_words", corpus.lexicon.n_words},
                 {"word_len_min", corpus.lexicon.word_len_min},
                 {"word_len_max", corpus.lexicon.word_len_max},
                 {"duration_min", corpus.lexicon.duration_min},
                 {"duration_max", corpus.lexicon.duration_max},
                 {"feature_dim", corpus.lexicon.feature_dim},
                 {"centroid_spread", corpus.lexicon.centroid_spread},
                 {"noise_sigma", corpus.lexicon.noise_sigma},
                 {"disjoint_words", corpus.lexicon.disjoint_words},
                 {"cv_words", corpus.lexicon.cv_words},
                 {"n_standard", corpus.n_standard},
                 {"n_accent", corpus.n_accent},
                 {"words_min", corpus.words_min},
                 {"words_max", corpus.words_max},
                 {"shift", {{"substitutions", shift_subs}, {"apply_prob", corpus.shift.apply_prob}}}};
  j["quantizer"] = {{"V", quantizer.v},
                    {"max_iters", quantizer.max_iters},
                    {"tol", quantizer.tol},
                    {"n_init", quantizer.n_init}};
  j["mlm"] = {{"encoder", encoder_to_json(mlm.encoder)},
              {"policy",
               {{"span_len", mlm.policy.span_len},
                {"p_mask", mlm.policy.p_mask},
                {"replace_mask", mlm.policy.replace_mask},
                {"replace_random", mlm.policy.replace_random},
                {"replace_keep", mlm.policy.replace_keep}}},
              {"lr", lr_to_json(mlm.lr)},
              {"batch_size", mlm.batch_size},
              {"steps", mlm.steps},
              {"count_smoothing", mlm.count_smoothing}};
  json vowels = nullptr;
  if (corrector.variant.vowels_after.has_value()) vowels = *corrector.variant.vowels_after;
  j["corrector"] = {
      {"K", corrector.k},
      {"p_mask", corrector.p_mask},
      {"grouping",
       corrector.variant.grouping == corrector::Grouping::ByCluster ? "cluster-groups"
                                                                    : "phone-groups"},
      {"fill", corrector.variant.fill == corrector::FillMode::TopM ? "top-m" : "fill-all"},
      {"vowels_after", vowels}};
  j["adapt"] = {{"encoder", encoder_to_json(adapt.encoder)},
                {"bottleneck", adapt.bottleneck},
                {"mask", {{"span_len", adapt.mask.span_len}, {"p_mask", adapt.mask.p_mask}}},
                {"lr", lr_to_json(adapt.lr)},
                {"batch_size", adapt.batch_size},
                {"steps", adapt.steps}};
  return j.dump(2) + "\n";
}

}  // namespace unitcorr::config
