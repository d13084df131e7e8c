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

#include "unitcorr/adapt.hpp"

#include <cstdio>

#include "unitcorr/error.hpp"
#include "unitcorr/kernels.hpp"
#include "unitcorr/mlm.hpp"

namespace unitcorr::adapt {

void FeatureMaskPolicy::validate() const {
  require(span_len >= 1, "adapt: span_len must be >= 1");
  require(p_mask > 0.0 && p_mask < 1.0, "adapt: p_mask must be in (0,1)");
}

void TrainSchedule::validate() const {
  lr.validate();
  require(batch_size >= 1, "adapt: batch_size must be >= 1");
  require(steps >= 0, "adapt: steps must be >= 0");
}

std::string format_adapt_log(std::span<const AdaptLogEntry> log) {
  std::string out = "step,loss,masked_acc,lr\n";
  char buf[128];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,%.9g\n", static_cast<long long>(e.step),
                  e.loss, e.masked_acc, e.lr);
    out += buf;
  }
  return out;
}

namespace {

void check_examples(std::span<const AdaptExample> examples, int32_t vocab_size,
                    int32_t feature_dim) {
  require(!examples.empty(), "adapt: empty example set");
  for (const auto& ex : examples) {
    require(ex.features.rows == ex.targets.size(),
            "adapt: feature/target frame mismatch for " + ex.utt_id);
    require(ex.features.cols == static_cast<size_t>(feature_dim),
            "adapt: feature dimension mismatch for " + ex.utt_id);
    for (int32_t t : ex.targets)
      require(t >= 0 && t < vocab_size, "adapt: target unit out of range in " + ex.utt_id);
  }
}

neural::TrainExample make_masked_example(const AdaptExample& ex, const FeatureMaskPolicy& mask,
                                         Rng& rng) {
  neural::TrainExample out;
  out.input.features = ex.features;
  out.input.feature_mask.assign(ex.features.rows, 0);
  out.targets = ex.targets;
  out.loss_mask.assign(ex.features.rows, 0);
  for (size_t pos : mlm::select_mask_spans(ex.features.rows, mask.span_len, mask.p_mask, rng)) {
    out.input.feature_mask[pos] = 1;
    out.loss_mask[pos] = 1;
  }
  return out;
}

std::vector<AdaptLogEntry> run_training(neural::Encoder<float>* model,
                                        const FeatureMaskPolicy& mask,
                                        const TrainSchedule& schedule,
                                        std::span<const AdaptExample> examples, uint64_t seed) {
  mask.validate();
  schedule.validate();
  Rng root(seed);
  std::vector<AdaptLogEntry> log;
  for (int64_t step = 1; step <= schedule.steps; ++step) {
    Rng step_rng = root.derive(0xADA, static_cast<uint64_t>(step));
    Rng drop_rng = step_rng.derive(0xD0);
    std::vector<neural::TrainExample> batch;
    size_t flagged = 0;
    for (int32_t b = 0; b < schedule.batch_size; ++b) {
      const AdaptExample& ex = examples[step_rng.next_index(examples.size())];
      if (ex.features.rows == 0) continue;
      Rng mask_rng = step_rng.derive(0xFA, static_cast<uint64_t>(b));
      neural::TrainExample te = make_masked_example(ex, mask, mask_rng);
      size_t n = 0;
      for (uint8_t f : te.loss_mask) n += f;
      if (n == 0) continue;
      flagged += n;
      batch.push_back(std::move(te));
    }
    if (batch.empty()) continue;
    int64_t correct = 0;
    double loss = model->loss_and_grads(batch, &drop_rng, &correct);
    model->optimizer_step(step, schedule.lr);
    log.push_back({step, loss, static_cast<double>(correct) / static_cast<double>(flagged),
                   schedule.lr.lr_at(step)});
  }
  return log;
}

}  // namespace

PretrainResult pretrain_base(const neural::EncoderConfig& encoder, const FeatureMaskPolicy& mask,
                             const TrainSchedule& schedule,
                             std::span<const AdaptExample> examples, int32_t vocab_size,
                             uint64_t seed) {
  neural::EncoderConfig cfg = encoder;
  cfg.input_kind = neural::InputKind::Features;
  cfg.vocab_out = vocab_size;
  cfg.validate();
  check_examples(examples, vocab_size, cfg.feature_dim);

  PretrainResult result;
  result.model = neural::Encoder<float>::random_init(cfg, seed);
  result.log = run_training(&result.model, mask, schedule, examples, seed);
  return result;
}

AdapterInsertion insert_adapters(neural::Encoder<float>* model, const neural::AdapterConfig& acfg,
                                 uint64_t seed) {
  model->insert_adapters(acfg, seed);
  AdapterInsertion info;
  info.trainable = model->parameter_count(true);
  info.total = model->parameter_count(false);
  int64_t expected = neural::adapter_param_count(model->cfg.model_dim, acfg.bottleneck) * 2 *
                     model->cfg.layers;
  require(info.trainable == expected, "adapt: adapter parameter count mismatch");
  return info;
}

std::vector<AdaptLogEntry> continual_pretrain(neural::Encoder<float>* model,
                                              const FeatureMaskPolicy& mask,
                                              const TrainSchedule& schedule,
                                              std::span<const AdaptExample> examples,
                                              uint64_t seed) {
  require(model->adapters.has_value(), "adapt: continual pre-training requires adapters");
  require(model->backbone_frozen(), "adapt: unfrozen backbone detected");
  check_examples(examples, model->cfg.vocab_out, model->cfg.feature_dim);
  return run_training(model, mask, schedule, examples, seed);
}

double evaluate_masked_accuracy(const neural::Encoder<float>& model, const FeatureMaskPolicy& mask,
                                std::span<const AdaptExample> examples, uint64_t seed) {
  mask.validate();
  check_examples(examples, model.cfg.vocab_out, model.cfg.feature_dim);
  Rng root(seed);

  std::vector<int64_t> correct(examples.size(), 0), masked(examples.size(), 0);
  kernels::parallel_for(examples.size(), [&](size_t i) {
    const AdaptExample& ex = examples[i];
    if (ex.features.rows == 0) return;
    Rng rng = root.derive(0xE7A, i);
    neural::TrainExample te = make_masked_example(ex, mask, rng);
    auto out = model.forward(te.input, false, nullptr);
    for (size_t f = 0; f < te.loss_mask.size(); ++f) {
      if (!te.loss_mask[f]) continue;
      const float* z = out.logits.row(f);
      size_t best = 0;
      for (size_t j = 1; j < out.logits.cols; ++j)
        if (z[j] > z[best]) best = j;
      ++masked[i];
      if (static_cast<int32_t>(best) == ex.targets[f]) ++correct[i];
    }
  });

  int64_t total_correct = 0, total_masked = 0;
  for (size_t i = 0; i < examples.size(); ++i) {
    total_correct += correct[i];
    total_masked += masked[i];
  }
  require(total_masked > 0, "adapt: evaluation masked no frames");
  return static_cast<double>(total_correct) / static_cast<double>(total_masked);
}

}  // namespace unitcorr::adapt
