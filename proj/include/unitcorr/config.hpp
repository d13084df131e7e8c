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
#include <string>

#include "unitcorr/adapt.hpp"
#include "unitcorr/corpus.hpp"
#include "unitcorr/corrector.hpp"
#include "unitcorr/mlm.hpp"
#include "unitcorr/neural.hpp"

namespace unitcorr::config {

struct Paths {
  std::string corpus_dir;
  std::string checkpoints;
  std::string outputs;
};

struct CorpusSection {
  corpus::LexiconGenParams lexicon;
  size_t n_standard = 200;
  size_t n_accent = 100;
  int32_t words_min = 3;
  int32_t words_max = 8;
  corpus::ShiftSpec shift;
};

struct QuantizerSection {
  int32_t v = 500;
  int32_t max_iters = 100;
  double tol = 1e-6;
  int32_t n_init = 10;
};

struct MlmSection {
  neural::EncoderConfig encoder;  // vocab fields filled at run time
  mlm::SpanMaskPolicy policy;
  neural::LrSchedule lr{5e-5, 5000, 200000};
  int32_t batch_size = 32;
  int64_t steps = 200000;
  double count_smoothing = 0.01;
};

struct CorrectorSection {
  int32_t k = 10;
  double p_mask = 0.2;
  corrector::CorrectionVariant variant;
};

struct AdaptSection {
  neural::EncoderConfig encoder;
  int32_t bottleneck = 1024;
  adapt::FeatureMaskPolicy mask;
  neural::LrSchedule lr{1.5e-3, 5000, 30000};
  int32_t batch_size = 32;
  int64_t steps = 30000;
};

// One reproducible experiment description. Field defaults mirror the
// pipeline's reference settings (500 clusters, span length 10, p_mask 0.2,
// K=10, bottleneck 1024). Unknown keys are rejected with their path.
struct PipelineConfig {
  uint64_t seed = 0;
  int32_t jobs = 1;
  Paths paths;
  CorpusSection corpus;
  QuantizerSection quantizer;
  MlmSection mlm;
  CorrectorSection corrector;
  AdaptSection adapt;

  void validate() const;
  std::string canonical_json() const;

  static PipelineConfig from_json_text(const std::string& text);
  static PipelineConfig load(const std::string& path);
};

}  // namespace unitcorr::config
