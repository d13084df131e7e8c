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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "unitcorr/mat.hpp"
#include "unitcorr/rng.hpp"

// Transformer encoder with hand-written forward/backward, Houlsby-style
// adapter blocks, masked cross-entropy and Adam. Templated on the scalar so
// the same code runs in float for training and in double for the finite
// difference gradient checks.

namespace unitcorr::neural {

enum class InputKind { Tokens, Features };

struct EncoderConfig {
  int32_t layers = 6;
  int32_t model_dim = 64;
  int32_t heads = 4;
  int32_t ffn_dim = 256;
  int32_t max_len = 512;
  double dropout = 0.0;
  InputKind input_kind = InputKind::Tokens;
  int32_t vocab_in = 0;     // real input ids; the embedding table reserves one extra mask row
  int32_t feature_dim = 0;  // Features input width
  int32_t vocab_out = 0;    // output projection size

  void validate() const;
  int32_t mask_token() const { return vocab_in; }
};

// Pre-layer-norm blocks; adapters (when present) sit after the attention
// residual and after the feed-forward residual of every layer:
//   out = layer_norm(h + up(relu(down(h))))
// with the up-projection initialised to zero, so an inserted adapter starts
// as a plain layer norm of its input.
struct AdapterConfig {
  int32_t bottleneck = 1024;
};

// Trainable parameter count of a single adapter block.
int64_t adapter_param_count(int32_t model_dim, int32_t bottleneck);

template <class T>
struct Param {
  std::string name;
  Mat<T> value;
  Mat<T> grad;
  Mat<T> adam_m, adam_v;
  bool frozen = false;
};

// One input sequence. Tokens kind uses `tokens` (mask id permitted);
// Features kind uses `features` with optional per-frame mask flags whose
// positions are replaced by the learned mask embedding.
struct EncoderInput {
  std::vector<int32_t> tokens;
  Mat<float> features;
  std::vector<uint8_t> feature_mask;

  size_t length(InputKind kind) const {
    return kind == InputKind::Tokens ? tokens.size() : features.rows;
  }
};

// A training example: input plus per-frame targets and loss flags. The loss
// is the mean cross-entropy over flagged frames only.
struct TrainExample {
  EncoderInput input;
  std::vector<int32_t> targets;
  std::vector<uint8_t> loss_mask;
};

struct LrSchedule {
  double peak_lr = 5e-5;
  int64_t warmup_steps = 5000;
  int64_t total_steps = 200000;

  void validate() const;
  double lr_at(int64_t step) const;  // linear ramp to peak, then linear decay to zero
};

template <class T>
struct LayerNormCache {
  Mat<T> input;
  std::vector<T> mean, rstd;
};

template <class T>
struct AdapterCache {
  Mat<T> input;
  Mat<T> pre_relu;
  Mat<T> relu_out;
  Mat<T> pre_ln;
  LayerNormCache<T> ln;
};

template <class T>
struct LayerCache {
  Mat<T> x_in;
  LayerNormCache<T> ln1;
  Mat<T> ln1_out;
  Mat<T> q, k, v;
  std::vector<Mat<T>> probs;  // per head, T x T
  Mat<T> ctx;
  Mat<T> attn_out;
  std::vector<T> drop_attn;
  Mat<T> x_mid;
  AdapterCache<T> ad_attn;
  LayerNormCache<T> ln2;
  Mat<T> ln2_out;
  Mat<T> ffn_pre;
  Mat<T> ffn_relu;
  Mat<T> ffn_out;
  std::vector<T> drop_ffn;
  AdapterCache<T> ad_ffn;
};

template <class T>
struct ForwardCache {
  EncoderInput input;
  Mat<T> x0;
  std::vector<T> drop_in;
  std::vector<LayerCache<T>> layers;
  LayerNormCache<T> final_ln;
  Mat<T> final_hidden;
};

template <class T>
class Encoder {
 public:
  EncoderConfig cfg;
  std::optional<AdapterConfig> adapters;
  std::vector<Param<T>> params;

  static Encoder random_init(const EncoderConfig& cfg, uint64_t seed);

  // Appends near-identity adapters at both placements of every layer and
  // freezes everything that existed before the call.
  void insert_adapters(const AdapterConfig& acfg, uint64_t seed, double up_init_scale = 0.0);
  // Drops adapter parameters and unfreezes the remaining ones.
  void remove_adapters();

  struct Output {
    Mat<T> hidden;  // T x model_dim
    Mat<T> logits;  // T x vocab_out
  };

  // Full bidirectional pass over one sequence. `rng` is only consumed when
  // train_mode is set and dropout is configured.
  Output forward(const EncoderInput& input, bool train_mode = false, Rng* rng = nullptr) const;

  // Mean masked cross-entropy over the batch; fills .grad on every
  // non-frozen parameter. Frozen parameters receive no gradient at all.
  // When flagged_correct is given it receives the number of flagged frames
  // whose logits argmax hits the target.
  double loss_and_grads(std::span<const TrainExample> batch, Rng* dropout_rng = nullptr,
                        int64_t* flagged_correct = nullptr);

  // Forward-only batch loss (used by the finite-difference checks).
  double loss_only(std::span<const TrainExample> batch) const;

  // Adam update on non-frozen parameters; step is 1-based.
  void optimizer_step(int64_t step, const LrSchedule& schedule);

  Param<T>& param(const std::string& name);
  const Param<T>& param(const std::string& name) const;
  bool has_param(const std::string& name) const;

  int64_t parameter_count(bool trainable_only) const;

  void freeze_all(bool frozen);
  bool backbone_frozen() const;  // every non-adapter parameter frozen?

  // ---- ENCP checkpoint ----
  void save(const std::string& path) const;
  // Only parameters outside the adapter.* namespace, e.g. for byte-identity
  // checks of a frozen backbone.
  void save_backbone(const std::string& path) const;
  static Encoder load(const std::string& path);

 private:
  Output forward_cached(const EncoderInput& input, bool train_mode, Rng* rng,
                        ForwardCache<T>* cache) const;
  Mat<T> adapter_forward_cached(const Mat<T>& h, const std::string& prefix,
                                AdapterCache<T>* ac) const;
  Mat<T> adapter_backward(const AdapterCache<T>& ac, const std::string& prefix, const Mat<T>& dout);
  void backward(const ForwardCache<T>& cache, const Mat<T>& dlogits);
  void append_param(const std::string& name, size_t rows, size_t cols, Rng& rng, double scale);
  size_t index_of(const std::string& name) const;
};

// Adapter block on its own, for direct unit checks:
// layer_norm(h + up(relu(down(h)))).
template <class T>
Mat<T> adapter_forward(const Mat<T>& h, const Mat<T>& down_w, const Mat<T>& down_b,
                       const Mat<T>& up_w, const Mat<T>& up_b, const Mat<T>& ln_g,
                       const Mat<T>& ln_b);

// Row-wise layer norm with the same epsilon the encoder uses.
template <class T>
Mat<T> layer_norm_rows(const Mat<T>& x, const Mat<T>& gamma, const Mat<T>& beta);

extern template class Encoder<float>;
extern template class Encoder<double>;
extern template Mat<float> adapter_forward<float>(const Mat<float>&, const Mat<float>&,
                                                  const Mat<float>&, const Mat<float>&,
                                                  const Mat<float>&, const Mat<float>&,
                                                  const Mat<float>&);
extern template Mat<double> adapter_forward<double>(const Mat<double>&, const Mat<double>&,
                                                    const Mat<double>&, const Mat<double>&,
                                                    const Mat<double>&, const Mat<double>&,
                                                    const Mat<double>&);
extern template Mat<float> layer_norm_rows<float>(const Mat<float>&, const Mat<float>&,
                                                  const Mat<float>&);
extern template Mat<double> layer_norm_rows<double>(const Mat<double>&, const Mat<double>&,
                                                    const Mat<double>&);

}  // namespace unitcorr::neural
