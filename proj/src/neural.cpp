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

#include "unitcorr/neural.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "unitcorr/error.hpp"
#include "unitcorr/io.hpp"
#include "unitcorr/kernels.hpp"

namespace unitcorr::neural {

namespace {

constexpr double kLnEps = 1e-5;

template <class T>
void add_bias_rows(Mat<T>* x, const Mat<T>& bias) {
  for (size_t i = 0; i < x->rows; ++i) {
    T* row = x->row(i);
    for (size_t j = 0; j < x->cols; ++j) row[j] += bias.data[j];
  }
}

template <class T>
void add_into(Mat<T>* dst, const Mat<T>& src) {
  for (size_t i = 0; i < dst->data.size(); ++i) dst->data[i] += src.data[i];
}

template <class T>
void add_colsum(Mat<T>* dst, const Mat<T>& src) {
  for (size_t i = 0; i < src.rows; ++i)
    for (size_t j = 0; j < src.cols; ++j) dst->data[j] += src(i, j);
}

template <class T>
Mat<T> take_cols(const Mat<T>& x, size_t c0, size_t width) {
  Mat<T> out(x.rows, width);
  for (size_t i = 0; i < x.rows; ++i)
    std::memcpy(out.row(i), x.row(i) + c0, width * sizeof(T));
  return out;
}

template <class T>
void put_cols(Mat<T>* dst, const Mat<T>& src, size_t c0) {
  for (size_t i = 0; i < src.rows; ++i)
    std::memcpy(dst->row(i) + c0, src.row(i), src.cols * sizeof(T));
}

template <class T>
void ln_rows_forward(const Mat<T>& x, const T* gamma, const T* beta, Mat<T>* out,
                     LayerNormCache<T>* cache) {
  size_t d = x.cols;
  if (cache) {
    cache->input = x;
    cache->mean.resize(x.rows);
    cache->rstd.resize(x.rows);
  }
  *out = Mat<T>(x.rows, d);
  for (size_t i = 0; i < x.rows; ++i) {
    const T* xr = x.row(i);
    T mu = T(0);
    for (size_t j = 0; j < d; ++j) mu += xr[j];
    mu /= static_cast<T>(d);
    T var = T(0);
    for (size_t j = 0; j < d; ++j) {
      T diff = xr[j] - mu;
      var += diff * diff;
    }
    var /= static_cast<T>(d);
    T rstd = T(1) / std::sqrt(var + static_cast<T>(kLnEps));
    if (cache) {
      cache->mean[i] = mu;
      cache->rstd[i] = rstd;
    }
    T* outr = out->row(i);
    for (size_t j = 0; j < d; ++j) outr[j] = gamma[j] * ((xr[j] - mu) * rstd) + beta[j];
  }
}

// dgamma/dbeta may be null for frozen parameters.
template <class T>
Mat<T> ln_rows_backward(const LayerNormCache<T>& cache, const T* gamma, const Mat<T>& dy,
                        Mat<T>* dgamma, Mat<T>* dbeta) {
  size_t d = cache.input.cols;
  Mat<T> dx(cache.input.rows, d);
  std::vector<T> xhat(d), dxhat(d);
  for (size_t i = 0; i < cache.input.rows; ++i) {
    const T* xr = cache.input.row(i);
    const T* dyr = dy.row(i);
    T mu = cache.mean[i];
    T rstd = cache.rstd[i];
    T m1 = T(0), m2 = T(0);
    for (size_t j = 0; j < d; ++j) {
      xhat[j] = (xr[j] - mu) * rstd;
      dxhat[j] = dyr[j] * gamma[j];
      m1 += dxhat[j];
      m2 += dxhat[j] * xhat[j];
      if (dgamma) dgamma->data[j] += dyr[j] * xhat[j];
      if (dbeta) dbeta->data[j] += dyr[j];
    }
    m1 /= static_cast<T>(d);
    m2 /= static_cast<T>(d);
    T* dxr = dx.row(i);
    for (size_t j = 0; j < d; ++j) dxr[j] = rstd * (dxhat[j] - m1 - xhat[j] * m2);
  }
  return dx;
}

template <class T>
void apply_dropout(Mat<T>* x, double p, Rng* rng, std::vector<T>* mask) {
  mask->resize(x->data.size());
  T keep = static_cast<T>(1.0 / (1.0 - p));
  for (size_t i = 0; i < x->data.size(); ++i) {
    if (rng->next_double() < p) {
      (*mask)[i] = T(0);
      x->data[i] = T(0);
    } else {
      (*mask)[i] = keep;
      x->data[i] *= keep;
    }
  }
}

template <class T>
void dropout_backward(Mat<T>* dy, const std::vector<T>& mask) {
  if (mask.empty()) return;
  for (size_t i = 0; i < dy->data.size(); ++i) dy->data[i] *= mask[i];
}

std::string input_kind_name(InputKind k) { return k == InputKind::Tokens ? "tokens" : "features"; }

InputKind input_kind_from(const std::string& s) {
  if (s == "tokens") return InputKind::Tokens;
  if (s == "features") return InputKind::Features;
  throw IoError("neural: unknown input kind '" + s + "' in checkpoint");
}

}  // namespace

void EncoderConfig::validate() const {
  require(layers >= 0, "neural: layers must be >= 0");
  require(model_dim >= 1 && heads >= 1 && ffn_dim >= 1 && max_len >= 1,
          "neural: encoder dimensions must be >= 1");
  require(model_dim % heads == 0, "neural: model_dim must be divisible by heads");
  require(dropout >= 0.0 && dropout < 1.0, "neural: dropout must be in [0,1)");
  require(vocab_out >= 1, "neural: vocab_out must be >= 1");
  if (input_kind == InputKind::Tokens)
    require(vocab_in >= 1, "neural: vocab_in must be >= 1 for token inputs");
  else
    require(feature_dim >= 1, "neural: feature_dim must be >= 1 for feature inputs");
}

void LrSchedule::validate() const {
  require(peak_lr >= 0.0, "neural: peak_lr must be >= 0");
  require(warmup_steps >= 0 && total_steps >= 1, "neural: bad schedule step counts");
  require(warmup_steps <= total_steps, "neural: warmup_steps exceeds total_steps");
}

double LrSchedule::lr_at(int64_t step) const {
  require(step >= 1, "neural: schedule step must be >= 1");
  if (warmup_steps > 0 && step <= warmup_steps)
    return peak_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  if (step >= total_steps) return 0.0;
  int64_t decay_span = total_steps - warmup_steps;
  if (decay_span <= 0) return 0.0;
  return peak_lr * static_cast<double>(total_steps - step) / static_cast<double>(decay_span);
}

int64_t adapter_param_count(int32_t model_dim, int32_t bottleneck) {
  // down w/b + up w/b + layer norm gamma/beta
  return 2ll * model_dim * bottleneck + bottleneck + model_dim + 2ll * model_dim;
}

template <class T>
void Encoder<T>::append_param(const std::string& name, size_t rows, size_t cols, Rng& root,
                              double scale) {
  Param<T> p;
  p.name = name;
  p.value = Mat<T>(rows, cols);
  if (scale != 0.0) {
    Rng rng = root.derive(params.size());
    for (auto& x : p.value.data) x = static_cast<T>(scale * rng.next_gaussian());
  }
  params.push_back(std::move(p));
}

template <class T>
size_t Encoder<T>::index_of(const std::string& name) const {
  for (size_t i = 0; i < params.size(); ++i)
    if (params[i].name == name) return i;
  throw ContractError("neural: unknown parameter " + name);
}

template <class T>
Param<T>& Encoder<T>::param(const std::string& name) {
  return params[index_of(name)];
}

template <class T>
const Param<T>& Encoder<T>::param(const std::string& name) const {
  return params[index_of(name)];
}

template <class T>
bool Encoder<T>::has_param(const std::string& name) const {
  for (const auto& p : params)
    if (p.name == name) return true;
  return false;
}

template <class T>
Encoder<T> Encoder<T>::random_init(const EncoderConfig& cfg, uint64_t seed) {
  cfg.validate();
  Encoder e;
  e.cfg = cfg;
  Rng root(seed);
  size_t d = static_cast<size_t>(cfg.model_dim);
  size_t f = static_cast<size_t>(cfg.ffn_dim);

  if (cfg.input_kind == InputKind::Tokens) {
    e.append_param("embed.tokens", static_cast<size_t>(cfg.vocab_in) + 1, d, root, 0.02);
  } else {
    e.append_param("embed.proj.w", static_cast<size_t>(cfg.feature_dim), d, root, 0.02);
    e.append_param("embed.proj.b", 1, d, root, 0.0);
    e.append_param("embed.mask", 1, d, root, 0.02);
  }
  e.append_param("embed.pos", static_cast<size_t>(cfg.max_len), d, root, 0.02);

  for (int32_t l = 0; l < cfg.layers; ++l) {
    std::string pre = "layer." + std::to_string(l) + ".";
    e.append_param(pre + "ln1.g", 1, d, root, 0.0);
    e.param(pre + "ln1.g").value.fill(T(1));
    e.append_param(pre + "ln1.b", 1, d, root, 0.0);
    for (const char* w : {"wq", "wk", "wv", "wo"}) {
      e.append_param(pre + "attn." + w, d, d, root, 0.02);
      e.append_param(pre + "attn.b" + std::string(1, w[1]), 1, d, root, 0.0);
    }
    e.append_param(pre + "ln2.g", 1, d, root, 0.0);
    e.param(pre + "ln2.g").value.fill(T(1));
    e.append_param(pre + "ln2.b", 1, d, root, 0.0);
    e.append_param(pre + "ffn.w1", d, f, root, 0.02);
    e.append_param(pre + "ffn.b1", 1, f, root, 0.0);
    e.append_param(pre + "ffn.w2", f, d, root, 0.02);
    e.append_param(pre + "ffn.b2", 1, d, root, 0.0);
  }

  e.append_param("final_ln.g", 1, d, root, 0.0);
  e.param("final_ln.g").value.fill(T(1));
  e.append_param("final_ln.b", 1, d, root, 0.0);
  e.append_param("out.w", d, static_cast<size_t>(cfg.vocab_out), root, 0.02);
  e.append_param("out.b", 1, static_cast<size_t>(cfg.vocab_out), root, 0.0);
  return e;
}

template <class T>
void Encoder<T>::insert_adapters(const AdapterConfig& acfg, uint64_t seed, double up_init_scale) {
  require(!adapters.has_value(), "neural: adapters already inserted");
  require(acfg.bottleneck >= 1, "neural: adapter bottleneck must be >= 1");
  freeze_all(true);
  Rng root = Rng(seed).derive(0xADu);
  size_t d = static_cast<size_t>(cfg.model_dim);
  size_t b = static_cast<size_t>(acfg.bottleneck);
  for (int32_t l = 0; l < cfg.layers; ++l) {
    for (const char* place : {"attn", "ffn"}) {
      std::string pre = "adapter.L" + std::to_string(l) + "." + place + ".";
      append_param(pre + "down.w", d, b, root, 0.01);
      append_param(pre + "down.b", 1, b, root, 0.0);
      append_param(pre + "up.w", b, d, root, up_init_scale);
      append_param(pre + "up.b", 1, d, root, 0.0);
      append_param(pre + "ln.g", 1, d, root, 0.0);
      param(pre + "ln.g").value.fill(T(1));
      append_param(pre + "ln.b", 1, d, root, 0.0);
    }
  }
  adapters = acfg;
}

template <class T>
void Encoder<T>::remove_adapters() {
  require(adapters.has_value(), "neural: no adapters to remove");
  std::erase_if(params, [](const Param<T>& p) { return p.name.starts_with("adapter."); });
  adapters.reset();
  freeze_all(false);
}

template <class T>
void Encoder<T>::freeze_all(bool frozen) {
  for (auto& p : params) p.frozen = frozen;
}

template <class T>
bool Encoder<T>::backbone_frozen() const {
  for (const auto& p : params)
    if (!p.name.starts_with("adapter.") && !p.frozen) return false;
  return true;
}

template <class T>
int64_t Encoder<T>::parameter_count(bool trainable_only) const {
  int64_t total = 0;
  for (const auto& p : params)
    if (!trainable_only || !p.frozen) total += static_cast<int64_t>(p.value.size());
  return total;
}

template <class T>
typename Encoder<T>::Output Encoder<T>::forward(const EncoderInput& input, bool train_mode,
                                                Rng* rng) const {
  ForwardCache<T> cache;
  return forward_cached(input, train_mode, rng, &cache);
}

template <class T>
typename Encoder<T>::Output Encoder<T>::forward_cached(const EncoderInput& input, bool train_mode,
                                                       Rng* rng, ForwardCache<T>* cache) const {
  size_t t = input.length(cfg.input_kind);
  require(t >= 1, "neural: empty input sequence");
  require(t <= static_cast<size_t>(cfg.max_len), "neural: sequence longer than max_len");
  size_t d = static_cast<size_t>(cfg.model_dim);
  size_t heads = static_cast<size_t>(cfg.heads);
  size_t dh = d / heads;
  T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  bool drop = train_mode && cfg.dropout > 0.0;
  if (drop) require(rng != nullptr, "neural: dropout requires an rng");

  cache->input = input;

  // input embedding
  Mat<T> x(t, d);
  const Mat<T>& pos = param("embed.pos").value;
  if (cfg.input_kind == InputKind::Tokens) {
    const Mat<T>& emb = param("embed.tokens").value;
    for (size_t i = 0; i < t; ++i) {
      int32_t tok = input.tokens[i];
      require(tok >= 0 && tok <= cfg.vocab_in, "neural: token id out of range");
      const T* erow = emb.row(static_cast<size_t>(tok));
      const T* prow = pos.row(i);
      T* xrow = x.row(i);
      for (size_t j = 0; j < d; ++j) xrow[j] = erow[j] + prow[j];
    }
  } else {
    require(input.features.cols == static_cast<size_t>(cfg.feature_dim),
            "neural: feature dimension mismatch");
    require(input.feature_mask.empty() || input.feature_mask.size() == t,
            "neural: feature mask length mismatch");
    const Mat<T>& w = param("embed.proj.w").value;
    const Mat<T>& b = param("embed.proj.b").value;
    const Mat<T>& maskv = param("embed.mask").value;
    Mat<T> feats(t, static_cast<size_t>(cfg.feature_dim));
    for (size_t i = 0; i < feats.data.size(); ++i)
      feats.data[i] = static_cast<T>(input.features.data[i]);
    kernels::matmul_nn(feats.data.data(), w.data.data(), x.data.data(), t,
                       static_cast<size_t>(cfg.feature_dim), d);
    add_bias_rows(&x, b);
    for (size_t i = 0; i < t; ++i) {
      bool masked = !input.feature_mask.empty() && input.feature_mask[i];
      const T* prow = pos.row(i);
      T* xrow = x.row(i);
      if (masked) std::memcpy(xrow, maskv.row(0), d * sizeof(T));
      for (size_t j = 0; j < d; ++j) xrow[j] += prow[j];
    }
  }
  if (drop) apply_dropout(&x, cfg.dropout, rng, &cache->drop_in);
  cache->x0 = x;

  cache->layers.resize(static_cast<size_t>(cfg.layers));
  for (int32_t l = 0; l < cfg.layers; ++l) {
    LayerCache<T>& lc = cache->layers[static_cast<size_t>(l)];
    std::string pre = "layer." + std::to_string(l) + ".";
    lc.x_in = x;

    Mat<T> a;
    ln_rows_forward(lc.x_in, param(pre + "ln1.g").value.data.data(),
                    param(pre + "ln1.b").value.data.data(), &a, &lc.ln1);

    lc.q = Mat<T>(t, d);
    lc.k = Mat<T>(t, d);
    lc.v = Mat<T>(t, d);
    kernels::matmul_nn(a.data.data(), param(pre + "attn.wq").value.data.data(), lc.q.data.data(),
                       t, d, d);
    add_bias_rows(&lc.q, param(pre + "attn.bq").value);
    kernels::matmul_nn(a.data.data(), param(pre + "attn.wk").value.data.data(), lc.k.data.data(),
                       t, d, d);
    add_bias_rows(&lc.k, param(pre + "attn.bk").value);
    kernels::matmul_nn(a.data.data(), param(pre + "attn.wv").value.data.data(), lc.v.data.data(),
                       t, d, d);
    add_bias_rows(&lc.v, param(pre + "attn.bv").value);
    lc.ln1_out = a;

    lc.ctx = Mat<T>(t, d);
    lc.probs.resize(heads);
    for (size_t h = 0; h < heads; ++h) {
      Mat<T> qh = take_cols(lc.q, h * dh, dh);
      Mat<T> kh = take_cols(lc.k, h * dh, dh);
      Mat<T> vh = take_cols(lc.v, h * dh, dh);
      Mat<T> s(t, t);
      kernels::matmul_nt(qh.data.data(), kh.data.data(), s.data.data(), t, dh, t);
      for (auto& val : s.data) val *= scale;
      kernels::softmax_rows(s.data.data(), t, t);
      lc.probs[h] = s;
      Mat<T> ch(t, dh);
      kernels::matmul_nn(s.data.data(), vh.data.data(), ch.data.data(), t, t, dh);
      put_cols(&lc.ctx, ch, h * dh);
    }

    lc.attn_out = Mat<T>(t, d);
    kernels::matmul_nn(lc.ctx.data.data(), param(pre + "attn.wo").value.data.data(),
                       lc.attn_out.data.data(), t, d, d);
    add_bias_rows(&lc.attn_out, param(pre + "attn.bo").value);

    Mat<T> attn_dropped = lc.attn_out;
    if (drop) apply_dropout(&attn_dropped, cfg.dropout, rng, &lc.drop_attn);
    Mat<T> x_res1 = lc.x_in;
    add_into(&x_res1, attn_dropped);

    if (adapters.has_value()) {
      std::string apre = "adapter.L" + std::to_string(l) + ".attn.";
      x_res1 = adapter_forward_cached(x_res1, apre, &lc.ad_attn);
    }
    lc.x_mid = x_res1;

    Mat<T> b2;
    ln_rows_forward(lc.x_mid, param(pre + "ln2.g").value.data.data(),
                    param(pre + "ln2.b").value.data.data(), &b2, &lc.ln2);
    lc.ln2_out = b2;

    lc.ffn_pre = Mat<T>(t, static_cast<size_t>(cfg.ffn_dim));
    kernels::matmul_nn(b2.data.data(), param(pre + "ffn.w1").value.data.data(),
                       lc.ffn_pre.data.data(), t, d, static_cast<size_t>(cfg.ffn_dim));
    add_bias_rows(&lc.ffn_pre, param(pre + "ffn.b1").value);
    lc.ffn_relu = lc.ffn_pre;
    for (auto& val : lc.ffn_relu.data)
      if (val < T(0)) val = T(0);
    lc.ffn_out = Mat<T>(t, d);
    kernels::matmul_nn(lc.ffn_relu.data.data(), param(pre + "ffn.w2").value.data.data(),
                       lc.ffn_out.data.data(), t, static_cast<size_t>(cfg.ffn_dim), d);
    add_bias_rows(&lc.ffn_out, param(pre + "ffn.b2").value);

    Mat<T> ffn_dropped = lc.ffn_out;
    if (drop) apply_dropout(&ffn_dropped, cfg.dropout, rng, &lc.drop_ffn);
    Mat<T> x_res2 = lc.x_mid;
    add_into(&x_res2, ffn_dropped);

    if (adapters.has_value()) {
      std::string apre = "adapter.L" + std::to_string(l) + ".ffn.";
      x_res2 = adapter_forward_cached(x_res2, apre, &lc.ad_ffn);
    }
    x = x_res2;
  }

  Output out;
  if (cfg.layers > 0) {
    ln_rows_forward(x, param("final_ln.g").value.data.data(),
                    param("final_ln.b").value.data.data(), &out.hidden, &cache->final_ln);
  } else {
    // the zero-layer stack maps the embedded input straight to the head
    out.hidden = x;
  }
  cache->final_hidden = out.hidden;

  out.logits = Mat<T>(t, static_cast<size_t>(cfg.vocab_out));
  kernels::matmul_nn(out.hidden.data.data(), param("out.w").value.data.data(),
                     out.logits.data.data(), t, d, static_cast<size_t>(cfg.vocab_out));
  add_bias_rows(&out.logits, param("out.b").value);
  return out;
}

template <class T>
Mat<T> Encoder<T>::adapter_forward_cached(const Mat<T>& h, const std::string& prefix,
                                          AdapterCache<T>* ac) const {
  const Mat<T>& dw = param(prefix + "down.w").value;
  const Mat<T>& db = param(prefix + "down.b").value;
  const Mat<T>& uw = param(prefix + "up.w").value;
  const Mat<T>& ub = param(prefix + "up.b").value;
  size_t t = h.rows, d = h.cols, b = dw.cols;

  ac->input = h;
  ac->pre_relu = Mat<T>(t, b);
  kernels::matmul_nn(h.data.data(), dw.data.data(), ac->pre_relu.data.data(), t, d, b);
  add_bias_rows(&ac->pre_relu, db);
  ac->relu_out = ac->pre_relu;
  for (auto& val : ac->relu_out.data)
    if (val < T(0)) val = T(0);
  Mat<T> up(t, d);
  kernels::matmul_nn(ac->relu_out.data.data(), uw.data.data(), up.data.data(), t, b, d);
  add_bias_rows(&up, ub);
  ac->pre_ln = h;
  add_into(&ac->pre_ln, up);
  Mat<T> out;
  ln_rows_forward(ac->pre_ln, param(prefix + "ln.g").value.data.data(),
                  param(prefix + "ln.b").value.data.data(), &out, &ac->ln);
  return out;
}

template <class T>
Mat<T> Encoder<T>::adapter_backward(const AdapterCache<T>& ac, const std::string& prefix,
                                    const Mat<T>& dout) {
  auto grad_of = [&](const std::string& name) -> Mat<T>* {
    Param<T>& p = param(name);
    return p.frozen ? nullptr : &p.grad;
  };

  Mat<T> dpre_ln =
      ln_rows_backward(ac.ln, param(prefix + "ln.g").value.data.data(), dout,
                       grad_of(prefix + "ln.g"), grad_of(prefix + "ln.b"));

  // pre_ln = input + up(relu(down(input)))
  Mat<T> dinput = dpre_ln;

  const Mat<T>& uw = param(prefix + "up.w").value;
  size_t t = ac.input.rows, d = ac.input.cols, b = uw.rows;
  if (Mat<T>* g = grad_of(prefix + "up.w")) {
    Mat<T> tmp(b, d);
    kernels::matmul_tn(ac.relu_out.data.data(), dpre_ln.data.data(), tmp.data.data(), b, t, d);
    add_into(g, tmp);
  }
  if (Mat<T>* g = grad_of(prefix + "up.b")) add_colsum(g, dpre_ln);

  Mat<T> drelu(t, b);
  kernels::matmul_nt(dpre_ln.data.data(), uw.data.data(), drelu.data.data(), t, d, b);
  for (size_t i = 0; i < drelu.data.size(); ++i)
    if (ac.pre_relu.data[i] <= T(0)) drelu.data[i] = T(0);

  const Mat<T>& dw = param(prefix + "down.w").value;
  if (Mat<T>* g = grad_of(prefix + "down.w")) {
    Mat<T> tmp(d, b);
    kernels::matmul_tn(ac.input.data.data(), drelu.data.data(), tmp.data.data(), d, t, b);
    add_into(g, tmp);
  }
  if (Mat<T>* g = grad_of(prefix + "down.b")) add_colsum(g, drelu);

  Mat<T> dthrough(t, d);
  kernels::matmul_nt(drelu.data.data(), dw.data.data(), dthrough.data.data(), t, b, d);
  add_into(&dinput, dthrough);
  return dinput;
}

template <class T>
void Encoder<T>::backward(const ForwardCache<T>& cache, const Mat<T>& dlogits) {
  size_t t = dlogits.rows;
  size_t d = static_cast<size_t>(cfg.model_dim);
  size_t heads = static_cast<size_t>(cfg.heads);
  size_t dh = d / heads;
  T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

  auto grad_of = [&](const std::string& name) -> Mat<T>* {
    Param<T>& p = param(name);
    return p.frozen ? nullptr : &p.grad;
  };

  // output head
  if (Mat<T>* g = grad_of("out.w")) {
    Mat<T> tmp(d, static_cast<size_t>(cfg.vocab_out));
    kernels::matmul_tn(cache.final_hidden.data.data(), dlogits.data.data(), tmp.data.data(), d, t,
                       static_cast<size_t>(cfg.vocab_out));
    add_into(g, tmp);
  }
  if (Mat<T>* g = grad_of("out.b")) add_colsum(g, dlogits);

  Mat<T> dx(t, d);
  kernels::matmul_nt(dlogits.data.data(), param("out.w").value.data.data(), dx.data.data(), t,
                     static_cast<size_t>(cfg.vocab_out), d);

  if (cfg.layers > 0)
    dx = ln_rows_backward(cache.final_ln, param("final_ln.g").value.data.data(), dx,
                          grad_of("final_ln.g"), grad_of("final_ln.b"));

  for (int32_t l = cfg.layers - 1; l >= 0; --l) {
    const LayerCache<T>& lc = cache.layers[static_cast<size_t>(l)];
    std::string pre = "layer." + std::to_string(l) + ".";

    if (adapters.has_value())
      dx = adapter_backward(lc.ad_ffn, "adapter.L" + std::to_string(l) + ".ffn.", dx);

    // x_res2 = x_mid + dropout(ffn_out)
    Mat<T> dffn_out = dx;
    dropout_backward(&dffn_out, lc.drop_ffn);
    Mat<T> dxmid = dx;

    size_t f = static_cast<size_t>(cfg.ffn_dim);
    if (Mat<T>* g = grad_of(pre + "ffn.w2")) {
      Mat<T> tmp(f, d);
      kernels::matmul_tn(lc.ffn_relu.data.data(), dffn_out.data.data(), tmp.data.data(), f, t, d);
      add_into(g, tmp);
    }
    if (Mat<T>* g = grad_of(pre + "ffn.b2")) add_colsum(g, dffn_out);
    Mat<T> drelu(t, f);
    kernels::matmul_nt(dffn_out.data.data(), param(pre + "ffn.w2").value.data.data(),
                       drelu.data.data(), t, d, f);
    for (size_t i = 0; i < drelu.data.size(); ++i)
      if (lc.ffn_pre.data[i] <= T(0)) drelu.data[i] = T(0);
    if (Mat<T>* g = grad_of(pre + "ffn.w1")) {
      Mat<T> tmp(d, f);
      kernels::matmul_tn(lc.ln2_out.data.data(), drelu.data.data(), tmp.data.data(), d, t, f);
      add_into(g, tmp);
    }
    if (Mat<T>* g = grad_of(pre + "ffn.b1")) add_colsum(g, drelu);
    Mat<T> dln2(t, d);
    kernels::matmul_nt(drelu.data.data(), param(pre + "ffn.w1").value.data.data(),
                       dln2.data.data(), t, f, d);
    Mat<T> dxmid2 = ln_rows_backward(lc.ln2, param(pre + "ln2.g").value.data.data(), dln2,
                                     grad_of(pre + "ln2.g"), grad_of(pre + "ln2.b"));
    add_into(&dxmid, dxmid2);
    dx = dxmid;

    if (adapters.has_value())
      dx = adapter_backward(lc.ad_attn, "adapter.L" + std::to_string(l) + ".attn.", dx);

    // x_res1 = x_in + dropout(attn_out)
    Mat<T> dattn_out = dx;
    dropout_backward(&dattn_out, lc.drop_attn);
    Mat<T> dx_in = dx;

    if (Mat<T>* g = grad_of(pre + "attn.wo")) {
      Mat<T> tmp(d, d);
      kernels::matmul_tn(lc.ctx.data.data(), dattn_out.data.data(), tmp.data.data(), d, t, d);
      add_into(g, tmp);
    }
    if (Mat<T>* g = grad_of(pre + "attn.bo")) add_colsum(g, dattn_out);
    Mat<T> dctx(t, d);
    kernels::matmul_nt(dattn_out.data.data(), param(pre + "attn.wo").value.data.data(),
                       dctx.data.data(), t, d, d);

    Mat<T> dq(t, d), dk(t, d), dv(t, d);
    for (size_t h = 0; h < heads; ++h) {
      Mat<T> dch = take_cols(dctx, h * dh, dh);
      Mat<T> qh = take_cols(lc.q, h * dh, dh);
      Mat<T> kh = take_cols(lc.k, h * dh, dh);
      Mat<T> vh = take_cols(lc.v, h * dh, dh);
      const Mat<T>& p = lc.probs[h];

      Mat<T> dp(t, t);
      kernels::matmul_nt(dch.data.data(), vh.data.data(), dp.data.data(), t, dh, t);
      Mat<T> dvh(t, dh);
      kernels::matmul_tn(p.data.data(), dch.data.data(), dvh.data.data(), t, t, dh);

      // softmax backward, then fold in the 1/sqrt(dh) scale
      Mat<T> ds(t, t);
      for (size_t i = 0; i < t; ++i) {
        T dot = T(0);
        for (size_t j = 0; j < t; ++j) dot += dp(i, j) * p(i, j);
        for (size_t j = 0; j < t; ++j) ds(i, j) = (dp(i, j) - dot) * p(i, j) * scale;
      }

      Mat<T> dqh(t, dh);
      kernels::matmul_nn(ds.data.data(), kh.data.data(), dqh.data.data(), t, t, dh);
      Mat<T> dkh(t, dh);
      kernels::matmul_tn(ds.data.data(), qh.data.data(), dkh.data.data(), t, t, dh);

      put_cols(&dq, dqh, h * dh);
      put_cols(&dk, dkh, h * dh);
      put_cols(&dv, dvh, h * dh);
    }

    Mat<T> da(t, d, T(0));
    auto qkv_back = [&](const char* w, const char* b, const Mat<T>& dout) {
      if (Mat<T>* g = grad_of(pre + "attn." + w)) {
        Mat<T> tmp(d, d);
        kernels::matmul_tn(lc.ln1_out.data.data(), dout.data.data(), tmp.data.data(), d, t, d);
        add_into(g, tmp);
      }
      if (Mat<T>* g = grad_of(pre + "attn." + b)) add_colsum(g, dout);
      Mat<T> tmp(t, d);
      kernels::matmul_nt(dout.data.data(), param(pre + "attn." + w).value.data.data(),
                         tmp.data.data(), t, d, d);
      add_into(&da, tmp);
    };
    qkv_back("wq", "bq", dq);
    qkv_back("wk", "bk", dk);
    qkv_back("wv", "bv", dv);

    Mat<T> dx_in2 = ln_rows_backward(lc.ln1, param(pre + "ln1.g").value.data.data(), da,
                                     grad_of(pre + "ln1.g"), grad_of(pre + "ln1.b"));
    add_into(&dx_in, dx_in2);
    dx = dx_in;
  }

  // input embedding backward
  dropout_backward(&dx, cache.drop_in);
  if (Mat<T>* g = grad_of("embed.pos")) {
    for (size_t i = 0; i < t; ++i)
      for (size_t j = 0; j < d; ++j) (*g)(i, j) += dx(i, j);
  }
  if (cfg.input_kind == InputKind::Tokens) {
    if (Mat<T>* g = grad_of("embed.tokens")) {
      for (size_t i = 0; i < t; ++i) {
        T* grow = g->row(static_cast<size_t>(cache.input.tokens[i]));
        for (size_t j = 0; j < d; ++j) grow[j] += dx(i, j);
      }
    }
  } else {
    Mat<T>* gw = grad_of("embed.proj.w");
    Mat<T>* gb = grad_of("embed.proj.b");
    Mat<T>* gm = grad_of("embed.mask");
    for (size_t i = 0; i < t; ++i) {
      bool masked = !cache.input.feature_mask.empty() && cache.input.feature_mask[i];
      if (masked) {
        if (gm)
          for (size_t j = 0; j < d; ++j) (*gm)(0, j) += dx(i, j);
        continue;
      }
      if (gb)
        for (size_t j = 0; j < d; ++j) (*gb)(0, j) += dx(i, j);
      if (gw) {
        for (size_t fidx = 0; fidx < static_cast<size_t>(cfg.feature_dim); ++fidx) {
          T fval = static_cast<T>(cache.input.features(i, fidx));
          T* grow = gw->row(fidx);
          for (size_t j = 0; j < d; ++j) grow[j] += fval * dx(i, j);
        }
      }
    }
  }
}

template <class T>
double Encoder<T>::loss_and_grads(std::span<const TrainExample> batch, Rng* dropout_rng,
                                  int64_t* flagged_correct) {
  require(!batch.empty(), "neural: empty batch");
  size_t total_flagged = 0;
  for (const auto& ex : batch) {
    size_t t = ex.input.length(cfg.input_kind);
    require(ex.targets.size() == t && ex.loss_mask.size() == t,
            "neural: targets/mask length mismatch");
    for (size_t i = 0; i < t; ++i)
      if (ex.loss_mask[i]) {
        require(ex.targets[i] >= 0 && ex.targets[i] < cfg.vocab_out,
                "neural: target id out of range");
        ++total_flagged;
      }
  }
  require(total_flagged >= 1, "neural: loss mask flags no positions");

  for (auto& p : params)
    if (!p.frozen)
      p.grad = Mat<T>(p.value.rows, p.value.cols);
    else
      p.grad = Mat<T>();

  double loss_sum = 0.0;
  int64_t correct = 0;
  T inv = static_cast<T>(1.0 / static_cast<double>(total_flagged));
  for (const auto& ex : batch) {
    ForwardCache<T> cache;
    Output out = forward_cached(ex.input, true, dropout_rng, &cache);
    size_t t = out.logits.rows;
    Mat<T> dlogits(t, static_cast<size_t>(cfg.vocab_out));
    for (size_t i = 0; i < t; ++i) {
      if (!ex.loss_mask[i]) continue;
      const T* z = out.logits.row(i);
      double mx = static_cast<double>(z[0]);
      int32_t argmax = 0;
      for (int32_t j = 1; j < cfg.vocab_out; ++j)
        if (static_cast<double>(z[j]) > mx) {
          mx = static_cast<double>(z[j]);
          argmax = j;
        }
      if (argmax == ex.targets[i]) ++correct;
      double sum = 0.0;
      for (int32_t j = 0; j < cfg.vocab_out; ++j) sum += std::exp(static_cast<double>(z[j]) - mx);
      double lse = mx + std::log(sum);
      loss_sum += lse - static_cast<double>(z[ex.targets[i]]);
      T* drow = dlogits.row(i);
      for (int32_t j = 0; j < cfg.vocab_out; ++j) {
        double pj = std::exp(static_cast<double>(z[j]) - lse);
        drow[j] = static_cast<T>(pj) * inv;
      }
      drow[ex.targets[i]] -= inv;
    }
    backward(cache, dlogits);
  }
  if (flagged_correct) *flagged_correct = correct;
  double loss = loss_sum / static_cast<double>(total_flagged);
  require(std::isfinite(loss), "neural: non-finite training loss");
  return loss;
}

template <class T>
double Encoder<T>::loss_only(std::span<const TrainExample> batch) const {
  require(!batch.empty(), "neural: empty batch");
  double loss_sum = 0.0;
  size_t total_flagged = 0;
  for (const auto& ex : batch) {
    Output out = forward(ex.input, false, nullptr);
    size_t t = out.logits.rows;
    require(ex.targets.size() == t && ex.loss_mask.size() == t,
            "neural: targets/mask length mismatch");
    for (size_t i = 0; i < t; ++i) {
      if (!ex.loss_mask[i]) continue;
      const T* z = out.logits.row(i);
      double mx = static_cast<double>(z[0]);
      for (int32_t j = 1; j < cfg.vocab_out; ++j)
        mx = std::max(mx, static_cast<double>(z[j]));
      double sum = 0.0;
      for (int32_t j = 0; j < cfg.vocab_out; ++j) sum += std::exp(static_cast<double>(z[j]) - mx);
      loss_sum += mx + std::log(sum) - static_cast<double>(z[ex.targets[i]]);
      ++total_flagged;
    }
  }
  require(total_flagged >= 1, "neural: loss mask flags no positions");
  return loss_sum / static_cast<double>(total_flagged);
}

template <class T>
void Encoder<T>::optimizer_step(int64_t step, const LrSchedule& schedule) {
  schedule.validate();
  double lr = schedule.lr_at(step);
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  for (auto& p : params) {
    if (p.frozen || p.grad.empty()) continue;
    if (p.adam_m.empty()) {
      p.adam_m = Mat<T>(p.value.rows, p.value.cols);
      p.adam_v = Mat<T>(p.value.rows, p.value.cols);
    }
    for (size_t i = 0; i < p.value.data.size(); ++i) {
      double g = static_cast<double>(p.grad.data[i]);
      double m = beta1 * static_cast<double>(p.adam_m.data[i]) + (1.0 - beta1) * g;
      double v = beta2 * static_cast<double>(p.adam_v.data[i]) + (1.0 - beta2) * g * g;
      p.adam_m.data[i] = static_cast<T>(m);
      p.adam_v.data[i] = static_cast<T>(v);
      double mhat = m / bc1;
      double vhat = v / bc2;
      p.value.data[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + eps));
    }
  }
}

// ---- checkpoint ----

namespace {

nlohmann::json config_to_json(const EncoderConfig& cfg,
                              const std::optional<AdapterConfig>& adapters) {
  nlohmann::json j;
  j["layers"] = cfg.layers;
  j["model_dim"] = cfg.model_dim;
  j["heads"] = cfg.heads;
  j["ffn_dim"] = cfg.ffn_dim;
  j["max_len"] = cfg.max_len;
  j["dropout"] = cfg.dropout;
  j["input_kind"] = input_kind_name(cfg.input_kind);
  j["vocab_in"] = cfg.vocab_in;
  j["feature_dim"] = cfg.feature_dim;
  j["vocab_out"] = cfg.vocab_out;
  if (adapters.has_value()) j["adapter_bottleneck"] = adapters->bottleneck;
  return j;
}

}  // namespace

template <class T>
void Encoder<T>::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("neural: cannot open " + path + " for writing");
  io::write_magic(os, "ENCP");
  io::write_u32_le(os, 1);
  std::string cfg_json = config_to_json(cfg, adapters).dump();
  io::write_u32_le(os, static_cast<uint32_t>(cfg_json.size()));
  os.write(cfg_json.data(), static_cast<std::streamsize>(cfg_json.size()));
  io::write_u32_le(os, static_cast<uint32_t>(params.size()));
  for (const auto& p : params) {
    io::write_u16_le(os, static_cast<uint16_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    io::write_u8(os, 2);
    io::write_u32_le(os, static_cast<uint32_t>(p.value.rows));
    io::write_u32_le(os, static_cast<uint32_t>(p.value.cols));
    for (T x : p.value.data) io::write_f32_le(os, static_cast<float>(x));
    io::write_u8(os, p.frozen ? 1 : 0);
  }
  if (!os) throw IoError("neural: short write to " + path);
}

template <class T>
void Encoder<T>::save_backbone(const std::string& path) const {
  Encoder<T> copy;
  copy.cfg = cfg;
  for (const auto& p : params)
    if (!p.name.starts_with("adapter.")) {
      Param<T> q;
      q.name = p.name;
      q.value = p.value;
      q.frozen = p.frozen;
      copy.params.push_back(std::move(q));
    }
  copy.save(path);
}

template <class T>
Encoder<T> Encoder<T>::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("neural: cannot open " + path);
  io::expect_magic(is, "ENCP", "ENCP checkpoint");
  uint32_t version = io::read_u32_le(is, "version");
  if (version != 1) throw IoError("neural: unsupported ENCP version in " + path);
  uint32_t cfg_len = io::read_u32_le(is, "config length");
  std::string cfg_json(cfg_len, '\0');
  io::read_bytes(is, cfg_json.data(), cfg_len, "config");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(cfg_json);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("neural: bad config JSON in " + path + ": " + e.what());
  }

  Encoder e;
  e.cfg.layers = j.at("layers").get<int32_t>();
  e.cfg.model_dim = j.at("model_dim").get<int32_t>();
  e.cfg.heads = j.at("heads").get<int32_t>();
  e.cfg.ffn_dim = j.at("ffn_dim").get<int32_t>();
  e.cfg.max_len = j.at("max_len").get<int32_t>();
  e.cfg.dropout = j.at("dropout").get<double>();
  e.cfg.input_kind = input_kind_from(j.at("input_kind").get<std::string>());
  e.cfg.vocab_in = j.at("vocab_in").get<int32_t>();
  e.cfg.feature_dim = j.at("feature_dim").get<int32_t>();
  e.cfg.vocab_out = j.at("vocab_out").get<int32_t>();
  if (j.contains("adapter_bottleneck"))
    e.adapters = AdapterConfig{j.at("adapter_bottleneck").get<int32_t>()};

  uint32_t count = io::read_u32_le(is, "param count");
  for (uint32_t i = 0; i < count; ++i) {
    Param<T> p;
    uint16_t name_len = io::read_u16_le(is, "name length");
    p.name.resize(name_len);
    io::read_bytes(is, p.name.data(), name_len, "name");
    uint8_t rank = io::read_u8(is, "rank");
    if (rank != 2) throw IoError("neural: unsupported parameter rank in " + path);
    uint32_t rows = io::read_u32_le(is, "rows");
    uint32_t cols = io::read_u32_le(is, "cols");
    p.value = Mat<T>(rows, cols);
    for (size_t k = 0; k < p.value.data.size(); ++k)
      p.value.data[k] = static_cast<T>(io::read_f32_le(is, "payload"));
    p.frozen = io::read_u8(is, "frozen") != 0;
    e.params.push_back(std::move(p));
  }
  return e;
}

// ---- free helpers ----

template <class T>
Mat<T> layer_norm_rows(const Mat<T>& x, const Mat<T>& gamma, const Mat<T>& beta) {
  require(gamma.cols == x.cols && beta.cols == x.cols, "neural: layer norm shape mismatch");
  Mat<T> out;
  LayerNormCache<T> cache;
  ln_rows_forward(x, gamma.data.data(), beta.data.data(), &out, &cache);
  return out;
}

template <class T>
Mat<T> adapter_forward(const Mat<T>& h, const Mat<T>& down_w, const Mat<T>& down_b,
                       const Mat<T>& up_w, const Mat<T>& up_b, const Mat<T>& ln_g,
                       const Mat<T>& ln_b) {
  require(down_w.rows == h.cols && up_w.cols == h.cols && up_w.rows == down_w.cols,
          "neural: adapter shape mismatch");
  size_t t = h.rows, d = h.cols, b = down_w.cols;
  Mat<T> pre(t, b);
  kernels::matmul_nn(h.data.data(), down_w.data.data(), pre.data.data(), t, d, b);
  add_bias_rows(&pre, down_b);
  for (auto& v : pre.data)
    if (v < T(0)) v = T(0);
  Mat<T> up(t, d);
  kernels::matmul_nn(pre.data.data(), up_w.data.data(), up.data.data(), t, b, d);
  add_bias_rows(&up, up_b);
  Mat<T> sum = h;
  add_into(&sum, up);
  return layer_norm_rows(sum, ln_g, ln_b);
}

template class Encoder<float>;
template class Encoder<double>;
template Mat<float> adapter_forward<float>(const Mat<float>&, const Mat<float>&, const Mat<float>&,
                                           const Mat<float>&, const Mat<float>&, const Mat<float>&,
                                           const Mat<float>&);
template Mat<double> adapter_forward<double>(const Mat<double>&, const Mat<double>&,
                                             const Mat<double>&, const Mat<double>&,
                                             const Mat<double>&, const Mat<double>&,
                                             const Mat<double>&);
template Mat<float> layer_norm_rows<float>(const Mat<float>&, const Mat<float>&, const Mat<float>&);
template Mat<double> layer_norm_rows<double>(const Mat<double>&, const Mat<double>&,
                                             const Mat<double>&);

}  // namespace unitcorr::neural
