#include "co4/block.hpp"

#include <cmath>
#include <stdexcept>

#include "co4/macs.hpp"

namespace co4 {

Arch parse_arch(const std::string& name) {
  if (name == "standard") return Arch::Standard;
  if (name == "co4") return Arch::Co4;
  throw std::invalid_argument("unknown arch: '" + name + "' (expected standard|co4)");
}

std::string arch_name(Arch arch) {
  return arch == Arch::Standard ? "standard" : "co4";
}

void Co4BlockConfig::validate() const {
  if (embed_dim <= 0) throw std::invalid_argument("config: embed_dim must be positive");
  if (latents < 1) throw std::invalid_argument("config: latents must be >= 1");
  if (heads < 1) throw std::invalid_argument("config: heads must be >= 1");
  if (embed_dim % heads != 0)
    throw std::invalid_argument("config: heads (" + std::to_string(heads) +
                                ") must divide embed_dim (" + std::to_string(embed_dim) + ")");
  if (layers < 1) throw std::invalid_argument("config: layers must be >= 1");
  if (dropout_p < 0.0 || dropout_p >= 1.0)
    throw std::invalid_argument("config: dropout_p must be in [0,1)");
  if (num_classes < 1) throw std::invalid_argument("config: num_classes must be >= 1");
}

TriadicOutput triadic_modulate(const Tensor& q, const Tensor& k,
                               const Tensor& v, ModulationKind kind) {
  if (q.shape.size() != 2 || k.shape.size() != 2 || v.shape.size() != 2)
    throw std::invalid_argument("triadic_modulate: expects 2-D q/k/v");
  if (k.shape != v.shape)
    throw std::invalid_argument("triadic_modulate: k " + shape_str(k.shape) +
                                " vs v " + shape_str(v.shape));
  if (q.cols() != k.cols())
    throw std::invalid_argument("triadic_modulate: q " + shape_str(q.shape) +
                                " vs k " + shape_str(k.shape));
  const int l_q = q.rows();
  const int n = k.rows();

  // C for the latent side: (K_n + V_n)/2, one row per token.
  Tensor kv_half = scale(add(k, v), 0.5);

  std::vector<Tensor> q_m_rows;
  std::vector<Tensor> k_m_per_latent;
  q_m_rows.reserve(l_q);
  k_m_per_latent.reserve(l_q);

  // Stage 1: perceptual. Keys evolve under each latent's question; each
  // latent question evolves against every token and is averaged.
  for (int l = 0; l < l_q; ++l) {
    Tensor q_l = broadcast_rows(row(q, l), n);
    Tensor c_for_k = scale(add(q_l, v), 0.5);
    k_m_per_latent.push_back(modulate(kind, k, c_for_k));
    q_m_rows.push_back(mean_rows(modulate(kind, q_l, kv_half)));
  }

  // Stage 2: wakeful. Values evolve under the already-modulated Q and K.
  Tensor k_m_acc, v_m_acc;
  for (int l = 0; l < l_q; ++l) {
    Tensor q_m_l = broadcast_rows(q_m_rows[l], n);
    Tensor c_for_v = scale(add(q_m_l, k_m_per_latent[l]), 0.5);
    Tensor v_m_l = modulate(kind, v, c_for_v);
    k_m_acc = l == 0 ? k_m_per_latent[l] : add(k_m_acc, k_m_per_latent[l]);
    v_m_acc = l == 0 ? v_m_l : add(v_m_acc, v_m_l);
  }

  TriadicOutput out;
  out.q_m = concat_rows(q_m_rows);
  out.k_m = scale(k_m_acc, 1.0 / l_q);
  out.v_m = scale(v_m_acc, 1.0 / l_q);
  return out;
}

Tensor attention(const TriadicOutput& t) {
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(t.q_m.cols()));
  Tensor scores;
  {
    macs::ScopedTag tag("scores");
    scores = scale(matmul_nt(t.q_m, t.k_m), inv_sqrt);
  }
  Tensor weights = softmax_rows(scores);
  macs::ScopedTag tag("weighted_sum");
  return matmul(weights, t.v_m);
}

namespace {

struct Projected {
  Tensor q, k, v;
};

Projected project(const LayerParams& p, const Tensor& for_q,
                  const Tensor& for_kv, bool is_co4) {
  Projected out;
  if (is_co4) {
    {
      macs::ScopedTag tag("q_proj");
      out.q = matmul(for_q, p.w_q);
    }
    macs::ScopedTag tag("kv_proj");
    out.k = matmul(for_kv, p.w_k);
    out.v = matmul(for_kv, p.w_v);
  } else {
    macs::ScopedTag tag("projections");
    out.q = matmul(for_q, p.w_q);
    out.k = matmul(for_kv, p.w_k);
    out.v = matmul(for_kv, p.w_v);
  }
  out.q = add_rowvec(out.q, p.b_q);
  out.k = add_rowvec(out.k, p.b_k);
  out.v = add_rowvec(out.v, p.b_v);
  return out;
}

Tensor attend_heads(const Projected& pr, const Co4BlockConfig& cfg,
                    bool triadic) {
  const int e_h = cfg.head_dim();
  std::vector<Tensor> head_outs;
  head_outs.reserve(cfg.heads);
  for (int h = 0; h < cfg.heads; ++h) {
    const int off = h * e_h;
    Tensor q_h = cfg.heads == 1 ? pr.q : slice_cols(pr.q, off, e_h);
    Tensor k_h = cfg.heads == 1 ? pr.k : slice_cols(pr.k, off, e_h);
    Tensor v_h = cfg.heads == 1 ? pr.v : slice_cols(pr.v, off, e_h);
    TriadicOutput t;
    if (triadic) {
      t = triadic_modulate(q_h, k_h, v_h, cfg.modulation);
    } else {
      t.q_m = q_h;
      t.k_m = k_h;
      t.v_m = v_h;
    }
    head_outs.push_back(attention(t));
  }
  return cfg.heads == 1 ? head_outs[0] : concat_cols(head_outs);
}

}  // namespace

Tensor co4_layer(const LayerParams& p, const Tensor& latents,
                 const Tensor& tokens, const Co4BlockConfig& cfg) {
  cfg.validate();
  Projected pr = project(p, latents, tokens, true);
  Tensor attended = attend_heads(pr, cfg, true);
  return layer_norm(add(latents, attended), p.ln_gain, p.ln_bias);
}

Tensor standard_layer(const LayerParams& p, const Tensor& x,
                      const Co4BlockConfig& cfg) {
  cfg.validate();
  Projected pr = project(p, x, x, false);
  Tensor attended = attend_heads(pr, cfg, false);
  return layer_norm(add(x, attended), p.ln_gain, p.ln_bias);
}

Tensor embed_patches(const Tensor& patches, const Tensor& w, const Tensor& b,
                     double dropout_p, bool training, Rng* rng) {
  Tensor x = relu(add_rowvec(matmul(patches, w), b));
  if (training && dropout_p > 0.0) {
    if (!rng) throw std::invalid_argument("embed_patches: training dropout needs an rng");
    x = dropout(x, dropout_p, *rng);
  }
  return x;
}

Tensor classify(const Tensor& pooled_input, const Tensor& head_w,
                const Tensor& head_b) {
  return add_rowvec(matmul(mean_rows(pooled_input), head_w), head_b);
}

// ---- SequenceClassifier -----------------------------------------------------

Tensor& ParamStore::add(const std::string& name, Tensor t) {
  items.emplace_back(name, std::move(t));
  return items.back().second;
}

Tensor* ParamStore::find(const std::string& name) {
  for (auto& [n, t] : items)
    if (n == name) return &t;
  return nullptr;
}

const Tensor* ParamStore::find(const std::string& name) const {
  for (const auto& [n, t] : items)
    if (n == name) return &t;
  return nullptr;
}

long long ParamStore::scalar_count() const {
  long long n = 0;
  for (const auto& [name, t] : items) n += static_cast<long long>(t.size());
  return n;
}

void ParamStore::zero_grads() {
  for (auto& [name, t] : items) t.zero_grad();
}

namespace {

Tensor glorot(std::vector<int> shape, int fan_in, int fan_out, Rng& rng) {
  const double lim = std::sqrt(6.0 / (fan_in + fan_out));
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (double& v : *t.data) v = rng.uniform(-lim, lim);
  return t;
}

Tensor gaussian(std::vector<int> shape, double sd, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (double& v : *t.data) v = rng.normal(0.0, sd);
  return t;
}

}  // namespace

SequenceClassifier::SequenceClassifier(Arch arch, InputMode mode,
                                       Co4BlockConfig cfg, int input_dim,
                                       int seq_len, std::uint64_t seed)
    : arch_(arch), mode_(mode), cfg_(cfg), input_dim_(input_dim), seq_len_(seq_len) {
  cfg_.validate();
  if (input_dim <= 0) throw std::invalid_argument("model: input_dim must be positive");
  if (seq_len <= 0) throw std::invalid_argument("model: seq_len must be positive");
  Rng rng(Rng::derive(seed, 0xb10c));
  const int e = cfg_.embed_dim;

  if (mode_ == InputMode::Patches) {
    params_.add("embed.w", glorot({input_dim, e}, input_dim, e, rng));
    params_.add("embed.b", Tensor::zeros({1, e}, true));
  } else {
    params_.add("embed.table", gaussian({input_dim, e}, 0.02, rng));
  }
  if (cfg_.use_positional)
    params_.add("embed.pos", gaussian({seq_len, e}, 0.02, rng));
  if (arch_ == Arch::Co4)
    params_.add("latents", gaussian({cfg_.latents, e}, 0.02, rng));

  layers_.resize(cfg_.layers);
  for (int i = 0; i < cfg_.layers; ++i) {
    const std::string pre = "layer" + std::to_string(i) + ".";
    LayerParams& lp = layers_[i];
    lp.w_q = params_.add(pre + "w_q", glorot({e, e}, e, e, rng));
    lp.b_q = params_.add(pre + "b_q", Tensor::zeros({1, e}, true));
    lp.w_k = params_.add(pre + "w_k", glorot({e, e}, e, e, rng));
    lp.b_k = params_.add(pre + "b_k", Tensor::zeros({1, e}, true));
    lp.w_v = params_.add(pre + "w_v", glorot({e, e}, e, e, rng));
    lp.b_v = params_.add(pre + "b_v", Tensor::zeros({1, e}, true));
    lp.ln_gain = params_.add(pre + "ln_gain", Tensor::full({1, e}, 1.0, true));
    lp.ln_bias = params_.add(pre + "ln_bias", Tensor::zeros({1, e}, true));
  }
  params_.add("head.w", glorot({e, cfg_.num_classes}, e, cfg_.num_classes, rng));
  params_.add("head.b", Tensor::zeros({1, cfg_.num_classes}, true));
}

Tensor SequenceClassifier::run_stack(const Tensor& tokens) {
  const Tensor* head_w = params_.find("head.w");
  const Tensor* head_b = params_.find("head.b");
  if (arch_ == Arch::Co4) {
    Tensor lat = *params_.find("latents");
    for (auto& lp : layers_) lat = co4_layer(lp, lat, tokens, cfg_);
    return classify(lat, *head_w, *head_b);
  }
  Tensor x = tokens;
  for (auto& lp : layers_) x = standard_layer(lp, x, cfg_);
  return classify(x, *head_w, *head_b);
}

Tensor SequenceClassifier::forward_patches(const Tensor& patches, bool training,
                                           Rng* dropout_rng) {
  if (mode_ != InputMode::Patches)
    throw std::runtime_error("model: forward_patches on a token model");
  if (patches.cols() != input_dim_)
    throw std::invalid_argument("model: patch width " + shape_str(patches.shape) +
                                " != " + std::to_string(input_dim_));
  Tensor x = embed_patches(patches, *params_.find("embed.w"),
                           *params_.find("embed.b"), cfg_.dropout_p, training,
                           dropout_rng);
  if (cfg_.use_positional) {
    if (patches.rows() != seq_len_)
      throw std::invalid_argument("model: positional table expects " +
                                  std::to_string(seq_len_) + " tokens");
    x = add(x, *params_.find("embed.pos"));
  }
  return run_stack(x);
}

Tensor SequenceClassifier::forward_tokens(const std::vector<int>& ids,
                                          bool training, Rng* dropout_rng) {
  (void)training;
  (void)dropout_rng;
  if (mode_ != InputMode::Tokens)
    throw std::runtime_error("model: forward_tokens on a patch model");
  Tensor x = gather_rows(*params_.find("embed.table"), ids);
  if (cfg_.use_positional) {
    if (static_cast<int>(ids.size()) != seq_len_)
      throw std::invalid_argument("model: positional table expects " +
                                  std::to_string(seq_len_) + " tokens");
    x = add(x, *params_.find("embed.pos"));
  }
  return run_stack(x);
}

}  // namespace co4
