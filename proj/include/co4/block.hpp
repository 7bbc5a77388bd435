#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "co4/modulation.hpp"
#include "co4/rng.hpp"
#include "co4/tensor.hpp"

namespace co4 {

enum class Arch { Standard, Co4 };
Arch parse_arch(const std::string& name);
std::string arch_name(Arch arch);

// Hyperparameters of one attention block stack.
struct Co4BlockConfig {
  int embed_dim = 64;
  int latents = 4;  // L_q
  int heads = 1;
  int layers = 1;
  ModulationKind modulation = ModulationKind::Cooperation;
  double dropout_p = 0.1;
  bool use_positional = false;
  int num_classes = 10;

  int head_dim() const { return embed_dim / heads; }
  void validate() const;  // throws std::invalid_argument
};

// Per-head result of the triadic loops. k_m and v_m are the per-latent sets
// averaged over latents; q_m stays per-latent.
struct TriadicOutput {
  Tensor q_m;  // L_q×E_h
  Tensor k_m;  // N×E_h
  Tensor v_m;  // N×E_h
};

// Two-stage triadic modulation. Stage 1 (perceptual): each latent modulates
// the keys with C = (Q_l + V_n)/2 and is itself modulated against every
// token with C = (K_n + V_n)/2, then averaged over tokens. Stage 2
// (wakeful): values are modulated with C = (Q_m,l + K_m,l,n)/2. Costs
// exactly 3·L_q·N·E_h modulation evaluations.
TriadicOutput triadic_modulate(const Tensor& q, const Tensor& k,
                               const Tensor& v, ModulationKind kind);

// softmax(q_m·k_mᵀ/√E_h)·v_m; the score matrix is L_q×N.
Tensor attention(const TriadicOutput& t);

// Named parameter registry; registration order is the checkpoint order.
struct ParamStore {
  std::vector<std::pair<std::string, Tensor>> items;

  Tensor& add(const std::string& name, Tensor t);
  Tensor* find(const std::string& name);
  const Tensor* find(const std::string& name) const;
  long long scalar_count() const;
  void zero_grads();
};

struct LayerParams {
  Tensor w_q, b_q, w_k, b_k, w_v, b_v;
  Tensor ln_gain, ln_bias;
};

// Latent cross-attention layer: project tokens to K/V and latents to Q,
// run the triadic loops per head, attend, then residual + layer norm.
// Returns L_q×E.
Tensor co4_layer(const LayerParams& p, const Tensor& latents,
                 const Tensor& tokens, const Co4BlockConfig& cfg);

// Parameter-matched baseline: plain self-attention over x with the same
// single post-attention residual + layer norm and no feedforward block.
Tensor standard_layer(const LayerParams& p, const Tensor& x,
                      const Co4BlockConfig& cfg);

// Linear patch embedding -> ReLU -> dropout (training mode only).
Tensor embed_patches(const Tensor& patches, const Tensor& w, const Tensor& b,
                     double dropout_p, bool training, Rng* rng);

// Mean-pool rows then affine map to logits (1×num_classes).
Tensor classify(const Tensor& pooled_input, const Tensor& head_w,
                const Tensor& head_b);

// Full classifier: embedding (patch or token), optional learned positional
// embedding, a stack of attention layers and a linear head. The Co4 variant
// refines a learned latent bank against the embedded tokens; the standard
// variant self-attends over the tokens. Layer parameters are identical
// between the two, so parameter counts match per layer.
class SequenceClassifier {
 public:
  enum class InputMode { Patches, Tokens };

  SequenceClassifier(Arch arch, InputMode mode, Co4BlockConfig cfg,
                     int input_dim, int seq_len, std::uint64_t seed);

  Tensor forward_patches(const Tensor& patches, bool training = false,
                         Rng* dropout_rng = nullptr);
  Tensor forward_tokens(const std::vector<int>& ids, bool training = false,
                        Rng* dropout_rng = nullptr);

  Arch arch() const { return arch_; }
  InputMode mode() const { return mode_; }
  const Co4BlockConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  long long param_count() const { return params_.scalar_count(); }

 private:
  Tensor run_stack(const Tensor& tokens);

  Arch arch_;
  InputMode mode_;
  Co4BlockConfig cfg_;
  int input_dim_;
  int seq_len_;
  std::vector<LayerParams> layers_;
  ParamStore params_;
};

}  // namespace co4
