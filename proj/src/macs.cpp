#include "co4/macs.hpp"

#include <atomic>
#include <iostream>
#include <mutex>
#include <stdexcept>

#include "co4/block.hpp"
#include "co4/rng.hpp"
#include "json.hpp"

namespace co4::macs {

namespace {

void check_positive(long long v, const char* what) {
  if (v <= 0)
    throw std::invalid_argument(std::string("macs: ") + what + " must be positive");
}

std::atomic<bool> g_enabled{false};
std::mutex g_mutex;
std::map<std::string, long long> g_matmul;       // tag -> MACs
std::map<std::string, long long> g_elementwise;  // kind -> evaluations
thread_local const char* t_tag = nullptr;

}  // namespace

long long macs_standard(int tokens, int embed_dim, int layers) {
  check_positive(tokens, "tokens");
  check_positive(embed_dim, "embed_dim");
  check_positive(layers, "layers");
  const long long p = tokens, e = embed_dim;
  return layers * (p * e * e + p * p * e);
}

long long macs_co4(int tokens, int embed_dim, int layers, int latents) {
  check_positive(tokens, "tokens");
  check_positive(embed_dim, "embed_dim");
  check_positive(layers, "layers");
  check_positive(latents, "latents");
  if (latents > tokens)
    std::cerr << "macs: warning: latents (" << latents << ") > tokens ("
              << tokens << "); the latent bottleneck assumes L_q <= P\n";
  const long long p = tokens, e = embed_dim, lq = latents;
  return layers * (lq * e * e + p * e * e + lq * p * e);
}

void set_enabled(bool on) { g_enabled = on; }
bool enabled() { return g_enabled; }

void reset() {
  std::lock_guard<std::mutex> lock(g_mutex);
  g_matmul.clear();
  g_elementwise.clear();
}

void count_matmul(long long m, long long k, long long n) {
  if (!g_enabled) return;
  std::lock_guard<std::mutex> lock(g_mutex);
  g_matmul[t_tag ? t_tag : "other"] += m * k * n;
}

void count_elementwise(const std::string& kind, long long n) {
  if (!g_enabled) return;
  std::lock_guard<std::mutex> lock(g_mutex);
  g_elementwise[kind] += n;
}

long long matmul_total() {
  std::lock_guard<std::mutex> lock(g_mutex);
  long long total = 0;
  for (const auto& [tag, n] : g_matmul) total += n;
  return total;
}

long long elementwise_count(const std::string& kind) {
  std::lock_guard<std::mutex> lock(g_mutex);
  const auto it = g_elementwise.find(kind);
  return it == g_elementwise.end() ? 0 : it->second;
}

ScopedTag::ScopedTag(const char* tag) : prev_(t_tag) { t_tag = tag; }
ScopedTag::~ScopedTag() { t_tag = prev_; }

std::string MacReport::to_json(int indent) const {
  nlohmann::json j;
  j["arch"] = arch;
  j["tokens"] = tokens;
  j["embed_dim"] = embed_dim;
  j["layers"] = layers;
  if (arch == "co4") j["latents"] = latents;
  j["closed_form"] = closed_form;
  j["convention"] = "matmul MACs only; bias additions excluded; elementwise work reported as alpha";
  nlohmann::json terms;
  for (const auto& [name, tc] : breakdown) {
    nlohmann::json t;
    t["expected"] = tc.expected;
    if (has_measurement) t["measured"] = tc.measured;
    terms[name] = t;
  }
  j["breakdown"] = terms;
  if (has_measurement) {
    j["measured"] = measured;
    j["alpha_elementwise"] = elementwise_extra;
    nlohmann::json ew;
    for (const auto& [name, n] : elementwise) ew[name] = n;
    j["alpha_breakdown"] = ew;
  }
  return j.dump(indent);
}

namespace {

// Exact per-term expectations for the layer stacks built by measure().
void fill_expected(MacReport& r) {
  const long long p = r.tokens, e = r.embed_dim, l = r.layers, lq = r.latents;
  if (r.arch == "standard") {
    r.breakdown["projections"].expected = l * 3 * p * e * e;
    r.breakdown["scores"].expected = l * p * p * e;
    r.breakdown["weighted_sum"].expected = l * p * p * e;
  } else {
    r.breakdown["q_proj"].expected = l * lq * e * e;
    r.breakdown["kv_proj"].expected = l * 2 * p * e * e;
    r.breakdown["scores"].expected = l * lq * p * e;
    r.breakdown["weighted_sum"].expected = l * lq * p * e;
  }
}

}  // namespace

MacReport report(const std::string& arch, int tokens, int embed_dim,
                 int layers, int latents) {
  MacReport r;
  r.arch = arch;
  r.tokens = tokens;
  r.embed_dim = embed_dim;
  r.layers = layers;
  r.latents = latents;
  if (arch == "standard")
    r.closed_form = macs_standard(tokens, embed_dim, layers);
  else if (arch == "co4")
    r.closed_form = macs_co4(tokens, embed_dim, layers, latents);
  else
    throw std::invalid_argument("macs: unknown arch '" + arch + "'");
  fill_expected(r);
  return r;
}

MacReport measure(const std::string& arch, int tokens, int embed_dim,
                  int layers, int latents, unsigned long long seed) {
  if (!g_enabled)
    throw std::runtime_error("macs: instrumentation disabled; enable it before measuring");
  MacReport r = report(arch, tokens, embed_dim, layers, latents);

  Co4BlockConfig cfg;
  cfg.embed_dim = embed_dim;
  cfg.latents = latents;
  cfg.heads = 1;
  cfg.layers = layers;
  cfg.dropout_p = 0.0;
  cfg.num_classes = 2;
  cfg.validate();

  Rng rng(Rng::derive(seed, 0x3acd));
  auto rand_tensor = [&](int rows, int cols) {
    Tensor t = Tensor::zeros({rows, cols});
    for (double& v : *t.data) v = rng.uniform(-0.5, 0.5);
    return t;
  };

  std::vector<LayerParams> stack(layers);
  for (LayerParams& lp : stack) {
    lp.w_q = rand_tensor(embed_dim, embed_dim);
    lp.b_q = Tensor::zeros({1, embed_dim});
    lp.w_k = rand_tensor(embed_dim, embed_dim);
    lp.b_k = Tensor::zeros({1, embed_dim});
    lp.w_v = rand_tensor(embed_dim, embed_dim);
    lp.b_v = Tensor::zeros({1, embed_dim});
    lp.ln_gain = Tensor::full({1, embed_dim}, 1.0);
    lp.ln_bias = Tensor::zeros({1, embed_dim});
  }
  Tensor token_input = rand_tensor(tokens, embed_dim);

  reset();
  if (arch == "co4") {
    Tensor lat = rand_tensor(latents, embed_dim);
    for (LayerParams& lp : stack) lat = co4_layer(lp, lat, token_input, cfg);
  } else {
    Tensor x = token_input;
    for (LayerParams& lp : stack) x = standard_layer(lp, x, cfg);
  }

  std::lock_guard<std::mutex> lock(g_mutex);
  r.has_measurement = true;
  for (const auto& [tag, n] : g_matmul) {
    r.breakdown[tag].measured = n;
    r.measured += n;
  }
  for (const auto& [kind, n] : g_elementwise) {
    r.elementwise[kind] = n;
    r.elementwise_extra += n;
  }
  return r;
}

}  // namespace co4::macs
