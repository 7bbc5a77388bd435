#include "co4/pirl.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "co4/block.hpp"
#include "co4/tensor.hpp"

namespace co4 {

namespace {

// Offsets into the flat genome.
struct GenomeLayout {
  int f_k_w, f_k_b;      // 2×F, F
  int f_v_w, f_v_b;      // 1×F, F
  int latents;           // L×F
  int w_q, b_q, w_k, b_k, w_v, b_v;  // F×F, F each
  int head_w, head_b;    // L·F, 1
  int total;

  explicit GenomeLayout(const PiEncoderConfig& cfg) {
    const int f = cfg.feat_dim, l = cfg.latents;
    int at = 0;
    f_k_w = at; at += 2 * f;
    f_k_b = at; at += f;
    f_v_w = at; at += f;
    f_v_b = at; at += f;
    latents = at; at += l * f;
    w_q = at; at += f * f;
    b_q = at; at += f;
    w_k = at; at += f * f;
    b_k = at; at += f;
    w_v = at; at += f * f;
    b_v = at; at += f;
    head_w = at; at += l * f;
    head_b = at; at += 1;
    total = at;
  }
};

Tensor slice_tensor(const std::vector<double>& p, int off, int rows, int cols) {
  Tensor t = Tensor::zeros({rows, cols});
  std::copy(p.begin() + off, p.begin() + off + rows * cols, t.data->begin());
  return t;
}

}  // namespace

int genome_size(const PiEncoderConfig& cfg) { return GenomeLayout(cfg).total; }

Genome random_genome(const PiEncoderConfig& cfg, std::uint64_t seed, double scale) {
  Genome g;
  g.params.resize(genome_size(cfg));
  Rng rng(Rng::derive(seed, 0x6e0e));
  for (double& v : g.params) v = rng.normal(0.0, scale);
  return g;
}

std::vector<double> pi_encode(const PiEncoderConfig& cfg, const Genome& genome,
                              const std::vector<double>& obs,
                              double prev_action) {
  if (static_cast<int>(obs.size()) != cfg.sensors)
    throw std::invalid_argument("pi_encode: got " + std::to_string(obs.size()) +
                                " sensors, expected " + std::to_string(cfg.sensors));
  const GenomeLayout lay(cfg);
  if (static_cast<int>(genome.params.size()) != lay.total)
    throw std::invalid_argument("pi_encode: genome has " +
                                std::to_string(genome.params.size()) +
                                " params, expected " + std::to_string(lay.total));
  const int n = cfg.sensors, f = cfg.feat_dim;
  const std::vector<double>& p = genome.params;

  // Sensory maps: row i of K sees (obs[i], prev_action), row i of V sees obs[i].
  Tensor k_feat = Tensor::zeros({n, f});
  Tensor v_feat = Tensor::zeros({n, f});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < f; ++j) {
      const double k_pre = p[lay.f_k_w + j] * obs[i] +
                           p[lay.f_k_w + f + j] * prev_action + p[lay.f_k_b + j];
      const double v_pre = p[lay.f_v_w + j] * obs[i] + p[lay.f_v_b + j];
      k_feat.at(i, j) = std::tanh(k_pre);
      v_feat.at(i, j) = std::tanh(v_pre);
    }

  Tensor lat = slice_tensor(p, lay.latents, cfg.latents, f);
  Tensor q = add_rowvec(matmul(lat, slice_tensor(p, lay.w_q, f, f)),
                        slice_tensor(p, lay.b_q, 1, f));
  Tensor k = add_rowvec(matmul(k_feat, slice_tensor(p, lay.w_k, f, f)),
                        slice_tensor(p, lay.b_k, 1, f));
  Tensor v = add_rowvec(matmul(v_feat, slice_tensor(p, lay.w_v, f, f)),
                        slice_tensor(p, lay.b_v, 1, f));

  TriadicOutput t;
  if (cfg.modulation) {
    t = triadic_modulate(q, k, v, *cfg.modulation);
  } else {
    t.q_m = q;
    t.k_m = k;
    t.v_m = v;
  }
  Tensor pooled = attention(t);  // latents×f
  return std::vector<double>(pooled.data->begin(), pooled.data->end());
}

double policy_force(const PiEncoderConfig& cfg, const Genome& genome,
                    const std::vector<double>& obs, double prev_action,
                    const CartPoleParams& params) {
  const GenomeLayout lay(cfg);
  const std::vector<double> m = pi_encode(cfg, genome, obs, prev_action);
  double y = genome.params[lay.head_b];
  for (int i = 0; i < cfg.message_dim(); ++i)
    y += genome.params[lay.head_w + i] * m[i];
  return y > 0.0 ? params.force_mag : -params.force_mag;
}

double rollout(const PiEncoderConfig& cfg, const Genome& genome,
               std::uint64_t seed, const CartPoleParams& params) {
  Rng rng(Rng::derive(seed, 0x9011));
  CartPoleState s = cartpole_reset(rng);
  double prev_action = 0.0;
  while (!s.terminated) {
    const std::vector<double> obs = {s.x, s.x_dot, s.theta, s.theta_dot};
    const double force = policy_force(cfg, genome, obs, prev_action, params);
    cartpole_step(s, force, params);
    prev_action = force > 0.0 ? 1.0 : -1.0;
  }
  return static_cast<double>(s.step_count);
}

EsResult es_train(const EsConfig& cfg) {
  if (cfg.population < 4) throw std::invalid_argument("es_train: population must be >= 4");
  if (cfg.generations < 1) throw std::invalid_argument("es_train: generations must be >= 1");
  if (cfg.elite < 1 || cfg.elite > cfg.population)
    throw std::invalid_argument("es_train: elite must be in [1, population]");
  if (cfg.episodes < 1) throw std::invalid_argument("es_train: episodes must be >= 1");

  const int dim = genome_size(cfg.encoder);
  std::vector<double> mean(dim);
  {
    Rng rng(Rng::derive(cfg.master_seed, 0x1217));
    for (double& v : mean) v = rng.normal(0.0, 0.1);
  }

  // Common random numbers: every member of every generation is scored on the
  // same episode seeds, which keeps comparisons low-noise and makes the
  // zero-noise curve exactly flat.
  std::vector<std::uint64_t> episode_seeds(cfg.episodes);
  for (int e = 0; e < cfg.episodes; ++e)
    episode_seeds[e] = Rng::derive(cfg.master_seed, 0xe915, e);

  EsResult result;
  result.best.fitness = -1.0;
  std::vector<Genome> pop(cfg.population);

  for (int gen = 0; gen < cfg.generations; ++gen) {
    for (int m = 0; m < cfg.population; ++m) {
      Rng rng(Rng::derive(cfg.master_seed, 0x9e2 + gen, m));
      Genome g;
      g.params.resize(dim);
      for (int i = 0; i < dim; ++i)
        g.params[i] = mean[i] + cfg.sigma * rng.normal();
      pop[m] = std::move(g);
    }
#pragma omp parallel for schedule(dynamic)
    for (int m = 0; m < cfg.population; ++m) {
      double acc = 0.0;
      for (int e = 0; e < cfg.episodes; ++e)
        acc += rollout(cfg.encoder, pop[m], episode_seeds[e], cfg.cartpole);
      pop[m].fitness = acc / cfg.episodes;
    }

    std::vector<int> order(cfg.population);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return pop[a].fitness > pop[b].fitness;
    });

    double sum = 0.0, sum_sq = 0.0;
    for (const Genome& g : pop) {
      sum += g.fitness;
      sum_sq += g.fitness * g.fitness;
    }
    const double pop_mean = sum / cfg.population;
    const double var = std::max(0.0, sum_sq / cfg.population - pop_mean * pop_mean);

    if (pop[order[0]].fitness > result.best.fitness) result.best = pop[order[0]];

    EsCurvePoint pt;
    pt.generation = gen;
    pt.best = result.best.fitness;
    pt.mean = pop_mean;
    pt.stddev = std::sqrt(var);
    result.curve.push_back(pt);

    std::vector<double> next(dim, 0.0);
    for (int r = 0; r < cfg.elite; ++r) {
      const std::vector<double>& p = pop[order[r]].params;
      for (int i = 0; i < dim; ++i) next[i] += p[i];
    }
    for (int i = 0; i < dim; ++i) mean[i] = next[i] / cfg.elite;
  }
  return result;
}

void write_curve_csv(const std::vector<EsCurvePoint>& curve,
                     const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("write_curve_csv: cannot open " + path);
  std::fputs("generation,best,mean,std\n", f);
  for (const auto& pt : curve)
    std::fprintf(f, "%d,%.12g,%.12g,%.12g\n", pt.generation, pt.best, pt.mean,
                 pt.stddev);
  std::fclose(f);
}

}  // namespace co4
