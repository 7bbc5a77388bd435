#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "co4/cartpole.hpp"
#include "co4/modulation.hpp"

namespace co4 {

// Permutation-invariant sensory encoder: sensor i sees only observation
// component i (plus the previous action through f_K); a fixed latent bank
// supplies the queries, so shuffling sensors only permutes K and V rows.
struct PiEncoderConfig {
  int sensors = 4;   // cart-pole observation components
  int feat_dim = 16;  // width of the f_K / f_V sensory maps
  int latents = 4;
  // nullopt runs plain (unmodulated) attention — the baseline encoder.
  std::optional<ModulationKind> modulation = ModulationKind::Cooperation;

  int message_dim() const { return latents * feat_dim; }
};

// Flat policy parameters: f_K map, f_V map, latent bank, attention
// projections and the action head, in that order.
struct Genome {
  std::vector<double> params;
  double fitness = 0.0;
};

int genome_size(const PiEncoderConfig& cfg);
Genome random_genome(const PiEncoderConfig& cfg, std::uint64_t seed,
                     double scale = 0.5);

// Pooled message m_t for one observation. Throws on sensor-count mismatch.
std::vector<double> pi_encode(const PiEncoderConfig& cfg, const Genome& genome,
                              const std::vector<double>& obs,
                              double prev_action);

// Bang-bang policy: +force_mag when the action head output is positive.
double policy_force(const PiEncoderConfig& cfg, const Genome& genome,
                    const std::vector<double>& obs, double prev_action,
                    const CartPoleParams& params);

// One episode; fitness = survival steps (capped by params.max_steps).
// Deterministic per (genome, seed).
double rollout(const PiEncoderConfig& cfg, const Genome& genome,
               std::uint64_t seed, const CartPoleParams& params = {});

struct EsConfig {
  PiEncoderConfig encoder;
  int population = 32;
  int elite = 8;
  int generations = 20;
  int episodes = 2;  // evaluations per member, averaged
  double sigma = 0.1;
  std::uint64_t master_seed = 1;
  CartPoleParams cartpole;
};

struct EsCurvePoint {
  int generation = 0;
  double best = 0.0;  // best-so-far fitness
  double mean = 0.0;  // population mean this generation
  double stddev = 0.0;
};

struct EsResult {
  Genome best;
  std::vector<EsCurvePoint> curve;
};

// (mu, lambda) Gaussian ES. Episode seeds are common random numbers shared
// across members and generations, so a zero noise scale yields a flat curve.
EsResult es_train(const EsConfig& cfg);

void write_curve_csv(const std::vector<EsCurvePoint>& curve,
                     const std::string& path);

}  // namespace co4
