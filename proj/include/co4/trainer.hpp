#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "co4/babi.hpp"
#include "co4/block.hpp"

namespace co4 {

struct TrainConfig {
  std::string task = "babi";  // babi | cifar
  Arch arch = Arch::Co4;
  Co4BlockConfig block;  // num_classes is resolved from the task data
  int epochs = 100;
  int batch_size = 64;
  double lr = 1e-3;
  double lr_min = 0.0;
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::string schedule = "plateau";  // cosine | plateau
  std::uint64_t seed = 1;

  int babi_count = 10000;
  StoryConfig story = StoryConfig::defaults();

  std::string data_dir;    // cifar batch files
  int cifar_subset = 5000;  // 0 = all

  std::string out_dir;  // when set: config.json, metrics.csv, model.ckpt

  void validate() const;
};

struct MetricsRow {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double macro_f1 = 0.0;
  double lr = 0.0;
  long long wall_ms = 0;  // informational only; kept out of metrics.csv
};

struct TrainResult {
  std::vector<MetricsRow> history;
  double best_val_accuracy = 0.0;
  double final_val_accuracy = 0.0;
  // max/median of the per-step global gradient norm (trend metric).
  double grad_spike_ratio = 0.0;
  long long param_count = 0;
};

// ---- optimizer and schedules -------------------------------------------------

struct AdamState {
  std::vector<double> m, v;
  long long t = 0;
};

// Decoupled weight decay (p *= 1 - lr*wd) followed by a bias-corrected Adam
// moment update, reading param.grad.
void adamw_step(Tensor& param, AdamState& state, double lr, double beta1,
                double beta2, double eps, double weight_decay);

// lr_min + (lr_max - lr_min)/2 · (1 + cos(pi·epoch/total)).
double lr_cosine(int epoch, int total_epochs, double lr_max, double lr_min = 0.0);

// Halves the rate when val loss has not improved by min_delta for `patience`
// consecutive epochs.
struct PlateauScheduler {
  double lr;
  double min_delta = 1e-4;
  int patience = 5;

  explicit PlateauScheduler(double initial_lr) : lr(initial_lr) {}
  double observe(double val_loss);

 private:
  double best_ = 1e300;
  int since_ = 0;
};

// ---- metrics -----------------------------------------------------------------

// Mean over batch of -log softmax(logits)[label]; differentiable.
Tensor cross_entropy(const std::vector<Tensor>& logits, const std::vector<int>& labels);

// Unweighted mean of per-class F1. Classes absent from both predictions and
// labels contribute 0 and are counted.
double macro_f1(const std::vector<int>& preds, const std::vector<int>& labels,
                int num_classes);

// ---- training loop -----------------------------------------------------------

// Full supervised loop: seeded shuffle, forward, cross-entropy, backward,
// AdamW, schedule, per-epoch validation. Deterministic per config.
TrainResult train(const TrainConfig& cfg);

void write_metrics_csv(const std::vector<MetricsRow>& history, const std::string& path);

}  // namespace co4
