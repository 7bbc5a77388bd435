#include "co4/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <stdexcept>

#include "co4/checkpoint.hpp"
#include "co4/cifar.hpp"
#include "json.hpp"

namespace co4 {

void TrainConfig::validate() const {
  if (task != "babi" && task != "cifar")
    throw std::invalid_argument("train: unknown task '" + task + "'");
  if (epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (lr <= 0.0) throw std::invalid_argument("train: lr must be positive");
  if (schedule != "cosine" && schedule != "plateau")
    throw std::invalid_argument("train: unknown schedule '" + schedule + "'");
  if (task == "babi" && babi_count < 10)
    throw std::invalid_argument("train: babi_count too small");
}

void adamw_step(Tensor& param, AdamState& state, double lr, double beta1,
                double beta2, double eps, double weight_decay) {
  const std::size_t n = param.size();
  if (!param.grad) throw std::invalid_argument("adamw_step: param has no grad");
  if (state.m.empty()) {
    state.m.assign(n, 0.0);
    state.v.assign(n, 0.0);
  }
  if (state.m.size() != n)
    throw std::invalid_argument("adamw_step: state size mismatch");
  ++state.t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  double* p = param.data->data();
  const double* g = param.grad->data();
  for (std::size_t i = 0; i < n; ++i) {
    p[i] *= 1.0 - lr * weight_decay;
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g[i];
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g[i] * g[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

double lr_cosine(int epoch, int total_epochs, double lr_max, double lr_min) {
  if (epoch < 0) throw std::invalid_argument("lr_cosine: epoch must be >= 0");
  if (total_epochs < 1) throw std::invalid_argument("lr_cosine: total_epochs must be >= 1");
  const double t = static_cast<double>(epoch) / total_epochs;
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(3.141592653589793 * t));
}

double PlateauScheduler::observe(double val_loss) {
  if (val_loss < best_ - min_delta) {
    best_ = val_loss;
    since_ = 0;
  } else if (++since_ >= patience) {
    lr *= 0.5;
    since_ = 0;
  }
  return lr;
}

Tensor cross_entropy(const std::vector<Tensor>& logits, const std::vector<int>& labels) {
  if (logits.empty() || logits.size() != labels.size())
    throw std::invalid_argument("cross_entropy: batch size mismatch");
  const double inv = 1.0 / static_cast<double>(logits.size());
  Tensor acc;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    Tensor term = scale(cross_entropy_logits(logits[i], labels[i]), inv);
    acc = i == 0 ? term : add(acc, term);
  }
  return acc;
}

double macro_f1(const std::vector<int>& preds, const std::vector<int>& labels,
                int num_classes) {
  if (preds.size() != labels.size())
    throw std::invalid_argument("macro_f1: " + std::to_string(preds.size()) +
                                " preds vs " + std::to_string(labels.size()) + " labels");
  std::vector<long long> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] == labels[i]) {
      ++tp[preds[i]];
    } else {
      ++fp[preds[i]];
      ++fn[labels[i]];
    }
  }
  double total = 0.0;
  for (int c = 0; c < num_classes; ++c) {
    const double denom = 2.0 * tp[c] + fp[c] + fn[c];
    total += denom > 0.0 ? 2.0 * tp[c] / denom : 0.0;
  }
  return total / num_classes;
}

void write_metrics_csv(const std::vector<MetricsRow>& history, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("write_metrics_csv: cannot open " + path);
  std::fputs("epoch,train_loss,val_loss,val_accuracy,macro_f1,lr\n", f);
  for (const auto& r : history)
    std::fprintf(f, "%d,%.12g,%.12g,%.12g,%.12g,%.12g\n", r.epoch, r.train_loss,
                 r.val_loss, r.val_accuracy, r.macro_f1, r.lr);
  std::fclose(f);
}

namespace {

// Hash-ordered 80/20 split: stable under reordering of the corpus.
void split_indices(int count, std::uint64_t salt, std::vector<int>& train,
                   std::vector<int>& val) {
  std::vector<int> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::uint64_t> key(count);
  for (int i = 0; i < count; ++i) key[i] = Rng::derive(salt, i, 0x5017);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return key[a] != key[b] ? key[a] < key[b] : a < b;
  });
  const int train_n = count * 4 / 5;
  train.assign(order.begin(), order.begin() + train_n);
  val.assign(order.begin() + train_n, order.end());
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
}

struct Dataset {
  // babi
  std::vector<StorySample> stories;
  // cifar
  CifarData cifar;
  std::vector<int> labels;  // unified label view
  int num_classes = 0;
  int input_dim = 0;
  int seq_len = 0;
  SequenceClassifier::InputMode mode = SequenceClassifier::InputMode::Tokens;
};

Dataset build_dataset(const TrainConfig& cfg) {
  Dataset d;
  if (cfg.task == "babi") {
    cfg.story.validate();
    const Vocab vocab = build_vocab(cfg.story);
    d.stories.reserve(cfg.babi_count);
    for (int i = 0; i < cfg.babi_count; ++i)
      d.stories.push_back(generate_story(cfg.story, i, vocab));
    d.labels.reserve(cfg.babi_count);
    for (const auto& s : d.stories) d.labels.push_back(s.answer);
    d.num_classes = static_cast<int>(cfg.story.places.size());
    d.input_dim = vocab.size();
    d.seq_len = cfg.story.max_tokens;
    d.mode = SequenceClassifier::InputMode::Tokens;
  } else {
    d.cifar = load_cifar_dir(cfg.data_dir);
    if (cfg.cifar_subset > 0 && cfg.cifar_subset < d.cifar.count()) {
      d.cifar.labels.resize(cfg.cifar_subset);
      d.cifar.pixels.resize(static_cast<std::size_t>(cfg.cifar_subset) * kCifarPixels);
    }
    d.labels = d.cifar.labels;
    d.num_classes = 10;
    d.input_dim = 4 * 4 * 3;
    d.seq_len = (kCifarDim / 4) * (kCifarDim / 4);
    d.mode = SequenceClassifier::InputMode::Patches;
  }
  return d;
}

Tensor forward_sample(SequenceClassifier& model, const Dataset& d, int idx,
                      bool training, Rng* dropout_rng, std::uint64_t aug_seed) {
  if (d.mode == SequenceClassifier::InputMode::Tokens)
    return model.forward_tokens(d.stories[idx].token_ids, training, dropout_rng);
  Tensor patches;
  if (training) {
    const std::vector<float> img(d.cifar.image(idx), d.cifar.image(idx) + kCifarPixels);
    patches = extract_patches(augment(img, aug_seed).data());
  } else {
    patches = extract_patches(d.cifar.image(idx));
  }
  return model.forward_patches(patches, training, dropout_rng);
}

}  // namespace

TrainResult train(const TrainConfig& cfg) {
  cfg.validate();
  Dataset data = build_dataset(cfg);
  const std::uint64_t split_salt =
      cfg.task == "babi" ? cfg.story.seed : Rng::derive(0, 0xc1fa);
  std::vector<int> train_idx, val_idx;
  split_indices(static_cast<int>(data.labels.size()), split_salt, train_idx, val_idx);

  Co4BlockConfig block = cfg.block;
  block.num_classes = data.num_classes;
  block.validate();
  SequenceClassifier model(cfg.arch, data.mode, block, data.input_dim,
                           data.seq_len, cfg.seed);

  std::vector<AdamState> opt(model.params().items.size());
  PlateauScheduler plateau(cfg.lr);
  std::vector<double> grad_norms;
  TrainResult result;
  result.param_count = model.param_count();

  auto evaluate = [&](MetricsRow& row) {
    double loss = 0.0;
    std::vector<int> preds;
    preds.reserve(val_idx.size());
    std::vector<int> truth;
    truth.reserve(val_idx.size());
    for (int idx : val_idx) {
      Tensor logits = forward_sample(model, data, idx, false, nullptr, 0);
      loss += cross_entropy_logits(logits, data.labels[idx]).value();
      int best = 0;
      for (int c = 1; c < data.num_classes; ++c)
        if ((*logits.data)[c] > (*logits.data)[best]) best = c;
      preds.push_back(best);
      truth.push_back(data.labels[idx]);
    }
    row.val_loss = loss / static_cast<double>(val_idx.size());
    long long correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i)
      if (preds[i] == truth[i]) ++correct;
    row.val_accuracy = static_cast<double>(correct) / static_cast<double>(preds.size());
    row.macro_f1 = macro_f1(preds, truth, data.num_classes);
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = cfg.schedule == "cosine"
                          ? lr_cosine(epoch, cfg.epochs, cfg.lr, cfg.lr_min)
                          : plateau.lr;

    std::vector<int> order = train_idx;
    Rng shuffle_rng(Rng::derive(cfg.seed, 0x54f1e, epoch));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    double train_loss = 0.0;
    std::size_t pos = 0;
    while (pos < order.size()) {
      const std::size_t take = std::min<std::size_t>(cfg.batch_size, order.size() - pos);
      model.params().zero_grads();
      const double inv = 1.0 / static_cast<double>(take);
      for (std::size_t b = 0; b < take; ++b) {
        const int idx = order[pos + b];
        Rng drop_rng(Rng::derive(cfg.seed, 0xd20, epoch, idx));
        Tensor logits = forward_sample(model, data, idx, true, &drop_rng,
                                       Rng::derive(cfg.seed, 0xa06u, epoch, idx));
        Tensor loss = scale(cross_entropy_logits(logits, data.labels[idx]), inv);
        const double lv = loss.value() / inv;
        if (!std::isfinite(lv) || std::fabs(lv) > 1e12)
          throw std::runtime_error("train: loss " + std::to_string(lv) +
                                   " at epoch " + std::to_string(epoch) +
                                   ", sample " + std::to_string(idx) +
                                   ": diverged");
        train_loss += lv;
        backward(loss);
      }
      double norm_sq = 0.0;
      for (auto& [name, p] : model.params().items)
        for (double g : *p.grad) norm_sq += g * g;
      grad_norms.push_back(std::sqrt(norm_sq));
      std::size_t pi = 0;
      for (auto& [name, p] : model.params().items)
        adamw_step(p, opt[pi++], lr, cfg.beta1, cfg.beta2, cfg.adam_eps,
                   cfg.weight_decay);
      pos += take;
    }

    MetricsRow row;
    row.epoch = epoch;
    row.train_loss = train_loss / static_cast<double>(order.size());
    row.lr = lr;
    evaluate(row);
    if (cfg.schedule == "plateau") plateau.observe(row.val_loss);
    row.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    result.history.push_back(row);
    result.best_val_accuracy = std::max(result.best_val_accuracy, row.val_accuracy);
    result.final_val_accuracy = row.val_accuracy;
    std::fprintf(stderr,
                 "[%s/%s] epoch %3d  train_loss %.4f  val_loss %.4f  val_acc %.4f  "
                 "f1 %.4f  lr %.2e  (%lld ms)\n",
                 cfg.task.c_str(), arch_name(cfg.arch).c_str(), epoch,
                 row.train_loss, row.val_loss, row.val_accuracy, row.macro_f1,
                 row.lr, row.wall_ms);
  }

  if (!grad_norms.empty()) {
    std::vector<double> sorted = grad_norms;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[sorted.size() / 2];
    const double peak = sorted.back();
    result.grad_spike_ratio = median > 0.0 ? peak / median : 0.0;
  }

  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    nlohmann::json j;
    j["task"] = cfg.task;
    j["arch"] = arch_name(cfg.arch);
    j["modulation"] = modulation_name(cfg.block.modulation);
    j["embed_dim"] = cfg.block.embed_dim;
    j["latents"] = cfg.block.latents;
    j["heads"] = cfg.block.heads;
    j["layers"] = cfg.block.layers;
    j["dropout_p"] = cfg.block.dropout_p;
    j["use_positional"] = cfg.block.use_positional;
    j["num_classes"] = data.num_classes;
    j["epochs"] = cfg.epochs;
    j["batch_size"] = cfg.batch_size;
    j["lr"] = cfg.lr;
    j["lr_min"] = cfg.lr_min;
    j["weight_decay"] = cfg.weight_decay;
    j["beta1"] = cfg.beta1;
    j["beta2"] = cfg.beta2;
    j["adam_eps"] = cfg.adam_eps;
    j["schedule"] = cfg.schedule;
    j["seed"] = cfg.seed;
    j["param_count"] = result.param_count;
    if (cfg.task == "babi") {
      j["babi_count"] = cfg.babi_count;
      j["data_seed"] = cfg.story.seed;
      j["max_tokens"] = cfg.story.max_tokens;
    } else {
      j["data_dir"] = cfg.data_dir;
      j["cifar_subset"] = cfg.cifar_subset;
    }
    std::FILE* f = std::fopen((cfg.out_dir + "/config.json").c_str(), "wb");
    if (!f) throw std::runtime_error("train: cannot write config.json");
    const std::string s = j.dump(2);
    std::fwrite(s.data(), 1, s.size(), f);
    std::fputc('\n', f);
    std::fclose(f);
    write_metrics_csv(result.history, cfg.out_dir + "/metrics.csv");
    save_checkpoint(model.params(), cfg.out_dir + "/model.ckpt");
  }
  return result;
}

}  // namespace co4
