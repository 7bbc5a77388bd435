// Acceptance suite: one checkable criterion per --criterion value, each
// printing a single PASS/FAIL line. Run without arguments to execute all.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "co4/babi.hpp"
#include "co4/block.hpp"
#include "co4/cifar.hpp"
#include "co4/macs.hpp"
#include "co4/modulation.hpp"
#include "co4/pirl.hpp"
#include "co4/trainer.hpp"
#include "testutil.hpp"

namespace {

using namespace co4;

std::string g_cli_path;  // co4 binary, used by the determinism criterion

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---- criterion 1: modulation property suite ---------------------------------

Outcome criterion1() {
  const int steps = 201;
  FieldGrid coop = sample_field(ModulationKind::Cooperation, -4, 4, -4, 4, steps);
  for (double v : coop.value)
    if (v < 0.0 || v > 6.0) return {false, "cooperation left [0,6]"};
  for (int i = 0; i < steps; ++i)
    for (int j = 0; j + 1 < steps; ++j)
      if (coop.at(i, j + 1) < coop.at(i, j))
        return {false, "not monotone in C"};

  for (int j = 0; j < steps; ++j) {
    const double c = coop.c_axis[j];
    const double relu6_c = std::min(6.0, std::max(0.0, c));
    if (std::fabs(mod::value(ModulationKind::Cooperation, 0.0, c) - relu6_c) > 1e-12)
      return {false, "cooperate(0,C) != relu6(C)"};
    for (auto kind : {ModulationKind::TM1, ModulationKind::TM2,
                      ModulationKind::TM3, ModulationKind::TM4})
      if (mod::value(kind, 0.0, c) != 0.0)
        return {false, modulation_name(kind) + "(0,C) != 0"};
  }
  for (int j = 0; j < steps; ++j) {
    const double c = coop.c_axis[j];
    const double v = mod::value(ModulationKind::Cooperation, -1.0, c);
    if ((c > 0.5) != (v > 0.0)) return {false, "sign-override scan failed"};
  }
  return {true, "range, C-monotonicity, zero-drive contrast and sign override on a 201x201 grid"};
}

// ---- criterion 2: gradient correctness ---------------------------------------

Outcome criterion2() {
  Rng rng(1009);
  const ModulationKind kinds[] = {ModulationKind::Cooperation, ModulationKind::TM1,
                                  ModulationKind::TM2, ModulationKind::TM3,
                                  ModulationKind::TM4};
  double worst_mod = 0.0;
  for (int cfg_i = 0; cfg_i < 100; ++cfg_i) {
    const ModulationKind kind = kinds[cfg_i % 5];
    Tensor r = Tensor::zeros({3, 3}, true);
    Tensor c = Tensor::zeros({3, 3}, true);
    for (std::size_t i = 0; i < r.size(); ++i) {
      double rv, cv;
      do {
        rv = rng.uniform(-2.0, 2.0);
        cv = rng.uniform(-2.0, 2.0);
      } while (mod::kink_margin(kind, rv, cv) < 0.1);
      (*r.data)[i] = rv;
      (*c.data)[i] = cv;
    }
    auto rep = testutil::check_gradients(
        {{"r", &r}, {"c", &c}}, [&] { return sum(modulate(kind, r, c)); });
    worst_mod = std::max(worst_mod, rep.max_rel_err);
    if (rep.max_rel_err > 1e-6)
      return {false, "modulation FD error " + std::to_string(rep.max_rel_err)};
  }

  double worst_e2e = 0.0;
  int accepted = 0;
  for (std::uint64_t seed = 1; accepted < 100 && seed < 2000; ++seed) {
    Co4BlockConfig cfg;
    cfg.embed_dim = 8;
    cfg.latents = 2;
    cfg.heads = (seed % 2) ? 1 : 2;
    cfg.dropout_p = 0.0;
    cfg.num_classes = 3;
    cfg.modulation = kinds[seed % 5];
    SequenceClassifier model(Arch::Co4, SequenceClassifier::InputMode::Patches,
                             cfg, 5, 4, seed);
    Rng in_rng(Rng::derive(seed, 0x2e2e));
    Tensor patches = testutil::random_tensor({4, 5}, in_rng, 0.1, 0.9);
    mod::arm_margin_probe();
    model.forward_patches(patches, false, nullptr);
    if (mod::disarm_margin_probe() < 1e-3) continue;
    ++accepted;
    std::vector<std::pair<std::string, Tensor*>> params;
    for (auto& [name, t] : model.params().items) params.emplace_back(name, &t);
    auto rep = testutil::check_gradients(
        params,
        [&] {
          return cross_entropy_logits(
              model.forward_patches(patches, false, nullptr),
              static_cast<int>(seed % 3));
        },
        1e-5, 1e-2);
    worst_e2e = std::max(worst_e2e, rep.max_rel_err);
    if (rep.max_rel_err > 1e-5)
      return {false, "end-to-end FD error " + std::to_string(rep.max_rel_err) +
                         " at seed " + std::to_string(seed)};
  }
  if (accepted < 100) return {false, "could not sample 100 kink-safe models"};
  std::ostringstream os;
  os << "100 modulation configs (worst rel err " << worst_mod
     << ") and 100 tiny-model configs (worst " << worst_e2e << ")";
  return {true, os.str()};
}

// ---- criterion 3: complexity meter -------------------------------------------

Outcome criterion3() {
  if (macs::macs_standard(64, 256, 1) != 5242880LL)
    return {false, "macs_standard(64,256,1) wrong"};
  if (macs::macs_co4(64, 256, 1, 8) != 4849664LL)
    return {false, "macs_co4(64,256,1,8) wrong"};

  macs::set_enabled(true);
  for (const char* arch : {"standard", "co4"})
    for (int n : {16, 48})
      for (int layers : {1, 2}) {
        macs::MacReport rep = macs::measure(arch, n, 32, layers, 4);
        for (const auto& [term, tc] : rep.breakdown)
          if (tc.measured != tc.expected) {
            macs::set_enabled(false);
            return {false, std::string(arch) + " term " + term + " measured " +
                               std::to_string(tc.measured) + " != expected " +
                               std::to_string(tc.expected)};
          }
      }

  std::vector<double> log_n, log_m;
  for (int n : {64, 128, 256, 512}) {
    log_n.push_back(std::log(static_cast<double>(n)));
    log_m.push_back(std::log(
        static_cast<double>(macs::measure("co4", n, 64, 1, 8).measured)));
  }
  macs::set_enabled(false);
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < log_n.size(); ++i) {
    mx += log_n[i];
    my += log_m[i];
  }
  mx /= log_n.size();
  my /= log_n.size();
  double num = 0, den = 0;
  for (std::size_t i = 0; i < log_n.size(); ++i) {
    num += (log_n[i] - mx) * (log_m[i] - my);
    den += (log_n[i] - mx) * (log_n[i] - mx);
  }
  const double slope = num / den;
  if (slope > 1.1) return {false, "log-log slope " + std::to_string(slope)};
  std::ostringstream os;
  os << "closed forms exact, measured==expected term-by-term, N-slope " << slope;
  return {true, os.str()};
}

// ---- criteria 4/5: bAbI desk reproduction ------------------------------------

TrainConfig babi_config(Arch arch, int heads, int layers) {
  TrainConfig cfg;
  cfg.task = "babi";
  cfg.arch = arch;
  cfg.block.embed_dim = 32;
  cfg.block.latents = 4;
  cfg.block.heads = heads;
  cfg.block.layers = layers;
  cfg.block.dropout_p = 0.1;
  cfg.block.use_positional = true;
  cfg.epochs = 100;
  cfg.batch_size = 64;
  cfg.lr = 2e-3;
  cfg.schedule = "plateau";
  cfg.seed = 1;
  cfg.babi_count = 10000;
  cfg.story.seed = 0;
  cfg.story.confuser_p = 0.15;
  return cfg;
}

Outcome criterion4() {
  TrainResult co4_res = train(babi_config(Arch::Co4, 1, 1));
  TrainResult std_res = train(babi_config(Arch::Standard, 1, 1));
  const double co4_acc = co4_res.best_val_accuracy;
  const double std_acc = std_res.best_val_accuracy;
  std::ostringstream os;
  os << "co4(1H,1L) best val acc " << co4_acc << ", standard " << std_acc
     << ", gap " << (co4_acc - std_acc) * 100.0 << " points";
  if (co4_acc < 0.80) return {false, os.str() + " (need co4 >= 0.80)"};
  if (co4_acc - std_acc < 0.10) return {false, os.str() + " (need gap >= 10 points)"};
  return {true, os.str()};
}

Outcome criterion5() {
  TrainResult deep = train(babi_config(Arch::Co4, 2, 2));
  TrainResult shallow = train(babi_config(Arch::Co4, 1, 1));
  std::ostringstream os;
  os << "co4(2H,2L) best val acc " << deep.best_val_accuracy << " vs co4(1H,1L) "
     << shallow.best_val_accuracy;
  if (deep.best_val_accuracy + 1e-12 < shallow.best_val_accuracy)
    return {false, os.str()};
  return {true, os.str()};
}

// ---- criterion 6: permutation invariance --------------------------------------

Outcome criterion6() {
  PiEncoderConfig cfg;
  Rng rng(4242);
  double worst = 0.0;
  for (int gi = 0; gi < 100; ++gi) {
    Genome g = random_genome(cfg, 9000 + gi);
    std::vector<double> obs = {rng.uniform(-1, 1), rng.uniform(-1, 1),
                               rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const double prev = rng.uniform(-1, 1);
    const auto base = pi_encode(cfg, g, obs, prev);
    for (int pi = 0; pi < 100; ++pi) {
      std::vector<int> perm = {0, 1, 2, 3};
      for (std::size_t i = perm.size(); i > 1; --i)
        std::swap(perm[i - 1], perm[rng.below(i)]);
      std::vector<double> shuffled(4);
      for (int i = 0; i < 4; ++i) shuffled[i] = obs[perm[i]];
      const auto out = pi_encode(cfg, g, shuffled, prev);
      for (std::size_t i = 0; i < out.size(); ++i)
        worst = std::max(worst, std::fabs(out[i] - base[i]));
    }
  }
  if (worst > 1e-9) return {false, "pi_encode drifted " + std::to_string(worst)};

  Co4BlockConfig bc;
  bc.embed_dim = 16;
  bc.latents = 4;
  bc.heads = 2;
  double worst_layer = 0.0;
  Rng lr_rng(77);
  for (int rep = 0; rep < 20; ++rep) {
    LayerParams p;
    auto rt = [&](std::vector<int> s) {
      return testutil::random_tensor(std::move(s), lr_rng, -0.4, 0.4);
    };
    p.w_q = rt({16, 16});
    p.b_q = rt({1, 16});
    p.w_k = rt({16, 16});
    p.b_k = rt({1, 16});
    p.w_v = rt({16, 16});
    p.b_v = rt({1, 16});
    p.ln_gain = Tensor::full({1, 16}, 1.0);
    p.ln_bias = Tensor::zeros({1, 16});
    Tensor latents = rt({4, 16});
    Tensor tokens = rt({12, 16});
    Tensor base = co4_layer(p, latents, tokens, bc);
    std::vector<int> perm(12);
    for (int i = 0; i < 12; ++i) perm[i] = i;
    for (std::size_t i = perm.size(); i > 1; --i)
      std::swap(perm[i - 1], perm[lr_rng.below(i)]);
    Tensor shuffled = Tensor::zeros({12, 16});
    for (int i = 0; i < 12; ++i)
      for (int j = 0; j < 16; ++j) shuffled.at(i, j) = tokens.at(perm[i], j);
    Tensor out = co4_layer(p, latents, shuffled, bc);
    worst_layer = std::max(worst_layer, testutil::max_abs_diff(base, out));
  }
  if (worst_layer > 1e-9)
    return {false, "co4_layer drifted " + std::to_string(worst_layer)};
  std::ostringstream os;
  os << "10^4 sensor shuffles (max drift " << worst << "), 20 token permutations (max "
     << worst_layer << ")";
  return {true, os.str()};
}

// ---- criterion 7: RL trend -----------------------------------------------------

Outcome criterion7() {
  EsConfig base;
  base.population = 32;
  base.elite = 8;
  base.generations = 20;
  base.episodes = 2;
  base.sigma = 0.1;

  // Monte-Carlo random-genome baseline under the same episode protocol.
  PiEncoderConfig enc;
  double baseline = 0.0;
  for (int i = 0; i < 100; ++i) {
    Genome g = random_genome(enc, 100000 + i);
    baseline += rollout(enc, g, Rng::derive(31337, i));
  }
  baseline /= 100.0;

  const std::uint64_t seeds[] = {1, 2, 3};
  double co4_mean_sum = 0.0;
  int co4_wins = 0;
  std::ostringstream os;
  os << "baseline " << baseline << ";";
  for (std::uint64_t seed : seeds) {
    EsConfig co4_cfg = base;
    co4_cfg.master_seed = seed;
    co4_cfg.encoder.modulation = ModulationKind::Cooperation;
    EsConfig std_cfg = base;
    std_cfg.master_seed = seed;
    std_cfg.encoder.modulation.reset();
    const double co4_final = es_train(co4_cfg).curve.back().mean;
    const double std_final = es_train(std_cfg).curve.back().mean;
    co4_mean_sum += co4_final;
    if (co4_final >= std_final) ++co4_wins;
    os << " seed" << seed << ": co4 " << co4_final << " vs std " << std_final << ";";
  }
  const double co4_mean = co4_mean_sum / 3.0;
  os << " co4 mean " << co4_mean << ", wins " << co4_wins << "/3";
  if (co4_mean < 3.0 * baseline)
    return {false, os.str() + " (need mean >= 3x baseline)"};
  if (co4_wins < 2) return {false, os.str() + " (need >= 2/3 wins)"};
  return {true, os.str()};
}

// ---- criterion 8: CIFAR-format desk run ---------------------------------------

Outcome criterion8() {
  // Table-3 parameter pins, checked for both architectures at E=256.
  Co4BlockConfig pc;
  pc.embed_dim = 256;
  pc.latents = 8;
  pc.heads = 1;
  pc.layers = 1;
  pc.use_positional = false;
  pc.num_classes = 10;
  const auto count_params = [&](Arch arch, int heads, int layers) {
    Co4BlockConfig c = pc;
    c.heads = heads;
    c.layers = layers;
    SequenceClassifier m(arch, SequenceClassifier::InputMode::Patches, c, 48, 64, 3);
    return m.param_count();
  };
  const struct {
    Arch arch;
    int heads, layers;
    double reference;
  } pins[] = {
      {Arch::Standard, 1, 1, 0.215e6},
      {Arch::Co4, 1, 1, 0.215e6},
      {Arch::Standard, 4, 6, 1.20e6},
      {Arch::Co4, 1, 6, 1.20e6},
      {Arch::Co4, 4, 6, 1.20e6},
  };
  for (const auto& pin : pins) {
    const long long params = count_params(pin.arch, pin.heads, pin.layers);
    const double rel = std::fabs(params - pin.reference) / pin.reference;
    if (rel > 0.01) {
      std::ostringstream os;
      os << arch_name(pin.arch) << "(H" << pin.heads << ",L" << pin.layers << ") has "
         << params << " params, " << rel * 100 << "% from " << pin.reference;
      return {false, os.str()};
    }
  }

  // Desk-scale learning check on a 5000-image subset in the CIFAR binary
  // layout (synthetic stand-in; no dataset download in this environment).
  const std::string dir = "/tmp/co4_acceptance_cifar";
  std::filesystem::create_directories(dir);
  testutil::write_synth_cifar(dir + "/data_batch_1.bin", 5000, 2024);

  TrainConfig cfg;
  cfg.task = "cifar";
  cfg.arch = Arch::Co4;
  cfg.block = pc;
  cfg.epochs = 10;
  cfg.batch_size = 64;
  cfg.lr = 1e-3;
  cfg.schedule = "cosine";
  cfg.seed = 1;
  cfg.data_dir = dir;
  cfg.cifar_subset = 5000;
  TrainResult res = train(cfg);
  const double first_loss = res.history.front().train_loss;
  const double last_loss = res.history.back().train_loss;
  const double drop = (first_loss - last_loss) / first_loss;
  std::ostringstream os;
  os << "params within 1% of Table-3 pins; best val acc " << res.best_val_accuracy
     << " (chance 0.10), train loss " << first_loss << " -> " << last_loss << " ("
     << drop * 100 << "% drop)";
  if (res.best_val_accuracy < 0.30) return {false, os.str() + " (need >= 0.30)"};
  if (drop < 0.40) return {false, os.str() + " (need >= 40% drop)"};
  return {true, os.str()};
}

// ---- criterion 9: CLI determinism ----------------------------------------------

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome criterion9() {
  if (g_cli_path.empty()) return {false, "--cli path not provided"};
  const std::string base = "/tmp/co4_acceptance_det";
  std::filesystem::remove_all(base);
  std::filesystem::create_directories(base);
  for (int run = 0; run < 2; ++run) {
    std::ostringstream cmd;
    cmd << g_cli_path << " train --task babi --arch co4 --count 400 --epochs 3"
        << " --embed-dim 24 --batch 32 --seed 7 --out " << base << "/run" << run
        << " > /dev/null 2>&1";
    if (std::system(cmd.str().c_str()) != 0) return {false, "CLI train failed"};
  }
  const std::string a = read_file(base + "/run0/metrics.csv");
  const std::string b = read_file(base + "/run1/metrics.csv");
  if (a.empty() || a != b) return {false, "metrics.csv differs between identical runs"};

  for (int run = 0; run < 2; ++run) {
    std::ostringstream cmd;
    cmd << g_cli_path << " gen-babi --seed 11 --count 200 --out " << base
        << "/stories" << run << ".jsonl > /dev/null 2>&1";
    if (std::system(cmd.str().c_str()) != 0) return {false, "CLI gen-babi failed"};
  }
  if (read_file(base + "/stories0.jsonl") != read_file(base + "/stories1.jsonl"))
    return {false, "stories.jsonl differs between identical runs"};
  std::filesystem::remove_all(base);
  return {true, "byte-identical metrics.csv and stories.jsonl across repeated seeded runs"};
}

}  // namespace

int main(int argc, char** argv) {
  int which = 0;
  for (int i = 1; i + 1 < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--criterion") which = std::atoi(argv[i + 1]);
    if (a == "--cli") g_cli_path = argv[i + 1];
  }

  const std::map<int, std::pair<const char*, std::function<Outcome()>>> criteria = {
      {1, {"modulation property suite", criterion1}},
      {2, {"gradient correctness (finite differences)", criterion2}},
      {3, {"complexity meter", criterion3}},
      {4, {"bAbI desk reproduction (Table 4 trend)", criterion4}},
      {5, {"bAbI depth trend", criterion5}},
      {6, {"permutation invariance", criterion6}},
      {7, {"RL trend (cart-pole ES)", criterion7}},
      {8, {"CIFAR-format desk run + parameter pins", criterion8}},
      {9, {"CLI determinism", criterion9}},
  };

  int failures = 0;
  for (const auto& [id, entry] : criteria) {
    if (which != 0 && id != which) continue;
    Outcome out;
    try {
      out = entry.second();
    } catch (const std::exception& ex) {
      out = {false, std::string("exception: ") + ex.what()};
    }
    std::printf("%s criterion %d (%s): %s\n", out.pass ? "PASS" : "FAIL", id,
                entry.first, out.detail.c_str());
    std::fflush(stdout);
    if (!out.pass) ++failures;
  }
  return failures;
}
