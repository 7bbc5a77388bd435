#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "co4/babi.hpp"
#include "co4/macs.hpp"
#include "co4/modulation.hpp"
#include "co4/pirl.hpp"
#include "co4/trainer.hpp"

namespace {

int run_field(const std::string& kind, double rmin, double rmax, double cmin,
              double cmax, int steps, const std::string& out) {
  co4::FieldGrid grid = co4::sample_field(co4::parse_modulation(kind), rmin,
                                          rmax, cmin, cmax, steps);
  co4::write_field_csv(grid, out);
  std::fprintf(stderr, "wrote %dx%d %s field grid to %s\n", grid.steps_r(),
               grid.steps_c(), kind.c_str(), out.c_str());
  return 0;
}

int run_macs(const std::string& arch, int n, int e, int layers, int latents,
             bool measure) {
  co4::macs::MacReport rep;
  if (measure) {
    co4::macs::set_enabled(true);
    rep = co4::macs::measure(arch, n, e, layers, latents);
    co4::macs::set_enabled(false);
  } else {
    rep = co4::macs::report(arch, n, e, layers, latents);
  }
  std::printf("%s\n", rep.to_json().c_str());
  return 0;
}

int run_gen_babi(std::uint64_t seed, int count, const std::string& out) {
  co4::StoryConfig cfg = co4::StoryConfig::defaults();
  cfg.seed = seed;
  const co4::Vocab vocab = co4::build_vocab(cfg);
  std::vector<co4::StorySample> samples;
  samples.reserve(count);
  for (int i = 0; i < count; ++i)
    samples.push_back(co4::generate_story(cfg, i, vocab));
  co4::write_stories_jsonl(cfg, samples, out);
  std::fprintf(stderr, "wrote %d stories (vocab %d, %d tokens each) to %s\n",
               count, vocab.size(), cfg.max_tokens, out.c_str());
  return 0;
}

int run_rl(const std::string& encoder, int gens, int pop, int elite,
           int episodes, double sigma, std::uint64_t seed,
           const std::string& out) {
  co4::EsConfig cfg;
  if (encoder == "standard")
    cfg.encoder.modulation.reset();
  else
    cfg.encoder.modulation = co4::parse_modulation(encoder == "co4" ? "cooperation" : encoder);
  cfg.generations = gens;
  cfg.population = pop;
  cfg.elite = elite;
  cfg.episodes = episodes;
  cfg.sigma = sigma;
  cfg.master_seed = seed;
  co4::EsResult res = co4::es_train(cfg);
  co4::write_curve_csv(res.curve, out);
  std::fprintf(stderr, "encoder=%s best=%.1f final_mean=%.1f -> %s\n",
               encoder.c_str(), res.best.fitness, res.curve.back().mean,
               out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"co4: context-sensitive attention toolkit"};
  app.require_subcommand(1);

  // field
  auto* field = app.add_subcommand("field", "sample a modulation transfer function over an (R,C) grid");
  std::string f_kind = "cooperation", f_out = "field.csv";
  double rmin = -4, rmax = 4, cmin = -4, cmax = 4;
  int f_steps = 201;
  field->add_option("--kind", f_kind, "cooperation|tm1|tm2|tm3|tm4");
  field->add_option("--rmin", rmin);
  field->add_option("--rmax", rmax);
  field->add_option("--cmin", cmin);
  field->add_option("--cmax", cmax);
  field->add_option("--steps", f_steps);
  field->add_option("--out", f_out, "output CSV (columns R,C,value,dR,dC)");

  // macs
  auto* macs_cmd = app.add_subcommand("macs", "closed-form and measured MAC counts");
  std::string m_arch = "co4";
  int m_n = 64, m_e = 256, m_layers = 1, m_latents = 8;
  bool m_measure = false;
  macs_cmd->add_option("--arch", m_arch, "standard|co4");
  macs_cmd->add_option("--n", m_n, "tokens");
  macs_cmd->add_option("--e", m_e, "embedding dim");
  macs_cmd->add_option("--layers", m_layers);
  macs_cmd->add_option("--latents", m_latents);
  macs_cmd->add_flag("--measure", m_measure, "run an instrumented forward pass");

  // gen-babi
  auto* gen = app.add_subcommand("gen-babi", "generate synthetic story/question samples");
  std::uint64_t g_seed = 0;
  int g_count = 1000;
  std::string g_out = "stories.jsonl";
  gen->add_option("--seed", g_seed);
  gen->add_option("--count", g_count);
  gen->add_option("--out", g_out);

  // rl
  auto* rl = app.add_subcommand("rl", "evolution-strategies cart-pole training");
  std::string r_encoder = "co4";
  int r_gens = 20, r_pop = 32, r_elite = 8, r_episodes = 2;
  double r_sigma = 0.1;
  std::uint64_t r_seed = 1;
  std::string r_out = "curve.csv";
  rl->add_option("--encoder", r_encoder, "standard|co4|tm1|tm2|tm3|tm4");
  rl->add_option("--gens", r_gens);
  rl->add_option("--pop", r_pop);
  rl->add_option("--elite", r_elite);
  rl->add_option("--episodes", r_episodes);
  rl->add_option("--sigma", r_sigma);
  rl->add_option("--seed", r_seed);
  rl->add_option("--out", r_out, "output CSV (columns generation,best,mean,std)");

  // train
  auto* tr = app.add_subcommand("train", "supervised training (babi or cifar)");
  std::string t_task = "babi", t_arch = "co4", t_mod = "cooperation";
  std::string t_schedule, t_out = "run", t_data_dir;
  int t_heads = 1, t_layers = 1, t_latents = -1, t_epochs = -1, t_embed = -1;
  int t_batch = 64, t_count = 10000, t_subset = 5000;
  double t_lr = 1e-3, t_lr_min = 0.0, t_wd = 1e-2, t_dropout = 0.1;
  int t_positional = -1;
  std::uint64_t t_seed = 1, t_data_seed = 0;
  tr->add_option("--task", t_task, "babi|cifar");
  tr->add_option("--arch", t_arch, "standard|co4");
  tr->add_option("--modulation", t_mod, "cooperation|tm1|tm2|tm3|tm4");
  tr->add_option("--heads", t_heads);
  tr->add_option("--layers", t_layers);
  tr->add_option("--latents", t_latents, "default: 4 for babi, 8 for cifar");
  tr->add_option("--embed-dim", t_embed, "default: 32 for babi, 256 for cifar");
  tr->add_option("--epochs", t_epochs, "default: 100 for babi, 10 for cifar");
  tr->add_option("--batch", t_batch);
  tr->add_option("--lr", t_lr);
  tr->add_option("--lr-min", t_lr_min);
  tr->add_option("--wd", t_wd);
  tr->add_option("--dropout", t_dropout);
  tr->add_option("--schedule", t_schedule, "cosine|plateau (default: plateau for babi, cosine for cifar)");
  tr->add_option("--positional", t_positional, "1|0 (default: 1 for babi, 0 for cifar)");
  tr->add_option("--seed", t_seed);
  tr->add_option("--data-seed", t_data_seed, "babi generator seed");
  tr->add_option("--count", t_count, "babi sample count");
  double t_confuser = 0.15;
  tr->add_option("--confuser", t_confuser, "babi: chance of other-person location events per slot");
  tr->add_option("--data-dir", t_data_dir, "cifar binary batch directory");
  tr->add_option("--subset", t_subset, "cifar subset size (0 = all)");
  tr->add_option("--out", t_out, "run directory (config.json, metrics.csv, model.ckpt)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*field) return run_field(f_kind, rmin, rmax, cmin, cmax, f_steps, f_out);
    if (*macs_cmd) return run_macs(m_arch, m_n, m_e, m_layers, m_latents, m_measure);
    if (*gen) return run_gen_babi(g_seed, g_count, g_out);
    if (*rl) return run_rl(r_encoder, r_gens, r_pop, r_elite, r_episodes, r_sigma, r_seed, r_out);
    if (*tr) {
      const bool is_babi = t_task == "babi";
      co4::TrainConfig cfg;
      cfg.task = t_task;
      cfg.arch = co4::parse_arch(t_arch);
      cfg.block.modulation = co4::parse_modulation(t_mod);
      cfg.block.heads = t_heads;
      cfg.block.layers = t_layers;
      cfg.block.latents = t_latents > 0 ? t_latents : (is_babi ? 4 : 8);
      cfg.block.embed_dim = t_embed > 0 ? t_embed : (is_babi ? 32 : 256);
      cfg.block.dropout_p = t_dropout;
      cfg.block.use_positional = t_positional >= 0 ? t_positional != 0 : is_babi;
      cfg.epochs = t_epochs >= 0 ? t_epochs : (is_babi ? 100 : 10);
      cfg.batch_size = t_batch;
      cfg.lr = t_lr;
      cfg.lr_min = t_lr_min;
      cfg.weight_decay = t_wd;
      cfg.schedule = !t_schedule.empty() ? t_schedule : (is_babi ? "plateau" : "cosine");
      cfg.seed = t_seed;
      cfg.babi_count = t_count;
      cfg.story.seed = t_data_seed;
      cfg.story.confuser_p = t_confuser;
      cfg.data_dir = t_data_dir;
      cfg.cifar_subset = t_subset;
      cfg.out_dir = t_out;
      co4::TrainResult res = co4::train(cfg);
      std::fprintf(stderr,
                   "done: best_val_acc=%.4f final_val_acc=%.4f params=%lld "
                   "grad_spike_ratio=%.2f -> %s\n",
                   res.best_val_accuracy, res.final_val_accuracy,
                   res.param_count, res.grad_spike_ratio, t_out.c_str());
      return 0;
    }
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  }
  return 0;
}
