// Command-line front end: demos collect | train | eval | ablate | plot.
#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "imitlab/harness.hpp"

using namespace imitlab;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

std::string dashed(std::string key) {
  for (auto& c : key) {
    if (c == '_') c = '-';
  }
  return key;
}

// One flag per config key, accepted as --key_name or --key-name.
struct OverrideFlags {
  std::map<std::string, std::string> values;
  std::map<std::string, bool> flags;

  void attach(CLI::App* app) {
    const nlohmann::json defaults = to_json(ExperimentConfig{});
    for (const auto& key : config_keys()) {
      std::string names = "--" + key;
      if (dashed(key) != key) names += ",--" + dashed(key);
      if (defaults.at(key).is_boolean()) {
        flags[key] = false;
        app->add_flag(names, flags[key], "config key " + key);
      } else {
        values[key];
        app->add_option(names, values[key], "config key " + key);
      }
    }
  }

  void apply(CLI::App* app, ExperimentConfig& config) const {
    for (const auto& [key, value] : values) {
      if (app->count("--" + key) > 0) apply_override(config, key, value);
    }
    for (const auto& [key, on] : flags) {
      if (on) apply_override(config, key, "true");
    }
  }
};

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::string cur;
  for (char c : text + ",") {
    if (c == ',') {
      if (!cur.empty()) {
        try {
          seeds.push_back(std::stoull(cur));
        } catch (const std::exception&) {
          throw ConfigError("bad seed '" + cur + "'");
        }
      }
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (seeds.empty()) throw ConfigError("no seeds given");
  return seeds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"imitlab: adversarial imitation on toy point-lift tasks"};
  app.require_subcommand(1);

  // demos collect
  auto* demos = app.add_subcommand("demos", "demonstration utilities");
  demos->require_subcommand(1);
  auto* collect = demos->add_subcommand("collect", "roll the scripted expert and write a demo file");
  std::string demo_task = "lift", demo_out;
  int demo_n = 100, demo_distractors = 2;
  std::uint64_t demo_seed = 7;
  double demo_noise = 0.05;
  collect->add_option("--task", demo_task, "task preset");
  collect->add_option("--n", demo_n, "number of episodes");
  collect->add_option("--seed", demo_seed, "rng seed");
  collect->add_option("--noise", demo_noise, "expert action noise");
  collect->add_option("--num-distractors", demo_distractors, "distractors in distracted presets");
  collect->add_option("--out", demo_out, "output JSON-lines file")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "train one agent");
  std::string train_config, train_out;
  train_cmd->add_option("--config", train_config, "JSON config file");
  train_cmd->add_option("--out", train_out, "output directory")->required();
  OverrideFlags train_flags;
  train_flags.attach(train_cmd);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a policy checkpoint or the scripted expert");
  std::string eval_ckpt, eval_task = "lift";
  int eval_n = 10, eval_distractors = 2;
  std::uint64_t eval_seed = 0;
  bool eval_expert = false;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "policy checkpoint");
  eval_cmd->add_flag("--expert", eval_expert, "evaluate the scripted expert instead");
  eval_cmd->add_option("--task", eval_task, "task preset");
  eval_cmd->add_option("--episodes", eval_n, "number of episodes");
  eval_cmd->add_option("--seed", eval_seed, "rng seed");
  eval_cmd->add_option("--num-distractors", eval_distractors, "distractors in distracted presets");

  // ablate
  auto* ablate_cmd = app.add_subcommand("ablate", "run a grid of configs over shared seeds");
  std::string grid, ablate_config, ablate_out, seeds_text = "0,1,2";
  ablate_cmd->add_option("--grid", grid, "named grid or JSON grid file")->required();
  ablate_cmd->add_option("--config", ablate_config, "base JSON config");
  ablate_cmd->add_option("--seeds", seeds_text, "comma-separated seeds");
  ablate_cmd->add_option("--out", ablate_out, "output directory")->required();
  OverrideFlags ablate_flags;
  ablate_flags.attach(ablate_cmd);

  // plot
  auto* plot_cmd = app.add_subcommand("plot", "render learning curves as SVG");
  std::vector<std::string> plot_inputs;
  std::string plot_out, plot_title = "eval return";
  plot_cmd->add_option("metrics", plot_inputs, "metrics CSV files");
  plot_cmd->add_option("--out", plot_out, "output SVG")->required();
  plot_cmd->add_option("--title", plot_title, "plot title");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (collect->parsed()) {
      ExperimentConfig c;
      c.task = task_from_string(demo_task);
      c.num_distractors = demo_distractors;
      if (demo_n < 1) throw ConfigError("--n must be >= 1");
      const EnvConfig env = make_task_envs(c).expert;
      Rng rng(demo_seed);
      const auto eps = collect_demos(env, demo_n, demo_noise, rng, 0);
      write_demos(eps, demo_out);
      double total = 0.0;
      for (const auto& ep : eps) total += ep.total_reward();
      std::printf("wrote %d demos to %s (mean return %.2f)\n", demo_n, demo_out.c_str(), total / demo_n);
    } else if (train_cmd->parsed()) {
      ExperimentConfig c = train_config.empty() ? ExperimentConfig{} : load_config(train_config);
      train_flags.apply(train_cmd, c);
      TrainOptions opts;
      opts.out_dir = train_out;
      const TrainResult r = train(c, opts);
      std::printf("final eval return %.2f after %ld learner steps (%ld env steps)\n", r.final_return,
                  r.learner_steps, r.env_steps);
      if (r.disc) {
        std::printf("D(train demos) %.4f  D(holdout demos) %.4f\n", r.probe.train_mean,
                    r.probe.holdout_mean);
      }
    } else if (eval_cmd->parsed()) {
      ExperimentConfig c;
      c.task = task_from_string(eval_task);
      c.num_distractors = eval_distractors;
      const EnvConfig env = make_task_envs(c).eval;
      Rng rng(eval_seed);
      EvalResult r;
      if (eval_expert) {
        r = evaluate_expert(env, eval_n, rng);
      } else {
        if (eval_ckpt.empty()) throw ConfigError("eval needs --checkpoint or --expert");
        const Network policy = load_checkpoint(eval_ckpt);
        if (policy.input_size() != observation_layout(env).total) {
          throw ConfigError("checkpoint input size does not match task " + eval_task);
        }
        r = evaluate(policy, env, eval_n, rng);
      }
      std::printf("episodes %d mean %.2f std %.2f\n", eval_n, r.mean, r.stddev);
      for (double x : r.returns) std::printf("%.0f\n", x);
    } else if (ablate_cmd->parsed()) {
      ExperimentConfig base = ablate_config.empty() ? ExperimentConfig{} : load_config(ablate_config);
      ablate_flags.apply(ablate_cmd, base);
      std::vector<AblationCell> cells;
      if (std::filesystem::exists(grid)) {
        std::ifstream in(grid);
        nlohmann::json j;
        try {
          in >> j;
        } catch (const nlohmann::json::exception& e) {
          throw ConfigError("grid file is not valid JSON: " + std::string(e.what()));
        }
        cells = grid_from_json(j);
      } else {
        cells = named_grid(grid);
      }
      const auto outcomes = ablate(base, cells, parse_seeds(seeds_text), ablate_out);
      std::printf("%-28s %6s %8s %10s %10s %9s\n", "cell", "seed", "status", "final", "best", "D gap");
      for (const auto& o : outcomes) {
        std::printf("%-28s %6llu %8s %10.2f %10.2f %9.4f %s\n", o.cell.c_str(),
                    static_cast<unsigned long long>(o.seed), o.ok ? "ok" : "error", o.final_return,
                    o.best_return, o.disc_gap, o.error.c_str());
      }
    } else if (plot_cmd->parsed()) {
      std::vector<std::filesystem::path> files(plot_inputs.begin(), plot_inputs.end());
      plot(files, plot_out, plot_title);
      std::printf("wrote %s\n", plot_out.c_str());
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical abort: %s (batch index %ld)\n", e.what(),
                 static_cast<long>(e.batch_index));
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
