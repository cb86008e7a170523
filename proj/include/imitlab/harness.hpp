// Experiment orchestration: presets, the actor/learner training loop with
// reward substitution, evaluation, the train/holdout discriminator probe and
// ablation grids.
#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "imitlab/agent.hpp"
#include "imitlab/constraining.hpp"
#include "imitlab/discriminator.hpp"
#include "imitlab/env.hpp"
#include "imitlab/metrics.hpp"
#include "imitlab/stopping.hpp"

namespace imitlab {

enum class Method { kBc, kD4pgfd, kGail, kGailAes, kTrail };
std::string to_string(Method m);
Method method_from_string(const std::string& name);

enum class TaskPreset {
  kLift,
  kLiftDistracted,
  kLiftDistractedSeeded,
  kLiftAppearance,
  kLiftAppearanceDistracted
};
std::string to_string(TaskPreset t);
TaskPreset task_from_string(const std::string& name);

struct ExperimentConfig {
  TaskPreset task = TaskPreset::kLift;
  Method method = Method::kTrail;
  std::optional<RewardProvider> reward_override;
  ConstraintSpec constraint;
  std::optional<StopSpec> aes;  // unset: adaptive for gail_aes and trail, off otherwise
  AgentConfig agent;

  int actor_count = 4;
  std::size_t replay_capacity = 100000;
  double demo_fraction = 0.0625;
  int min_replay = 1000;
  int snapshot_period = 100;  // actor env steps between parameter refreshes

  long train_steps = 20000;
  long eval_every = 2000;
  int eval_episodes = 10;

  int disc_warmup_steps = 500;
  int disc_updates_per_step = 1;
  int disc_batch_size = 64;
  double disc_lr = 1e-4;
  std::vector<int> disc_hidden{32, 32};
  double disc_eps = kDefaultLogClip;
  AugmentOptions augment{0.0, 0.0};

  int num_demos = 100;
  int num_holdout = 25;
  double expert_noise = 0.05;
  std::uint64_t demo_seed = 7;
  std::string demo_file;  // empty: collect from the fixed demo stream
  int num_distractors = 2;
  double appearance_shift = 0.5;

  BcOptions bc;
  std::uint64_t seed = 0;
  bool single_thread = false;
  int verbosity = 0;

  RewardProvider reward_provider() const;
  StopSpec stop_spec() const;
  bool trains_discriminator() const;
  // Throws ConfigError on incompatible settings.
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& config);
// Missing keys keep their defaults; unknown keys are an error.
ExperimentConfig config_from_json(const nlohmann::json& j,
                                  const ExperimentConfig& base = ExperimentConfig{});
ExperimentConfig load_config(const std::filesystem::path& path);
// Sets one key from its textual form, typed by the key's JSON type.
void apply_override(ExperimentConfig& config, const std::string& key, const std::string& value);
std::vector<std::string> config_keys();

struct TaskEnvs {
  EnvConfig expert;  // demonstrations and I_E
  EnvConfig agent;   // training actors and I_A
  EnvConfig eval;    // evaluation (always uniform init)
};

// Builds the three settings of a preset. Seeded presets draw agent layouts
// from `demo_pool`.
TaskEnvs make_task_envs(const ExperimentConfig& config,
                        std::shared_ptr<const std::vector<Layout>> demo_pool = nullptr);

struct DemoSets {
  std::vector<Episode> train;
  std::vector<Episode> holdout;
};

// The fixed demo stream (or the configured demo file) plus holdout demos from
// a distinct stream with disjoint episode ids.
DemoSets load_or_collect_demos(const ExperimentConfig& config, const EnvConfig& expert_env);

inline constexpr long kHoldoutIdBase = 1000000;

struct EvalResult {
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> returns;
};

// Deterministic policy, full-length episodes, no early stopping.
EvalResult evaluate(const Network& policy, const EnvConfig& config, int n_episodes, Rng& rng);
EvalResult evaluate_expert(const EnvConfig& config, int n_episodes, Rng& rng, double noise = 0.0);

// Every observation of an episode: s of each transition and the final s'.
std::vector<Vec> episode_frames(const Episode& episode);

struct ProbeResult {
  double train_mean = 0.0;
  double holdout_mean = 0.0;
  double gap() const { return train_mean > holdout_mean ? train_mean - holdout_mean : holdout_mean - train_mean; }
};

ProbeResult generalization_probe(const Discriminator& disc, const std::vector<Episode>& train,
                                 const std::vector<Episode>& holdout);

// Counts learner-side reward reads per provider.
struct RewardAccess {
  long env = 0;
  long discriminator = 0;
  long oracle = 0;
};

struct TrainResult {
  std::vector<MetricsRow> metrics;
  AgentNets nets;
  std::optional<Discriminator> disc;
  RewardAccess learner_reads;
  long env_steps = 0;
  long learner_steps = 0;
  ProbeResult probe;
  double final_return = 0.0;
  double final_constraint_accuracy = -1.0;
};

struct TrainOptions {
  std::filesystem::path out_dir;  // empty: nothing written
  std::atomic<bool>* cancel = nullptr;
};

// Throws ConfigError on bad setup and NumericalError on a non-finite loss
// (after writing numerical_abort.json when out_dir is set).
TrainResult train(const ExperimentConfig& config, const TrainOptions& options = {});

struct AblationCell {
  std::string name;
  nlohmann::json overrides;
};

struct AblationOutcome {
  std::string cell;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double final_return = 0.0;
  double best_return = 0.0;
  double disc_gap = 0.0;
};

// Named grids: early_frames, augmentation, aes, oracle.
std::vector<AblationCell> named_grid(const std::string& name);
std::vector<AblationCell> grid_from_json(const nlohmann::json& j);

// Runs every cell for every seed (cells in parallel). Errors of one cell are
// recorded and the grid continues. Writes <out>/<cell>/seed<S>/metrics.csv and
// <out>/summary.csv when out_dir is set.
std::vector<AblationOutcome> ablate(const ExperimentConfig& base,
                                    const std::vector<AblationCell>& cells,
                                    const std::vector<std::uint64_t>& seeds,
                                    const std::filesystem::path& out_dir = {});

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace imitlab
