// Constraining sets: pools of expert-side and agent-side observations that
// differ only in task-irrelevant features. The discriminator is penalized
// whenever it can tell them apart.
#pragma once

#include <memory>
#include <string>
#include <vector>

#include "imitlab/env.hpp"
#include "imitlab/replay.hpp"

namespace imitlab {

struct ConstrainingFrame {
  Vec obs;
  long episode_id = 0;
  int step = 0;
};

enum class ConstraintStrategy { kEarlyFrames, kRandomPolicy };

struct ConstraintSpec {
  ConstraintStrategy strategy = ConstraintStrategy::kEarlyFrames;
  int early_frames = 10;           // k
  int random_episodes = 50;        // n
  std::size_t agent_capacity = 5000;

  // "early:K" or "random:N"
  static ConstraintSpec parse(const std::string& text);
  std::string to_string() const;
};

// First k observations of every demo. k larger than an episode is clamped
// (with a warning on stderr).
std::vector<ConstrainingFrame> build_early_frames(const std::vector<Episode>& demos, int k);

class ConstrainingSets {
 public:
  ConstrainingSets(ConstraintSpec spec, std::vector<ConstrainingFrame> expert);

  const ConstraintSpec& spec() const { return spec_; }
  const std::vector<ConstrainingFrame>& expert() const { return expert_; }
  const RingBuffer<ConstrainingFrame>& agent() const { return *agent_; }
  RingBuffer<ConstrainingFrame>& agent() { return *agent_; }

  bool ready() const { return !expert_.empty() && !agent_->empty(); }

  void sample_expert(std::size_t n, Rng& rng, std::vector<Vec>& out) const;
  void sample_agent(std::size_t n, Rng& rng, std::vector<Vec>& out) const;

 private:
  ConstraintSpec spec_;
  std::vector<ConstrainingFrame> expert_;
  std::unique_ptr<RingBuffer<ConstrainingFrame>> agent_;
};

// Appends the first min(k, len) observations of an agent episode to I_A.
// `episode_prefix` holds observations in step order starting at step 0.
void ingest_agent_early_frames(ConstrainingSets& sets, const std::vector<Vec>& episode_prefix,
                               long episode_id, int k);

// Uniform-random actions in both settings; every frame of n_episodes full
// episodes goes into the corresponding pool.
ConstrainingSets build_random_policy_sets(const EnvConfig& expert_config,
                                          const EnvConfig& agent_config, int n_episodes, Rng& rng,
                                          std::size_t agent_capacity = 0);

// All observations of uniform-random rollouts (helper for the above and for
// baselines).
std::vector<ConstrainingFrame> random_policy_frames(const EnvConfig& config, int n_episodes,
                                                    Rng& rng, long first_episode_id = 0);

// A small MLP trained to separate two observation pools, restricted to the
// given feature groups; the reported value is balanced test accuracy.
// kByEpisode keeps every frame of an episode on the same side of the
// train/test split, so layouts seen in training never reach the test half.
// kByFrame splits frames independently and lets the probe exploit
// per-episode constants it has memorized. The result is averaged over
// `repeats` independent splits.
enum class ProbeSplit { kByEpisode, kByFrame };

struct ProbeOptions {
  std::vector<int> hidden{32, 32};
  int epochs = 150;
  int batch_size = 64;
  double lr = 3e-3;
  std::uint64_t seed = 0;
  ProbeSplit split = ProbeSplit::kByEpisode;
  int repeats = 1;
};

double probe_accuracy(const std::vector<ConstrainingFrame>& expert,
                      const std::vector<ConstrainingFrame>& agent,
                      const std::vector<FeatureGroup>& groups, const ProbeOptions& options = {});

std::vector<Vec> observations(const std::vector<ConstrainingFrame>& frames);

}  // namespace imitlab
