// Distributional actor-critic learner (categorical critic over a fixed
// support, deterministic policy gradient actor, hard-synced target networks)
// and a behaviour-cloning baseline.
#pragma once

#include <vector>

#include "imitlab/env.hpp"
#include "imitlab/nn.hpp"
#include "imitlab/replay.hpp"

namespace imitlab {

struct Support {
  double v_min = -50.0;
  double v_max = 150.0;
  int bins = 21;
  Vec atoms;

  // Atoms are evenly spaced with the first at v_min and the last at v_max.
  static Support make(double v_min, double v_max, int bins);
  double spacing() const { return (v_max - v_min) / (bins - 1); }
};

// Categorical projection of a distribution on `shifted_atoms` onto the fixed
// support: each atom's mass is split linearly between its two neighbours and
// atoms outside [v_min, v_max] land on the boundary atom.
Vec project(const Support& support, const Vec& shifted_atoms, const Vec& probs);

double mean_value(const Support& support, const Vec& probs);

struct AgentConfig {
  double v_min = -50.0;
  double v_max = 150.0;
  int v_bins = 21;
  int n_step = 1;
  double gamma = 0.99;
  double policy_lr = 1e-4;
  double critic_lr = 1e-4;
  int batch_size = 256;
  int target_update_period = 100;
  std::vector<int> policy_hidden{300, 200};
  std::vector<int> critic_hidden{400, 300};
  double exploration_sigma = 0.1;
};

struct AgentNets {
  Network policy;
  Network critic;
  Network target_policy;
  Network target_critic;
  AdamState policy_adam;
  AdamState critic_adam;
  Support support;
  double gamma = 0.99;
  int n_step = 1;
  int target_update_period = 100;
  std::uint64_t learner_steps = 0;
};

AgentNets make_agent_nets(int obs_dim, const AgentConfig& config, std::uint64_t seed);
Network make_policy(int obs_dim, const std::vector<int>& hidden, std::uint64_t seed);

// [obs | action] rows.
Mat critic_input(const Mat& obs, const Mat& actions);

// Softmax probabilities of the critic at (obs, actions).
Mat critic_probs(const Network& critic, const Mat& obs, const Mat& actions);

// Policy action, plus clipped Gaussian exploration noise when sigma > 0.
Vec act(const Network& policy, const Vec& obs, Rng& rng, double sigma);

// Per-item target distribution: project(support, gamma^n z + sum gamma^i r_i,
// p_target(s_{t+n}, pi'(s_{t+n}))). `rewards[b][i]` is the reward of the i-th
// transition of item b. Items whose last transition is terminal drop the
// bootstrap term (all mass at the accumulated return).
Mat n_step_target(const std::vector<ReplayItem>& items,
                  const std::vector<std::vector<double>>& rewards, int n_step, double gamma,
                  const Network& target_policy, const Network& target_critic,
                  const Support& support);

// Mean cross-entropy H(target, softmax(critic(s, a))). The gradient is with
// respect to the critic parameters.
double critic_loss(const Network& critic, const Mat& obs, const Mat& actions, const Mat& target,
                   Gradients* grad = nullptr);

// Mean Q(s, pi(s)) under the critic (the quantity ascended by the policy
// update). The gradient is with respect to the policy parameters only.
double policy_objective(const Network& policy, const Network& critic, const Support& support,
                        const Mat& obs, Gradients* ascent_grad = nullptr);

struct LearnerStats {
  double critic_loss = 0.0;
  double policy_objective = 0.0;
};

void critic_update(AgentNets& nets, const Mat& obs, const Mat& actions, const Mat& target,
                   double lr, LearnerStats& stats);
void policy_update(AgentNets& nets, const Mat& obs, double lr, LearnerStats& stats);

// Hard copy of online into target networks when step is a positive multiple
// of the period. Returns true when a copy happened.
bool target_sync(AgentNets& nets, std::uint64_t step);

// Mean over batch and action dimensions of (pi(s) - a)^2, with gradient
// with respect to the policy parameters.
double bc_loss(const Network& policy, const Mat& obs, const Mat& actions, Gradients* grad = nullptr);

struct BcOptions {
  int epochs = 30;
  double lr = 1e-3;
  int batch_size = 256;
};

// Minibatch Adam on bc_loss over all demo (s, a) pairs.
void bc_train(const std::vector<Episode>& demos, Network& policy, const BcOptions& options,
              Rng& rng);

}  // namespace imitlab
