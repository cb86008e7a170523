// Reward providers built on a state-only discriminator: the GAIL objective,
// the constrained TRAIL objective, the -log(1 - D) reward, the oracle
// discriminator, and feature-space augmentation of discriminator inputs.
#pragma once

#include <string>
#include <vector>

#include "imitlab/env.hpp"
#include "imitlab/nn.hpp"

namespace imitlab {

inline constexpr double kDefaultLogClip = 1e-6;

struct Discriminator {
  Network net;  // sigmoid head over observations
  double eps = kDefaultLogClip;
  AdamState adam;

  int input_size() const { return net.input_size(); }
};

Discriminator make_discriminator(int obs_dim, const std::vector<int>& hidden, std::uint64_t seed,
                                 double eps = kDefaultLogClip);

// Stacks observations as rows.
Mat stack_rows(const std::vector<Vec>& rows);

// Raw sigmoid scores D(s), one per row.
Vec scores(const Discriminator& disc, const Mat& obs);
double clip_score(const Discriminator& disc, double d);

// G = sum_i log D(sE_i) + log(1 - D(sA_i)), with D clipped to [eps, 1 - eps].
double gail_term(const Discriminator& disc, const Mat& s_expert, const Mat& s_agent);

// Balanced accuracy; D = 1/2 counts as an expert prediction.
double accuracy(const Discriminator& disc, const Mat& c_expert, const Mat& c_agent);
double accuracy_from_scores(const Vec& expert_scores, const Vec& agent_scores);

struct DiscBatch {
  Mat s_expert;
  Mat s_agent;
  Mat c_expert;  // drawn from the expert constraining set
  Mat c_agent;   // drawn from the agent constraining set
};

struct TrailValue {
  double value = 0.0;       // L = G(sE, sA) - indicator * G(cE, cA)
  double gail = 0.0;        // G(sE, sA)
  double constraint = 0.0;  // G(cE, cA)
  double accuracy = 0.0;    // accuracy(cE, cA)
  bool indicator = false;   // accuracy >= 1/2
};

TrailValue trail_loss(const Discriminator& disc, const DiscBatch& batch);

// Value and gradient (with respect to the discriminator parameters) of the
// objectives above. Both are ascent directions: the gradient of the quantity
// being maximized. For TRAIL the indicator is evaluated first and then held
// constant; `forced_indicator` overrides it.
struct ObjectiveGrad {
  double value = 0.0;
  Gradients grad;
  TrailValue trail;
};

ObjectiveGrad gail_gradient(const Discriminator& disc, const Mat& s_expert, const Mat& s_agent);
ObjectiveGrad trail_gradient(const Discriminator& disc, const DiscBatch& batch,
                             const bool* forced_indicator = nullptr);

// One Adam ascent step on the objective.
void ascend(Discriminator& disc, const Gradients& ascent_grad, double lr);

// R(s) = -log(1 - D(s)), D clipped to [eps, 1 - eps]; lies in [~0, -log eps].
double reward(const Discriminator& disc, const Vec& obs);
Vec rewards(const Discriminator& disc, const Mat& obs);
double reward_from_score(double d, double eps);

// 1 for expert frames and 0 for agent frames, regardless of content.
double oracle_reward(Source source);

enum class RewardProvider { kEnvSparse, kGail, kTrail, kOracle };
std::string to_string(RewardProvider p);
RewardProvider reward_provider_from_string(const std::string& name);

struct AugmentOptions {
  double noise_sigma = 0.0;
  double group_drop_prob = 0.0;
};

// Adds i.i.d. Gaussian noise per entry and zeroes whole feature groups with
// probability group_drop_prob each; at least one non-empty group survives.
Vec augment(const Vec& obs, const ObservationLayout& layout, Rng& rng, double noise_sigma,
            double group_drop_prob);
Mat augment_rows(const Mat& obs, const ObservationLayout& layout, Rng& rng,
                 const AugmentOptions& options);

}  // namespace imitlab
