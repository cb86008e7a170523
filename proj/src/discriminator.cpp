#include "imitlab/discriminator.hpp"

#include <algorithm>
#include <cmath>

namespace imitlab {

Discriminator make_discriminator(int obs_dim, const std::vector<int>& hidden, std::uint64_t seed,
                                 double eps) {
  std::vector<int> sizes{obs_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  Discriminator d;
  d.net = init_network(sizes, Head::kSigmoid, seed);
  d.eps = eps;
  d.adam = AdamState::for_network(d.net);
  return d;
}

Mat stack_rows(const std::vector<Vec>& rows) {
  if (rows.empty()) return Mat();
  Mat m(static_cast<Eigen::Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return m;
}

Vec scores(const Discriminator& disc, const Mat& obs) {
  Mat out = forward(disc.net, obs);
  return out.col(0);
}

double clip_score(const Discriminator& disc, double d) {
  return std::clamp(d, disc.eps, 1.0 - disc.eps);
}

namespace {

// Neumaier-compensated sum of the log terms.
double sum_log_terms(const Discriminator& disc, const Vec& d_expert, const Vec& d_agent) {
  double sum = 0.0, comp = 0.0;
  auto add = [&](double x) {
    const double t = sum + x;
    comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  };
  for (Eigen::Index i = 0; i < d_expert.size(); ++i) add(std::log(clip_score(disc, d_expert[i])));
  for (Eigen::Index i = 0; i < d_agent.size(); ++i) add(std::log(1.0 - clip_score(disc, d_agent[i])));
  return sum + comp;
}

void check_pair(const Mat& a, const Mat& b) {
  if (a.rows() == 0 || b.rows() == 0) throw ShapeError("discriminator batch must be non-empty");
  if (a.rows() != b.rows()) throw ShapeError("discriminator expert/agent batches must be balanced");
}

// Ascent gradient of G over a concatenated [expert; agent] forward pass.
// d/dlogit log(clip(sigmoid)) = 1 - D inside the clip range, 0 outside.
Gradients g_gradient(const Discriminator& disc, const Mat& s_expert, const Mat& s_agent,
                     double* value) {
  Mat x(s_expert.rows() + s_agent.rows(), s_expert.cols());
  x << s_expert, s_agent;
  ForwardCache cache;
  Mat d = forward(disc.net, x, cache);
  Mat dlogit(d.rows(), 1);
  double g = 0.0;
  const double lo = disc.eps, hi = 1.0 - disc.eps;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    const double di = d(i, 0);
    const bool inside = di > lo && di < hi;
    const double c = std::clamp(di, lo, hi);
    if (i < s_expert.rows()) {
      g += std::log(c);
      dlogit(i, 0) = inside ? 1.0 - di : 0.0;
    } else {
      g += std::log(1.0 - c);
      dlogit(i, 0) = inside ? -di : 0.0;
    }
  }
  if (!std::isfinite(g)) throw NumericalError("non-finite discriminator objective", -1);
  // Value from per-set forward passes, as in gail_term.
  if (value) *value = sum_log_terms(disc, scores(disc, s_expert), scores(disc, s_agent));
  return backward_from_logits(disc.net, cache, dlogit);
}

}  // namespace

double gail_term(const Discriminator& disc, const Mat& s_expert, const Mat& s_agent) {
  check_pair(s_expert, s_agent);
  return sum_log_terms(disc, scores(disc, s_expert), scores(disc, s_agent));
}

double accuracy_from_scores(const Vec& expert_scores, const Vec& agent_scores) {
  if (expert_scores.size() == 0 || agent_scores.size() == 0) {
    throw ShapeError("accuracy needs both constraining sets non-empty");
  }
  std::size_t hit_e = 0, hit_a = 0;
  for (Eigen::Index i = 0; i < expert_scores.size(); ++i) hit_e += expert_scores[i] >= 0.5 ? 1 : 0;
  for (Eigen::Index i = 0; i < agent_scores.size(); ++i) hit_a += agent_scores[i] < 0.5 ? 1 : 0;
  return 0.5 * static_cast<double>(hit_e) / static_cast<double>(expert_scores.size()) +
         0.5 * static_cast<double>(hit_a) / static_cast<double>(agent_scores.size());
}

double accuracy(const Discriminator& disc, const Mat& c_expert, const Mat& c_agent) {
  return accuracy_from_scores(scores(disc, c_expert), scores(disc, c_agent));
}

TrailValue trail_loss(const Discriminator& disc, const DiscBatch& batch) {
  check_pair(batch.s_expert, batch.s_agent);
  check_pair(batch.c_expert, batch.c_agent);
  TrailValue v;
  v.gail = gail_term(disc, batch.s_expert, batch.s_agent);
  const Vec ce = scores(disc, batch.c_expert);
  const Vec ca = scores(disc, batch.c_agent);
  v.accuracy = accuracy_from_scores(ce, ca);
  v.indicator = v.accuracy >= 0.5;
  v.constraint = sum_log_terms(disc, ce, ca);
  v.value = v.indicator ? v.gail - v.constraint : v.gail;
  return v;
}

ObjectiveGrad gail_gradient(const Discriminator& disc, const Mat& s_expert, const Mat& s_agent) {
  check_pair(s_expert, s_agent);
  ObjectiveGrad out;
  out.grad = g_gradient(disc, s_expert, s_agent, &out.value);
  out.trail.gail = out.value;
  out.trail.value = out.value;
  return out;
}

ObjectiveGrad trail_gradient(const Discriminator& disc, const DiscBatch& batch,
                             const bool* forced_indicator) {
  check_pair(batch.s_expert, batch.s_agent);
  check_pair(batch.c_expert, batch.c_agent);
  ObjectiveGrad out;
  out.grad = g_gradient(disc, batch.s_expert, batch.s_agent, &out.trail.gail);
  out.trail.accuracy = accuracy(disc, batch.c_expert, batch.c_agent);
  out.trail.indicator = forced_indicator ? *forced_indicator : out.trail.accuracy >= 0.5;
  double constraint = 0.0;
  Gradients cg = g_gradient(disc, batch.c_expert, batch.c_agent, &constraint);
  out.trail.constraint = constraint;
  if (out.trail.indicator) {
    cg *= -1.0;
    out.grad += cg;
    out.trail.value = out.trail.gail - constraint;
  } else {
    out.trail.value = out.trail.gail;
  }
  out.value = out.trail.value;
  return out;
}

void ascend(Discriminator& disc, const Gradients& ascent_grad, double lr) {
  if (!ascent_grad.all_finite()) throw NumericalError("non-finite discriminator gradient", -1);
  Gradients descent = ascent_grad;
  descent *= -1.0;
  adam_step(disc.net, descent, disc.adam, lr);
}

double reward_from_score(double d, double eps) {
  return -std::log(1.0 - std::clamp(d, eps, 1.0 - eps));
}

double reward(const Discriminator& disc, const Vec& obs) {
  return reward_from_score(forward_one(disc.net, obs)[0], disc.eps);
}

Vec rewards(const Discriminator& disc, const Mat& obs) {
  Vec d = scores(disc, obs);
  for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = reward_from_score(d[i], disc.eps);
  return d;
}

double oracle_reward(Source source) { return source == Source::kExpert ? 1.0 : 0.0; }

std::string to_string(RewardProvider p) {
  switch (p) {
    case RewardProvider::kEnvSparse: return "env_sparse";
    case RewardProvider::kGail: return "gail";
    case RewardProvider::kTrail: return "trail";
    case RewardProvider::kOracle: return "oracle";
  }
  return "env_sparse";
}

RewardProvider reward_provider_from_string(const std::string& name) {
  if (name == "env_sparse") return RewardProvider::kEnvSparse;
  if (name == "gail") return RewardProvider::kGail;
  if (name == "trail") return RewardProvider::kTrail;
  if (name == "oracle") return RewardProvider::kOracle;
  throw ConfigError("unknown reward provider '" + name + "'");
}

Vec augment(const Vec& obs, const ObservationLayout& layout, Rng& rng, double noise_sigma,
            double group_drop_prob) {
  if (group_drop_prob < 0.0 || group_drop_prob >= 1.0) {
    throw ConfigError("group_drop_prob must be in [0, 1)");
  }
  Vec out = obs;
  if (noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, noise_sigma);
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] += noise(rng);
  }
  if (group_drop_prob > 0.0) {
    std::vector<FeatureGroup> groups;
    for (const auto& g : layout.groups()) {
      if (g.size > 0) groups.push_back(g);
    }
    std::bernoulli_distribution drop(group_drop_prob);
    std::vector<bool> dropped(groups.size());
    bool any_kept = false;
    while (!any_kept) {
      for (std::size_t i = 0; i < groups.size(); ++i) {
        dropped[i] = drop(rng);
        any_kept = any_kept || !dropped[i];
      }
    }
    for (std::size_t i = 0; i < groups.size(); ++i) {
      if (dropped[i]) out.segment(groups[i].offset, groups[i].size).setZero();
    }
  }
  return out;
}

Mat augment_rows(const Mat& obs, const ObservationLayout& layout, Rng& rng,
                 const AugmentOptions& options) {
  if (options.noise_sigma <= 0.0 && options.group_drop_prob <= 0.0) return obs;
  Mat out(obs.rows(), obs.cols());
  for (Eigen::Index r = 0; r < obs.rows(); ++r) {
    out.row(r) = augment(obs.row(r).transpose(), layout, rng, options.noise_sigma,
                         options.group_drop_prob)
                     .transpose();
  }
  return out;
}

}  // namespace imitlab
