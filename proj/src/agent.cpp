#include "imitlab/agent.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "imitlab/kernels.hpp"

namespace imitlab {

Support Support::make(double v_min, double v_max, int bins) {
  if (bins < 2) throw ConfigError("support needs at least two atoms");
  if (!(v_max > v_min)) throw ConfigError("support needs v_max > v_min");
  Support s;
  s.v_min = v_min;
  s.v_max = v_max;
  s.bins = bins;
  s.atoms = Vec(bins);
  const double dz = (v_max - v_min) / (bins - 1);
  for (int i = 0; i < bins; ++i) s.atoms[i] = v_min + i * dz;
  s.atoms[bins - 1] = v_max;
  return s;
}

Vec project(const Support& support, const Vec& shifted_atoms, const Vec& probs) {
  if (shifted_atoms.size() != probs.size()) throw ShapeError("projection: atoms/probs length mismatch");
  Vec out = Vec::Zero(support.bins);
  const double dz = support.spacing();
  const int last = support.bins - 1;
  for (Eigen::Index j = 0; j < shifted_atoms.size(); ++j) {
    const double tz = std::clamp(shifted_atoms[j], support.v_min, support.v_max);
    const double b = std::clamp((tz - support.v_min) / dz, 0.0, static_cast<double>(last));
    const int lo = static_cast<int>(std::floor(b));
    const int hi = std::min(lo + 1, last);
    const double frac = b - lo;
    if (hi == lo || frac == 0.0) {
      out[lo] += probs[j];
    } else {
      out[lo] += probs[j] * (1.0 - frac);
      out[hi] += probs[j] * frac;
    }
  }
  return out;
}

double mean_value(const Support& support, const Vec& probs) { return probs.dot(support.atoms); }

Network make_policy(int obs_dim, const std::vector<int>& hidden, std::uint64_t seed) {
  std::vector<int> sizes{obs_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(kActionDim);
  return init_network(sizes, Head::kTanhScaled, seed, 1.0);
}

AgentNets make_agent_nets(int obs_dim, const AgentConfig& config, std::uint64_t seed) {
  AgentNets nets;
  nets.support = Support::make(config.v_min, config.v_max, config.v_bins);
  nets.gamma = config.gamma;
  nets.n_step = config.n_step;
  if (config.target_update_period < 1) throw ConfigError("target update period must be >= 1");
  if (config.n_step < 1) throw ConfigError("n_step must be >= 1");
  nets.target_update_period = config.target_update_period;
  nets.policy = make_policy(obs_dim, config.policy_hidden, seed);
  std::vector<int> critic_sizes{obs_dim + kActionDim};
  critic_sizes.insert(critic_sizes.end(), config.critic_hidden.begin(), config.critic_hidden.end());
  critic_sizes.push_back(config.v_bins);
  nets.critic = init_network(critic_sizes, Head::kSoftmaxLogits, seed + 1);
  nets.target_policy = nets.policy;
  nets.target_critic = nets.critic;
  nets.policy_adam = AdamState::for_network(nets.policy);
  nets.critic_adam = AdamState::for_network(nets.critic);
  return nets;
}

Mat critic_input(const Mat& obs, const Mat& actions) {
  if (obs.rows() != actions.rows()) throw ShapeError("critic input: row count mismatch");
  Mat x(obs.rows(), obs.cols() + actions.cols());
  x << obs, actions;
  return x;
}

Mat critic_probs(const Network& critic, const Mat& obs, const Mat& actions) {
  return forward(critic, critic_input(obs, actions));
}

Vec act(const Network& policy, const Vec& obs, Rng& rng, double sigma) {
  Vec a = forward_one(policy, obs);
  if (sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma);
    for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = std::clamp(a[i] + noise(rng), -1.0, 1.0);
  }
  return a;
}

Mat n_step_target(const std::vector<ReplayItem>& items,
                  const std::vector<std::vector<double>>& rewards, int n_step, double gamma,
                  const Network& target_policy, const Network& target_critic,
                  const Support& support) {
  if (items.size() != rewards.size()) throw ShapeError("n_step_target: rewards/items mismatch");
  const std::size_t batch = items.size();
  std::vector<double> accumulated(batch, 0.0);
  std::vector<double> discount(batch, 1.0);
  std::vector<std::size_t> bootstrap;
  for (std::size_t b = 0; b < batch; ++b) {
    const auto& chain = items[b].chain;
    if (chain.empty() || static_cast<int>(chain.size()) > n_step) {
      throw UsageError("n_step_target: item length must be in [1, N]");
    }
    if (rewards[b].size() != chain.size()) throw ShapeError("n_step_target: reward length mismatch");
    for (std::size_t i = 0; i < chain.size(); ++i) {
      if (i > 0 && (chain[i].episode_id != chain[i - 1].episode_id ||
                    chain[i].step != chain[i - 1].step + 1 || chain[i - 1].done)) {
        throw UsageError("n_step_target: transitions are not consecutive");
      }
      accumulated[b] += discount[b] * rewards[b][i];
      discount[b] *= gamma;
    }
    if (!chain.back().done) bootstrap.push_back(b);
  }

  Mat target(batch, support.bins);
  const Vec uniform = Vec::Constant(support.bins, 1.0 / support.bins);
  for (std::size_t b = 0; b < batch; ++b) {
    target.row(b) = project(support, Vec::Constant(support.bins, accumulated[b]), uniform).transpose();
  }
  if (!bootstrap.empty()) {
    Mat next(bootstrap.size(), items[bootstrap.front()].last().s_next.size());
    for (std::size_t k = 0; k < bootstrap.size(); ++k) {
      next.row(k) = items[bootstrap[k]].last().s_next.transpose();
    }
    const Mat next_actions = forward(target_policy, next);
    const Mat probs = critic_probs(target_critic, next, next_actions);
    Mat shifted(bootstrap.size(), support.bins);
    for (std::size_t k = 0; k < bootstrap.size(); ++k) {
      const std::size_t b = bootstrap[k];
      shifted.row(k) = (accumulated[b] + discount[b] * support.atoms.transpose().array()).matrix();
    }
    const Mat projected = kernels::project_rows(support, shifted, probs);
    for (std::size_t k = 0; k < bootstrap.size(); ++k) target.row(bootstrap[k]) = projected.row(k);
  }
  return target;
}

namespace {

Mat log_softmax(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    const double lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
    out.row(r) = logits.row(r).array() - lse;
  }
  return out;
}

}  // namespace

double critic_loss(const Network& critic, const Mat& obs, const Mat& actions, const Mat& target,
                   Gradients* grad) {
  ForwardCache cache;
  const Mat probs = forward(critic, critic_input(obs, actions), cache);
  if (target.rows() != probs.rows() || target.cols() != probs.cols()) {
    throw ShapeError("critic_loss: target shape mismatch");
  }
  const Mat logp = log_softmax(cache.pre_head);
  const double n = static_cast<double>(obs.rows());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < logp.rows(); ++r) {
    const double row_loss = -target.row(r).dot(logp.row(r));
    if (!std::isfinite(row_loss)) throw NumericalError("non-finite critic loss", r);
    loss += row_loss;
  }
  loss /= n;
  if (grad) {
    // d/dlogits of mean CE = (softmax - target) / n (targets sum to one).
    Mat d = (probs - target) / n;
    *grad = backward_from_logits(critic, cache, d);
  }
  return loss;
}

double policy_objective(const Network& policy, const Network& critic, const Support& support,
                        const Mat& obs, Gradients* ascent_grad) {
  ForwardCache pcache, ccache;
  const Mat actions = forward(policy, obs, pcache);
  const Mat probs = forward(critic, critic_input(obs, actions), ccache);
  const double n = static_cast<double>(obs.rows());
  const Vec q = probs * support.atoms;
  const double objective = q.mean();
  if (!std::isfinite(objective)) throw NumericalError("non-finite policy objective", -1);
  if (ascent_grad) {
    // dQ/dlogit_j = p_j (z_j - Q)
    Mat dlogits(probs.rows(), probs.cols());
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
      dlogits.row(r) = probs.row(r).cwiseProduct((support.atoms.transpose().array() - q[r]).matrix()) / n;
    }
    Mat d_input;
    backward_from_logits(critic, ccache, dlogits, &d_input);
    const Mat d_actions = d_input.rightCols(actions.cols());
    *ascent_grad = backward(policy, pcache, d_actions);
  }
  return objective;
}

void critic_update(AgentNets& nets, const Mat& obs, const Mat& actions, const Mat& target,
                   double lr, LearnerStats& stats) {
  Gradients g;
  stats.critic_loss = critic_loss(nets.critic, obs, actions, target, &g);
  if (!g.all_finite()) throw NumericalError("non-finite critic gradient", -1);
  adam_step(nets.critic, g, nets.critic_adam, lr);
}

void policy_update(AgentNets& nets, const Mat& obs, double lr, LearnerStats& stats) {
  Gradients g;
  stats.policy_objective = policy_objective(nets.policy, nets.critic, nets.support, obs, &g);
  if (!g.all_finite()) throw NumericalError("non-finite policy gradient", -1);
  g *= -1.0;
  adam_step(nets.policy, g, nets.policy_adam, lr);
}

bool target_sync(AgentNets& nets, std::uint64_t step) {
  if (step == 0 || step % static_cast<std::uint64_t>(nets.target_update_period) != 0) return false;
  nets.target_policy = nets.policy;
  nets.target_critic = nets.critic;
  return true;
}

double bc_loss(const Network& policy, const Mat& obs, const Mat& actions, Gradients* grad) {
  ForwardCache cache;
  const Mat pred = forward(policy, obs, cache);
  if (pred.rows() != actions.rows() || pred.cols() != actions.cols()) {
    throw ShapeError("bc_loss: action shape mismatch");
  }
  const Mat diff = pred - actions;
  const double n = static_cast<double>(diff.size());
  const double loss = diff.squaredNorm() / n;
  if (!std::isfinite(loss)) throw NumericalError("non-finite BC loss", -1);
  if (grad) *grad = backward(policy, cache, 2.0 * diff / n);
  return loss;
}

void bc_train(const std::vector<Episode>& demos, Network& policy, const BcOptions& options,
              Rng& rng) {
  std::vector<const Transition*> pairs;
  for (const auto& ep : demos) {
    for (const auto& t : ep.transitions) {
      if (t.a.size() != kActionDim) throw ConfigError("BC needs demos with actions");
      pairs.push_back(&t);
    }
  }
  if (pairs.empty()) throw ConfigError("BC needs at least one demo transition");
  AdamState adam = AdamState::for_network(policy);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t bs = static_cast<std::size_t>(std::max(1, options.batch_size));
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      Mat obs(end - start, pairs.front()->s.size()), act_m(end - start, kActionDim);
      for (std::size_t i = start; i < end; ++i) {
        obs.row(i - start) = pairs[order[i]]->s.transpose();
        act_m.row(i - start) = pairs[order[i]]->a.transpose();
      }
      Gradients g;
      bc_loss(policy, obs, act_m, &g);
      adam_step(policy, g, adam, options.lr);
    }
  }
}

}  // namespace imitlab
