#include "imitlab/constraining.hpp"

#include <algorithm>
#include <iostream>
#include <numeric>
#include <set>

#include "imitlab/discriminator.hpp"

namespace imitlab {

ConstraintSpec ConstraintSpec::parse(const std::string& text) {
  ConstraintSpec spec;
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  int value = -1;
  if (colon != std::string::npos) {
    try {
      value = std::stoi(text.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("bad constraint strategy '" + text + "'");
    }
  }
  if (kind == "early") {
    spec.strategy = ConstraintStrategy::kEarlyFrames;
    if (value >= 0) spec.early_frames = value;
    if (spec.early_frames < 1) throw ConfigError("early-frame count must be >= 1");
  } else if (kind == "random") {
    spec.strategy = ConstraintStrategy::kRandomPolicy;
    if (value >= 0) spec.random_episodes = value;
    if (spec.random_episodes < 1) throw ConfigError("random-policy episode count must be >= 1");
  } else {
    throw ConfigError("bad constraint strategy '" + text + "' (want early:K or random:N)");
  }
  return spec;
}

std::string ConstraintSpec::to_string() const {
  return strategy == ConstraintStrategy::kEarlyFrames ? "early:" + std::to_string(early_frames)
                                                      : "random:" + std::to_string(random_episodes);
}

std::vector<ConstrainingFrame> build_early_frames(const std::vector<Episode>& demos, int k) {
  if (demos.empty()) throw ConfigError("early-frame constraining set needs demos");
  if (k < 1) throw ConfigError("early-frame count must be >= 1");
  std::vector<ConstrainingFrame> out;
  bool clamped = false;
  for (const auto& ep : demos) {
    const int n = static_cast<int>(ep.transitions.size());
    if (k > n) clamped = true;
    for (int i = 0; i < std::min(k, n); ++i) {
      out.push_back({ep.transitions[i].s, ep.id, ep.transitions[i].step});
    }
  }
  if (clamped) std::cerr << "warning: early-frame count " << k << " exceeds a demo length; clamped\n";
  return out;
}

ConstrainingSets::ConstrainingSets(ConstraintSpec spec, std::vector<ConstrainingFrame> expert)
    : spec_(spec), expert_(std::move(expert)), agent_(std::make_unique<RingBuffer<ConstrainingFrame>>(spec.agent_capacity)) {}

void ConstrainingSets::sample_expert(std::size_t n, Rng& rng, std::vector<Vec>& out) const {
  if (n > 0 && expert_.empty()) throw SamplingError("expert constraining set is empty");
  std::uniform_int_distribution<std::size_t> pick(0, expert_.size() - 1);
  for (std::size_t i = 0; i < n; ++i) out.push_back(expert_[pick(rng)].obs);
}

void ConstrainingSets::sample_agent(std::size_t n, Rng& rng, std::vector<Vec>& out) const {
  std::vector<ConstrainingFrame> frames;
  agent_->sample(n, rng, frames);
  for (auto& f : frames) out.push_back(std::move(f.obs));
}

void ingest_agent_early_frames(ConstrainingSets& sets, const std::vector<Vec>& episode_prefix,
                               long episode_id, int k) {
  const int n = std::min<int>(k, static_cast<int>(episode_prefix.size()));
  for (int i = 0; i < n; ++i) sets.agent().append({episode_prefix[i], episode_id, i});
}

std::vector<ConstrainingFrame> random_policy_frames(const EnvConfig& config, int n_episodes,
                                                    Rng& rng, long first_episode_id) {
  if (n_episodes < 1) throw ConfigError("random-policy constraining sets need n_episodes >= 1");
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<ConstrainingFrame> frames;
  for (int e = 0; e < n_episodes; ++e) {
    const long id = first_episode_id + e;
    EnvState state = reset(config, rng, id);
    Vec obs = observe(config, state);
    while (!state.done) {
      frames.push_back({obs, id, state.step});
      Vec a(kActionDim);
      for (int i = 0; i < kActionDim; ++i) a[i] = u(rng);
      obs = step(config, state, a).observation;
    }
  }
  return frames;
}

ConstrainingSets build_random_policy_sets(const EnvConfig& expert_config,
                                          const EnvConfig& agent_config, int n_episodes, Rng& rng,
                                          std::size_t agent_capacity) {
  if (n_episodes < 1) throw ConfigError("random-policy constraining sets need n_episodes >= 1");
  ConstraintSpec spec;
  spec.strategy = ConstraintStrategy::kRandomPolicy;
  spec.random_episodes = n_episodes;
  auto expert = random_policy_frames(expert_config, n_episodes, rng, 0);
  auto agent = random_policy_frames(agent_config, n_episodes, rng, n_episodes);
  spec.agent_capacity = agent_capacity > 0 ? agent_capacity : std::max<std::size_t>(1, agent.size());
  ConstrainingSets sets(spec, std::move(expert));
  for (auto& f : agent) sets.agent().append(std::move(f));
  return sets;
}

std::vector<Vec> observations(const std::vector<ConstrainingFrame>& frames) {
  std::vector<Vec> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(f.obs);
  return out;
}

namespace {

Vec restrict(const Vec& obs, const std::vector<FeatureGroup>& groups) {
  int n = 0;
  for (const auto& g : groups) n += g.size;
  Vec out(n);
  int k = 0;
  for (const auto& g : groups) {
    out.segment(k, g.size) = obs.segment(g.offset, g.size);
    k += g.size;
  }
  return out;
}

}  // namespace

double probe_accuracy(const std::vector<ConstrainingFrame>& expert,
                      const std::vector<ConstrainingFrame>& agent,
                      const std::vector<FeatureGroup>& groups, const ProbeOptions& options) {
  if (expert.size() < 2 || agent.size() < 2) throw ConfigError("probe needs >= 2 frames per side");
  Rng rng(options.seed);
  auto split = [&](const std::vector<ConstrainingFrame>& pool, std::vector<Vec>& train,
                   std::vector<Vec>& test) {
    if (options.split == ProbeSplit::kByFrame) {
      std::vector<std::size_t> idx(pool.size());
      std::iota(idx.begin(), idx.end(), 0);
      std::shuffle(idx.begin(), idx.end(), rng);
      for (std::size_t i = 0; i < idx.size(); ++i) {
        (i % 2 == 0 ? train : test).push_back(restrict(pool[idx[i]].obs, groups));
      }
      return;
    }
    std::vector<long> ids;
    for (const auto& f : pool) ids.push_back(f.episode_id);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    if (ids.size() < 2) throw ConfigError("episode-split probe needs >= 2 episodes per side");
    std::shuffle(ids.begin(), ids.end(), rng);
    std::set<long> train_ids(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(ids.size() / 2));
    for (const auto& f : pool) {
      (train_ids.count(f.episode_id) ? train : test).push_back(restrict(f.obs, groups));
    }
  };
  if (options.repeats < 1) throw ConfigError("probe repeats must be >= 1");
  double total = 0.0;
  for (int rep = 0; rep < options.repeats; ++rep) {
    std::vector<Vec> e_train, e_test, a_train, a_test;
    split(expert, e_train, e_test);
    split(agent, a_train, a_test);
    const int dim = static_cast<int>(e_train.front().size());
    if (dim == 0) throw ConfigError("probe restricted to empty feature groups");

    // Standardize with training statistics.
    Mat all_train(static_cast<Eigen::Index>(e_train.size() + a_train.size()), dim);
    for (std::size_t i = 0; i < e_train.size(); ++i) all_train.row(i) = e_train[i].transpose();
    for (std::size_t i = 0; i < a_train.size(); ++i) all_train.row(e_train.size() + i) = a_train[i].transpose();
    const RowVec mean = all_train.colwise().mean();
    RowVec sd = ((all_train.rowwise() - mean).array().square().colwise().mean()).sqrt();
    for (Eigen::Index j = 0; j < sd.size(); ++j) sd[j] = sd[j] > 1e-9 ? sd[j] : 1.0;
    auto norm = [&](const std::vector<Vec>& rows) {
      Mat m = stack_rows(rows);
      return Mat(((m.rowwise() - mean).array().rowwise() / sd.array()).matrix());
    };
    const Mat xe = norm(e_train), xa = norm(a_train);

    Discriminator probe = make_discriminator(dim, options.hidden, options.seed + 1 + rep);
    const std::size_t half = static_cast<std::size_t>(options.batch_size);
    std::uniform_int_distribution<Eigen::Index> pick_e(0, xe.rows() - 1), pick_a(0, xa.rows() - 1);
    const std::size_t steps_per_epoch =
        std::max<std::size_t>(1, (e_train.size() + a_train.size()) / (2 * half));
    Mat be(half, dim), ba(half, dim);
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
      for (std::size_t s = 0; s < steps_per_epoch; ++s) {
        for (std::size_t i = 0; i < half; ++i) {
          be.row(i) = xe.row(pick_e(rng));
          ba.row(i) = xa.row(pick_a(rng));
        }
        ascend(probe, gail_gradient(probe, be, ba).grad, options.lr);
      }
    }
    total += accuracy(probe, norm(e_test), norm(a_test));
  }
  return total / options.repeats;
}

}  // namespace imitlab
