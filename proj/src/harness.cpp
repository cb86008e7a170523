#include "imitlab/harness.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

#include "imitlab/kernels.hpp"

namespace imitlab {

using nlohmann::json;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ULL + stream * 0xBF58476D1CE4E5B9ULL + 0x94D049BB133111EBULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::string to_string(Method m) {
  switch (m) {
    case Method::kBc: return "bc";
    case Method::kD4pgfd: return "d4pgfd";
    case Method::kGail: return "gail";
    case Method::kGailAes: return "gail_aes";
    case Method::kTrail: return "trail";
  }
  return "trail";
}

Method method_from_string(const std::string& name) {
  if (name == "bc") return Method::kBc;
  if (name == "d4pgfd") return Method::kD4pgfd;
  if (name == "gail") return Method::kGail;
  if (name == "gail_aes") return Method::kGailAes;
  if (name == "trail") return Method::kTrail;
  throw ConfigError("unknown method '" + name + "'");
}

std::string to_string(TaskPreset t) {
  switch (t) {
    case TaskPreset::kLift: return "lift";
    case TaskPreset::kLiftDistracted: return "lift_distracted";
    case TaskPreset::kLiftDistractedSeeded: return "lift_distracted_seeded";
    case TaskPreset::kLiftAppearance: return "lift_appearance";
    case TaskPreset::kLiftAppearanceDistracted: return "lift_appearance_distracted";
  }
  return "lift";
}

TaskPreset task_from_string(const std::string& name) {
  for (auto t : {TaskPreset::kLift, TaskPreset::kLiftDistracted, TaskPreset::kLiftDistractedSeeded,
                 TaskPreset::kLiftAppearance, TaskPreset::kLiftAppearanceDistracted}) {
    if (to_string(t) == name) return t;
  }
  throw ConfigError("unknown task preset '" + name + "'");
}

// ---------------------------------------------------------------------------
// ExperimentConfig

RewardProvider ExperimentConfig::reward_provider() const {
  if (reward_override) return *reward_override;
  switch (method) {
    case Method::kD4pgfd: return RewardProvider::kEnvSparse;
    case Method::kTrail: return RewardProvider::kTrail;
    default: return RewardProvider::kGail;
  }
}

StopSpec ExperimentConfig::stop_spec() const {
  if (aes) return *aes;
  StopSpec s;
  s.variant = (method == Method::kGailAes || method == Method::kTrail) ? StopVariant::kAdaptive
                                                                       : StopVariant::kOff;
  return s;
}

bool ExperimentConfig::trains_discriminator() const {
  if (method == Method::kBc) return false;
  const auto p = reward_provider();
  return p == RewardProvider::kGail || p == RewardProvider::kTrail ||
         stop_spec().variant == StopVariant::kAdaptive;
}

void ExperimentConfig::validate() const {
  const bool imitation = method == Method::kGail || method == Method::kGailAes || method == Method::kTrail;
  if (reward_override) {
    if (method == Method::kBc) throw ConfigError("bc does not use a reward provider");
    if (method == Method::kD4pgfd && *reward_override != RewardProvider::kEnvSparse) {
      throw ConfigError("d4pgfd requires the environment reward");
    }
    if (imitation && *reward_override == RewardProvider::kEnvSparse) {
      throw ConfigError(to_string(method) + " must not read the environment reward");
    }
    if (method != Method::kTrail && *reward_override == RewardProvider::kTrail) {
      throw ConfigError("the trail reward provider requires method trail");
    }
  }
  if (actor_count < 1) throw ConfigError("actor_count must be >= 1");
  if (replay_capacity < 1) throw ConfigError("replay_capacity must be >= 1");
  if (demo_fraction < 0.0 || demo_fraction > 1.0) throw ConfigError("demo_fraction must be in [0, 1]");
  if (train_steps < 1) throw ConfigError("train_steps must be >= 1");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
  if (agent.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (disc_batch_size < 1) throw ConfigError("disc_batch_size must be >= 1");
  if (disc_updates_per_step < 0 || disc_warmup_steps < 0) throw ConfigError("negative discriminator step count");
  if (snapshot_period < 1) throw ConfigError("snapshot_period must be >= 1");
  if (min_replay < 1) throw ConfigError("min_replay must be >= 1");
  if (num_demos < 1) throw ConfigError("num_demos must be >= 1");
  if (num_holdout < 0) throw ConfigError("num_holdout must be >= 0");
  if (num_distractors < 0 || num_distractors > kMaxDistractors) {
    throw ConfigError("num_distractors must be in [0, " + std::to_string(kMaxDistractors) + "]");
  }
  if (augment.group_drop_prob < 0.0 || augment.group_drop_prob >= 1.0) {
    throw ConfigError("augment_group_drop must be in [0, 1)");
  }
  if (augment.noise_sigma < 0.0) throw ConfigError("augment_noise_sigma must be >= 0");
  if (!(disc_eps > 0.0 && disc_eps < 0.5)) throw ConfigError("disc_eps must be in (0, 0.5)");
  Support::make(agent.v_min, agent.v_max, agent.v_bins);
  if (agent.n_step < 1 || agent.target_update_period < 1) throw ConfigError("bad n_step or target period");
  if (!(agent.gamma >= 0.0 && agent.gamma <= 1.0)) throw ConfigError("gamma must be in [0, 1]");
  if (!(agent.policy_lr > 0.0 && agent.critic_lr > 0.0 && disc_lr > 0.0)) {
    throw ConfigError("learning rates must be positive");
  }
  if (agent.exploration_sigma < 0.0) throw ConfigError("exploration_sigma must be >= 0");
  if (bc.epochs < 0 || bc.batch_size < 1 || !(bc.lr > 0.0)) throw ConfigError("bad bc settings");
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["task"] = to_string(c.task);
  j["method"] = to_string(c.method);
  j["reward_provider"] = c.reward_override ? to_string(*c.reward_override) : "auto";
  j["constraint_strategy"] = c.constraint.to_string();
  j["constraint_agent_capacity"] = c.constraint.agent_capacity;
  j["aes"] = c.aes ? c.aes->to_string() : "auto";
  j["aes_patience"] = c.aes ? c.aes->patience : StopSpec{}.patience;
  j["v_min"] = c.agent.v_min;
  j["v_max"] = c.agent.v_max;
  j["v_bins"] = c.agent.v_bins;
  j["n_step"] = c.agent.n_step;
  j["gamma"] = c.agent.gamma;
  j["policy_lr"] = c.agent.policy_lr;
  j["critic_lr"] = c.agent.critic_lr;
  j["batch_size"] = c.agent.batch_size;
  j["target_update_period"] = c.agent.target_update_period;
  j["policy_hidden"] = c.agent.policy_hidden;
  j["critic_hidden"] = c.agent.critic_hidden;
  j["exploration_sigma"] = c.agent.exploration_sigma;
  j["actor_count"] = c.actor_count;
  j["replay_capacity"] = c.replay_capacity;
  j["demo_fraction"] = c.demo_fraction;
  j["min_replay"] = c.min_replay;
  j["snapshot_period"] = c.snapshot_period;
  j["train_steps"] = c.train_steps;
  j["eval_every"] = c.eval_every;
  j["eval_episodes"] = c.eval_episodes;
  j["disc_warmup_steps"] = c.disc_warmup_steps;
  j["disc_updates_per_step"] = c.disc_updates_per_step;
  j["disc_batch_size"] = c.disc_batch_size;
  j["disc_lr"] = c.disc_lr;
  j["disc_hidden"] = c.disc_hidden;
  j["disc_eps"] = c.disc_eps;
  j["augment_noise_sigma"] = c.augment.noise_sigma;
  j["augment_group_drop"] = c.augment.group_drop_prob;
  j["num_demos"] = c.num_demos;
  j["num_holdout"] = c.num_holdout;
  j["expert_noise"] = c.expert_noise;
  j["demo_seed"] = c.demo_seed;
  j["demo_file"] = c.demo_file;
  j["num_distractors"] = c.num_distractors;
  j["appearance_shift"] = c.appearance_shift;
  j["bc_epochs"] = c.bc.epochs;
  j["bc_lr"] = c.bc.lr;
  j["bc_batch_size"] = c.bc.batch_size;
  j["seed"] = c.seed;
  j["single_thread"] = c.single_thread;
  j["verbosity"] = c.verbosity;
  return j;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  const json j = to_json(ExperimentConfig{});
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  return keys;
}

ExperimentConfig config_from_json(const json& in, const ExperimentConfig& base) {
  if (!in.is_object()) throw ConfigError("config must be a JSON object");
  json j = to_json(base);
  for (const auto& [k, v] : in.items()) {
    if (!j.contains(k)) throw ConfigError("unknown config key '" + k + "'");
    j[k] = v;
  }
  ExperimentConfig c;
  try {
    c.task = task_from_string(j.at("task").get<std::string>());
    c.method = method_from_string(j.at("method").get<std::string>());
    const auto rp = j.at("reward_provider").get<std::string>();
    if (rp != "auto") c.reward_override = reward_provider_from_string(rp);
    c.constraint = ConstraintSpec::parse(j.at("constraint_strategy").get<std::string>());
    c.constraint.agent_capacity = j.at("constraint_agent_capacity").get<std::size_t>();
    const auto aes = j.at("aes").get<std::string>();
    if (aes != "auto") {
      c.aes = StopSpec::parse(aes);
      c.aes->patience = j.at("aes_patience").get<int>();
    }
    c.agent.v_min = j.at("v_min").get<double>();
    c.agent.v_max = j.at("v_max").get<double>();
    c.agent.v_bins = j.at("v_bins").get<int>();
    c.agent.n_step = j.at("n_step").get<int>();
    c.agent.gamma = j.at("gamma").get<double>();
    c.agent.policy_lr = j.at("policy_lr").get<double>();
    c.agent.critic_lr = j.at("critic_lr").get<double>();
    c.agent.batch_size = j.at("batch_size").get<int>();
    c.agent.target_update_period = j.at("target_update_period").get<int>();
    c.agent.policy_hidden = j.at("policy_hidden").get<std::vector<int>>();
    c.agent.critic_hidden = j.at("critic_hidden").get<std::vector<int>>();
    c.agent.exploration_sigma = j.at("exploration_sigma").get<double>();
    c.actor_count = j.at("actor_count").get<int>();
    c.replay_capacity = j.at("replay_capacity").get<std::size_t>();
    c.demo_fraction = j.at("demo_fraction").get<double>();
    c.min_replay = j.at("min_replay").get<int>();
    c.snapshot_period = j.at("snapshot_period").get<int>();
    c.train_steps = j.at("train_steps").get<long>();
    c.eval_every = j.at("eval_every").get<long>();
    c.eval_episodes = j.at("eval_episodes").get<int>();
    c.disc_warmup_steps = j.at("disc_warmup_steps").get<int>();
    c.disc_updates_per_step = j.at("disc_updates_per_step").get<int>();
    c.disc_batch_size = j.at("disc_batch_size").get<int>();
    c.disc_lr = j.at("disc_lr").get<double>();
    c.disc_hidden = j.at("disc_hidden").get<std::vector<int>>();
    c.disc_eps = j.at("disc_eps").get<double>();
    c.augment.noise_sigma = j.at("augment_noise_sigma").get<double>();
    c.augment.group_drop_prob = j.at("augment_group_drop").get<double>();
    c.num_demos = j.at("num_demos").get<int>();
    c.num_holdout = j.at("num_holdout").get<int>();
    c.expert_noise = j.at("expert_noise").get<double>();
    c.demo_seed = j.at("demo_seed").get<std::uint64_t>();
    c.demo_file = j.at("demo_file").get<std::string>();
    c.num_distractors = j.at("num_distractors").get<int>();
    c.appearance_shift = j.at("appearance_shift").get<double>();
    c.bc.epochs = j.at("bc_epochs").get<int>();
    c.bc.lr = j.at("bc_lr").get<double>();
    c.bc.batch_size = j.at("bc_batch_size").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.single_thread = j.at("single_thread").get<bool>();
    c.verbosity = j.at("verbosity").get<int>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

void apply_override(ExperimentConfig& config, const std::string& key, const std::string& value) {
  json j = to_json(config);
  if (!j.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  json& slot = j[key];
  try {
    if (slot.is_boolean()) {
      if (value == "true" || value == "1") {
        slot = true;
      } else if (value == "false" || value == "0") {
        slot = false;
      } else {
        throw ConfigError("expected true/false for " + key);
      }
    } else if (slot.is_number_unsigned()) {
      if (!value.empty() && value[0] == '-') throw ConfigError(key + " must be non-negative");
      slot = std::stoull(value);
    } else if (slot.is_number_integer()) {
      slot = std::stoll(value);
    } else if (slot.is_number_float()) {
      slot = std::stod(value);
    } else if (slot.is_array()) {
      std::vector<int> xs;
      std::string cur;
      for (char ch : value + ",") {
        if (ch == ',') {
          if (!cur.empty()) xs.push_back(std::stoi(cur));
          cur.clear();
        } else if (ch != '[' && ch != ']' && ch != ' ') {
          cur.push_back(ch);
        }
      }
      slot = xs;
    } else {
      slot = value;
    }
  } catch (const std::logic_error&) {
    throw ConfigError("bad value '" + value + "' for " + key);
  }
  config = config_from_json(j);
}

// ---------------------------------------------------------------------------
// Tasks and demos

TaskEnvs make_task_envs(const ExperimentConfig& c, std::shared_ptr<const std::vector<Layout>> pool) {
  EnvConfig base;
  const bool distracted = c.task == TaskPreset::kLiftDistracted ||
                          c.task == TaskPreset::kLiftDistractedSeeded ||
                          c.task == TaskPreset::kLiftAppearanceDistracted;
  base.num_distractors = distracted ? c.num_distractors : 0;
  TaskEnvs envs{base, base, base};
  if (c.task == TaskPreset::kLiftAppearance || c.task == TaskPreset::kLiftAppearanceDistracted) {
    envs.expert = inject_appearance_shift(base, std::vector<double>(kAppearanceDim, c.appearance_shift));
  }
  if (c.task == TaskPreset::kLiftDistractedSeeded) {
    envs.agent.init_mode = InitMode::kSeededFromDemos;
    envs.agent.layout_pool = std::move(pool);
  }
  return envs;
}

DemoSets load_or_collect_demos(const ExperimentConfig& c, const EnvConfig& expert_env) {
  DemoSets out;
  if (!c.demo_file.empty()) {
    if (!std::filesystem::exists(c.demo_file)) throw ConfigError("demo file not found: " + c.demo_file);
    out.train = read_demos(c.demo_file);
    if (out.train.empty()) throw ConfigError("demo file holds no episodes: " + c.demo_file);
    const int want = observation_layout(expert_env).total;
    for (const auto& ep : out.train) {
      if (ep.transitions.empty() || ep.transitions.front().s.size() != want) {
        throw ConfigError("demo file observations do not match task " + to_string(c.task));
      }
    }
  } else {
    Rng rng(mix_seed(c.demo_seed, 11));
    out.train = collect_demos(expert_env, c.num_demos, c.expert_noise, rng, 0);
  }
  if (c.num_holdout > 0) {
    Rng rng(mix_seed(c.demo_seed, 12));
    out.holdout = collect_demos(expert_env, c.num_holdout, c.expert_noise, rng, kHoldoutIdBase);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation and probes

namespace {

EvalResult summarize(std::vector<double> returns) {
  EvalResult r;
  r.returns = std::move(returns);
  const double n = static_cast<double>(r.returns.size());
  r.mean = std::accumulate(r.returns.begin(), r.returns.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : r.returns) ss += (x - r.mean) * (x - r.mean);
  r.stddev = std::sqrt(ss / n);
  return r;
}

EnvConfig eval_config(const EnvConfig& config) {
  EnvConfig c = config;
  c.init_mode = InitMode::kUniform;
  c.layout_pool.reset();
  return c;
}

}  // namespace

EvalResult evaluate(const Network& policy, const EnvConfig& config, int n_episodes, Rng& rng) {
  if (n_episodes < 1) throw ConfigError("evaluate needs n_episodes >= 1");
  const EnvConfig cfg = eval_config(config);
  std::vector<double> returns;
  for (int e = 0; e < n_episodes; ++e) {
    EnvState state = reset(cfg, rng, e);
    Vec obs = observe(cfg, state);
    double total = 0.0;
    while (!state.done) {
      StepResult res = step(cfg, state, forward_one(policy, obs));
      total += res.reward;
      obs = std::move(res.observation);
    }
    returns.push_back(total);
  }
  return summarize(std::move(returns));
}

EvalResult evaluate_expert(const EnvConfig& config, int n_episodes, Rng& rng, double noise) {
  if (n_episodes < 1) throw ConfigError("evaluate needs n_episodes >= 1");
  const EnvConfig cfg = eval_config(config);
  std::vector<double> returns;
  for (int e = 0; e < n_episodes; ++e) {
    EnvState state = reset(cfg, rng, e);
    double total = 0.0;
    while (!state.done) total += step(cfg, state, scripted_expert(cfg, state, rng, noise)).reward;
    returns.push_back(total);
  }
  return summarize(std::move(returns));
}

std::vector<Vec> episode_frames(const Episode& episode) {
  std::vector<Vec> frames;
  frames.reserve(episode.transitions.size() + 1);
  for (const auto& t : episode.transitions) frames.push_back(t.s);
  if (!episode.transitions.empty()) frames.push_back(episode.transitions.back().s_next);
  return frames;
}

ProbeResult generalization_probe(const Discriminator& disc, const std::vector<Episode>& train,
                                 const std::vector<Episode>& holdout) {
  std::set<long> ids;
  for (const auto& ep : train) ids.insert(ep.id);
  for (const auto& ep : holdout) {
    if (ids.count(ep.id)) throw UsageError("holdout demo " + std::to_string(ep.id) + " overlaps training demos");
  }
  auto mean_score = [&](const std::vector<Episode>& eps) {
    std::vector<Vec> frames;
    for (const auto& ep : eps) {
      auto f = episode_frames(ep);
      frames.insert(frames.end(), std::make_move_iterator(f.begin()), std::make_move_iterator(f.end()));
    }
    if (frames.empty()) return 0.0;
    return scores(disc, stack_rows(frames)).mean();
  };
  return {mean_score(train), mean_score(holdout)};
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct Snapshot {
  Network policy;
  std::optional<Network> disc;
};

struct ActorSlot {
  EnvState state;
  Vec obs;
  Rng rng;
  NStepBuilder builder{1};
  StoppingState stop;
  long next_episode = 0;
  int episode_len = 0;
};

class Trainer {
 public:
  Trainer(const ExperimentConfig& config, const TrainOptions& options)
      : cfg_(config), opts_(options), replay_(config.replay_capacity) {
    cfg_.validate();
    provider_ = cfg_.reward_provider();
    stop_spec_ = cfg_.stop_spec();

    TaskEnvs probe_envs = make_task_envs(cfg_);
    demos_ = load_or_collect_demos(cfg_, probe_envs.expert);
    auto pool = std::make_shared<const std::vector<Layout>>(initial_layouts(demos_.train));
    envs_ = make_task_envs(cfg_, pool);
    envs_.agent.validate();
    layout_ = observation_layout(envs_.agent);

    nets_ = make_agent_nets(layout_.total, cfg_.agent, mix_seed(cfg_.seed, 3));
    if (cfg_.trains_discriminator()) {
      disc_ = make_discriminator(layout_.total, cfg_.disc_hidden, mix_seed(cfg_.seed, 4), cfg_.disc_eps);
    }
    if (cfg_.method != Method::kBc && cfg_.demo_fraction > 0.0) {
      demo_buffer_ = DemoBuffer(demos_.train, cfg_.agent.n_step);
    }
    for (const auto& ep : demos_.train) {
      for (const auto& t : ep.transitions) demo_frames_.push_back(t.s_next);
    }
    if (provider_ == RewardProvider::kTrail) build_constraining_sets();
    learner_rng_ = Rng(mix_seed(cfg_.seed, 1));
  }

  TrainResult run() {
    TrainResult result;
    try {
      if (cfg_.method == Method::kBc) {
        run_bc();
      } else if (cfg_.single_thread) {
        run_single_thread();
      } else {
        run_concurrent();
      }
    } catch (const NumericalError& e) {
      dump_abort(e);
      throw;
    }
    result.metrics = std::move(rows_);
    result.learner_reads = reads_;
    result.env_steps = env_steps_;
    result.learner_steps = learner_steps_;
    if (disc_) result.probe = generalization_probe(*disc_, demos_.train, demos_.holdout);
    result.final_return = result.metrics.empty() ? 0.0 : result.metrics.back().eval_return_mean;
    if (sets_ && disc_) result.final_constraint_accuracy = constraint_accuracy();
    write_outputs(result);
    result.nets = std::move(nets_);
    result.disc = std::move(disc_);
    return result;
  }

 private:
  void build_constraining_sets() {
    if (cfg_.constraint.strategy == ConstraintStrategy::kEarlyFrames) {
      sets_.emplace(cfg_.constraint, build_early_frames(demos_.train, cfg_.constraint.early_frames));
    } else {
      Rng rng(mix_seed(cfg_.seed, 5));
      auto built = build_random_policy_sets(envs_.expert, envs_.agent, cfg_.constraint.random_episodes,
                                            rng, cfg_.constraint.agent_capacity);
      sets_.emplace(std::move(built));
    }
  }

  bool ingests_agent_frames() const {
    return sets_ && cfg_.constraint.strategy == ConstraintStrategy::kEarlyFrames;
  }

  // Actors -----------------------------------------------------------------

  void init_actors() {
    actors_.clear();
    for (int i = 0; i < cfg_.actor_count; ++i) {
      ActorSlot a;
      a.rng = Rng(mix_seed(cfg_.seed, 100 + i));
      a.builder = NStepBuilder(cfg_.agent.n_step);
      a.stop = StoppingState(stop_spec_);
      a.next_episode = 10000000L + 1000000L * i;
      start_episode(a);
      actors_.push_back(std::move(a));
    }
  }

  void start_episode(ActorSlot& a) {
    a.state = reset(envs_.agent, a.rng, a.next_episode++);
    a.obs = observe(envs_.agent, a.state);
    a.stop.reset();
    a.builder.clear();
    a.episode_len = 0;
  }

  void actor_step(ActorSlot& a, const Snapshot& snap) {
    if (ingests_agent_frames() && a.state.step < cfg_.constraint.early_frames) {
      sets_->agent().append({a.obs, a.state.episode_id, a.state.step});
    }
    Transition t;
    t.s = a.obs;
    t.a = act(snap.policy, a.obs, a.rng, cfg_.agent.exploration_sigma);
    t.step = a.state.step;
    t.episode_id = a.state.episode_id;
    t.source = Source::kAgent;
    StepResult res = step(envs_.agent, a.state, t.a);
    t.r = res.reward;
    t.s_next = res.observation;
    t.done = res.done;
    t.seal();
    ++a.episode_len;
    ++env_steps_;

    bool stopped = false;
    if (!res.done && stop_spec_.variant != StopVariant::kOff) {
      double score = 0.0;
      if (stop_spec_.variant == StopVariant::kOracle) {
        score = res.reward;
      } else if (snap.disc) {
        score = forward_one(*snap.disc, res.observation)[0];
      }
      stopped = a.stop.should_stop(score, a.state.step);
    }
    const bool over = res.done || stopped;
    for (auto& item : a.builder.push(std::move(t), over)) replay_.append(std::move(item));
    if (over) {
      ++episodes_;
      episode_len_sum_ += a.episode_len;
      if (stopped) ++aes_stops_;
      start_episode(a);
    } else {
      a.obs = std::move(res.observation);
    }
  }

  std::shared_ptr<const Snapshot> make_snapshot() const {
    auto s = std::make_shared<Snapshot>();
    s->policy = nets_.policy;
    if (disc_) s->disc = disc_->net;
    return s;
  }

  // Learner ----------------------------------------------------------------

  void disc_update() {
    const std::size_t n = static_cast<std::size_t>(cfg_.disc_batch_size);
    std::uniform_int_distribution<std::size_t> pick(0, demo_frames_.size() - 1);
    std::vector<Vec> se, sa;
    se.reserve(n);
    for (std::size_t i = 0; i < n; ++i) se.push_back(demo_frames_[pick(learner_rng_)]);
    std::vector<ReplayItem> items;
    replay_.sample(n, learner_rng_, items);
    for (const auto& it : items) sa.push_back(it.first().s_next);
    const Mat s_expert = augment_rows(stack_rows(se), layout_, learner_rng_, cfg_.augment);
    const Mat s_agent = augment_rows(stack_rows(sa), layout_, learner_rng_, cfg_.augment);
    ObjectiveGrad g;
    if (provider_ == RewardProvider::kTrail) {
      std::vector<Vec> ce, ca;
      sets_->sample_expert(n, learner_rng_, ce);
      sets_->sample_agent(n, learner_rng_, ca);
      DiscBatch batch{s_expert, s_agent, augment_rows(stack_rows(ce), layout_, learner_rng_, cfg_.augment),
                      augment_rows(stack_rows(ca), layout_, learner_rng_, cfg_.augment)};
      g = trail_gradient(*disc_, batch);
      last_trail_ = g.trail;
    } else {
      g = gail_gradient(*disc_, s_expert, s_agent);
    }
    if (!std::isfinite(g.value) || !g.grad.all_finite()) {
      throw NumericalError("non-finite discriminator objective", -1);
    }
    ascend(*disc_, g.grad, cfg_.disc_lr);
  }

  std::vector<std::vector<double>> relabel(const std::vector<ReplayItem>& items) {
    std::vector<std::vector<double>> rewards(items.size());
    switch (provider_) {
      case RewardProvider::kEnvSparse:
        for (std::size_t b = 0; b < items.size(); ++b) {
          for (const auto& t : items[b].chain) rewards[b].push_back(t.r);
          reads_.env += static_cast<long>(items[b].chain.size());
        }
        break;
      case RewardProvider::kOracle:
        for (std::size_t b = 0; b < items.size(); ++b) {
          for (const auto& t : items[b].chain) rewards[b].push_back(oracle_reward(t.source));
          reads_.oracle += static_cast<long>(items[b].chain.size());
        }
        break;
      case RewardProvider::kGail:
      case RewardProvider::kTrail: {
        std::vector<Vec> frames;
        for (const auto& it : items) {
          for (const auto& t : it.chain) frames.push_back(t.s_next);
        }
        const Vec r = kernels::reward_rows(scores(*disc_, stack_rows(frames)), disc_->eps);
        Eigen::Index k = 0;
        for (std::size_t b = 0; b < items.size(); ++b) {
          for (std::size_t i = 0; i < items[b].chain.size(); ++i) rewards[b].push_back(r[k++]);
        }
        reads_.discriminator += static_cast<long>(frames.size());
        break;
      }
    }
    return rewards;
  }

  void learner_step(long step) {
    if (disc_) {
      for (int u = 0; u < cfg_.disc_updates_per_step; ++u) disc_update();
    }
    const auto items = sample_mixed(replay_, demo_buffer_, static_cast<std::size_t>(cfg_.agent.batch_size),
                                    demo_buffer_.empty() ? 0.0 : cfg_.demo_fraction, learner_rng_);
    const auto rewards = relabel(items);
    const Mat target = n_step_target(items, rewards, nets_.n_step, nets_.gamma, nets_.target_policy,
                                     nets_.target_critic, nets_.support);
    Mat obs(items.size(), layout_.total), actions(items.size(), kActionDim);
    for (std::size_t b = 0; b < items.size(); ++b) {
      obs.row(b) = items[b].first().s.transpose();
      actions.row(b) = items[b].first().a.transpose();
    }
    critic_update(nets_, obs, actions, target, cfg_.agent.critic_lr, stats_);
    policy_update(nets_, obs, cfg_.agent.policy_lr, stats_);
    nets_.learner_steps = static_cast<std::uint64_t>(step);
    target_sync(nets_, nets_.learner_steps);
    learner_steps_ = step;
  }

  void warmup() {
    if (!disc_) return;
    for (int i = 0; i < cfg_.disc_warmup_steps; ++i) disc_update();
  }

  double constraint_accuracy() const {
    const auto agent = sets_->agent().snapshot();
    if (agent.empty()) return 0.0;
    return accuracy(*disc_, stack_rows(observations(sets_->expert())), stack_rows(observations(agent)));
  }

  MetricsRow make_row(long step, std::optional<double> wall) {
    MetricsRow row;
    row.learner_step = step;
    row.wall_clock_s = wall;
    Rng eval_rng(mix_seed(cfg_.seed, 2));
    const EvalResult ev = evaluate(nets_.policy, envs_.eval, cfg_.eval_episodes, eval_rng);
    row.eval_return_mean = ev.mean;
    row.eval_return_std = ev.stddev;
    if (disc_) {
      const ProbeResult p = generalization_probe(*disc_, demos_.train, demos_.holdout);
      row.disc_train_mean = p.train_mean;
      if (!demos_.holdout.empty()) row.disc_holdout_mean = p.holdout_mean;
    }
    if (sets_ && disc_) row.constraint_accuracy = constraint_accuracy();
    const long eps = episodes_;
    row.actor_episodes = eps;
    const long new_eps = eps - last_row_episodes_;
    const long len_sum = episode_len_sum_;
    const long new_len = len_sum - last_row_len_sum_;
    row.actor_episode_len_mean = new_eps > 0 ? static_cast<double>(new_len) / new_eps : 0.0;
    last_row_episodes_ = eps;
    last_row_len_sum_ = len_sum;
    row.aes_stops = aes_stops_;
    row.env_steps = env_steps_;
    if (cfg_.verbosity > 0) {
      std::cerr << to_string(cfg_.method) << " step " << step << " return " << ev.mean;
      if (row.disc_train_mean) std::cerr << " D(train) " << *row.disc_train_mean;
      if (row.disc_holdout_mean) std::cerr << " D(holdout) " << *row.disc_holdout_mean;
      if (row.constraint_accuracy) std::cerr << " acc(I) " << *row.constraint_accuracy;
      std::cerr << " ep_len " << row.actor_episode_len_mean << " critic " << stats_.critic_loss
                << " Q " << stats_.policy_objective << '\n';
    }
    return row;
  }

  bool cancelled() const { return opts_.cancel && opts_.cancel->load(); }

  bool is_eval_step(long s) const { return s % cfg_.eval_every == 0 || s == cfg_.train_steps; }

  void run_single_thread() {
    init_actors();
    auto snap = make_snapshot();
    while (static_cast<int>(replay_.size()) < cfg_.min_replay) {
      for (auto& a : actors_) actor_step(a, *snap);
    }
    warmup();
    snap = make_snapshot();
    for (long s = 1; s <= cfg_.train_steps && !cancelled(); ++s) {
      for (auto& a : actors_) actor_step(a, *snap);
      learner_step(s);
      if (s % cfg_.snapshot_period == 0) snap = make_snapshot();
      if (is_eval_step(s)) rows_.push_back(make_row(s, std::nullopt));
    }
  }

  void run_concurrent() {
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] {
      return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    init_actors();
    std::mutex snap_mu;
    std::shared_ptr<const Snapshot> shared = make_snapshot();
    std::atomic<bool> stop{false};
    std::mutex err_mu;
    std::exception_ptr actor_error;

    // Each actor owns its slot; replay, I_A and the counters are thread-safe.
    auto actor_loop = [&](int index) {
      try {
        ActorSlot& slot = actors_[index];
        while (!stop.load()) {
          std::shared_ptr<const Snapshot> snap;
          {
            std::lock_guard lock(snap_mu);
            snap = shared;
          }
          for (int k = 0; k < cfg_.snapshot_period && !stop.load(); ++k) actor_step(slot, *snap);
          std::this_thread::yield();
        }
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!actor_error) actor_error = std::current_exception();
        stop = true;
      }
    };
    std::vector<std::thread> threads;
    for (int i = 0; i < cfg_.actor_count; ++i) threads.emplace_back(actor_loop, i);
    auto join_all = [&] {
      stop = true;
      for (auto& t : threads) t.join();
    };
    auto check_actors = [&] {
      std::lock_guard lock(err_mu);
      if (actor_error) std::rethrow_exception(actor_error);
    };
    try {
      while (static_cast<int>(replay_.size()) < cfg_.min_replay && !stop.load()) {
        std::this_thread::sleep_for(std::chrono::milliseconds(1));
      }
      check_actors();
      warmup();
      for (long s = 1; s <= cfg_.train_steps && !cancelled(); ++s) {
        check_actors();
        learner_step(s);
        if (s % 10 == 0) {
          auto fresh = make_snapshot();
          std::lock_guard lock(snap_mu);
          shared = std::move(fresh);
        }
        if (is_eval_step(s)) rows_.push_back(make_row(s, elapsed()));
      }
    } catch (...) {
      join_all();
      throw;
    }
    join_all();
    check_actors();
  }

  void run_bc() {
    std::vector<const Transition*> pairs;
    for (const auto& ep : demos_.train) {
      for (const auto& t : ep.transitions) {
        if (t.a.size() != kActionDim) throw ConfigError("bc needs demos with actions");
        pairs.push_back(&t);
      }
    }
    AdamState adam = AdamState::for_network(nets_.policy);
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t bs = static_cast<std::size_t>(cfg_.bc.batch_size);
    const long per_epoch = static_cast<long>((pairs.size() + bs - 1) / bs);
    const long total = std::max<long>(1, per_epoch * cfg_.bc.epochs);
    long s = 0;
    for (int epoch = 0; epoch < std::max(1, cfg_.bc.epochs) && !cancelled(); ++epoch) {
      std::shuffle(order.begin(), order.end(), learner_rng_);
      for (std::size_t start = 0; start < order.size(); start += bs) {
        const std::size_t end = std::min(order.size(), start + bs);
        Mat obs(end - start, layout_.total), act_m(end - start, kActionDim);
        for (std::size_t i = start; i < end; ++i) {
          obs.row(i - start) = pairs[order[i]]->s.transpose();
          act_m.row(i - start) = pairs[order[i]]->a.transpose();
        }
        if (cfg_.bc.epochs > 0) {
          Gradients g;
          bc_loss(nets_.policy, obs, act_m, &g);
          adam_step(nets_.policy, g, adam, cfg_.bc.lr);
        }
        ++s;
        learner_steps_ = s;
        if (s % cfg_.eval_every == 0 || s == total) rows_.push_back(make_row(s, std::nullopt));
      }
    }
  }

  void dump_abort(const NumericalError& e) const {
    if (opts_.out_dir.empty()) return;
    std::filesystem::create_directories(opts_.out_dir);
    json j;
    j["error"] = e.what();
    j["batch_index"] = e.batch_index;
    j["learner_step"] = learner_steps_;
    j["critic_loss"] = stats_.critic_loss;
    j["policy_objective"] = stats_.policy_objective;
    j["policy_finite"] = nets_.policy.all_finite();
    j["critic_finite"] = nets_.critic.all_finite();
    if (disc_) j["discriminator_finite"] = disc_->net.all_finite();
    j["config"] = to_json(cfg_);
    std::ofstream(opts_.out_dir / "numerical_abort.json") << j.dump(2) << '\n';
  }

  void write_outputs(const TrainResult& result) const {
    if (opts_.out_dir.empty()) return;
    std::filesystem::create_directories(opts_.out_dir);
    write_metrics_csv(result.metrics, opts_.out_dir / "metrics.csv");
    save_checkpoint(nets_.policy, opts_.out_dir / "policy.json");
    if (cfg_.method != Method::kBc) save_checkpoint(nets_.critic, opts_.out_dir / "critic.json");
    if (disc_) save_checkpoint(disc_->net, opts_.out_dir / "discriminator.json");
    std::ofstream(opts_.out_dir / "config.json") << to_json(cfg_).dump(2) << '\n';
  }

  ExperimentConfig cfg_;
  TrainOptions opts_;
  RewardProvider provider_ = RewardProvider::kTrail;
  StopSpec stop_spec_;
  TaskEnvs envs_;
  ObservationLayout layout_;
  DemoSets demos_;
  std::vector<Vec> demo_frames_;
  AgentNets nets_;
  std::optional<Discriminator> disc_;
  ReplayBuffer replay_;
  DemoBuffer demo_buffer_;
  std::optional<ConstrainingSets> sets_;
  std::vector<ActorSlot> actors_;
  Rng learner_rng_;
  LearnerStats stats_;
  TrailValue last_trail_;
  RewardAccess reads_;
  std::vector<MetricsRow> rows_;
  // Written by actors, read by the learner.
  std::atomic<long> env_steps_{0};
  std::atomic<long> episodes_{0};
  std::atomic<long> episode_len_sum_{0};
  std::atomic<long> aes_stops_{0};
  long learner_steps_ = 0;
  long last_row_episodes_ = 0;
  long last_row_len_sum_ = 0;
};

}  // namespace

TrainResult train(const ExperimentConfig& config, const TrainOptions& options) {
  Trainer trainer(config, options);
  return trainer.run();
}

// ---------------------------------------------------------------------------
// Ablation

std::vector<AblationCell> named_grid(const std::string& name) {
  std::vector<AblationCell> cells;
  if (name == "early_frames") {
    for (int k : {1, 5, 10, 20, 50}) {
      cells.push_back({"k" + std::to_string(k),
                       json{{"method", "trail"}, {"constraint_strategy", "early:" + std::to_string(k)}}});
    }
  } else if (name == "augmentation") {
    for (const char* m : {"gail_aes", "trail"}) {
      cells.push_back({std::string(m) + "_aug", json{{"method", m}, {"task", "lift_distracted"},
                                                      {"augment_noise_sigma", 0.05}, {"augment_group_drop", 0.1}}});
      cells.push_back({std::string(m) + "_noaug",
                       json{{"method", m}, {"task", "lift_distracted"}, {"augment_noise_sigma", 0.0},
                            {"augment_group_drop", 0.0}}});
    }
  } else if (name == "aes") {
    for (const char* task : {"lift", "lift_distracted", "lift_appearance"}) {
      for (const char* aes : {"fixed:50", "adaptive", "oracle"}) {
        std::string label = std::string(task) + "_" + aes;
        for (auto& ch : label) {
          if (ch == ':') ch = '_';
        }
        cells.push_back({label, json{{"method", "gail_aes"}, {"task", task}, {"aes", aes}}});
      }
    }
  } else if (name == "oracle") {
    for (const char* task : {"lift", "lift_distracted"}) {
      cells.push_back({std::string(task) + "_oracle",
                       json{{"method", "gail"}, {"task", task}, {"reward_provider", "oracle"}, {"aes", "off"}}});
      cells.push_back({std::string(task) + "_trail", json{{"method", "trail"}, {"task", task}}});
    }
  } else {
    throw ConfigError("unknown grid '" + name + "' (early_frames, augmentation, aes, oracle)");
  }
  return cells;
}

std::vector<AblationCell> grid_from_json(const json& j) {
  const json& list = j.is_object() && j.contains("cells") ? j.at("cells") : j;
  if (!list.is_array()) throw ConfigError("grid must be a list of cells");
  std::vector<AblationCell> cells;
  for (const auto& c : list) {
    if (!c.is_object() || !c.contains("name") || !c.contains("overrides")) {
      throw ConfigError("grid cell needs 'name' and 'overrides'");
    }
    cells.push_back({c.at("name").get<std::string>(), c.at("overrides")});
  }
  return cells;
}

std::vector<AblationOutcome> ablate(const ExperimentConfig& base, const std::vector<AblationCell>& cells,
                                    const std::vector<std::uint64_t>& seeds,
                                    const std::filesystem::path& out_dir) {
  if (cells.empty()) throw ConfigError("ablation grid is empty");
  if (seeds.empty()) throw ConfigError("ablation needs at least one seed");
  const long n = static_cast<long>(cells.size() * seeds.size());
  std::vector<AblationOutcome> outcomes(n);
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    const auto& cell = cells[i / seeds.size()];
    const std::uint64_t seed = seeds[i % seeds.size()];
    AblationOutcome& out = outcomes[i];
    out.cell = cell.name;
    out.seed = seed;
    try {
      ExperimentConfig c = config_from_json(cell.overrides, base);
      c.seed = seed;
      c.single_thread = true;
      TrainOptions opts;
      if (!out_dir.empty()) opts.out_dir = out_dir / cell.name / ("seed" + std::to_string(seed));
      TrainResult r = train(c, opts);
      out.ok = true;
      out.final_return = r.final_return;
      for (const auto& row : r.metrics) out.best_return = std::max(out.best_return, row.eval_return_mean);
      out.disc_gap = r.disc ? r.probe.gap() : 0.0;
    } catch (const std::exception& e) {
      out.ok = false;
      out.error = e.what();
    }
  }
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream s(out_dir / "summary.csv");
    s << "cell,seed,status,final_return,best_return,disc_gap,error\n";
    for (const auto& o : outcomes) {
      std::string err = o.error;
      for (auto& ch : err) {
        if (ch == ',' || ch == '\n') ch = ' ';
      }
      char buf[128];
      std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f", o.final_return, o.best_return, o.disc_gap);
      s << o.cell << ',' << o.seed << ',' << (o.ok ? "ok" : "error") << ',' << buf << ',' << err << '\n';
    }
  }
  return outcomes;
}

}  // namespace imitlab
