#include "imitlab/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace imitlab {

namespace {

constexpr Vec2 kGripperStart{0.0, 0.0};
constexpr double kAppearanceBase = 0.8;
constexpr double kTargetRange = 0.8;
constexpr double kDistractorRange = 0.9;
constexpr double kMinTargetDistance = 0.3;

class Fnv1a {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 1099511628211ULL;
    }
  }
  void f64(double v) { bytes(&v, sizeof v); }
  void i64(std::int64_t v) { bytes(&v, sizeof v); }
  void vec(const Vec& v) {
    i64(v.size());
    bytes(v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
  }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 14695981039346656037ULL;
};

double clamp1(double v) { return std::clamp(v, -1.0, 1.0); }

}  // namespace

void EnvConfig::validate() const {
  if (max_steps < 1) throw ConfigError("episode cap must be >= 1");
  if (num_distractors < 0 || num_distractors > kMaxDistractors) {
    throw ConfigError("distractor count must be in [0, 4]");
  }
  if (grasp_radius <= 0.0) throw ConfigError("grasp radius must be positive");
  if (arena_half_width <= 0.0 || max_speed <= 0.0) throw ConfigError("bad arena/speed");
  if (static_cast<int>(appearance_offset.size()) != kAppearanceDim) {
    throw ConfigError("appearance offset must have length 3");
  }
  if (init_mode == InitMode::kSeededFromDemos && (!layout_pool || layout_pool->empty())) {
    throw ConfigError("seeded-from-demos init requires a non-empty demo layout pool");
  }
}

std::uint64_t EnvConfig::hash() const {
  Fnv1a h;
  h.f64(arena_half_width);
  h.i64(num_distractors);
  for (double v : appearance_offset) h.f64(v);
  h.i64(init_mode == InitMode::kUniform ? 0 : 1);
  h.i64(max_steps);
  h.f64(max_speed);
  h.f64(grasp_radius);
  h.f64(lift_threshold);
  h.f64(lift_rate);
  h.f64(max_height);
  return h.value();
}

EnvConfig inject_appearance_shift(EnvConfig config, const std::vector<double>& offset) {
  if (static_cast<int>(offset.size()) != kAppearanceDim) {
    throw ConfigError("appearance offset must match the appearance group length");
  }
  config.appearance_offset = offset;
  return config;
}

ObservationLayout observation_layout(int num_distractors) {
  ObservationLayout l;
  l.proprio = {"proprio", 0, kProprioDim};
  l.task = {"task", kProprioDim, kTaskDim};
  l.distractor = {"distractor", kProprioDim + kTaskDim, 2 * num_distractors};
  l.appearance = {"appearance", l.distractor.offset + l.distractor.size, kAppearanceDim};
  l.total = l.appearance.offset + l.appearance.size;
  return l;
}

ObservationLayout observation_layout(const EnvConfig& config) {
  return observation_layout(config.num_distractors);
}

double EnvState::height(const EnvConfig& config) const {
  return std::min(config.max_height, lifted_steps * config.lift_rate);
}

std::string to_string(Source source) { return source == Source::kExpert ? "expert" : "agent"; }

Source source_from_string(const std::string& name) {
  if (name == "expert") return Source::kExpert;
  if (name == "agent") return Source::kAgent;
  throw ConfigError("unknown source tag '" + name + "'");
}

std::uint64_t Transition::compute_checksum() const {
  Fnv1a h;
  h.vec(s);
  h.vec(a);
  h.f64(r);
  h.vec(s_next);
  h.i64(done ? 1 : 0);
  h.i64(step);
  h.i64(episode_id);
  h.i64(source == Source::kExpert ? 1 : 0);
  return h.value();
}

Layout sample_layout(const EnvConfig& config, Rng& rng) {
  std::uniform_real_distribution<double> target_dist(-kTargetRange, kTargetRange);
  std::uniform_real_distribution<double> distractor_dist(-kDistractorRange, kDistractorRange);
  Layout layout;
  do {
    layout.target = {target_dist(rng), target_dist(rng)};
  } while (std::hypot(layout.target.x - kGripperStart.x, layout.target.y - kGripperStart.y) <
           kMinTargetDistance);
  layout.distractors.resize(config.num_distractors);
  for (auto& d : layout.distractors) d = {distractor_dist(rng), distractor_dist(rng)};
  return layout;
}

EnvState reset_to_layout(const EnvConfig& config, const Layout& layout, long episode_id) {
  if (static_cast<int>(layout.distractors.size()) != config.num_distractors) {
    throw ConfigError("layout distractor count does not match config");
  }
  EnvState s;
  s.gripper = kGripperStart;
  s.target = layout.target;
  s.distractors = layout.distractors;
  s.appearance_offset = config.appearance_offset;
  s.episode_id = episode_id;
  return s;
}

EnvState reset(const EnvConfig& config, Rng& rng, long episode_id) {
  config.validate();
  if (config.init_mode == InitMode::kSeededFromDemos) {
    std::uniform_int_distribution<std::size_t> pick(0, config.layout_pool->size() - 1);
    return reset_to_layout(config, (*config.layout_pool)[pick(rng)], episode_id);
  }
  return reset_to_layout(config, sample_layout(config, rng), episode_id);
}

Vec observe(const EnvConfig& config, const EnvState& state) {
  const ObservationLayout layout = observation_layout(config);
  Vec obs(layout.total);
  int k = 0;
  obs[k++] = state.gripper.x;
  obs[k++] = state.gripper.y;
  obs[k++] = state.velocity.x / config.max_speed;
  obs[k++] = state.velocity.y / config.max_speed;
  obs[k++] = state.grasped ? 1.0 : 0.0;
  obs[k++] = state.target.x - state.gripper.x;
  obs[k++] = state.target.y - state.gripper.y;
  obs[k++] = state.height(config);
  for (const auto& d : state.distractors) {
    obs[k++] = d.x;
    obs[k++] = d.y;
  }
  for (int i = 0; i < kAppearanceDim; ++i) obs[k++] = kAppearanceBase + state.appearance_offset[i];
  return obs;
}

bool solved(const EnvConfig& config, const EnvState& state) {
  return state.height(config) + 1e-12 >= config.lift_threshold;
}

StepResult step(const EnvConfig& config, EnvState& state, const Vec& action) {
  if (action.size() != kActionDim) throw ShapeError("action must have length 3");
  if (state.done) throw UsageError("step called on a finished episode");

  Vec2 v{clamp1(action[0]) * config.max_speed, clamp1(action[1]) * config.max_speed};
  const double speed = std::hypot(v.x, v.y);
  if (speed > config.max_speed) {
    v.x *= config.max_speed / speed;
    v.y *= config.max_speed / speed;
  }
  const double w = config.arena_half_width;
  const Vec2 prev = state.gripper;
  state.gripper.x = std::clamp(prev.x + v.x, -w, w);
  state.gripper.y = std::clamp(prev.y + v.y, -w, w);
  state.velocity = {state.gripper.x - prev.x, state.gripper.y - prev.y};

  const bool toggle = clamp1(action[2]) > 0.0;
  const double dist = std::hypot(state.target.x - state.gripper.x, state.target.y - state.gripper.y);
  state.grasped = toggle && (state.grasped || dist <= config.grasp_radius);
  if (state.grasped) {
    state.target = state.gripper;
    const int cap = static_cast<int>(std::lround(config.max_height / config.lift_rate));
    state.lifted_steps = std::min(state.lifted_steps + 1, cap);
  } else {
    state.lifted_steps = 0;
  }

  state.step += 1;
  state.done = state.step >= config.max_steps;
  StepResult out;
  out.observation = observe(config, state);
  out.reward = solved(config, state) ? 1.0 : 0.0;
  out.done = state.done;
  return out;
}

Vec scripted_expert(const EnvConfig& config, const EnvState& state, Rng& rng, double noise_scale,
                    const ExpertOptions& options) {
  Vec a = Vec::Zero(kActionDim);
  if (state.step < options.reaction_delay) {
    a[2] = -1.0;
  } else if (state.grasped) {
    a[2] = 1.0;
  } else {
    const double dx = state.target.x - state.gripper.x;
    const double dy = state.target.y - state.gripper.y;
    const double dist = std::hypot(dx, dy);
    double gain = 1.0 / config.max_speed;
    if (dist * gain > 1.0) gain = 1.0 / dist;
    a[0] = dx * gain;
    a[1] = dy * gain;
    // Close the gripper on the step that lands within reach.
    a[2] = dist <= config.max_speed + 0.5 * config.grasp_radius ? 1.0 : -1.0;
  }
  if (noise_scale > 0.0) {
    std::normal_distribution<double> noise(0.0, noise_scale);
    for (int i = 0; i < kActionDim; ++i) a[i] += noise(rng);
  }
  for (int i = 0; i < kActionDim; ++i) a[i] = clamp1(a[i]);
  return a;
}

double Episode::total_reward() const {
  double total = 0.0;
  for (const auto& t : transitions) total += t.r;
  return total;
}

std::vector<Episode> collect_demos(const EnvConfig& config, int n, double noise_scale, Rng& rng,
                                   long first_episode_id, const ExpertOptions& options) {
  if (n < 1) throw ConfigError("demo count must be >= 1");
  config.validate();
  std::vector<Episode> demos;
  demos.reserve(n);
  int good = 0;
  for (int e = 0; e < n; ++e) {
    Episode ep;
    ep.id = first_episode_id + e;
    ep.config_hash = config.hash();
    EnvState state = reset(config, rng, ep.id);
    ep.initial_layout = state.layout();
    Vec obs = observe(config, state);
    while (!state.done) {
      Transition t;
      t.s = obs;
      t.step = state.step;
      t.a = scripted_expert(config, state, rng, noise_scale, options);
      StepResult res = step(config, state, t.a);
      t.r = res.reward;
      t.s_next = res.observation;
      t.done = res.done;
      t.episode_id = ep.id;
      t.source = Source::kExpert;
      t.seal();
      obs = res.observation;
      ep.transitions.push_back(std::move(t));
    }
    if (ep.total_reward() >= 150.0) ++good;
    demos.push_back(std::move(ep));
  }
  if (good * 100 < 95 * n) {
    std::cerr << "warning: scripted expert reached return >= 150 in only " << good << " of " << n
              << " demos\n";
  }
  return demos;
}

std::vector<Layout> initial_layouts(const std::vector<Episode>& demos) {
  std::vector<Layout> out;
  out.reserve(demos.size());
  for (const auto& d : demos) out.push_back(d.initial_layout);
  return out;
}

namespace {

nlohmann::json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec json_vec(const nlohmann::json& j) {
  auto v = j.get<std::vector<double>>();
  return Eigen::Map<Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

nlohmann::json layout_json(const Layout& l) {
  nlohmann::json d = nlohmann::json::array();
  for (const auto& p : l.distractors) d.push_back({p.x, p.y});
  return {{"target", {l.target.x, l.target.y}}, {"distractors", d}};
}

Layout json_layout(const nlohmann::json& j) {
  Layout l;
  l.target = {j.at("target")[0].get<double>(), j.at("target")[1].get<double>()};
  for (const auto& p : j.at("distractors")) l.distractors.push_back({p[0].get<double>(), p[1].get<double>()});
  return l;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

void write_demos(const std::vector<Episode>& demos, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write demo file " + path.string());
  for (const auto& ep : demos) {
    nlohmann::json j;
    j["format_version"] = kDemoFormatVersion;
    j["episode_id"] = ep.id;
    j["config_hash"] = hex64(ep.config_hash);
    j["initial_layout"] = layout_json(ep.initial_layout);
    nlohmann::json ts = nlohmann::json::array();
    for (const auto& t : ep.transitions) {
      ts.push_back({{"s", vec_json(t.s)},
                    {"a", vec_json(t.a)},
                    {"r", t.r},
                    {"s_next", vec_json(t.s_next)},
                    {"done", t.done},
                    {"step", t.step},
                    {"source", to_string(t.source)}});
    }
    j["transitions"] = std::move(ts);
    out << j.dump() << '\n';
  }
}

std::vector<Episode> read_demos(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read demo file " + path.string());
  std::vector<Episode> demos;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      if (j.at("format_version").get<int>() != kDemoFormatVersion) {
        throw ConfigError("unsupported demo format version");
      }
      Episode ep;
      ep.id = j.at("episode_id").get<long>();
      ep.config_hash = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
      ep.initial_layout = json_layout(j.at("initial_layout"));
      for (const auto& tj : j.at("transitions")) {
        Transition t;
        t.s = json_vec(tj.at("s"));
        t.a = json_vec(tj.at("a"));
        t.r = tj.at("r").get<double>();
        t.s_next = json_vec(tj.at("s_next"));
        t.done = tj.at("done").get<bool>();
        t.step = tj.at("step").get<int>();
        t.episode_id = ep.id;
        t.source = source_from_string(tj.at("source").get<std::string>());
        t.seal();
        ep.transitions.push_back(std::move(t));
      }
      demos.push_back(std::move(ep));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return demos;
}

}  // namespace imitlab
