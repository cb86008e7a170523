// Point-lift: a 2D point-mass gripper that must reach, grasp and lift a target
// object. Observations are feature vectors split into named groups so that
// task-irrelevant channels (distractor positions, appearance) can be injected
// and controlled independently of the dynamics.
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "imitlab/nn.hpp"

namespace imitlab {

using Rng = std::mt19937_64;

inline constexpr int kActionDim = 3;  // vx, vy, grasp toggle
inline constexpr int kProprioDim = 5;  // x, y, vx, vy, grasp flag
inline constexpr int kTaskDim = 3;     // target dx, dy, height
inline constexpr int kAppearanceDim = 3;
inline constexpr int kMaxDistractors = 4;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

// Positions of the target and distractor objects at reset.
struct Layout {
  Vec2 target;
  std::vector<Vec2> distractors;
  friend bool operator==(const Layout&, const Layout&) = default;
};

enum class InitMode { kUniform, kSeededFromDemos };

struct EnvConfig {
  double arena_half_width = 1.0;
  int num_distractors = 0;
  std::vector<double> appearance_offset = std::vector<double>(kAppearanceDim, 0.0);
  InitMode init_mode = InitMode::kUniform;
  int max_steps = 200;
  double max_speed = 0.1;
  double grasp_radius = 0.1;
  double lift_threshold = 0.5;
  double lift_rate = 0.1;
  double max_height = 1.0;
  // Layouts drawn from in seeded mode; ignored in uniform mode.
  std::shared_ptr<const std::vector<Layout>> layout_pool;

  void validate() const;
  // Stable hash over every field that changes observations or dynamics.
  std::uint64_t hash() const;
};

EnvConfig inject_appearance_shift(EnvConfig config, const std::vector<double>& offset);

struct FeatureGroup {
  std::string name;
  int offset = 0;
  int size = 0;
};

// Group boundaries for observations produced under `config`.
struct ObservationLayout {
  FeatureGroup proprio;
  FeatureGroup task;
  FeatureGroup distractor;
  FeatureGroup appearance;
  int total = 0;

  std::vector<FeatureGroup> groups() const { return {proprio, task, distractor, appearance}; }
};

ObservationLayout observation_layout(const EnvConfig& config);
ObservationLayout observation_layout(int num_distractors);

struct EnvState {
  Vec2 gripper;
  Vec2 velocity;
  bool grasped = false;
  Vec2 target;
  int lifted_steps = 0;
  std::vector<Vec2> distractors;
  std::vector<double> appearance_offset;
  int step = 0;
  long episode_id = 0;
  bool done = false;

  double height(const EnvConfig& config) const;
  Layout layout() const { return {target, distractors}; }
};

enum class Source { kAgent, kExpert };

std::string to_string(Source source);
Source source_from_string(const std::string& name);

struct Transition {
  Vec s;
  Vec a;
  double r = 0.0;  // sparse task reward at s_next
  Vec s_next;
  bool done = false;
  int step = 0;  // index of s within its episode
  long episode_id = 0;
  Source source = Source::kAgent;
  std::uint64_t checksum = 0;

  std::uint64_t compute_checksum() const;
  void seal() { checksum = compute_checksum(); }
  bool intact() const { return checksum == compute_checksum(); }
};

struct StepResult {
  Vec observation;
  double reward = 0.0;
  bool done = false;
};

struct UsageError : std::logic_error {
  using std::logic_error::logic_error;
};

Layout sample_layout(const EnvConfig& config, Rng& rng);
EnvState reset(const EnvConfig& config, Rng& rng, long episode_id = 0);
EnvState reset_to_layout(const EnvConfig& config, const Layout& layout, long episode_id = 0);
Vec observe(const EnvConfig& config, const EnvState& state);
StepResult step(const EnvConfig& config, EnvState& state, const Vec& action);
bool solved(const EnvConfig& config, const EnvState& state);

struct ExpertOptions {
  // Steps the expert waits before moving; keeps its first frames free of
  // task behaviour.
  int reaction_delay = 10;
};

Vec scripted_expert(const EnvConfig& config, const EnvState& state, Rng& rng, double noise_scale,
                    const ExpertOptions& options = {});

struct Episode {
  long id = 0;
  std::uint64_t config_hash = 0;
  Layout initial_layout;
  std::vector<Transition> transitions;

  double total_reward() const;
};

// Rolls the scripted expert for `n` full episodes. Episode ids run from
// `first_episode_id`. Emits a warning on stderr when fewer than 95% of the
// episodes reach a return of 150.
std::vector<Episode> collect_demos(const EnvConfig& config, int n, double noise_scale, Rng& rng,
                                   long first_episode_id = 0, const ExpertOptions& options = {});

std::vector<Layout> initial_layouts(const std::vector<Episode>& demos);

// JSON-lines demo files: one episode per line.
inline constexpr int kDemoFormatVersion = 1;
void write_demos(const std::vector<Episode>& demos, const std::filesystem::path& path);
std::vector<Episode> read_demos(const std::filesystem::path& path);

}  // namespace imitlab
