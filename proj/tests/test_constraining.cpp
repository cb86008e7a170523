#include <gtest/gtest.h>

#include "imitlab/constraining.hpp"

namespace imitlab {
namespace {

std::vector<Episode> demos(const EnvConfig& env, int n, std::uint64_t seed = 7) {
  Rng rng(seed);
  return collect_demos(env, n, 0.05, rng, 0);
}

TEST(ConstraintSpec, ParsesBothStrategies) {
  const ConstraintSpec e = ConstraintSpec::parse("early:10");
  EXPECT_EQ(e.strategy, ConstraintStrategy::kEarlyFrames);
  EXPECT_EQ(e.early_frames, 10);
  const ConstraintSpec r = ConstraintSpec::parse("random:50");
  EXPECT_EQ(r.strategy, ConstraintStrategy::kRandomPolicy);
  EXPECT_EQ(r.random_episodes, 50);
  EXPECT_EQ(r.to_string(), "random:50");
  for (const char* bad : {"early:0", "random:0", "late:3", "early:x", ""}) {
    EXPECT_THROW(ConstraintSpec::parse(bad), ConfigError) << bad;
  }
}

TEST(EarlyFrames, TenFramesOfHundredDemos) {
  EnvConfig env;
  env.num_distractors = 2;
  const auto d = demos(env, 100);
  const auto frames = build_early_frames(d, 10);
  ASSERT_EQ(frames.size(), 1000u);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    EXPECT_EQ(frames[i].step, static_cast<int>(i % 10));
    EXPECT_EQ(frames[i].obs, d[i / 10].transitions[i % 10].s);
  }
}

TEST(EarlyFrames, ClampsToEpisodeLength) {
  EnvConfig env;
  const auto d = demos(env, 3);
  EXPECT_EQ(build_early_frames(d, 500).size(), 3u * 200u);
  EXPECT_THROW(build_early_frames(d, 0), ConfigError);
  EXPECT_THROW(build_early_frames({}, 10), ConfigError);
}

TEST(AgentSet, IngestTakesThePrefixAndEvicts) {
  ConstraintSpec spec;
  spec.agent_capacity = 25;
  ConstrainingSets sets(spec, {{Vec::Zero(2), 0, 0}});
  EXPECT_FALSE(sets.ready());
  std::vector<Vec> prefix;
  for (int i = 0; i < 4; ++i) prefix.push_back(Vec::Constant(2, i));
  ingest_agent_early_frames(sets, prefix, 1, 10);
  EXPECT_EQ(sets.agent().size(), 4u);
  EXPECT_TRUE(sets.ready());
  for (long ep = 2; ep < 12; ++ep) ingest_agent_early_frames(sets, prefix, ep, 3);
  EXPECT_EQ(sets.agent().size(), 25u);
  Rng rng(1);
  std::vector<Vec> out;
  sets.sample_agent(50, rng, out);
  sets.sample_expert(5, rng, out);
  EXPECT_EQ(out.size(), 55u);
}

TEST(RandomPolicySets, FullEpisodesOnBothSides) {
  EnvConfig env;
  Rng rng(2);
  const ConstrainingSets sets = build_random_policy_sets(env, env, 3, rng);
  EXPECT_EQ(sets.expert().size(), 600u);
  EXPECT_EQ(sets.agent().size(), 600u);
  EXPECT_EQ(sets.spec().to_string(), "random:3");
  EXPECT_THROW(build_random_policy_sets(env, env, 0, rng), ConfigError);
}

TEST(Probe, IdenticalSettingsAreIndistinguishable) {
  EnvConfig env;
  env.num_distractors = 2;
  Rng rng(3);
  const ConstrainingSets sets = build_random_policy_sets(env, env, 10, rng);
  const ObservationLayout layout = observation_layout(env);
  ProbeOptions opts;
  opts.epochs = 40;
  const double acc = probe_accuracy(sets.expert(), sets.agent().snapshot(), layout.groups(), opts);
  EXPECT_LE(acc, 0.56);
  // Splitting frames instead of episodes lets the probe memorize layouts.
  opts.split = ProbeSplit::kByFrame;
  EXPECT_GE(probe_accuracy(sets.expert(), sets.agent().snapshot(), layout.groups(), opts), 0.9);
}

TEST(Probe, AppearanceShiftIsOnlyVisibleInItsGroup) {
  EnvConfig agent;
  const EnvConfig expert = inject_appearance_shift(agent, {0.5, 0.5, 0.5});
  Rng rng(4);
  const ConstrainingSets sets = build_random_policy_sets(expert, agent, 5, rng);
  const ObservationLayout layout = observation_layout(agent);
  const auto e = sets.expert();
  const auto a = sets.agent().snapshot();
  ProbeOptions opts;
  opts.epochs = 30;
  EXPECT_GE(probe_accuracy(e, a, {layout.appearance}, opts), 0.95);
  EXPECT_LE(probe_accuracy(e, a, {layout.proprio, layout.task}, opts), 0.56);
  EXPECT_THROW(probe_accuracy(e, a, {layout.distractor}, opts), ConfigError);
}

}  // namespace
}  // namespace imitlab
