#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "imitlab/nn.hpp"
#include "imitlab/stopping.hpp"

namespace imitlab {
namespace {

std::vector<bool> decisions(StoppingState st, const std::vector<double>& scores) {
  std::vector<bool> out;
  st.reset();
  for (std::size_t i = 0; i < scores.size(); ++i) out.push_back(st.should_stop(scores[i], static_cast<int>(i) + 1));
  return out;
}

int first_stop(const std::vector<bool>& d) {
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i]) return static_cast<int>(i) + 1;
  }
  return -1;
}

TEST(StopSpec, ParsesAndPrints) {
  EXPECT_EQ(StopSpec::parse("off").variant, StopVariant::kOff);
  const StopSpec f = StopSpec::parse("fixed:50");
  EXPECT_EQ(f.variant, StopVariant::kFixed);
  EXPECT_EQ(f.fixed_step, 50);
  EXPECT_EQ(StopSpec::parse("adaptive").variant, StopVariant::kAdaptive);
  EXPECT_EQ(StopSpec::parse("oracle").variant, StopVariant::kOracle);
  for (const char* s : {"off", "fixed:17", "adaptive", "oracle"}) EXPECT_EQ(StopSpec::parse(s).to_string(), s);
  for (const char* s : {"", "fixed", "fixed:0", "fixed:x", "median"}) EXPECT_THROW(StopSpec::parse(s), ConfigError) << s;
}

TEST(Fixed, FiresExactlyAtStepFifty) {
  StoppingState st(StopSpec::parse("fixed:50"));
  for (int step = 1; step < 50; ++step) EXPECT_FALSE(st.should_stop(0.3, step));
  EXPECT_TRUE(st.should_stop(0.3, 50));
}

TEST(Off, NeverFires) {
  StoppingState st;
  for (int step = 1; step <= 500; ++step) EXPECT_FALSE(st.should_stop(step, step));
}

TEST(Adaptive, ConstantScoresNeverStop) {
  const StoppingState st(StopSpec::parse("adaptive"));
  for (double c : {0.0, 0.5, 1.0, 13.8}) {
    EXPECT_EQ(first_stop(decisions(st, std::vector<double>(200, c))), -1);
  }
}

TEST(Adaptive, HandTracedLowThenHighSequence) {
  std::vector<double> s(20, 0.1);
  s.insert(s.end(), 30, 0.9);
  // The lower median stays 0.1 through step 30, so steps 21..30 all exceed.
  EXPECT_EQ(first_stop(decisions(StoppingState(StopSpec::parse("adaptive")), s)), 30);
}

TEST(Adaptive, CounterResetsOnNonExceedingStep) {
  StoppingState st(StopSpec::parse("adaptive"));
  int step = 0;
  EXPECT_FALSE(st.should_stop(0.0, ++step));
  for (int i = 0; i < 5; ++i) EXPECT_FALSE(st.should_stop(1.0 + i, ++step));
  EXPECT_EQ(st.counter(), 5);
  EXPECT_FALSE(st.should_stop(-1.0, ++step));
  EXPECT_EQ(st.counter(), 0);
  st.reset();
  EXPECT_EQ(st.counter(), 0);
}

TEST(Adaptive, NeverFiresBeforePatiencePlusOne) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const StoppingState st(StopSpec::parse("adaptive"));
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> s(60);
    double x = u(rng);
    for (auto& v : s) v = (x += u(rng));  // increasing: every step after the first exceeds
    const int stop = first_stop(decisions(st, s));
    EXPECT_EQ(stop, 11);
    std::vector<double> r(60);
    for (auto& v : r) v = u(rng);
    const int rs = first_stop(decisions(st, r));
    EXPECT_TRUE(rs == -1 || rs >= 11);
  }
}

TEST(Adaptive, InvariantUnderMonotoneTransforms) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const StoppingState st(StopSpec::parse("adaptive"));
  for (int map = 0; map < 100; ++map) {
    const double a = 0.1 + 5.0 * u(rng), b = 10.0 * (u(rng) - 0.5), p = 0.2 + 3.0 * u(rng);
    auto f = [&](double x) { return a * std::pow(x, p) + b + std::atan(x); };
    std::vector<double> s(120), t(120);
    for (std::size_t i = 0; i < s.size(); ++i) {
      // Drifting scores so that stops do happen in some episodes.
      s[i] = std::min(1.0, u(rng) * 0.5 + 0.5 * i / 120.0);
      t[i] = f(s[i]);
    }
    EXPECT_EQ(decisions(st, s), decisions(st, t));
  }
}

TEST(Oracle, UsesTheSameRuleOnRewards) {
  std::vector<double> r(10, 0.0);
  r.insert(r.end(), 20, 1.0);
  EXPECT_EQ(first_stop(decisions(StoppingState(StopSpec::parse("oracle")), r)), 20);
}

}  // namespace
}  // namespace imitlab
