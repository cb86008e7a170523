// Actor early stopping: ends actor episodes so that successful behaviour
// stays rare in agent data.
#pragma once

#include <string>
#include <vector>

namespace imitlab {

enum class StopVariant { kOff, kFixed, kAdaptive, kOracle };

struct StopSpec {
  StopVariant variant = StopVariant::kOff;
  int fixed_step = 50;
  int patience = 10;

  // "off" | "fixed:T" | "adaptive" | "oracle"
  static StopSpec parse(const std::string& text);
  std::string to_string() const;
};

// Adaptive rule: a step "exceeds" when its score is strictly greater than the
// lower median of every earlier score in the episode; `patience` consecutive
// exceeding steps stop the episode. The oracle variant applies the same rule
// to the environment reward instead of the discriminator score.
class StoppingState {
 public:
  explicit StoppingState(StopSpec spec = {}) : spec_(spec) {}

  const StopSpec& spec() const { return spec_; }
  int counter() const { return counter_; }

  void reset();

  // `step` is the 1-based index of the step that produced `score`.
  bool should_stop(double score, int step);

 private:
  double median_so_far() const;
  void insert_sorted(double score);

  StopSpec spec_;
  std::vector<double> sorted_;
  int counter_ = 0;
};

}  // namespace imitlab
