#include "imitlab/stopping.hpp"

#include <algorithm>

#include "imitlab/nn.hpp"

namespace imitlab {

StopSpec StopSpec::parse(const std::string& text) {
  StopSpec spec;
  if (text == "off") {
    spec.variant = StopVariant::kOff;
  } else if (text == "adaptive") {
    spec.variant = StopVariant::kAdaptive;
  } else if (text == "oracle") {
    spec.variant = StopVariant::kOracle;
  } else if (text.rfind("fixed:", 0) == 0) {
    spec.variant = StopVariant::kFixed;
    try {
      spec.fixed_step = std::stoi(text.substr(6));
    } catch (const std::exception&) {
      throw ConfigError("bad AES spec '" + text + "'");
    }
    if (spec.fixed_step < 1) throw ConfigError("fixed AES step must be >= 1");
  } else {
    throw ConfigError("bad AES spec '" + text + "' (want off | fixed:T | adaptive | oracle)");
  }
  return spec;
}

std::string StopSpec::to_string() const {
  switch (variant) {
    case StopVariant::kOff: return "off";
    case StopVariant::kFixed: return "fixed:" + std::to_string(fixed_step);
    case StopVariant::kAdaptive: return "adaptive";
    case StopVariant::kOracle: return "oracle";
  }
  return "off";
}

void StoppingState::reset() {
  sorted_.clear();
  counter_ = 0;
}

double StoppingState::median_so_far() const { return sorted_[(sorted_.size() - 1) / 2]; }

void StoppingState::insert_sorted(double score) {
  sorted_.insert(std::upper_bound(sorted_.begin(), sorted_.end(), score), score);
}

bool StoppingState::should_stop(double score, int step) {
  switch (spec_.variant) {
    case StopVariant::kOff:
      return false;
    case StopVariant::kFixed:
      return step >= spec_.fixed_step;
    case StopVariant::kAdaptive:
    case StopVariant::kOracle:
      break;
  }
  const bool exceeds = !sorted_.empty() && score > median_so_far();
  counter_ = exceeds ? counter_ + 1 : 0;
  insert_sorted(score);
  if (counter_ >= spec_.patience) {
    counter_ = spec_.patience;
    return true;
  }
  return false;
}

}  // namespace imitlab
