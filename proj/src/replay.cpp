#include "imitlab/replay.hpp"

namespace imitlab {

std::vector<ReplayItem> make_n_step_items(const std::vector<Transition>& episode, int n_step) {
  if (n_step < 1) throw ConfigError("n_step must be >= 1");
  std::vector<ReplayItem> items;
  items.reserve(episode.size());
  for (std::size_t i = 0; i < episode.size(); ++i) {
    ReplayItem item;
    for (std::size_t k = i; k < episode.size() && k < i + static_cast<std::size_t>(n_step); ++k) {
      item.chain.push_back(episode[k]);
      if (episode[k].done) break;
    }
    items.push_back(std::move(item));
  }
  return items;
}

DemoBuffer::DemoBuffer(const std::vector<Episode>& demos, int n_step) {
  for (const auto& ep : demos) {
    for (const auto& t : ep.transitions) {
      if (t.source != Source::kExpert) throw ConfigError("demo buffer accepts expert data only");
    }
    auto items = make_n_step_items(ep.transitions, n_step);
    items_.insert(items_.end(), std::make_move_iterator(items.begin()),
                  std::make_move_iterator(items.end()));
  }
}

std::vector<ReplayItem> NStepBuilder::push(Transition t, bool episode_over) {
  std::vector<ReplayItem> out;
  const bool terminal = t.done || episode_over;
  pending_.push_back(std::move(t));
  if (static_cast<int>(pending_.size()) == n_step_) {
    out.push_back(ReplayItem{pending_});
    pending_.erase(pending_.begin());
  }
  if (terminal) {
    while (!pending_.empty()) {
      out.push_back(ReplayItem{pending_});
      pending_.erase(pending_.begin());
    }
  }
  return out;
}

std::vector<ReplayItem> sample_mixed(const ReplayBuffer& agent, const DemoBuffer& demos,
                                     std::size_t batch_size, double demo_fraction, Rng& rng) {
  if (demo_fraction < 0.0 || demo_fraction > 1.0) {
    throw ConfigError("demo_fraction must be in [0, 1]");
  }
  const std::size_t n_demo = std::min(batch_size, demo_count(batch_size, demo_fraction));
  const std::size_t n_agent = batch_size - n_demo;
  if (n_demo > 0 && demos.empty()) throw SamplingError("demo share requested but no demos loaded");
  if (n_agent > 0 && agent.empty()) throw SamplingError("agent share requested but replay is empty");
  std::vector<ReplayItem> batch;
  batch.reserve(batch_size);
  demos.sample(n_demo, rng, batch);
  agent.sample(n_agent, rng, batch);
  return batch;
}

}  // namespace imitlab
