// Experience replay: a thread-safe ring buffer for agent data and an immutable
// demonstration buffer, plus mixed sampling between the two.
#pragma once

#include <cmath>
#include <mutex>
#include <random>
#include <stdexcept>
#include <vector>

#include "imitlab/env.hpp"

namespace imitlab {

struct SamplingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Fixed-capacity FIFO. Appends from many threads are serialized; sampling
// copies out under the same lock so readers never see a torn element.
template <typename T>
class RingBuffer {
 public:
  explicit RingBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("ring buffer capacity must be positive");
    data_.reserve(std::min<std::size_t>(capacity, 1 << 16));
  }

  RingBuffer(const RingBuffer&) = delete;
  RingBuffer& operator=(const RingBuffer&) = delete;

  void append(T item) {
    std::lock_guard lock(mu_);
    if (data_.size() < capacity_) {
      data_.push_back(std::move(item));
    } else {
      data_[cursor_] = std::move(item);
    }
    cursor_ = (cursor_ + 1) % capacity_;
    ++total_appended_;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return data_.size();
  }
  std::size_t capacity() const { return capacity_; }
  std::size_t total_appended() const {
    std::lock_guard lock(mu_);
    return total_appended_;
  }
  bool empty() const { return size() == 0; }

  // Uniform with replacement.
  template <typename Gen>
  void sample(std::size_t n, Gen& rng, std::vector<T>& out) const {
    std::lock_guard lock(mu_);
    if (n > 0 && data_.empty()) throw SamplingError("sampling from an empty buffer");
    std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
    for (std::size_t i = 0; i < n; ++i) out.push_back(data_[pick(rng)]);
  }

  // Oldest-first copy of the current contents.
  std::vector<T> snapshot() const {
    std::lock_guard lock(mu_);
    std::vector<T> out;
    out.reserve(data_.size());
    if (data_.size() < capacity_) {
      out = data_;
    } else {
      for (std::size_t i = 0; i < capacity_; ++i) out.push_back(data_[(cursor_ + i) % capacity_]);
    }
    return out;
  }

 private:
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::vector<T> data_;
  std::size_t cursor_ = 0;
  std::size_t total_appended_ = 0;
};

// Up to N consecutive transitions from one episode, the unit the learner
// builds N-step targets from. For N = 1 it holds a single transition.
struct ReplayItem {
  std::vector<Transition> chain;

  const Transition& first() const { return chain.front(); }
  const Transition& last() const { return chain.back(); }
  bool is_expert() const { return first().source == Source::kExpert; }
};

class ReplayBuffer : public RingBuffer<ReplayItem> {
 public:
  using RingBuffer<ReplayItem>::RingBuffer;
  using RingBuffer<ReplayItem>::append;
  void append(Transition t) { RingBuffer<ReplayItem>::append(ReplayItem{{std::move(t)}}); }
};

// Expert transitions from demo files; never evicted.
class DemoBuffer {
 public:
  DemoBuffer() = default;
  DemoBuffer(const std::vector<Episode>& demos, int n_step);

  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  const std::vector<ReplayItem>& items() const { return items_; }

  template <typename Gen>
  void sample(std::size_t n, Gen& rng, std::vector<ReplayItem>& out) const {
    if (n > 0 && items_.empty()) throw SamplingError("sampling from an empty demo buffer");
    std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
    for (std::size_t i = 0; i < n; ++i) out.push_back(items_[pick(rng)]);
  }

 private:
  std::vector<ReplayItem> items_;
};

// Splits an episode into N-step windows, truncated at the episode end.
std::vector<ReplayItem> make_n_step_items(const std::vector<Transition>& episode, int n_step);

// Emits N-step windows as transitions of one episode arrive.
class NStepBuilder {
 public:
  explicit NStepBuilder(int n_step) : n_step_(n_step) {}
  // Returns windows that became complete; `episode_over` flushes the tail.
  std::vector<ReplayItem> push(Transition t, bool episode_over);
  void clear() { pending_.clear(); }

 private:
  int n_step_;
  std::vector<Transition> pending_;
};

inline std::size_t demo_count(std::size_t batch_size, double demo_fraction) {
  return static_cast<std::size_t>(std::ceil(demo_fraction * static_cast<double>(batch_size) - 1e-12));
}

// ceil(demo_fraction * batch_size) demo items first, then agent items.
std::vector<ReplayItem> sample_mixed(const ReplayBuffer& agent, const DemoBuffer& demos,
                                     std::size_t batch_size, double demo_fraction, Rng& rng);

}  // namespace imitlab
