#include "gac/replay.hpp"

#include "gac/errors.hpp"

namespace gac {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay capacity must be positive");
}

void ReplayBuffer::push(const Transition& t) {
  if (state_dim_ < 0) {
    state_dim_ = t.state.size();
    action_dim_ = t.action.size();
  }
  if (t.state.size() != state_dim_ || t.next_state.size() != state_dim_ ||
      t.action.size() != action_dim_)
    throw DimensionMismatch("transition dimensions do not match buffer");
  if (data_.size() < capacity_) {
    data_.push_back(t);
  } else {
    data_[cursor_] = t;
  }
  cursor_ = (cursor_ + 1) % capacity_;
}

TransitionBatch ReplayBuffer::sample(int n, Rng& rng) const {
  if (data_.empty()) throw EmptyBuffer("sampling from an empty replay buffer");
  TransitionBatch batch;
  batch.states.resize(state_dim_, n);
  batch.actions.resize(action_dim_, n);
  batch.rewards.resize(n);
  batch.next_states.resize(state_dim_, n);
  batch.terminal.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Transition& t = data_[rng.index(data_.size())];
    batch.states.col(i) = t.state;
    batch.actions.col(i) = t.action;
    batch.rewards[i] = t.reward;
    batch.next_states.col(i) = t.next_state;
    batch.terminal[static_cast<std::size_t>(i)] = t.terminal ? 1 : 0;
  }
  return batch;
}

}  // namespace gac
