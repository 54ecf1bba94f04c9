#ifndef GAC_REPLAY_HPP
#define GAC_REPLAY_HPP

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "gac/rng.hpp"

namespace gac {

struct Transition {
  Eigen::VectorXd state;
  Eigen::VectorXd action;
  double reward = 0.0;
  Eigen::VectorXd next_state;
  bool terminal = false;
};

struct TransitionBatch {
  Eigen::MatrixXd states;       // state_dim x n
  Eigen::MatrixXd actions;      // action_dim x n
  Eigen::VectorXd rewards;      // n
  Eigen::MatrixXd next_states;  // state_dim x n
  std::vector<std::uint8_t> terminal;

  int size() const { return static_cast<int>(rewards.size()); }
};

// Bounded ring store; the oldest entries are overwritten once full. Sampling
// draws uniformly with replacement and never mutates stored transitions.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(const Transition& t);
  TransitionBatch sample(int n, Rng& rng) const;

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return data_[i]; }

 private:
  std::size_t capacity_;
  std::size_t cursor_ = 0;
  std::vector<Transition> data_;
  Eigen::Index state_dim_ = -1;
  Eigen::Index action_dim_ = -1;
};

}  // namespace gac

#endif
