#ifndef GAC_TRAINER_HPP
#define GAC_TRAINER_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "gac/actor.hpp"
#include "gac/critic.hpp"
#include "gac/envs.hpp"
#include "gac/guide.hpp"

namespace gac {

struct TrainConfig {
  std::string env = "lqr1d";
  std::uint64_t seed = 0;
  long total_steps = 20000;
  double epsilon = 1e-4;  // KL upper bound
  GuideMode mode = GuideMode::kGac0;
  int taylor_samples = 1;
  double gamma = 0.99;
  int batch_size = 256;
  int target_samples = 10;  // M
  double tau = 0.001;
  double critic_lr = 0.001;
  double actor_lr = 0.0001;
  std::size_t buffer_capacity = 1000000;
  std::vector<int> critic_hidden = {64, 64};
  std::vector<int> actor_hidden = {64, 64};
  long warmup_steps = 1000;  // random-uniform actions before any update
  long kappa_period = 5000;
  long eval_period = 5000;
  int eval_episodes = 10;

  void validate() const;  // throws ConfigError
};

// Plain-text config: one `key = value` per line, '#' comments, unknown keys
// are errors.
TrainConfig parse_config_text(const std::string& text);
TrainConfig parse_config_file(const std::string& path);

struct LogRow {
  long step = 0;
  double test_return_mean = 0.0;
  double test_return_stderr = 0.0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double eta = 0.0;
  double omega = 0.0;
  double kl_realized = 0.0;
  double entropy = 0.0;
  double kappa = 0.0;
};

struct TrainLog {
  std::vector<LogRow> rows;
  std::string to_csv() const;  // 9 significant digits
};

struct TrainResult {
  TrainLog log;
  GaussianPolicy actor;
  CriticNetwork critic;
};

// Entropy lower-bound decay toward the base-policy entropy:
// max(0.99 (current - base) + base, base).
double kappa_schedule(double current_entropy, double base_entropy);

// Entropy of N(0, 0.01 I) in `action_dim` dimensions.
double base_policy_entropy(int action_dim);

struct EvalResult {
  double mean = 0.0;
  double stderr_of_mean = 0.0;
  std::vector<double> returns;
};

// Deterministic-mean episodes, undiscounted return sums.
EvalResult evaluate(const GaussianPolicy& actor, Env& env, int episodes, std::uint64_t seed);

// Runs the interleaved collect/learn loop. When out_dir is non-empty the
// log, actor, and critic files are written there (the log is flushed even
// when the dual solver aborts the run).
TrainResult train(const TrainConfig& config, const std::string& out_dir = "");

}  // namespace gac

#endif
