#include "gac/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gac/errors.hpp"
#include "gac/replay.hpp"

namespace gac {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<int> parse_int_list(const std::string& value, const std::string& key) {
  std::vector<int> out;
  if (trim(value).empty()) return out;  // empty list = linear network
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw ConfigError("bad integer '" + item + "' for key '" + key + "'");
    }
  }
  return out;
}

double parse_double(const std::string& value, const std::string& key) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad number '" + value + "' for key '" + key + "'");
  }
}

long parse_long(const std::string& value, const std::string& key) {
  try {
    std::size_t used = 0;
    const long v = std::stol(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad integer '" + value + "' for key '" + key + "'");
  }
}

GuideMode parse_mode(const std::string& value) {
  if (value == "gac0") return GuideMode::kGac0;
  if (value == "gac1") return GuideMode::kGac1;
  if (value == "gacs") return GuideMode::kGacS;
  throw ConfigError("mode must be gac0, gac1, or gacs (got '" + value + "')");
}

std::string format9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  if (total_steps <= 0) throw ConfigError("total_steps must be positive");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
  if (batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (target_samples <= 0) throw ConfigError("target_samples must be positive");
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
  if (!(critic_lr > 0.0) || !(actor_lr > 0.0)) throw ConfigError("learning rates must be positive");
  if (buffer_capacity == 0) throw ConfigError("buffer_capacity must be positive");
  if (warmup_steps < 0) throw ConfigError("warmup_steps must be non-negative");
  if (kappa_period <= 0 || eval_period <= 0) throw ConfigError("periods must be positive");
  if (eval_episodes <= 0) throw ConfigError("eval_episodes must be positive");
  if (taylor_samples <= 0) throw ConfigError("taylor_samples must be positive");
  for (int h : critic_hidden)
    if (h <= 0) throw ConfigError("critic_hidden sizes must be positive");
  for (int h : actor_hidden)
    if (h <= 0) throw ConfigError("actor_hidden sizes must be positive");
}

TrainConfig parse_config_text(const std::string& text) {
  TrainConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "env") cfg.env = value;
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_long(value, key));
    else if (key == "total_steps") cfg.total_steps = parse_long(value, key);
    else if (key == "epsilon") cfg.epsilon = parse_double(value, key);
    else if (key == "mode") cfg.mode = parse_mode(value);
    else if (key == "taylor_samples") cfg.taylor_samples = static_cast<int>(parse_long(value, key));
    else if (key == "gamma") cfg.gamma = parse_double(value, key);
    else if (key == "batch_size") cfg.batch_size = static_cast<int>(parse_long(value, key));
    else if (key == "target_samples") cfg.target_samples = static_cast<int>(parse_long(value, key));
    else if (key == "tau") cfg.tau = parse_double(value, key);
    else if (key == "critic_lr") cfg.critic_lr = parse_double(value, key);
    else if (key == "actor_lr") cfg.actor_lr = parse_double(value, key);
    else if (key == "buffer_capacity")
      cfg.buffer_capacity = static_cast<std::size_t>(parse_long(value, key));
    else if (key == "critic_hidden") cfg.critic_hidden = parse_int_list(value, key);
    else if (key == "actor_hidden") cfg.actor_hidden = parse_int_list(value, key);
    else if (key == "warmup_steps") cfg.warmup_steps = parse_long(value, key);
    else if (key == "kappa_period") cfg.kappa_period = parse_long(value, key);
    else if (key == "eval_period") cfg.eval_period = parse_long(value, key);
    else if (key == "eval_episodes") cfg.eval_episodes = static_cast<int>(parse_long(value, key));
    else throw ConfigError("unknown config key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

TrainConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

std::string TrainLog::to_csv() const {
  std::string out =
      "step,test_return_mean,test_return_stderr,critic_loss,actor_loss,eta,omega,kl_realized,"
      "entropy,kappa\n";
  for (const auto& r : rows) {
    out += std::to_string(r.step);
    for (double v : {r.test_return_mean, r.test_return_stderr, r.critic_loss, r.actor_loss, r.eta,
                     r.omega, r.kl_realized, r.entropy, r.kappa}) {
      out += ',';
      out += format9(v);
    }
    out += '\n';
  }
  return out;
}

double kappa_schedule(double current_entropy, double base_entropy) {
  return std::max(0.99 * (current_entropy - base_entropy) + base_entropy, base_entropy);
}

double base_policy_entropy(int action_dim) {
  return gauss_entropy(Gaussian{Eigen::VectorXd::Zero(action_dim),
                                0.01 * Eigen::MatrixXd::Identity(action_dim, action_dim)});
}

EvalResult evaluate(const GaussianPolicy& actor, Env& env, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw ConfigError("eval episodes must be at least 1");
  EvalResult out;
  Rng unused(0);
  for (int e = 0; e < episodes; ++e) {
    Eigen::VectorXd s = env.reset(mix_seed(seed, static_cast<std::uint64_t>(e)));
    double ret = 0.0;
    while (true) {
      const Eigen::VectorXd a = actor.act(s, unused, false);
      const StepResult sr = env.step(a);
      ret += sr.reward;
      if (sr.terminal) break;
      s = sr.next_state;
    }
    out.returns.push_back(ret);
    out.mean += ret;
  }
  out.mean /= episodes;
  if (episodes > 1) {
    double ss = 0.0;
    for (double r : out.returns) ss += (r - out.mean) * (r - out.mean);
    out.stderr_of_mean = std::sqrt(ss / (episodes - 1)) / std::sqrt(double(episodes));
  }
  return out;
}

TrainResult train(const TrainConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  auto env = make_env(cfg.env);
  auto eval_env = make_env(cfg.env);
  const EnvSpec& spec = env->spec();

  Rng actor_init(mix_seed(cfg.seed, 1));
  Rng critic_init(mix_seed(cfg.seed, 2));
  Rng loop_rng(mix_seed(cfg.seed, 3));
  const std::uint64_t eval_seed = mix_seed(cfg.seed, 4);
  const std::uint64_t episode_seed = mix_seed(cfg.seed, 5);

  GaussianPolicy actor(spec.state_dim, spec.action_dim, cfg.actor_hidden, spec.action_low,
                       spec.action_high, actor_init);
  CriticNetwork critic(spec.state_dim, spec.action_dim, cfg.critic_hidden, critic_init);
  CriticNetwork target = critic;
  ReplayBuffer buffer(cfg.buffer_capacity);

  const double base_entropy = base_policy_entropy(spec.action_dim);
  auto actor_entropy = [&]() {
    return gauss_entropy(Gaussian{Eigen::VectorXd::Zero(spec.action_dim), actor.covariance()});
  };
  double kappa = kappa_schedule(actor_entropy(), base_entropy);

  TrainLog log;
  auto flush = [&]() {
    if (out_dir.empty()) return;
    std::filesystem::create_directories(out_dir);
    std::ofstream csv(out_dir + "/log.csv");
    csv << log.to_csv();
  };

  LogRow stats;  // most recent learn statistics, reused by eval rows
  stats.kappa = kappa;
  stats.entropy = actor_entropy();

  auto push_eval_row = [&](long step) {
    const EvalResult ev = evaluate(actor, *eval_env, cfg.eval_episodes, eval_seed);
    LogRow row = stats;
    row.step = step;
    row.test_return_mean = ev.mean;
    row.test_return_stderr = ev.stderr_of_mean;
    row.kappa = kappa;
    row.entropy = actor_entropy();
    log.rows.push_back(row);
  };

  push_eval_row(0);

  long episode = 0;
  Eigen::VectorXd s = env->reset(mix_seed(episode_seed, static_cast<std::uint64_t>(episode)));
  try {
    for (long t = 1; t <= cfg.total_steps; ++t) {
      Eigen::VectorXd a;
      if (t <= cfg.warmup_steps) {
        a = loop_rng.uniform_vector(spec.action_low, spec.action_high);
      } else {
        a = actor.act(s, loop_rng, true);
      }
      const StepResult sr = env->step(a);
      buffer.push(Transition{s, a, sr.reward, sr.next_state, sr.terminal});
      if (sr.terminal) {
        ++episode;
        s = env->reset(mix_seed(episode_seed, static_cast<std::uint64_t>(episode)));
      } else {
        s = sr.next_state;
      }

      if (t > cfg.warmup_steps) {
        const TransitionBatch batch = buffer.sample(cfg.batch_size, loop_rng);
        stats.critic_loss = critic_update(critic, target, batch, actor, cfg.target_samples,
                                          cfg.gamma, cfg.critic_lr, loop_rng);
        target_sync(critic, target, cfg.tau);
        const GuideConfig gcfg{cfg.epsilon, kappa, cfg.mode, cfg.taylor_samples};
        const GuideBatch guides = compute_guides(critic, actor, batch.states, gcfg, loop_rng);
        Eigen::MatrixXd targets(spec.action_dim, batch.size());
        for (int i = 0; i < batch.size(); ++i)
          targets.col(i) = guides.entries[static_cast<std::size_t>(i)].mean;
        stats.actor_loss = actor.fit_mse(batch.states, targets, cfg.actor_lr);
        actor.update_covariance(guides.entries);
        stats.eta = guides.dual.eta;
        stats.omega = guides.dual.omega;
        stats.kl_realized = guides.realized_kl;
      }

      if (t % cfg.kappa_period == 0) kappa = kappa_schedule(actor_entropy(), base_entropy);
      if (t % cfg.eval_period == 0) push_eval_row(t);
    }
  } catch (const SolverDiverged&) {
    flush();
    throw;
  }

  flush();
  if (!out_dir.empty()) {
    actor.save(out_dir + "/actor.txt");
    critic.save(out_dir + "/critic.txt");
  }
  return TrainResult{std::move(log), std::move(actor), std::move(critic)};
}

}  // namespace gac
