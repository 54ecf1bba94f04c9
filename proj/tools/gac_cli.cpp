// Command-line front end: train / eval / verify / plot.
//
// Exit codes: 0 success, 2 configuration error, 3 solver failure,
// 4 verification failure.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <vector>

#include "gac/errors.hpp"
#include "gac/trainer.hpp"
#include "gac/verify.hpp"

namespace {

struct Curve {
  std::vector<double> x;
  std::vector<double> y;
};

Curve read_log_curve(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw gac::ConfigError("cannot open log '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw gac::ConfigError("empty log file");
  std::stringstream header(line);
  std::string column;
  int step_col = -1, ret_col = -1, col = 0;
  while (std::getline(header, column, ',')) {
    if (column == "step") step_col = col;
    if (column == "test_return_mean") ret_col = col;
    ++col;
  }
  if (step_col < 0 || ret_col < 0)
    throw gac::ConfigError("log is missing step/test_return_mean columns");
  Curve curve;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    int c = 0;
    double step = 0.0, ret = 0.0;
    while (std::getline(row, cell, ',')) {
      if (c == step_col) step = std::stod(cell);
      if (c == ret_col) ret = std::stod(cell);
      ++c;
    }
    curve.x.push_back(step);
    curve.y.push_back(ret);
  }
  if (curve.x.empty()) throw gac::ConfigError("log has no data rows");
  return curve;
}

void write_svg_curve(const Curve& curve, const std::string& path) {
  const double width = 640, height = 420;
  const double ml = 70, mr = 20, mt = 24, mb = 48;
  double xmin = curve.x.front(), xmax = curve.x.front();
  double ymin = curve.y.front(), ymax = curve.y.front();
  for (std::size_t i = 0; i < curve.x.size(); ++i) {
    xmin = std::min(xmin, curve.x[i]);
    xmax = std::max(xmax, curve.x[i]);
    ymin = std::min(ymin, curve.y[i]);
    ymax = std::max(ymax, curve.y[i]);
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;
  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (width - ml - mr); };
  auto py = [&](double y) { return height - mb - (y - ymin) / (ymax - ymin) * (height - mt - mb); };

  std::ofstream out(path);
  if (!out) throw gac::ConfigError("cannot open '" + path + "' for writing");
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  char buf[256];
  for (int i = 0; i <= 4; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 4.0;
    const double yv = ymin + (ymax - ymin) * i / 4.0;
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#ddd\"/>\n",
                  px(xv), py(ymin), px(xv), py(ymax));
    out << buf;
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#ddd\"/>\n",
                  px(xmin), py(yv), px(xmax), py(yv));
    out << buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"middle\">%.4g</text>\n",
                  px(xv), height - mb + 16, xv);
    out << buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"end\">%.4g</text>\n",
                  ml - 6, py(yv) + 4, yv);
    out << buf;
  }
  out << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < curve.x.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", px(curve.x[i]), py(curve.y[i]));
    out << buf;
  }
  out << "\"/>\n";
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%.1f\" y=\"%.1f\" font-size=\"12\" text-anchor=\"middle\">step</text>\n",
                ml + (width - ml - mr) / 2, height - 12.0);
  out << buf;
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%.1f\" y=\"%.1f\" font-size=\"12\" text-anchor=\"middle\" "
                "transform=\"rotate(-90 14 %.1f)\">test return</text>\n",
                14.0, mt + (height - mt - mb) / 2, mt + (height - mt - mb) / 2);
  out << buf;
  out << "</svg>\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"guide actor-critic for continuous control"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "gac-run";
  long long seed_override = -1;
  auto* train_cmd = app.add_subcommand("train", "train an agent from a config file");
  train_cmd->add_option("--config", config_path, "config file path")->required();
  train_cmd->add_option("--seed", seed_override, "override the config seed");
  train_cmd->add_option("--out", out_dir, "output directory");

  std::string actor_path, env_name;
  int episodes = 10;
  long long eval_seed = 0;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a saved actor without exploration");
  eval_cmd->add_option("--actor", actor_path, "actor tensor file")->required();
  eval_cmd->add_option("--env", env_name, "environment name")->required();
  eval_cmd->add_option("--episodes", episodes, "number of test episodes");
  eval_cmd->add_option("--seed", eval_seed, "evaluation seed");

  std::vector<std::string> suites;
  auto* verify_cmd = app.add_subcommand("verify", "run oracle suites");
  verify_cmd->add_option("--suite", suites, "suite name (repeatable; default all)");

  std::string log_path, plot_path;
  auto* plot_cmd = app.add_subcommand("plot", "emit a return-vs-step curve as SVG");
  plot_cmd->add_option("--log", log_path, "training log csv")->required();
  plot_cmd->add_option("--out", plot_path, "output svg path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*train_cmd) {
      gac::TrainConfig cfg = gac::parse_config_file(config_path);
      if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
      const gac::TrainResult result = gac::train(cfg, out_dir);
      const auto& last = result.log.rows.back();
      std::printf("trained %s for %ld steps; final test return %.6g (files in %s)\n",
                  cfg.env.c_str(), cfg.total_steps, last.test_return_mean, out_dir.c_str());
    } else if (*eval_cmd) {
      const gac::GaussianPolicy actor = gac::GaussianPolicy::load(actor_path);
      auto env = gac::make_env(env_name);
      const gac::EvalResult ev =
          gac::evaluate(actor, *env, episodes, static_cast<std::uint64_t>(eval_seed));
      for (std::size_t i = 0; i < ev.returns.size(); ++i)
        std::printf("episode %zu: %.6g\n", i, ev.returns[i]);
      std::printf("mean return: %.6g (stderr %.6g)\n", ev.mean, ev.stderr_of_mean);
    } else if (*verify_cmd) {
      if (suites.empty()) suites = gac::verify_suite_names();
      bool all_ok = true;
      for (const auto& name : suites) {
        const gac::VerifyReport report = gac::run_verify_suite(name);
        std::printf("[%s] %s\n", report.passed ? "PASS" : "FAIL", report.suite.c_str());
        for (const auto& line : report.lines) std::printf("%s\n", line.c_str());
        all_ok = all_ok && report.passed;
      }
      if (!all_ok) return 4;
    } else if (*plot_cmd) {
      write_svg_curve(read_log_curve(log_path), plot_path);
      std::printf("wrote %s\n", plot_path.c_str());
    }
  } catch (const gac::SolverDiverged& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return 3;
  } catch (const gac::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const gac::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
