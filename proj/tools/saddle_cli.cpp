// Command-line experiment runner for the descent-ascent toolkit.
//
//   saddle run           --config FILE      run an experiment (sweeps x seeds)
//   saddle compare       --config FILE      epoch loop size m vs p = 1/(m+1)
//   saddle sweep-msin    --config FILE      Sinkhorn subroutine iteration sweep
//   saddle grad-check                       finite-difference gradient battery
//   saddle verify-prop31                    one-step inequality certification
//   saddle fit-rate      --trace FILE       log-log slope of a trace column
//
// Global flags: --config PATH, --seed-override N, --out DIR, --threads N,
// --strict-steps on|off. SADDLE_OUT_DIR provides the default output directory.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "saddle/experiment/checks.hpp"
#include "saddle/experiment/runner.hpp"

using namespace saddle;

namespace {

struct GlobalFlags {
  std::string config_path;
  std::string out_dir;
  std::string strict_steps;  // "", "on", "off"
  std::uint64_t seed_override = 0;
  bool has_seed_override = false;
  int threads = 1;
};

ExperimentConfig load_effective_config(const GlobalFlags& flags) {
  if (flags.config_path.empty())
    throw ConfigError("missing --config FILE");
  ExperimentConfig config = load_config(flags.config_path);
  if (flags.has_seed_override) config.seeds = {flags.seed_override};
  if (!flags.out_dir.empty()) {
    config.out_dir = flags.out_dir;
  } else if (!config.out_dir_explicit) {
    if (const char* env = std::getenv("SADDLE_OUT_DIR"); env && *env)
      config.out_dir = env;
  }
  if (flags.strict_steps == "on") config.schedule.strict = true;
  if (flags.strict_steps == "off") config.schedule.strict = false;
  return config;
}

std::vector<int> to_int_list(const std::vector<double>& values,
                             const std::vector<int>& fallback) {
  if (values.empty()) return fallback;
  std::vector<int> out;
  for (double v : values) out.push_back(static_cast<int>(v));
  return out;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"stochastic descent-ascent experiments"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags flags;
  app.add_option("--config", flags.config_path, "experiment config file");
  app.add_option("--out", flags.out_dir, "output directory (overrides config)");
  auto* seed_opt =
      app.add_option("--seed-override", flags.seed_override, "run a single seed");
  app.add_option("--threads", flags.threads, "worker threads for sweeps");
  app.add_option("--strict-steps", flags.strict_steps,
                 "clamp step sizes to the admissibility bound (on|off)")
      ->check(CLI::IsMember({"on", "off"}));

  auto* cmd_run = app.add_subcommand("run", "run the configured experiment");
  auto* cmd_compare =
      app.add_subcommand("compare", "paired epoch-loop vs randomized comparison");
  std::vector<int> m_list;
  cmd_compare->add_option("--m", m_list, "loop sizes (default: config sweep or 1,4,9)");
  auto* cmd_msin =
      app.add_subcommand("sweep-msin", "Sinkhorn subroutine iteration sweep");
  std::vector<int> msin_list;
  cmd_msin->add_option("--msin", msin_list,
                       "subroutine iteration counts (default: config sweep or 1,5,20)");

  auto* cmd_grad = app.add_subcommand("grad-check", "finite-difference gradient battery");
  int probes = 20;
  double grad_tol = 1e-5;
  std::uint64_t grad_seed = 2024;
  cmd_grad->add_option("--probes", probes, "random probes per gradient");
  cmd_grad->add_option("--tol", grad_tol, "relative error tolerance");
  cmd_grad->add_option("--seed", grad_seed, "probe seed");

  auto* cmd_prop = app.add_subcommand("verify-prop31", "one-step inequality certification");
  int states = 20;
  int mc_samples = 100000;
  double noise_sd = 0.3;
  std::uint64_t prop_seed = 7;
  cmd_prop->add_option("--states", states, "random states to certify");
  cmd_prop->add_option("--mc", mc_samples, "Monte-Carlo samples per state");
  cmd_prop->add_option("--noise", noise_sd, "gradient noise level");
  cmd_prop->add_option("--seed", prop_seed, "state/sample seed");

  auto* cmd_fit = app.add_subcommand("fit-rate", "log-log slope of a trace column");
  std::vector<std::string> trace_paths;
  std::string column = "grad_phi_norm_sq";
  long window_lo = 1, window_hi = 1000000000;
  bool running_min = true;
  cmd_fit->add_option("--trace", trace_paths,
                      "trace csv (repeat to average running minima across seeds)")
      ->required();
  cmd_fit->add_option("--column", column, "column to fit");
  cmd_fit->add_option("--lo", window_lo, "window start (iteration)");
  cmd_fit->add_option("--hi", window_hi, "window end (iteration)");
  cmd_fit->add_flag("--raw,!--running-min", running_min,
                    "fit the raw column instead of its running minimum");

  CLI11_PARSE(app, argc, argv);
  flags.has_seed_override = seed_opt->count() > 0;

  try {
    if (cmd_run->parsed()) {
      const ExperimentConfig config = load_effective_config(flags);
      const ExperimentResult result = run_experiment(config, flags.threads);
      for (const RunJobResult& r : result.runs) {
        if (r.error) {
          std::printf("[error] %s seed=%llu: %s\n", r.point_label.c_str(),
                      static_cast<unsigned long long>(r.seed), r.error_message.c_str());
        } else {
          std::printf("[run] %s seed=%llu iters=%ld diverged=%d final_phi=%s -> %s\n",
                      r.point_label.c_str(), static_cast<unsigned long long>(r.seed),
                      r.summary.iterations, r.summary.diverged ? 1 : 0,
                      csv_number(r.reported_phi).c_str(), r.trace_path.c_str());
        }
      }
      std::printf("summary: %s (%d errors)\n", result.summary_path.c_str(),
                  result.n_errors);
      return result.n_errors == 0 ? 0 : 1;
    }

    if (cmd_compare->parsed()) {
      const ExperimentConfig config = load_effective_config(flags);
      const std::vector<int> ms =
          !m_list.empty() ? m_list : to_int_list(config.sweep.m_values, {1, 4, 9});
      const auto points = compare_esgda_rsgda(config, ms, flags.threads);
      std::printf("%4s %8s %18s %18s %12s %16s\n", "m", "p", "mean_phi_esgda",
                  "mean_phi_rsgda", "rel_gap", "trace_divergence");
      for (const auto& pt : points)
        std::printf("%4d %8.5f %18.8g %18.8g %12.4g %16.6g\n", pt.m, pt.p,
                    pt.mean_final_phi_esgda, pt.mean_final_phi_rsgda, pt.relative_gap,
                    pt.mean_trace_divergence);
      return 0;
    }

    if (cmd_msin->parsed()) {
      const ExperimentConfig config = load_effective_config(flags);
      const std::vector<int> msins =
          !msin_list.empty() ? msin_list
                             : to_int_list(config.sweep.msin_values, {1, 5, 20});
      const auto points = sweep_sinkhorn_msin(config, msins, flags.threads);
      std::printf("%6s %18s   (ordered by mean final loss)\n", "msin", "mean_final_loss");
      for (const auto& pt : points)
        std::printf("%6d %18.10g\n", pt.msin, pt.mean_final_loss);
      return 0;
    }

    if (cmd_grad->parsed()) {
      const auto rows = gradient_check_suite(grad_seed, probes, grad_tol);
      bool all_pass = true;
      for (const auto& row : rows) {
        std::printf("[%s] %-34s max_rel_err=%.3e\n", row.pass ? "pass" : "FAIL",
                    row.name.c_str(), row.measure);
        all_pass = all_pass && row.pass;
      }
      std::string out = !flags.out_dir.empty() ? flags.out_dir : ".";
      if (const char* env = std::getenv("SADDLE_OUT_DIR"); flags.out_dir.empty() && env && *env)
        out = env;
      std::filesystem::create_directories(out);
      write_check_rows(out + "/grad_check.csv", rows);
      return all_pass ? 0 : 1;
    }

    if (cmd_prop->parsed()) {
      const auto noisy = one_step_certification_suite(noise_sd, states, mc_samples, prop_seed);
      const auto det = one_step_certification_suite(0.0, states, 1, prop_seed);
      bool det_positive = true;
      for (const auto& row : det.rows) det_positive = det_positive && row.measure > 0.0;
      std::printf("stochastic (sd=%g): %d/%d states certified\n", noise_sd,
                  noisy.n_pass, noisy.n_states);
      std::printf("deterministic: %d/%d states, min slack %s\n", det.n_pass,
                  det.n_states,
                  csv_number([&] {
                    double m = 1e300;
                    for (const auto& row : det.rows) m = std::min(m, row.measure);
                    return m;
                  }()).c_str());
      std::string out = !flags.out_dir.empty() ? flags.out_dir : ".";
      if (const char* env = std::getenv("SADDLE_OUT_DIR"); flags.out_dir.empty() && env && *env)
        out = env;
      std::filesystem::create_directories(out);
      write_check_rows(out + "/one_step_certificates.csv", noisy.rows);
      write_check_rows(out + "/one_step_certificates.csv", det.rows, /*append=*/true);
      const bool ok =
          noisy.n_pass == noisy.n_states && det.n_pass == det.n_states && det_positive;
      return ok ? 0 : 1;
    }

    if (cmd_fit->parsed()) {
      // one (iter, value) series per trace; multiple traces are averaged
      // pointwise over their common grid before fitting
      std::vector<std::vector<std::pair<long, double>>> series;
      for (const std::string& path : trace_paths) {
        const CsvTable table = read_csv(path);
        const long iter_col = table.column_index("iter");
        const long val_col = table.column_index(column);
        std::vector<std::pair<long, double>> points;
        double running = std::numeric_limits<double>::infinity();
        for (size_t r = 0; r < table.rows.size(); ++r) {
          const double v = table.number(r, val_col);
          if (std::isnan(v)) continue;
          running = std::min(running, v);
          points.emplace_back(static_cast<long>(table.number(r, iter_col)),
                              running_min ? running : v);
        }
        series.push_back(std::move(points));
      }
      size_t grid = series.front().size();
      for (const auto& s : series) grid = std::min(grid, s.size());
      std::vector<std::pair<long, double>> averaged(grid);
      for (size_t i = 0; i < grid; ++i) {
        averaged[i] = {series.front()[i].first, 0.0};
        for (const auto& s : series)
          averaged[i].second += s[i].second / static_cast<double>(series.size());
      }
      const RateFit fit = fit_rate_points(averaged, window_lo, window_hi);
      std::printf("slope=%.6f intercept=%.6f r_squared=%.6f points=%ld traces=%zu\n",
                  fit.slope, fit.intercept, fit.r_squared, fit.points, series.size());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
