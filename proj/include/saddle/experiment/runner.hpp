#pragma once

// Config-driven experiment execution: problem construction, sweep expansion,
// trace/summary CSV emission, the loop-size pairing study (epoch loop m vs
// descent probability 1/(m+1)), and the Sinkhorn-subroutine iteration sweep.
//
// Determinism contract: rerunning a config with the same seeds reproduces
// every CSV byte-identically except the wall_time_s column. Workers never
// share mutable state; summary rows are ordered by (sweep point, seed).

#include <atomic>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "saddle/csv.hpp"
#include "saddle/diagnostics.hpp"
#include "saddle/experiment/config.hpp"
#include "saddle/ot/learning.hpp"
#include "saddle/problems/dro.hpp"
#include "saddle/problems/interpolating.hpp"
#include "saddle/problems/quadratic.hpp"
#include "saddle/solvers.hpp"

namespace saddle {

// ---------------------------------------------------------------------------
// point-cloud IO and synthetic instances

inline void save_points_csv(const Mat& points, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw CsvError("cannot open " + path + " for writing");
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index c = 0; c < points.cols(); ++c) {
      if (c) out << ',';
      out << csv_number(points(i, c));
    }
    out << '\n';
  }
}

inline Mat load_points_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open point cloud " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> fields;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
      try {
        fields.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw CsvError(path + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    if (!rows.empty() && fields.size() != rows.front().size())
      throw CsvError(path + ":" + std::to_string(lineno) + ": ragged row");
    rows.push_back(std::move(fields));
  }
  if (rows.empty()) throw CsvError(path + ": empty point cloud");
  Mat points(static_cast<Eigen::Index>(rows.size()),
             static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    for (Eigen::Index c = 0; c < points.cols(); ++c)
      points(i, c) = rows[static_cast<size_t>(i)][static_cast<size_t>(c)];
  return points;
}

// two-cluster source measure inside the unit box
inline Mat synth_source_cloud(int m, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "ot-source"));
  Mat cloud(m, 2);
  for (int i = 0; i < m; ++i) {
    const bool left = (i % 2 == 0);
    cloud(i, 0) = (left ? 0.25 : 0.75) + 0.10 * rng.gaussian();
    cloud(i, 1) = (left ? 0.35 : 0.65) + 0.10 * rng.gaussian();
  }
  return cloud;
}

// single-cluster inputs the map pushes toward the source
inline Mat synth_target_inputs(int n, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "ot-target"));
  Mat cloud(n, 2);
  for (int i = 0; i < n; ++i) {
    cloud(i, 0) = 0.5 + 0.15 * rng.gaussian();
    cloud(i, 1) = 0.5 + 0.15 * rng.gaussian();
  }
  return cloud;
}

// ---------------------------------------------------------------------------
// problem construction

struct ProblemBundle {
  std::unique_ptr<ProblemOracle> oracle;
  std::function<double(const Vec&)> phi_eval;  // best available phi evaluator
  const SemiDualMapProblem* ot = nullptr;
};

inline ProblemBundle make_problem(const ProblemSpec& spec) {
  ProblemBundle bundle;
  if (spec.kind == "quadratic_preset" || spec.kind == "interp") {
    auto base = QuadraticSaddle::preset(QuadraticSaddle::preset_from_kappa(spec.kappa),
                                        spec.noise_theta_sd, spec.noise_v_sd,
                                        spec.structure_seed);
    if (spec.theta0_mode_cutoff > 0.0)
      base.set_initial_theta_on_modes(spec.theta0_mode_cutoff,
                                      spec.theta0_norm > 0.0 ? spec.theta0_norm : 2.0);
    else if (spec.theta0_norm > 0.0)
      base.scale_initial_theta(spec.theta0_norm);
    if (spec.kind == "quadratic_preset") {
      auto prob = std::make_unique<QuadraticSaddle>(std::move(base));
      const QuadraticSaddle* raw = prob.get();
      bundle.phi_eval = [raw](const Vec& theta) { return raw->exact_phi(theta); };
      bundle.oracle = std::move(prob);
    } else {
      auto prob = std::make_unique<InterpolatingFiniteSum>(InterpolatingFiniteSum::make(
          std::move(base), spec.interp_components, spec.interp_sigma_sq,
          spec.structure_seed));
      const InterpolatingFiniteSum* raw = prob.get();
      bundle.phi_eval = [raw](const Vec& theta) { return raw->exact_phi(theta); };
      bundle.oracle = std::move(prob);
    }
  } else if (spec.kind == "dro_synth" || spec.kind == "dro_csv") {
    DroDataset data = spec.kind == "dro_synth"
                          ? make_blobs(spec.n_points, spec.structure_seed)
                          : load_dataset_csv(spec.dataset);
    auto prob = std::make_unique<ToyDro>(std::move(data), spec.gamma);
    const ToyDro* raw = prob.get();
    bundle.phi_eval = [raw](const Vec& theta) { return raw->approx_phi(theta); };
    bundle.oracle = std::move(prob);
  } else if (spec.kind == "ot_synth" || spec.kind == "ot_csv") {
    Mat source, targets;
    if (spec.kind == "ot_synth") {
      source = synth_source_cloud(spec.m_source, spec.structure_seed);
      targets = synth_target_inputs(spec.n_target, spec.structure_seed);
    } else {
      source = load_points_csv(spec.source_csv);
      targets = load_points_csv(spec.target_csv);
    }
    MapModel model = spec.model == "perceptron"
                         ? MapModel::perceptron(static_cast<int>(targets.cols()),
                                                static_cast<int>(source.cols()),
                                                spec.hidden)
                         : MapModel::affine(static_cast<int>(targets.cols()),
                                            static_cast<int>(source.cols()));
    auto prob = std::make_unique<SemiDualMapProblem>(std::move(source), std::move(targets),
                                                     model, spec.epsilon,
                                                     spec.structure_seed);
    const SemiDualMapProblem* raw = prob.get();
    bundle.ot = raw;
    bundle.phi_eval = [raw](const Vec& theta) { return raw->transport_loss(theta); };
    bundle.oracle = std::move(prob);
  } else {
    throw ConfigError("unknown problem kind: " + spec.kind);
  }
  return bundle;
}

// ---------------------------------------------------------------------------
// trace emission

inline const std::vector<std::string>& trace_columns() {
  static const std::vector<std::string> cols{
      "iter",     "alpha_k", "eta_k", "step_kind", "grad_phi_norm_sq",
      "surrogate_grad_norm_sq", "phi", "D_k",       "r_k",
      "E_k",      "wall_time_s"};
  return cols;
}

inline std::string step_kind_name(char kind) {
  switch (kind) {
    case 'T': return "theta";
    case 'V': return "v";
    default: return "outer";
  }
}

inline void write_trace_row(CsvWriter& writer, const RunRecord& row) {
  writer.row({std::to_string(row.iter), csv_number(row.alpha_k), csv_number(row.eta_k),
              step_kind_name(row.step_kind), csv_number(row.grad_phi_norm_sq),
              csv_number(row.surrogate_grad_norm_sq), csv_number(row.phi),
              csv_number(row.d_k), csv_number(row.r_k), csv_number(row.e_k),
              csv_number(row.wall_time_s)});
}

// ---------------------------------------------------------------------------
// sweep expansion and the main runner

struct SweepPoint {
  std::string label = "base";
  std::optional<double> p;
  std::optional<double> m;
  std::optional<double> alpha_scale;
};

inline std::vector<SweepPoint> expand_sweep(const SweepSpec& sweep) {
  std::vector<SweepPoint> points{SweepPoint{}};
  auto cross = [&points](const std::vector<double>& values, const char* name,
                         auto assign) {
    if (values.empty()) return;
    std::vector<SweepPoint> next;
    for (const SweepPoint& base : points)
      for (double value : values) {
        SweepPoint p = base;
        assign(p, value);
        const std::string tag = std::string(name) + "=" + csv_number(value);
        p.label = (p.label == "base") ? tag : p.label + "_" + tag;
        next.push_back(std::move(p));
      }
    points = std::move(next);
  };
  cross(sweep.p_values, "p", [](SweepPoint& p, double v) { p.p = v; });
  cross(sweep.m_values, "m", [](SweepPoint& p, double v) { p.m = v; });
  cross(sweep.alpha_scale_values, "alpha_scale",
        [](SweepPoint& p, double v) { p.alpha_scale = v; });
  return points;
}

inline void parallel_for(int jobs, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1) {
    for (int j = 0; j < jobs; ++j) fn(j);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  const int workers = std::min(threads, jobs);
  pool.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&]() {
      for (int j = next.fetch_add(1); j < jobs; j = next.fetch_add(1)) fn(j);
    });
  for (auto& t : pool) t.join();
}

struct RunJobResult {
  std::string point_label;
  std::uint64_t seed = 0;
  std::string trace_path;
  RunSummary summary;
  double reported_phi = std::numeric_limits<double>::quiet_NaN();
  bool error = false;
  std::string error_message;
};

struct ExperimentResult {
  std::vector<RunJobResult> runs;
  std::string summary_path;
  int n_errors = 0;
};

inline SolverConfig build_solver_config(const ExperimentConfig& config,
                                        const SmoothnessSpec& spec,
                                        const SweepPoint& point, std::uint64_t seed) {
  ScheduleSpec sched = config.schedule;
  if (point.p) sched.p = *point.p;
  if (point.alpha_scale) sched.alpha_scale = *point.alpha_scale;
  SolverConfig solver;
  solver.algorithm = algorithm_from_name(config.solver.algorithm);
  solver.schedule = sched.build(spec);
  solver.loop_size_m =
      point.m ? static_cast<int>(*point.m) : config.solver.loop_size_m;
  solver.max_oracle_delta = config.solver.max_oracle_delta;
  solver.batch_size = config.solver.batch_size;
  solver.max_iters = config.solver.max_iters;
  solver.master_seed = seed;
  solver.fast_mode = config.solver.fast_mode;
  solver.divergence_guard = config.solver.divergence_guard;
  solver.trace_stride = config.solver.trace_stride;
  return solver;
}

inline ExperimentResult run_experiment(const ExperimentConfig& config, int threads = 1) {
  config.validate();
  std::filesystem::create_directories(config.out_dir);
  const ProblemBundle bundle = make_problem(config.problem);
  const SmoothnessSpec spec = bundle.oracle->smoothness();

  const std::vector<SweepPoint> points = expand_sweep(config.sweep);
  struct Job {
    SweepPoint point;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const SweepPoint& point : points)
    for (std::uint64_t seed : config.seeds) jobs.push_back({point, seed});

  ExperimentResult result;
  result.runs.resize(jobs.size());

  parallel_for(static_cast<int>(jobs.size()), threads, [&](int j) {
    const Job& job = jobs[static_cast<size_t>(j)];
    RunJobResult& out = result.runs[static_cast<size_t>(j)];
    out.point_label = job.point.label;
    out.seed = job.seed;
    out.trace_path = config.out_dir + "/trace_" + job.point.label + "_seed" +
                     std::to_string(job.seed) + ".csv";
    try {
      const SolverConfig solver = build_solver_config(config, spec, job.point, job.seed);
      CsvWriter writer(out.trace_path, trace_columns());
      out.summary = run(solver, *bundle.oracle,
                        [&writer](const RunRecord& row, const IterateState&) {
                          write_trace_row(writer, row);
                        });
      out.reported_phi = std::isnan(out.summary.final_phi) && bundle.phi_eval &&
                                 out.summary.final_state.theta.allFinite()
                             ? bundle.phi_eval(out.summary.final_state.theta)
                             : out.summary.final_phi;
    } catch (const std::exception& e) {
      out.error = true;
      out.error_message = e.what();
    }
  });

  result.summary_path = config.out_dir + "/summary.csv";
  CsvWriter summary(result.summary_path,
                    {"point", "seed", "iterations", "diverged", "final_phi",
                     "min_grad_phi_sq", "min_surrogate_sq", "error", "wall_time_s"});
  for (const RunJobResult& r : result.runs) {
    if (r.error) ++result.n_errors;
    summary.row({r.point_label, std::to_string(r.seed),
                 std::to_string(r.summary.iterations),
                 r.summary.diverged ? "1" : "0", csv_number(r.reported_phi),
                 csv_number(r.summary.min_grad_phi_sq),
                 csv_number(r.summary.min_surrogate_sq), r.error ? "1" : "0",
                 csv_number(r.summary.wall_time_s)});
  }
  return result;
}

// ---------------------------------------------------------------------------
// paired comparison: epoch loop size m against descent probability 1/(m+1),
// on matched gradient-update budgets and shared master seeds

struct CompareSeedRow {
  int m = 1;
  double p = 0.5;
  std::uint64_t seed = 0;
  double final_phi_esgda = 0.0;
  double final_phi_rsgda = 0.0;
  double mean_abs_phi_gap = 0.0;  // average |phi_E - phi_R| over checkpoints
};

struct ComparePoint {
  int m = 1;
  double p = 0.5;
  double mean_final_phi_esgda = 0.0;
  double mean_final_phi_rsgda = 0.0;
  double relative_gap = 0.0;
  double mean_trace_divergence = 0.0;
  std::vector<CompareSeedRow> per_seed;
};

inline std::vector<ComparePoint> compare_esgda_rsgda(const ExperimentConfig& config,
                                                     const std::vector<int>& m_list,
                                                     int threads = 1,
                                                     bool write_files = true) {
  config.validate();
  for (int m : m_list)
    if (m < 1) throw ConfigError("compare: loop sizes must be >= 1");
  const ProblemBundle bundle = make_problem(config.problem);
  const SmoothnessSpec spec = bundle.oracle->smoothness();
  if (!bundle.phi_eval) throw ConfigError("compare: problem has no phi evaluator");

  const int checkpoints = 32;
  const long budget = config.solver.max_iters;

  struct Job {
    int m;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (int m : m_list)
    for (std::uint64_t seed : config.seeds) jobs.push_back({m, seed});
  std::vector<CompareSeedRow> rows(jobs.size());

  parallel_for(static_cast<int>(jobs.size()), threads, [&](int j) {
    const Job& job = jobs[static_cast<size_t>(j)];
    const double p = 1.0 / (static_cast<double>(job.m) + 1.0);

    auto run_one = [&](Algorithm algorithm) {
      ScheduleSpec sched = config.schedule;
      sched.p = p;
      SolverConfig solver;
      solver.algorithm = algorithm;
      solver.schedule = sched.build(spec);
      solver.loop_size_m = job.m;
      solver.batch_size = config.solver.batch_size;
      solver.max_iters = budget;
      solver.master_seed = job.seed;
      solver.fast_mode = config.solver.fast_mode;
      solver.divergence_guard = config.solver.divergence_guard;
      solver.trace_stride = 1;

      std::vector<double> phis(static_cast<size_t>(checkpoints),
                               std::numeric_limits<double>::quiet_NaN());
      long next_checkpoint = 0;
      const RowSink sink = [&](const RunRecord& row, const IterateState& state) {
        while (next_checkpoint < checkpoints &&
               row.iter >= (next_checkpoint + 1) * budget / checkpoints) {
          phis[static_cast<size_t>(next_checkpoint)] = bundle.phi_eval(state.theta);
          ++next_checkpoint;
        }
      };
      const RunSummary summary = run(solver, *bundle.oracle, sink);
      const double final_phi = summary.final_state.theta.allFinite()
                                   ? bundle.phi_eval(summary.final_state.theta)
                                   : std::numeric_limits<double>::infinity();
      return std::make_pair(final_phi, phis);
    };

    const auto [phi_e, trace_e] = run_one(Algorithm::Esgda);
    const auto [phi_r, trace_r] = run_one(Algorithm::Rsgda);

    CompareSeedRow& row = rows[static_cast<size_t>(j)];
    row.m = job.m;
    row.p = p;
    row.seed = job.seed;
    row.final_phi_esgda = phi_e;
    row.final_phi_rsgda = phi_r;
    double gap = 0.0;
    int used = 0;
    for (int c = 0; c < checkpoints; ++c) {
      if (std::isnan(trace_e[static_cast<size_t>(c)]) ||
          std::isnan(trace_r[static_cast<size_t>(c)]))
        continue;
      gap += std::abs(trace_e[static_cast<size_t>(c)] - trace_r[static_cast<size_t>(c)]);
      ++used;
    }
    row.mean_abs_phi_gap = used > 0 ? gap / used : std::numeric_limits<double>::quiet_NaN();
  });

  std::vector<ComparePoint> points;
  for (int m : m_list) {
    ComparePoint point;
    point.m = m;
    point.p = 1.0 / (static_cast<double>(m) + 1.0);
    int count = 0;
    for (const CompareSeedRow& row : rows)
      if (row.m == m) {
        point.per_seed.push_back(row);
        point.mean_final_phi_esgda += row.final_phi_esgda;
        point.mean_final_phi_rsgda += row.final_phi_rsgda;
        point.mean_trace_divergence += row.mean_abs_phi_gap;
        ++count;
      }
    point.mean_final_phi_esgda /= count;
    point.mean_final_phi_rsgda /= count;
    point.mean_trace_divergence /= count;
    point.relative_gap =
        std::abs(point.mean_final_phi_esgda - point.mean_final_phi_rsgda) /
        std::max(std::abs(point.mean_final_phi_rsgda), 1e-12);
    points.push_back(std::move(point));
  }

  if (write_files) {
    std::filesystem::create_directories(config.out_dir);
    CsvWriter runs(config.out_dir + "/compare_runs.csv",
                   {"m", "p", "seed", "final_phi_esgda", "final_phi_rsgda",
                    "mean_abs_phi_gap"});
    for (const ComparePoint& point : points)
      for (const CompareSeedRow& row : point.per_seed)
        runs.row({std::to_string(row.m), csv_number(row.p), std::to_string(row.seed),
                  csv_number(row.final_phi_esgda), csv_number(row.final_phi_rsgda),
                  csv_number(row.mean_abs_phi_gap)});
    CsvWriter summary(config.out_dir + "/compare_summary.csv",
                      {"m", "p", "mean_final_phi_esgda", "mean_final_phi_rsgda",
                       "relative_gap", "mean_trace_divergence"});
    for (const ComparePoint& point : points)
      summary.row({std::to_string(point.m), csv_number(point.p),
                   csv_number(point.mean_final_phi_esgda),
                   csv_number(point.mean_final_phi_rsgda),
                   csv_number(point.relative_gap),
                   csv_number(point.mean_trace_divergence)});
  }
  return points;
}

// ---------------------------------------------------------------------------
// Sinkhorn subroutine-iteration sweep: learning curves per m_sin, summary
// ordered by mean final transport loss

struct MsinSeedRow {
  int msin = 1;
  std::uint64_t seed = 0;
  double final_loss = 0.0;
  bool sign_flipped = false;
};

struct MsinPoint {
  int msin = 1;
  double mean_final_loss = 0.0;
  std::vector<MsinSeedRow> per_seed;
};

inline std::vector<MsinPoint> sweep_sinkhorn_msin(const ExperimentConfig& config,
                                                  const std::vector<int>& msin_list,
                                                  int threads = 1,
                                                  bool write_files = true) {
  config.validate();
  if (msin_list.empty()) throw ConfigError("sweep-msin: empty m_sin list");
  const ProblemBundle bundle = make_problem(config.problem);
  if (!bundle.ot)
    throw ConfigError("sweep-msin: requires a semi-dual transport problem "
                      "(kind = ot_synth or ot_csv)");
  const SemiDualMapProblem& problem = *bundle.ot;
  if (config.solver.batch_size > problem.n_source())
    throw ConfigError("sweep-msin: batch exceeds the source cloud");
  const double alpha = config.schedule.alpha;
  if (!(alpha > 0.0))
    throw ConfigError("sweep-msin: set [schedule] alpha > 0 (descent step size)");

  const long steps = config.solver.max_iters;
  const int curve_points = 25;

  struct Job {
    int msin;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (int msin : msin_list)
    for (std::uint64_t seed : config.seeds) jobs.push_back({msin, seed});
  std::vector<MsinSeedRow> rows(jobs.size());
  std::vector<std::vector<std::pair<long, double>>> curves(jobs.size());
  std::vector<SinkhornLearningState> finals(jobs.size());

  parallel_for(static_cast<int>(jobs.size()), threads, [&](int j) {
    const Job& job = jobs[static_cast<size_t>(j)];
    RngStreams rng(job.seed);
    SinkhornLearningState state = sinkhorn_learning_init(problem);
    auto& curve = curves[static_cast<size_t>(j)];
    for (long k = 0; k < steps; ++k) {
      if (k % std::max<long>(1, steps / curve_points) == 0)
        curve.emplace_back(k, problem.transport_loss(state.theta));
      sinkhorn_learning_step(state, problem, job.msin, alpha, config.solver.batch_size,
                             rng);
    }
    const double final_loss = problem.transport_loss(state.theta);
    curve.emplace_back(steps, final_loss);
    rows[static_cast<size_t>(j)] =
        MsinSeedRow{job.msin, job.seed, final_loss, state.sign_flipped};
    finals[static_cast<size_t>(j)] = std::move(state);
  });

  std::vector<MsinPoint> points;
  for (int msin : msin_list) {
    MsinPoint point;
    point.msin = msin;
    int count = 0;
    for (const MsinSeedRow& row : rows)
      if (row.msin == msin) {
        point.per_seed.push_back(row);
        point.mean_final_loss += row.final_loss;
        ++count;
      }
    point.mean_final_loss /= count;
    points.push_back(std::move(point));
  }
  std::sort(points.begin(), points.end(),
            [](const MsinPoint& a, const MsinPoint& b) {
              return a.mean_final_loss < b.mean_final_loss;
            });

  if (write_files) {
    std::filesystem::create_directories(config.out_dir);
    for (size_t j = 0; j < jobs.size(); ++j) {
      const std::string path = config.out_dir + "/msin_curve_msin" +
                               std::to_string(jobs[j].msin) + "_seed" +
                               std::to_string(jobs[j].seed) + ".csv";
      CsvWriter writer(path, {"step", "transport_loss"});
      for (const auto& [step, loss] : curves[j])
        writer.row({std::to_string(step), csv_number(loss)});
      // final potentials/scalings for inspection
      const auto& st = finals[j];
      CsvWriter pots(config.out_dir + "/msin_potentials_msin" +
                         std::to_string(jobs[j].msin) + "_seed" +
                         std::to_string(jobs[j].seed) + ".csv",
                     {"side", "index", "potential", "scaling"});
      for (Eigen::Index i = 0; i < st.f.size(); ++i)
        pots.row({"source", std::to_string(i), csv_number(st.f[i]),
                  csv_number(std::exp(st.f[i] / problem.eps()))});
      for (Eigen::Index i = 0; i < st.g.size(); ++i)
        pots.row({"target", std::to_string(i), csv_number(st.g[i]),
                  csv_number(std::exp(st.g[i] / problem.eps()))});
    }
    CsvWriter summary(config.out_dir + "/msin_summary.csv",
                      {"msin", "mean_final_loss", "sign_flipped"});
    for (const MsinPoint& point : points)
      summary.row({std::to_string(point.msin), csv_number(point.mean_final_loss),
                   point.per_seed.front().sign_flipped ? "1" : "0"});
  }
  return points;
}

} // namespace saddle
