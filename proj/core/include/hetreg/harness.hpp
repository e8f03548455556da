#pragma once

#include <iosfwd>

#include "hetreg/config.hpp"
#include "hetreg/datasets.hpp"

namespace hetreg {

/// One repetition's data: a train/test split plus, for the bivariate study,
/// the underlying problem instance.
struct PreparedScenario {
    RegressionDataset train_ds;
    RegressionDataset test_ds;
    std::optional<BivariateProblem> bivariate;
};

PreparedScenario prepare_scenario(const ScenarioSpec &spec, std::uint64_t seed);

/// Executes the full loss grid: repetitions x losses over a worker pool
/// (HETREG_THREADS caps it), then writes metrics CSVs, trajectory CSVs for
/// the bivariate study, checkpoints and best-effort SVG plots.
/// Returns 0 on success, 3 when any run diverged (partial logs retained).
int run_training_config(const RunConfig &cfg, std::ostream &out);

struct BenchRecord {
    LossKind loss;
    std::size_t dim = 0;
    double step_ms_mean = 0.0;
    double step_ms_std = 0.0;
    double step_ms_median = 0.0;
    std::uint64_t peak_bytes = 0;
    std::uint64_t eig_calls = 0; // eigendecomposition/root calls inside the step loop
};

struct BenchOptions {
    std::size_t warmup_steps = 50;
    std::size_t measured_steps = 200;
    std::size_t batch = 64;
    std::size_t rows = 1024;
    std::uint64_t seed = 1;
    std::size_t hidden_layers = 2;
    std::size_t hidden_width = 64;
};

/// Median/mean/std of per-step wall time with an instrumented allocator and
/// the eig-call counter sampled around the step loop.
std::vector<BenchRecord> run_bench(const std::vector<std::size_t> &dims,
                                   const std::vector<LossKind> &losses,
                                   const BenchOptions &options = {});

/// Columns: loss_kind,dim,step_ms_mean,step_ms_std,step_ms_median,peak_bytes,eig_calls
void write_bench_csv(const std::string &path, const std::vector<BenchRecord> &records);

/// Minimal polyline plot; one series per (name, points) pair.
struct PlotSeries {
    std::string name;
    std::vector<std::pair<double, double>> points;
};
void write_polyline_svg(const std::string &path, const std::string &title,
                        const std::vector<PlotSeries> &series);

} // namespace hetreg
