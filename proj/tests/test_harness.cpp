#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hetreg/csv.hpp"
#include "hetreg/harness.hpp"

using namespace hetreg;

TEST_CASE("prepare_scenario shapes for each kind") {
    ScenarioSpec sinusoid;
    sinusoid.kind = ScenarioSpec::Kind::sinusoid;
    sinusoid.variant = 2;
    sinusoid.n_samples = 200;
    const PreparedScenario s = prepare_scenario(sinusoid, 7);
    CHECK(s.train_ds.size() == 160);
    CHECK(s.test_ds.size() == 40);
    CHECK(s.train_ds.ground_truth.has_value());
    CHECK(!s.bivariate.has_value());

    ScenarioSpec bivariate;
    bivariate.kind = ScenarioSpec::Kind::bivariate;
    bivariate.n_samples = 100;
    const PreparedScenario b = prepare_scenario(bivariate, 7);
    CHECK(b.bivariate.has_value());
    CHECK(b.train_ds.target_dim() == 2);
    CHECK(b.train_ds.input_dim() == 1);
}

TEST_CASE("csv scenario goes through feature split and standardization") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "hetreg_harness_test";
    fs::create_directories(dir);
    const std::string data_path = (dir / "table.csv").string();
    {
        std::ofstream f(data_path);
        f << "a,b,c,d\n";
        std::mt19937_64 rng(3);
        std::normal_distribution<double> normal(5.0, 2.0);
        for (int r = 0; r < 50; ++r)
            f << normal(rng) << ',' << normal(rng) << ',' << normal(rng) << ','
              << normal(rng) << "\n";
    }
    ScenarioSpec csv;
    csv.kind = ScenarioSpec::Kind::csv;
    csv.csv_path = data_path;
    csv.test_fraction = 0.2;
    const PreparedScenario s = prepare_scenario(csv, 11);
    CHECK(s.train_ds.input_dim() == 1);
    CHECK(s.train_ds.target_dim() == 3);
    CHECK(s.train_ds.size() == 40);
    CHECK(!s.train_ds.ground_truth.has_value());
}

TEST_CASE("run_bench emits one record per (dim, loss) cell") {
    BenchOptions options;
    options.warmup_steps = 2;
    options.measured_steps = 6;
    options.batch = 16;
    options.rows = 64;
    options.hidden_layers = 1;
    options.hidden_width = 8;
    const std::vector<LossKind> losses = {LossKind::nll_diag(), LossKind::w2_bound()};
    const auto records = run_bench({2, 4}, losses, options);
    REQUIRE(records.size() == 4);
    for (const BenchRecord &r : records) {
        CHECK(r.step_ms_median > 0.0);
        CHECK(r.eig_calls == 0); // no eigendecompositions inside any step loop
    }

    namespace fs = std::filesystem;
    const std::string path =
        (fs::temp_directory_path() / "hetreg_bench_rt.csv").string();
    write_bench_csv(path, records);
    const Matrix m = load_csv(path, true);
    CHECK(m.rows() == 4);
    CHECK(m.cols() == 7);
}

TEST_CASE("run_training_config writes metrics, trajectory and plots") {
    namespace fs = std::filesystem;
    const fs::path out = fs::temp_directory_path() / "hetreg_harness_run";
    fs::remove_all(out);

    RunConfig cfg = parse_config_text(R"(
[run]
repetitions = 1
seed = 4
[scenario]
kind = bivariate
n_samples = 128
[loss.w2_bound]
epochs = 50
[loss.nll_full]
epochs = 50
)");
    cfg.output_dir = out.string();
    std::ostringstream log;
    const int rc = run_training_config(cfg, log);
    CHECK(rc == 0);
    CHECK(fs::exists(out / "metrics_w2_bound_rep0.csv"));
    CHECK(fs::exists(out / "metrics_nll_full_rep0.csv"));
    CHECK(fs::exists(out / "trajectory_w2_bound_rep0.csv"));
    CHECK(fs::exists(out / "checkpoint_w2_bound_rep0.txt"));
    CHECK(fs::exists(out / "plot_mse.svg"));

    const Matrix trajectory = load_csv((out / "trajectory_w2_bound_rep0.csv").string(), true);
    CHECK(trajectory.rows() == 50); // one row per full-batch step
    CHECK(trajectory.cols() == 8);

    // zero-epoch rerun produces header-only metrics
    RunConfig zero = cfg;
    zero.output_dir = (out / "zero").string();
    for (RunSpec &run : zero.runs) run.train.epochs = 0;
    std::ostringstream log2;
    CHECK(run_training_config(zero, log2) == 0);
    std::ifstream header_only((fs::path(zero.output_dir) / "metrics_w2_bound_rep0.csv"));
    std::string first_line, second_line;
    std::getline(header_only, first_line);
    CHECK(first_line == "epoch,loss_kind,schedule,mse,nll,kl,w2,step_time_ms,peak_bytes");
    CHECK(!std::getline(header_only, second_line));
}

TEST_CASE("polyline svg is produced for simple series") {
    namespace fs = std::filesystem;
    const std::string path = (fs::temp_directory_path() / "hetreg_plot.svg").string();
    write_polyline_svg(path, "test",
                       {{"a", {{0.0, 1.0}, {1.0, 2.0}, {2.0, 0.5}}},
                        {"b", {{0.0, 2.0}, {1.0, 1.0}}}});
    std::ifstream f(path);
    std::stringstream buf;
    buf << f.rdbuf();
    CHECK(buf.str().find("<svg") != std::string::npos);
    CHECK(buf.str().find("polyline") != std::string::npos);
}
