#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "hetreg/csv.hpp"
#include "hetreg/harness.hpp"
#include "hetreg/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPropertyFailure = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitDivergence = 3;

std::vector<std::size_t> parse_dims(const std::string &csv) {
    std::vector<std::size_t> dims;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const long v = std::stol(item);
        if (v < 1 || v > 64) throw hetreg::Error("bench dims must be in [1, 64]");
        dims.push_back(static_cast<std::size_t>(v));
    }
    return dims;
}

std::vector<hetreg::LossKind> parse_losses(const std::string &csv) {
    std::vector<hetreg::LossKind> losses;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto kind = hetreg::loss_kind_from_string(item);
        if (!kind) throw hetreg::Error("unknown loss '" + item + "'");
        losses.push_back(hetreg::LossKind{*kind, 0.5});
    }
    return losses;
}

int cmd_verify(const std::string &filter) {
    const auto results = hetreg::verify::run_properties(filter);
    if (results.empty()) {
        std::cerr << "no properties match filter '" << filter << "'\n";
        return kExitConfigError;
    }
    return hetreg::verify::report(std::cout, results) ? kExitOk : kExitPropertyFailure;
}

int cmd_train(const std::string &config_path, bool timing_override) {
    hetreg::RunConfig cfg = hetreg::parse_config_file(config_path);
    if (timing_override) cfg.timing = true;
    return hetreg::run_training_config(cfg, std::cout);
}

int cmd_bench(const std::string &dims_csv, const std::string &losses_csv, std::size_t steps,
              std::size_t warmup, std::size_t batch, std::uint64_t seed,
              const std::string &out_path) {
    hetreg::BenchOptions options;
    options.measured_steps = steps;
    options.warmup_steps = warmup;
    options.batch = batch;
    options.seed = seed;
    const auto records = hetreg::run_bench(parse_dims(dims_csv), parse_losses(losses_csv), options);
    hetreg::write_bench_csv(out_path, records);
    std::cout << "loss,dim,median_ms,mean_ms,peak_bytes,eig_calls\n";
    for (const auto &r : records)
        std::cout << to_string(r.loss.kind) << ',' << r.dim << ',' << r.step_ms_median << ','
                  << r.step_ms_mean << ',' << r.peak_bytes << ',' << r.eig_calls << "\n";
    std::cout << "wrote " << out_path << "\n";
    return kExitOk;
}

int cmd_pseudolabel(const std::string &csv_path, bool has_header, double feature_fraction,
                    const std::string &scenario, std::size_t dim, int variant,
                    std::size_t n_samples, std::size_t k, std::uint64_t seed,
                    const std::string &out_path, bool check_brute_force) {
    hetreg::RegressionDataset ds;
    if (!csv_path.empty()) {
        const hetreg::Matrix table = hetreg::load_csv(csv_path, has_header);
        ds = hetreg::feature_split(table, feature_fraction, seed);
    } else if (scenario == "sinusoid") {
        ds = hetreg::gen_sinusoid(variant, n_samples ? n_samples : 50000, seed);
    } else if (scenario == "multivariate") {
        ds = hetreg::gen_multivariate(dim, n_samples, seed);
    } else {
        throw hetreg::Error("pseudolabel needs --csv or --scenario sinusoid|multivariate");
    }

    if (k == 0) k = hetreg::default_pseudo_k(ds.target_dim());
    const hetreg::PseudoLabelSet labels = hetreg::pseudo_labels(ds, k);
    hetreg::export_labels(labels, out_path);

    double mean_trace = 0.0;
    for (const auto &row : labels.rows) mean_trace += row.cov.trace();
    mean_trace /= static_cast<double>(labels.size());
    std::cout << "rows=" << labels.size() << " k=" << k << " mean_trace=" << mean_trace
              << " wrote " << out_path << "\n";

    if (check_brute_force) {
        const hetreg::PseudoLabelSet ref = hetreg::pseudo_labels_reference(ds, k);
        for (std::size_t r = 0; r < labels.size(); ++r) {
            const bool same =
                labels.rows[r].neighbors == ref.rows[r].neighbors &&
                labels.rows[r].mean == ref.rows[r].mean &&
                labels.rows[r].cov.matrix().data() == ref.rows[r].cov.matrix().data();
            if (!same) {
                std::cerr << "brute-force mismatch at row " << r << "\n";
                return kExitPropertyFailure;
            }
        }
        std::cout << "brute-force cross-check passed (" << labels.size() << " rows)\n";
    }
    return kExitOk;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"hetreg: self-supervised heteroscedastic regression toolkit"};
    app.require_subcommand(1);

    auto *verify = app.add_subcommand("verify", "run the property suites and report each one");
    std::string filter;
    verify->add_option("--filter", filter, "only properties whose module/name contains this");

    auto *train = app.add_subcommand("train", "train the configured loss grid");
    std::string config_path;
    bool timing = false;
    bool print_schema = false;
    train->add_option("--config", config_path, "run configuration file");
    train->add_flag("--timing", timing, "record per-epoch mean step time (breaks rerun "
                                        "byte-identity of the metrics CSVs)");
    train->add_flag("--print-schema", print_schema, "print the config schema and exit");

    auto *bench = app.add_subcommand("bench", "per-step timing/allocation benchmark");
    std::string dims_csv = "4,8,16,32";
    std::string losses_csv = "nll_full,nll_diag,beta_nll,faithful,kl_calibrated,w2_bound";
    std::size_t steps = 200, warmup = 50, batch = 64;
    std::uint64_t bench_seed = 1;
    std::string bench_out = "bench.csv";
    bench->add_option("--dims", dims_csv, "comma-separated target dimensionalities (<= 64)");
    bench->add_option("--losses", losses_csv, "comma-separated loss kinds");
    bench->add_option("--steps", steps, "measured steps per cell (after warm-up)");
    bench->add_option("--warmup", warmup, "warm-up steps per cell");
    bench->add_option("--batch", batch, "minibatch size");
    bench->add_option("--seed", bench_seed, "data/init seed");
    bench->add_option("--out", bench_out, "output CSV path");

    auto *pseudo = app.add_subcommand("pseudolabel", "generate covariance pseudo-labels");
    std::string pl_csv, pl_scenario, pl_out = "labels.csv";
    bool pl_header = true, pl_check = false;
    double pl_fraction = 0.25;
    std::size_t pl_dim = 8, pl_n = 0, pl_k = 0;
    int pl_variant = 1;
    std::uint64_t pl_seed = 1;
    pseudo->add_option("--csv", pl_csv, "numeric CSV; feature-split into inputs/targets");
    pseudo->add_flag("--has-header,!--no-header", pl_header, "CSV carries a header row");
    pseudo->add_option("--feature-fraction", pl_fraction, "observation column fraction");
    pseudo->add_option("--scenario", pl_scenario, "sinusoid | multivariate");
    pseudo->add_option("--dim", pl_dim, "multivariate dimensionality");
    pseudo->add_option("--variant", pl_variant, "sinusoid variant (1..3)");
    pseudo->add_option("--n", pl_n, "sample count (0 = scenario default)");
    pseudo->add_option("--k", pl_k, "neighborhood size (0 = 10x target dim)");
    pseudo->add_option("--seed", pl_seed, "generator seed");
    pseudo->add_option("--out", pl_out, "output CSV path");
    pseudo->add_flag("--check-brute-force", pl_check,
                     "cross-check against the naive reference and fail on any mismatch");

    CLI11_PARSE(app, argc, argv);

    try {
        if (verify->parsed()) return cmd_verify(filter);
        if (train->parsed()) {
            if (print_schema) {
                std::cout << hetreg::config_schema();
                return kExitOk;
            }
            if (config_path.empty()) {
                std::cerr << "train needs --config (or --print-schema)\n";
                return kExitConfigError;
            }
            return cmd_train(config_path, timing);
        }
        if (bench->parsed())
            return cmd_bench(dims_csv, losses_csv, steps, warmup, batch, bench_seed, bench_out);
        if (pseudo->parsed())
            return cmd_pseudolabel(pl_csv, pl_header, pl_fraction, pl_scenario, pl_dim,
                                   pl_variant, pl_n, pl_k, pl_seed, pl_out, pl_check);
    } catch (const hetreg::ConfigError &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const hetreg::ParseError &e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const hetreg::NonFinite &e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const hetreg::Error &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfigError;
    }
    return kExitOk;
}
