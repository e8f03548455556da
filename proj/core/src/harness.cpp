#include "hetreg/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>

#include "hetreg/alloc_counter.hpp"
#include "hetreg/csv.hpp"
#include "hetreg/threading.hpp"

namespace hetreg {

namespace {

std::size_t default_samples(const ScenarioSpec &s) {
    switch (s.kind) {
    case ScenarioSpec::Kind::bivariate: return 1024;
    case ScenarioSpec::Kind::sinusoid: return 50000;
    case ScenarioSpec::Kind::multivariate: return multivariate_sample_count(s.dim);
    case ScenarioSpec::Kind::csv: return 0;
    }
    return 0;
}

} // namespace

PreparedScenario prepare_scenario(const ScenarioSpec &spec, std::uint64_t seed) {
    const std::size_t n = spec.n_samples ? spec.n_samples : default_samples(spec);
    PreparedScenario out;
    RegressionDataset full;
    switch (spec.kind) {
    case ScenarioSpec::Kind::bivariate: {
        out.bivariate = gen_bivariate_problem(seed);
        full = sample_bivariate_dataset(*out.bivariate, n, seed ^ 0xb1a5edULL);
        break;
    }
    case ScenarioSpec::Kind::sinusoid:
        full = gen_sinusoid(spec.variant, n, seed);
        break;
    case ScenarioSpec::Kind::multivariate:
        full = gen_multivariate(spec.dim, n, seed);
        break;
    case ScenarioSpec::Kind::csv: {
        const Matrix table = load_csv(spec.csv_path, spec.has_header);
        full = feature_split(table, spec.feature_fraction, seed);
        if (spec.do_standardize) full = standardize(full).ds;
        break;
    }
    }
    auto [train_ds, test_ds] = train_test_split(full, spec.test_fraction, seed);
    out.train_ds = std::move(train_ds);
    out.test_ds = std::move(test_ds);
    return out;
}

namespace {

struct RepetitionData {
    PreparedScenario scenario;
    std::map<std::size_t, TrainLabels> pseudo_by_k; // keyed by neighborhood size
    std::optional<TrainLabels> ground_truth;
};

const TrainLabels *labels_for(const RepetitionData &rep, const RunSpec &run) {
    switch (run.labels) {
    case LabelSource::none: return nullptr;
    case LabelSource::ground_truth: return &*rep.ground_truth;
    case LabelSource::pseudo: {
        const std::size_t k = run.train.pseudo_k
                                  ? run.train.pseudo_k
                                  : default_pseudo_k(rep.scenario.train_ds.target_dim());
        return &rep.pseudo_by_k.at(k);
    }
    }
    return nullptr;
}

struct TrajectoryRow {
    std::size_t step;
    Vector mean;
    Matrix cov;
    double kl, w2;
};

void write_trajectory_csv(const std::string &path, const std::vector<TrajectoryRow> &rows) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << "step,mu0,mu1,c00,c01,c11,metric_kl,metric_w2\n";
    char buf[40];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        f << ',' << buf;
    };
    for (const TrajectoryRow &r : rows) {
        f << r.step;
        put(r.mean[0]);
        put(r.mean[1]);
        put(r.cov(0, 0));
        put(r.cov(0, 1));
        put(r.cov(1, 1));
        put(r.kl);
        put(r.w2);
        f << "\n";
    }
    if (!f.good()) throw IoError("failed writing " + path);
}

struct RunTask {
    std::size_t run_index;
    std::size_t repetition;
};

} // namespace

int run_training_config(const RunConfig &cfg, std::ostream &out) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.output_dir);

    // Data, ground-truth labels and pseudo-labels are prepared once per
    // repetition and shared read-only by every objective.
    std::vector<RepetitionData> reps(cfg.repetitions);
    for (std::size_t r = 0; r < cfg.repetitions; ++r) {
        RepetitionData &rep = reps[r];
        rep.scenario = prepare_scenario(cfg.scenario, cfg.seed + 1000 * r);
        bool want_gt = false;
        std::vector<std::size_t> ks;
        for (const RunSpec &run : cfg.runs) {
            if (run.labels == LabelSource::ground_truth) want_gt = true;
            if (run.labels == LabelSource::pseudo)
                ks.push_back(run.train.pseudo_k
                                 ? run.train.pseudo_k
                                 : default_pseudo_k(rep.scenario.train_ds.target_dim()));
        }
        if (want_gt) rep.ground_truth = labels_from_ground_truth(rep.scenario.train_ds);
        std::sort(ks.begin(), ks.end());
        ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
        for (std::size_t k : ks)
            rep.pseudo_by_k.emplace(k, labels_from_pseudo(pseudo_labels(rep.scenario.train_ds, k)));
    }

    std::vector<RunTask> tasks;
    for (std::size_t i = 0; i < cfg.runs.size(); ++i)
        for (std::size_t r = 0; r < cfg.repetitions; ++r) tasks.push_back({i, r});

    std::atomic<std::size_t> next{0};
    std::atomic<bool> any_diverged{false};
    std::atomic<bool> any_failed{false};
    std::mutex out_mutex;
    std::vector<MetricsLog> logs(tasks.size());

    auto run_task = [&](std::size_t t) {
        {
            const RunTask &task = tasks[t];
            const RunSpec &run = cfg.runs[task.run_index];
            const RepetitionData &rep = reps[task.repetition];

            TrainSpec spec = run.train;
            spec.seed = cfg.seed + task.repetition;

            TrainOptions options;
            options.timing = cfg.timing;
            options.eval_ds = &rep.scenario.test_ds;

            std::vector<TrajectoryRow> trajectory;
            if (rep.scenario.bivariate) {
                const Gaussian &target = rep.scenario.bivariate->target;
                options.initial = make_predictor(rep.scenario.train_ds, spec);
                // Problem-1 estimators start at the drawn init mean and the
                // identity covariance; constant zero input makes the final
                // bias the whole prediction.
                options.initial->mean.biases.back() = rep.scenario.bivariate->init.mean;
                options.on_step = [&trajectory, &target](std::size_t step, const Predictor &p) {
                    const Vector x(1, 0.0);
                    const Gaussian pred = p.predict(x);
                    TrajectoryRow row;
                    row.step = step;
                    row.mean = pred.mean;
                    row.cov = pred.cov.matrix();
                    double kl = std::numeric_limits<double>::quiet_NaN();
                    try {
                        kl = kl_divergence(target, pred);
                    } catch (const Error &) {
                    }
                    row.kl = kl;
                    row.w2 = w2_exact(target, pred);
                    trajectory.push_back(std::move(row));
                };
            }

            TrainResult result =
                train(rep.scenario.train_ds, labels_for(rep, run), spec, options);
            logs[t] = result.log;
            if (result.log.diverged) any_diverged.store(true);

            const std::string tag = run.name + "_rep" + std::to_string(task.repetition);
            write_metrics_csv(cfg.output_dir + "/metrics_" + tag + ".csv", result.log);
            if (!trajectory.empty())
                write_trajectory_csv(cfg.output_dir + "/trajectory_" + tag + ".csv", trajectory);
            save_checkpoint(cfg.output_dir + "/checkpoint_" + tag + ".txt",
                            result.predictor.mean_cfg, result.predictor.mean,
                            result.predictor.cov_cfg, result.predictor.cov);

            std::lock_guard<std::mutex> lock(out_mutex);
            out << "run " << tag << (result.log.diverged ? " diverged at epoch " : " done")
                << (result.log.diverged ? std::to_string(result.log.diverged_epoch) : "");
            if (!result.log.epochs.empty()) {
                const MetricsRecord &m = result.log.epochs.back().record;
                out << "  mse=" << m.mse << " nll=" << m.nll << " kl=" << m.kl
                    << " w2=" << m.w2;
            }
            out << "\n";
        }
    };

    auto worker = [&]() {
        for (;;) {
            const std::size_t t = next.fetch_add(1);
            if (t >= tasks.size()) return;
            try {
                run_task(t);
            } catch (const std::exception &e) {
                any_failed.store(true);
                std::lock_guard<std::mutex> lock(out_mutex);
                out << "run " << cfg.runs[tasks[t].run_index].name << "_rep"
                    << tasks[t].repetition << " failed: " << e.what() << "\n";
            }
        }
    };

    const std::size_t n_workers = std::min(worker_count(), tasks.size());
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto &th : pool) th.join();

    // Report assembly happens after all runs complete, single-threaded.
    // Tasks are run-major, so run i's first repetition is i * repetitions.
    const char *metric_names[4] = {"mse", "nll", "kl", "w2"};
    for (int metric = 0; metric < 4; ++metric) {
        std::vector<PlotSeries> series;
        for (std::size_t i = 0; i < cfg.runs.size(); ++i) {
            PlotSeries s;
            s.name = cfg.runs[i].name;
            const MetricsLog &log = logs[i * cfg.repetitions];
            for (const EpochMetrics &em : log.epochs) {
                const MetricsRecord &m = em.record;
                const double v = metric == 0 ? m.mse : metric == 1 ? m.nll : metric == 2 ? m.kl
                                                                                         : m.w2;
                if (std::isfinite(v)) s.points.emplace_back(static_cast<double>(em.epoch), v);
            }
            if (!s.points.empty()) series.push_back(std::move(s));
        }
        if (!series.empty())
            write_polyline_svg(cfg.output_dir + "/plot_" + metric_names[metric] + ".svg",
                               metric_names[metric], series);
    }

    return (any_diverged.load() || any_failed.load()) ? 3 : 0;
}

namespace {

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

std::vector<BenchRecord> run_bench(const std::vector<std::size_t> &dims,
                                   const std::vector<LossKind> &losses,
                                   const BenchOptions &options) {
    std::vector<BenchRecord> records;
    for (std::size_t dim : dims) {
        RegressionDataset ds = gen_multivariate(dim, options.rows, options.seed);
        const TrainLabels labels = labels_from_ground_truth(ds);

        for (const LossKind &loss : losses) {
            TrainSpec spec;
            spec.loss = loss;
            spec.mean_arch.hidden_layers = spec.cov_arch.hidden_layers = options.hidden_layers;
            spec.mean_arch.hidden_width = spec.cov_arch.hidden_width = options.hidden_width;
            spec.mean_arch.activation = spec.cov_arch.activation = Activation::elu;
            spec.seed = options.seed;
            Predictor p = make_predictor(ds, spec);

            AdamW opt(AdamWConfig{.lr = 1e-3});
            std::vector<std::size_t> slots;
            for (const auto &params : {std::cref(p.mean), std::cref(p.cov)})
                for (std::size_t l = 0; l < params.get().weights.size(); ++l) {
                    slots.push_back(opt.register_tensor(params.get().weights[l].size()));
                    slots.push_back(opt.register_tensor(params.get().biases[l].size()));
                }

            std::mt19937_64 batch_rng(options.seed ^ 0xbe9c4ULL);
            std::uniform_int_distribution<std::size_t> pick(0, ds.size() - 1);
            std::vector<std::size_t> rows(options.batch);

            BenchRecord rec;
            rec.loss = loss;
            rec.dim = dim;
            std::vector<double> step_ms;
            step_ms.reserve(options.measured_steps);
            std::uint64_t peak = 0;
            std::uint64_t eig_calls = 0;

            const std::size_t total = options.warmup_steps + options.measured_steps;
            for (std::size_t step = 0; step < total; ++step) {
                for (std::size_t &r : rows) r = pick(batch_rng);
                LossBatch batch = make_batch(ds, &labels, rows);

                const bool measured = step >= options.warmup_steps;
                instrument::reset_eig_calls();
                alloctrack::PeakScope peak_scope;
                const auto t0 = std::chrono::steady_clock::now();

                ad::Tape tape;
                NetRefs mean_net = bind_params(tape, p.mean_cfg, p.mean);
                NetRefs cov_net = bind_params(tape, p.cov_cfg, p.cov);
                ad::Ref l = build_loss(tape, loss, batch, mean_net, cov_net, p.head);
                if (!std::isfinite(tape.value_scalar(l)))
                    throw NonFinite("bench step diverged; lower the benchmark learning rate");
                tape.backward(l);
                opt.begin_step();
                std::size_t s = 0;
                for (std::size_t layer = 0; layer < p.mean.weights.size(); ++layer) {
                    opt.update(slots[s++], p.mean.weights[layer].data(),
                               tape.grad(mean_net.weights[layer]));
                    opt.update(slots[s++], p.mean.biases[layer], tape.grad(mean_net.biases[layer]));
                }
                for (std::size_t layer = 0; layer < p.cov.weights.size(); ++layer) {
                    opt.update(slots[s++], p.cov.weights[layer].data(),
                               tape.grad(cov_net.weights[layer]));
                    opt.update(slots[s++], p.cov.biases[layer], tape.grad(cov_net.biases[layer]));
                }

                const auto t1 = std::chrono::steady_clock::now();
                if (measured) {
                    step_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
                    peak = std::max<std::uint64_t>(peak,
                                                   static_cast<std::uint64_t>(peak_scope.delta()));
                    eig_calls += instrument::eig_calls();
                }
            }

            rec.step_ms_mean =
                std::accumulate(step_ms.begin(), step_ms.end(), 0.0) / step_ms.size();
            double var = 0.0;
            for (double v : step_ms) var += (v - rec.step_ms_mean) * (v - rec.step_ms_mean);
            rec.step_ms_std = std::sqrt(var / step_ms.size());
            rec.step_ms_median = median_of(step_ms);
            rec.peak_bytes = peak;
            rec.eig_calls = eig_calls;
            records.push_back(rec);
        }
    }
    return records;
}

void write_bench_csv(const std::string &path, const std::vector<BenchRecord> &records) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << "loss_kind,dim,step_ms_mean,step_ms_std,step_ms_median,peak_bytes,eig_calls\n";
    char buf[40];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        f << ',' << buf;
    };
    for (const BenchRecord &r : records) {
        f << r.loss.code() << ',' << r.dim;
        put(r.step_ms_mean);
        put(r.step_ms_std);
        put(r.step_ms_median);
        f << ',' << r.peak_bytes << ',' << r.eig_calls << "\n";
    }
    if (!f.good()) throw IoError("failed writing " + path);
}

void write_polyline_svg(const std::string &path, const std::string &title,
                        const std::vector<PlotSeries> &series) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path + " for writing");

    const double width = 640, height = 420, margin = 50;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const PlotSeries &s : series)
        for (auto [x, y] : s.points) {
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    if (!(xmax > xmin)) xmax = xmin + 1;
    if (!(ymax > ymin)) ymax = ymin + 1;

    auto sx = [&](double x) { return margin + (x - xmin) / (xmax - xmin) * (width - 2 * margin); };
    auto sy = [&](double y) {
        return height - margin - (y - ymin) / (ymax - ymin) * (height - 2 * margin);
    };

    static const char *colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b"};
    f << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
      << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
    f << "<text x='" << width / 2 << "' y='20' text-anchor='middle' font-family='sans-serif'>"
      << title << "</text>\n";
    f << "<line x1='" << margin << "' y1='" << height - margin << "' x2='" << width - margin
      << "' y2='" << height - margin << "' stroke='black'/>\n";
    f << "<line x1='" << margin << "' y1='" << margin << "' x2='" << margin << "' y2='"
      << height - margin << "' stroke='black'/>\n";

    for (std::size_t i = 0; i < series.size(); ++i) {
        const char *color = colors[i % 6];
        f << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='";
        for (auto [x, y] : series[i].points) f << sx(x) << ',' << sy(y) << ' ';
        f << "'/>\n";
        f << "<text x='" << width - margin + 4 << "' y='" << margin + 16.0 * i
          << "' font-size='11' font-family='sans-serif' fill='" << color << "'>"
          << series[i].name << "</text>\n";
    }
    f << "</svg>\n";
    if (!f.good()) throw IoError("failed writing " + path);
}

} // namespace hetreg
