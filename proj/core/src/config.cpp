#include "hetreg/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace hetreg {

const char *to_string(ScenarioSpec::Kind kind) {
    switch (kind) {
    case ScenarioSpec::Kind::bivariate: return "bivariate";
    case ScenarioSpec::Kind::sinusoid: return "sinusoid";
    case ScenarioSpec::Kind::multivariate: return "multivariate";
    case ScenarioSpec::Kind::csv: return "csv";
    }
    return "?";
}

namespace {

std::string trim(const std::string &s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    std::size_t e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

double parse_double(const std::string &v, std::size_t line) {
    char *end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size())
        throw ConfigError(line, "expected a number, got '" + v + "'");
    return x;
}

std::size_t parse_count(const std::string &v, std::size_t line) {
    const double x = parse_double(v, line);
    if (x < 0 || x != static_cast<double>(static_cast<std::size_t>(x)))
        throw ConfigError(line, "expected a nonnegative integer, got '" + v + "'");
    return static_cast<std::size_t>(x);
}

bool parse_bool(const std::string &v, std::size_t line) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(line, "expected true/false, got '" + v + "'");
}

LossKind::Kind parse_loss_kind(const std::string &v, std::size_t line) {
    if (auto k = loss_kind_from_string(v)) return *k;
    throw ConfigError(line, "unknown loss kind '" + v + "'");
}

void apply_run_key(RunSpec &run, const std::string &key, const std::string &value,
                   std::size_t line) {
    TrainSpec &t = run.train;
    if (key == "epochs") {
        t.epochs = parse_count(value, line);
        run.epochs_set = true;
    } else if (key == "lr") {
        t.lr = parse_double(value, line);
        run.lr_set = true;
    } else if (key == "batch") {
        t.batch = parse_count(value, line);
        run.batch_set = true;
    } else if (key == "hidden_layers") {
        t.mean_arch.hidden_layers = t.cov_arch.hidden_layers = parse_count(value, line);
    } else if (key == "hidden_width") {
        t.mean_arch.hidden_width = t.cov_arch.hidden_width = parse_count(value, line);
    } else if (key == "activation") {
        if (value == "tanh")
            t.mean_arch.activation = t.cov_arch.activation = Activation::tanh;
        else if (value == "elu")
            t.mean_arch.activation = t.cov_arch.activation = Activation::elu;
        else
            throw ConfigError(line, "activation must be tanh or elu");
    } else if (key == "schedule") {
        if (value == "standard")
            t.schedule = Schedule::standard();
        else if (value == "warmup")
            t.schedule.kind = Schedule::Kind::warmup;
        else if (value == "hybrid")
            t.schedule.kind = Schedule::Kind::hybrid;
        else
            throw ConfigError(line, "schedule must be standard, warmup or hybrid");
    } else if (key == "warmup_fraction") {
        const double f = parse_double(value, line);
        if (!(f > 0.0 && f < 1.0)) throw ConfigError(line, "warmup_fraction must be in (0,1)");
        t.schedule.mean_only_fraction = f;
    } else if (key == "switch_epoch") {
        t.schedule.switch_epoch = parse_count(value, line);
    } else if (key == "then") {
        t.schedule.then = LossKind{parse_loss_kind(value, line), 0.5};
    } else if (key == "beta") {
        const double b = parse_double(value, line);
        if (!(b >= 0.0 && b <= 1.0)) throw ConfigError(line, "beta must be in [0,1]");
        t.loss.beta = b;
    } else if (key == "pseudo_k") {
        t.pseudo_k = parse_count(value, line);
    } else if (key == "labels") {
        run.labels_set = true;
        if (value == "pseudo")
            run.labels = LabelSource::pseudo;
        else if (value == "ground_truth")
            run.labels = LabelSource::ground_truth;
        else if (value == "none")
            run.labels = LabelSource::none;
        else
            throw ConfigError(line, "labels must be pseudo, ground_truth or none");
    } else {
        throw ConfigError(line, "unknown loss key '" + key + "'");
    }
}

void apply_scenario_key(ScenarioSpec &s, const std::string &key, const std::string &value,
                        std::size_t line) {
    if (key == "kind") {
        if (value == "bivariate")
            s.kind = ScenarioSpec::Kind::bivariate;
        else if (value == "sinusoid")
            s.kind = ScenarioSpec::Kind::sinusoid;
        else if (value == "multivariate")
            s.kind = ScenarioSpec::Kind::multivariate;
        else if (value == "csv")
            s.kind = ScenarioSpec::Kind::csv;
        else
            throw ConfigError(line, "unknown scenario kind '" + value + "'");
    } else if (key == "variant") {
        s.variant = static_cast<int>(parse_count(value, line));
    } else if (key == "dim") {
        s.dim = parse_count(value, line);
    } else if (key == "n_samples") {
        s.n_samples = parse_count(value, line);
    } else if (key == "csv_path") {
        s.csv_path = value;
    } else if (key == "has_header") {
        s.has_header = parse_bool(value, line);
    } else if (key == "feature_fraction") {
        s.feature_fraction = parse_double(value, line);
    } else if (key == "standardize") {
        s.do_standardize = parse_bool(value, line);
    } else if (key == "test_fraction") {
        const double f = parse_double(value, line);
        if (!(f > 0.0 && f < 1.0)) throw ConfigError(line, "test_fraction must be in (0,1)");
        s.test_fraction = f;
    } else {
        throw ConfigError(line, "unknown scenario key '" + key + "'");
    }
}

void apply_run_defaults(RunConfig &cfg) {
    const bool bivariate = cfg.scenario.kind == ScenarioSpec::Kind::bivariate;
    const bool has_gt = cfg.scenario.kind != ScenarioSpec::Kind::csv;
    for (RunSpec &run : cfg.runs) {
        if (!run.lr_set) run.train.lr = bivariate ? 1e-2 : 1e-3;
        if (!run.epochs_set) run.train.epochs = bivariate ? 2500 : 100;
        if (!run.batch_set) run.train.batch = bivariate ? 0 : 64;
        if (!run.labels_set) {
            if (run.train.loss.needs_prior() || run.train.loss.needs_prior_sqrt() ||
                run.train.schedule.kind == Schedule::Kind::hybrid)
                run.labels = has_gt ? LabelSource::ground_truth : LabelSource::pseudo;
            else
                run.labels = LabelSource::none;
        }
        if (run.train.schedule.kind == Schedule::Kind::hybrid &&
            run.train.schedule.switch_epoch >= run.train.epochs)
            throw Error("hybrid switch_epoch must be below epochs for loss " + run.name);
    }
}

} // namespace

RunConfig parse_config_text(const std::string &text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    std::string section;
    RunSpec *current_run = nullptr;

    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = raw;
        if (const std::size_t hash = line.find('#'); hash != std::string::npos)
            line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(line_no, "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section == "run" || section == "scenario") {
                current_run = nullptr;
            } else if (section.rfind("loss.", 0) == 0) {
                const std::string name = section.substr(5);
                const auto kind = loss_kind_from_string(name);
                if (!kind) throw ConfigError(line_no, "unknown loss section '" + name + "'");
                RunSpec run;
                run.name = name;
                run.train.loss = LossKind{*kind, 0.5};
                cfg.runs.push_back(std::move(run));
                current_run = &cfg.runs.back();
            } else {
                throw ConfigError(line_no, "unknown section '" + section + "'");
            }
            continue;
        }

        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(line_no, "expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(line_no, "empty key");

        if (section == "run") {
            if (key == "output_dir")
                cfg.output_dir = value;
            else if (key == "repetitions") {
                cfg.repetitions = parse_count(value, line_no);
                if (cfg.repetitions < 1) throw ConfigError(line_no, "repetitions must be >= 1");
            } else if (key == "seed")
                cfg.seed = parse_count(value, line_no);
            else if (key == "timing")
                cfg.timing = parse_bool(value, line_no);
            else
                throw ConfigError(line_no, "unknown run key '" + key + "'");
        } else if (section == "scenario") {
            apply_scenario_key(cfg.scenario, key, value, line_no);
        } else if (current_run) {
            apply_run_key(*current_run, key, value, line_no);
        } else {
            throw ConfigError(line_no, "key outside any section");
        }
    }

    if (cfg.runs.empty()) throw ConfigError(line_no, "no [loss.*] sections");
    apply_run_defaults(cfg);
    return cfg;
}

RunConfig parse_config_file(const std::string &path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_config_text(buf.str());
}

std::string config_schema() {
    return R"(# hetreg training configuration
#
# [run]
#   output_dir  = out      # directory for CSVs, plots, checkpoints
#   repetitions = 5        # independent trials; trial r uses seed + r
#   seed        = 1
#   timing      = false    # per-epoch mean step time in the metrics CSV
#                          # (off by default so reruns are byte-identical)
#
# [scenario]
#   kind = sinusoid        # bivariate | sinusoid | multivariate | csv
#   variant = 1            # sinusoid: 1 -> |x| sin 2pi x, 2 -> (5-|x|) sin 2pi x,
#                          #           3 -> 5 sin 2pi x, all with sigma(x) = |x|
#   dim = 8                # multivariate target dimensionality
#   n_samples = 0          # 0 = per-kind default (sinusoid 50000, bivariate 1024,
#                          #     multivariate interpolates 4000..20000 by dim)
#   csv_path = data.csv    # csv kind only: rectangular numeric table
#   has_header = true
#   feature_fraction = 0.25  # fraction of columns used as observations
#   standardize = true       # csv only; synthetic scenarios are used as-is
#   test_fraction = 0.2
#
# One section per objective in the grid; every run of one repetition shares
# the dataset, the initial estimators and the batch order.
#
# [loss.nll_full]          # nll_full | nll_diag | beta_nll | faithful
#                          # | kl_calibrated | w2_bound
#   epochs = 100
#   lr = 1e-3              # default 1e-2 for bivariate, 1e-3 otherwise
#   batch = 64             # 0 = full batch (bivariate default)
#   hidden_layers = 4
#   hidden_width = 50
#   activation = tanh      # tanh | elu
#   schedule = standard    # standard | warmup | hybrid
#   warmup_fraction = 0.5  # mean-only fraction of epochs (warmup)
#   switch_epoch = 20      # hybrid: epoch at which the objective switches
#   then = nll_full        # hybrid: post-switch objective
#   beta = 0.5             # beta_nll only, in [0,1]
#   pseudo_k = 0           # 0 = ten times the target dimensionality
#   labels = pseudo        # pseudo | ground_truth | none; losses that need a
#                          # covariance prior default to ground_truth when the
#                          # scenario provides it, else pseudo
)";
}

} // namespace hetreg
