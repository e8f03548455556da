#pragma once

#include "hetreg/train.hpp"

namespace hetreg {

struct ScenarioSpec {
    enum class Kind { bivariate, sinusoid, multivariate, csv };

    Kind kind = Kind::sinusoid;
    int variant = 1;        // sinusoid
    std::size_t dim = 8;    // multivariate
    std::size_t n_samples = 0; // 0 = per-kind default
    std::string csv_path;
    bool has_header = true;
    double feature_fraction = 0.25;
    bool do_standardize = true;
    double test_fraction = 0.2;
};

const char *to_string(ScenarioSpec::Kind kind);

enum class LabelSource { none, pseudo, ground_truth };

/// One training run of the loss grid.
struct RunSpec {
    std::string name;
    TrainSpec train;
    LabelSource labels = LabelSource::pseudo;
    bool lr_set = false;
    bool epochs_set = false;
    bool batch_set = false;
    bool labels_set = false;
};

struct RunConfig {
    std::string output_dir = "out";
    std::size_t repetitions = 5;
    std::uint64_t seed = 1;
    bool timing = false;
    ScenarioSpec scenario;
    std::vector<RunSpec> runs;
};

/// Key-value/section config file. Unknown keys and malformed lines raise
/// ConfigError with the line number.
RunConfig parse_config_text(const std::string &text);
RunConfig parse_config_file(const std::string &path);

/// Documented schema for --print-schema.
std::string config_schema();

} // namespace hetreg
