#pragma once

#include "txseg/learn.hpp"
#include "txseg/segment.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace txseg {

/// Every tunable of the pipeline. Defaults are the "prague" profile.
struct RunConfig {
    // learning
    int filter_side = 9;
    int filters = 41;
    bool filters_include_mean = true;  // filters counts the seeded mean filter
    int patches = 50000;
    double mu = 2000.0;
    double nu = 2000.0;
    double lambda = 10.0;
    double kappa = 10.0;
    double grad_tol = 1e-5;
    int max_iters = 1000;
    double armijo_step = 1.0;
    double armijo_shrink = 0.5;
    double armijo_c = 1e-4;
    int armijo_halvings = 40;
    double mask_sigma = 0.0;  // <= 0: filter_side / 4
    bool grayscale = false;

    // segmentation
    double gamma = 0.03;
    double whiten_ridge = 1e-8;
    double admm_mu0 = 0.0;  // <= 0: 1e-2 * gamma
    double admm_exponent = 2.01;
    int admm_max_outer = 250;
    double admm_agree_tol = 1e-3;
    double label_tol = 1e-6;
    double min_area_fraction = 1e-3;

    // evaluation
    double metric_threshold = 0.75;

    // run
    std::uint64_t seed = 1;
    int threads = 0;  // 0: hardware concurrency

    void validate() const;

    LearnParams learn_params() const;
    SegmentParams segment_params() const;
    int learned_filters() const { return filters_include_mean ? filters - 1 : filters; }
};

/// "prague", "histology" or "small"; throws std::invalid_argument otherwise.
RunConfig profile(const std::string& name);

/// Applies "key = value" lines (# starts a comment) on top of `base`.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

/// Sets one key from its textual value; throws std::invalid_argument on unknown keys or bad values.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

/// Every key, one per line, with values printed to round-trip exactly.
std::string to_text(const RunConfig& cfg);

}  // namespace txseg
