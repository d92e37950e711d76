#include "txseg/config.hpp"

#include "txseg/image.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <variant>

namespace txseg {

namespace {

using Field = std::variant<int RunConfig::*, double RunConfig::*, bool RunConfig::*, std::uint64_t RunConfig::*>;

struct Key {
    const char* name;
    Field field;
};

const Key kKeys[] = {
    {"filter_side", &RunConfig::filter_side},
    {"filters", &RunConfig::filters},
    {"filters_include_mean", &RunConfig::filters_include_mean},
    {"patches", &RunConfig::patches},
    {"mu", &RunConfig::mu},
    {"nu", &RunConfig::nu},
    {"lambda", &RunConfig::lambda},
    {"kappa", &RunConfig::kappa},
    {"grad_tol", &RunConfig::grad_tol},
    {"max_iters", &RunConfig::max_iters},
    {"armijo_step", &RunConfig::armijo_step},
    {"armijo_shrink", &RunConfig::armijo_shrink},
    {"armijo_c", &RunConfig::armijo_c},
    {"armijo_halvings", &RunConfig::armijo_halvings},
    {"mask_sigma", &RunConfig::mask_sigma},
    {"grayscale", &RunConfig::grayscale},
    {"gamma", &RunConfig::gamma},
    {"whiten_ridge", &RunConfig::whiten_ridge},
    {"admm_mu0", &RunConfig::admm_mu0},
    {"admm_exponent", &RunConfig::admm_exponent},
    {"admm_max_outer", &RunConfig::admm_max_outer},
    {"admm_agree_tol", &RunConfig::admm_agree_tol},
    {"label_tol", &RunConfig::label_tol},
    {"min_area_fraction", &RunConfig::min_area_fraction},
    {"metric_threshold", &RunConfig::metric_threshold},
    {"seed", &RunConfig::seed},
    {"threads", &RunConfig::threads},
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_integer(const std::string& key, const std::string& text) {
    T value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw std::invalid_argument("config: bad integer for " + key + ": '" + text + "'");
    }
    return value;
}

double parse_real(const std::string& key, const std::string& text) {
    char* end = nullptr;
    const double value = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size()) {
        throw std::invalid_argument("config: bad number for " + key + ": '" + text + "'");
    }
    return value;
}

}  // namespace

void RunConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) {
            throw std::invalid_argument(std::string("config: ") + what);
        }
    };
    require(filter_side >= 2, "filter_side must be at least 2");
    require(learned_filters() >= 0, "filters must count at least the mean filter");
    require(patches >= 1, "patches must be positive");
    require(threads >= 0, "threads must be non-negative");
    require(metric_threshold > 0.5 && metric_threshold <= 1.0, "metric_threshold must lie in (0.5, 1]");
    learn_params().validate();
    segment_params().validate();
}

LearnParams RunConfig::learn_params() const {
    LearnParams p;
    p.mu = mu;
    p.nu = nu;
    p.lambda = lambda;
    p.kappa = kappa;
    p.grad_tol = grad_tol;
    p.max_iters = max_iters;
    p.armijo = {armijo_step, armijo_shrink, armijo_c, armijo_halvings};
    return p;
}

SegmentParams RunConfig::segment_params() const {
    SegmentParams p;
    p.gamma = gamma;
    p.sigma_mu = mu;
    p.whiten_ridge = whiten_ridge;
    p.mask_sigma = mask_sigma;
    p.label_tol = label_tol;
    p.schedule = {admm_mu0, admm_exponent, admm_max_outer, admm_agree_tol};
    p.merge.min_area_fraction = min_area_fraction;
    return p;
}

RunConfig profile(const std::string& name) {
    RunConfig cfg;
    if (name == "prague") {
        return cfg;
    }
    if (name == "histology") {
        cfg.filter_side = 5;
        cfg.filters = 13;
        cfg.gamma = 0.8;
        cfg.grayscale = true;
        return cfg;
    }
    if (name == "small") {
        cfg.filter_side = 5;
        cfg.filters = 5;
        cfg.patches = 2000;
        cfg.max_iters = 200;
        cfg.gamma = 1.0;
        return cfg;
    }
    throw std::invalid_argument("unknown profile '" + name + "' (prague, histology, small)");
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& k : kKeys) {
        if (key != k.name) {
            continue;
        }
        std::visit(
            [&](auto member) {
                using T = std::remove_cvref_t<decltype(cfg.*member)>;
                if constexpr (std::is_same_v<T, double>) {
                    cfg.*member = parse_real(key, value);
                } else if constexpr (std::is_same_v<T, bool>) {
                    if (value == "1" || value == "true") {
                        cfg.*member = true;
                    } else if (value == "0" || value == "false") {
                        cfg.*member = false;
                    } else {
                        throw std::invalid_argument("config: bad boolean for " + key + ": '" + value + "'");
                    }
                } else {
                    cfg.*member = parse_integer<T>(key, value);
                }
            },
            k.field);
        return;
    }
    throw std::invalid_argument("config: unknown key '" + key + "'");
}

RunConfig parse_config(const std::string& text, RunConfig base) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
        }
        set_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config " + path.string());
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), std::move(base));
}

std::string to_text(const RunConfig& cfg) {
    std::string out;
    char buf[64];
    for (const auto& k : kKeys) {
        std::visit(
            [&](auto member) {
                using T = std::remove_cvref_t<decltype(cfg.*member)>;
                if constexpr (std::is_same_v<T, double>) {
                    std::snprintf(buf, sizeof buf, "%.17g", cfg.*member);
                } else if constexpr (std::is_same_v<T, bool>) {
                    std::snprintf(buf, sizeof buf, "%d", cfg.*member ? 1 : 0);
                } else {
                    std::snprintf(buf, sizeof buf, "%s", std::to_string(cfg.*member).c_str());
                }
            },
            k.field);
        out += k.name;
        out += " = ";
        out += buf;
        out += '\n';
    }
    return out;
}

}  // namespace txseg
