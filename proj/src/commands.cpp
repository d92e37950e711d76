#include "txseg/commands.hpp"

#include "txseg/config.hpp"
#include "txseg/features.hpp"
#include "txseg/learn.hpp"
#include "txseg/metrics.hpp"
#include "txseg/parallel.hpp"
#include "txseg/segment.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>

namespace txseg {

RawRaster filter_montage(const FilterBank& bank) {
    const Eigen::MatrixXd filters = bank.all_filters();
    const int k = static_cast<int>(filters.cols());
    if (k < 1 || bank.side < 1) {
        throw std::invalid_argument("render: empty bank");
    }
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(k))));
    const int rows = (k + cols - 1) / cols;
    const int side = bank.side;
    RawRaster out;
    out.width = cols * side + cols - 1;
    out.height = rows * side + rows - 1;
    out.channels = 1;
    out.bit_depth = 8;
    out.samples.assign(static_cast<std::size_t>(out.width) * out.height, 0);
    for (int f = 0; f < k; ++f) {
        const double peak = filters.col(f).cwiseAbs().maxCoeff();
        const int top = (f / cols) * (side + 1);
        const int left = (f % cols) * (side + 1);
        for (int r = 0; r < side; ++r) {
            for (int x = 0; x < side; ++x) {
                const double v = peak > 0.0 ? filters(r * side + x, f) / peak : 0.0;
                const double level = std::clamp(127.5 + 127.5 * v, 0.0, 255.0);
                out.samples[static_cast<std::size_t>(top + r) * out.width + left + x] =
                    static_cast<std::uint16_t>(std::lround(level));
            }
        }
    }
    return out;
}

namespace {

/// Signals a numerical failure (exit code 3).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CommonOptions {
    std::string config_path;
    std::string profile_name = "prague";
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<double> gamma;
    std::optional<int> filters;
    std::optional<int> filter_side;
    std::optional<int> patches;
    std::vector<std::string> overrides;

    RunConfig resolve() const {
        RunConfig cfg = profile(profile_name);
        if (!config_path.empty()) {
            cfg = load_config(config_path, cfg);
        }
        if (seed) cfg.seed = *seed;
        if (threads) cfg.threads = *threads;
        if (gamma) cfg.gamma = *gamma;
        if (filters) cfg.filters = *filters;
        if (filter_side) cfg.filter_side = *filter_side;
        if (patches) cfg.patches = *patches;
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) {
                throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
            }
            set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
        }
        cfg.validate();
        set_thread_count(static_cast<unsigned>(cfg.threads));
        return cfg;
    }
};

void add_common(CLI::App& cmd, CommonOptions& o) {
    cmd.add_option("--config", o.config_path, "key = value configuration file");
    cmd.add_option("--profile", o.profile_name, "parameter profile")
        ->check(CLI::IsMember({"prague", "histology", "small"}));
    cmd.add_option("--seed", o.seed, "random seed");
    cmd.add_option("--threads", o.threads, "worker threads (0 = all cores)");
    cmd.add_option("--gamma", o.gamma, "Potts jump penalty");
    cmd.add_option("--filters", o.filters, "bank size including the mean filter");
    cmd.add_option("--filter-size", o.filter_side, "filter side length in pixels");
    cmd.add_option("--patches", o.patches, "number of sampled super-patches");
    cmd.add_option("--set", o.overrides, "override any config key (key=value), repeatable");
}

void echo_config(const std::filesystem::path& output, const RunConfig& cfg) {
    std::filesystem::path side = output;
    side += ".config.txt";
    std::ofstream out(side);
    if (!out) {
        throw IoError("cannot write " + side.string());
    }
    out << "# effective configuration\n" << to_text(cfg);
}

Image load_input(const std::filesystem::path& path, const RunConfig& cfg) {
    Image img = load_image(path);
    return cfg.grayscale ? to_grayscale(img) : img;
}

FilterBank learn_bank(const Image& img, const RunConfig& cfg, const std::string& log_path) {
    if (cfg.learned_filters() == 0) {
        std::cout << "bank holds only the mean filter; nothing to learn\n";
        return mean_only_bank(cfg.filter_side);
    }
    const Stencil stencil = Stencil::near_isotropic();
    const double mask_sigma = cfg.mask_sigma > 0.0 ? cfg.mask_sigma : default_mask_sigma(cfg.filter_side);
    const PatchSet patches = sample_super_patches(img, cfg.patches, cfg.filter_side, stencil,
                                                  gaussian_mask(cfg.filter_side, mask_sigma), cfg.seed);
    const LearnResult res = cg_learn(patches, stencil, cfg.learn_params(), cfg.filter_side,
                                     cfg.learned_filters(), cfg.seed + 1);
    if (!std::isfinite(res.objective.total)) {
        throw NumericalError("learning produced a non-finite objective");
    }
    std::cout << "learn: status=" << to_string(res.status) << " iterations=" << res.iterations
              << " E=" << res.objective.total << " (f=" << res.objective.f << " r=" << res.objective.r
              << " h=" << res.objective.h << ") grad_norm=" << res.grad_norm << '\n';
    if (res.status == LearnStatus::LineSearchFailed) {
        std::cerr << "warning: line search failed; writing the last accepted bank\n";
    }
    if (!log_path.empty()) {
        write_learn_log(log_path, res.trace);
    }
    return res.bank;
}

void segment_and_write(const Image& img, const FilterBank& bank, const RunConfig& cfg,
                       const std::filesystem::path& out, const std::string& trace_path) {
    const SegmentResult res = segment_pipeline(img, bank, cfg.segment_params());
    if (!std::isfinite(res.energy)) {
        throw NumericalError("segmentation produced a non-finite energy");
    }
    write_label_png(out, res.labels);
    std::filesystem::path preview = out.parent_path() / (out.stem().string() + "_color.png");
    write_label_preview(preview, res.labels);
    if (!trace_path.empty()) {
        write_energy_trace(trace_path, res.trace);
    }
    std::cout << "segment: regions=" << res.labels.region_count << " (before merge " << res.regions_before_merge
              << ") energy=" << res.energy << " admm_iterations=" << res.admm_iterations
              << (res.status == AdmmStatus::Converged ? "" : " [iteration cap reached]") << '\n';
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"Unsupervised texture segmentation with learned filters"};
    app.require_subcommand(1);

    CommonOptions common;
    std::string image, bank_path, output, gt, log_path, trace_path, csv_path, json_path;
    std::optional<double> threshold;

    auto* learn = app.add_subcommand("learn", "learn a filter bank from one image");
    add_common(*learn, common);
    learn->add_option("image", image)->required();
    learn->add_option("-o,--output", output, "bank file (TXSF)")->required();
    learn->add_option("--log", log_path, "per-iteration CSV log");

    auto* segment = app.add_subcommand("segment", "segment an image with a learned bank");
    add_common(*segment, common);
    segment->add_option("image", image)->required();
    segment->add_option("bank", bank_path)->required();
    segment->add_option("-o,--output", output, "16-bit label PNG")->required();
    segment->add_option("--trace", trace_path, "ADMM energy trace CSV");

    auto* pipeline = app.add_subcommand("pipeline", "learn a bank and segment the same image");
    add_common(*pipeline, common);
    pipeline->add_option("image", image)->required();
    pipeline->add_option("-o,--output", output, "16-bit label PNG")->required();
    pipeline->add_option("--bank-out", bank_path, "also write the learned bank");
    pipeline->add_option("--log", log_path, "per-iteration CSV log");
    pipeline->add_option("--trace", trace_path, "ADMM energy trace CSV");

    auto* eval = app.add_subcommand("eval", "compare a predicted label map with ground truth");
    add_common(*eval, common);
    eval->add_option("pred", output)->required();
    eval->add_option("gt", gt)->required();
    eval->add_option("--threshold", threshold, "region overlap threshold");
    eval->add_option("--csv", csv_path, "append a CSV row");
    eval->add_option("--json", json_path, "write a JSON report");

    auto* render = app.add_subcommand("render-filters", "draw a bank as an image grid");
    render->add_option("bank", bank_path)->required();
    render->add_option("-o,--output", output, "PNG montage")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*render) {
            write_png(output, filter_montage(read_bank(bank_path)));
            return kExitOk;
        }
        const RunConfig cfg = common.resolve();
        if (*learn) {
            const FilterBank bank = learn_bank(load_input(image, cfg), cfg, log_path);
            write_bank(output, bank);
            echo_config(output, cfg);
        } else if (*segment) {
            const FilterBank bank = read_bank(bank_path);
            segment_and_write(load_input(image, cfg), bank, cfg, output, trace_path);
            echo_config(output, cfg);
        } else if (*pipeline) {
            const Image img = load_input(image, cfg);
            const FilterBank bank = learn_bank(img, cfg, log_path);
            if (!bank_path.empty()) {
                write_bank(bank_path, bank);
            }
            segment_and_write(img, bank, cfg, output, trace_path);
            echo_config(output, cfg);
        } else if (*eval) {
            const LabelMap pred = read_label_png(output);
            const LabelMap truth = read_label_png(gt);
            if (pred.height != truth.height || pred.width != truth.width) {
                std::cerr << "error: label maps differ in size\n";
                return kExitUsage;
            }
            const MetricsReport report = evaluate(pred, truth, threshold.value_or(cfg.metric_threshold));
            const std::string row = report_csv_row(std::filesystem::path(output).filename().string(), report);
            std::cout << report_csv_header() << '\n' << row << '\n';
            if (!csv_path.empty()) {
                const bool fresh = !std::filesystem::exists(csv_path);
                std::ofstream out(csv_path, std::ios::app);
                if (!out) {
                    throw IoError("cannot write " + csv_path);
                }
                if (fresh) {
                    out << report_csv_header() << '\n';
                }
                out << row << '\n';
            }
            if (!json_path.empty()) {
                std::ofstream out(json_path);
                if (!out) {
                    throw IoError("cannot write " + json_path);
                }
                out << report_json(report) << '\n';
            }
        }
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
    return kExitOk;
}

}  // namespace txseg
