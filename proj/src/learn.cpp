#include "txseg/learn.hpp"

#include "txseg/parallel.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <stdexcept>

namespace txseg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kSampleChunk = 256;

}  // namespace

void LearnParams::validate() const {
    if (!(mu > 0.0) || !(nu > 0.0)) {
        throw std::invalid_argument("learn: mu and nu must be positive");
    }
    if (!(lambda >= 0.0) || !(kappa >= 0.0)) {
        throw std::invalid_argument("learn: lambda and kappa must be non-negative");
    }
    if (!(grad_tol >= 0.0) || max_iters < 0) {
        throw std::invalid_argument("learn: invalid stopping rule");
    }
    if (!(armijo.initial_step > 0.0) || !(armijo.shrink > 0.0 && armijo.shrink < 1.0) ||
        !(armijo.sufficient_decrease > 0.0 && armijo.sufficient_decrease < 1.0) ||
        armijo.max_halvings < 1) {
        throw std::invalid_argument("learn: invalid Armijo parameters");
    }
}

LearningData::LearningData(const PatchSet& patches, const Stencil& stencil) : side_(patches.filter_side) {
    stencil.validate();
    if (patches.offsets.size() != stencil.size()) {
        throw std::invalid_argument("learning data: stencil does not match patch set");
    }
    for (std::size_t s = 0; s < stencil.size(); ++s) {
        if (!(patches.offsets[s] == stencil.offsets[s])) {
            throw std::invalid_argument("learning data: stencil offsets differ from patch set");
        }
    }
    const int n = patches.taps();
    const int m = patches.count;
    auto gather = [&](const std::vector<double>& crops) {
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m, n);
        for (int i = 0; i < m; ++i) {
            for (int l = 0; l < patches.channels; ++l) {
                const double* src = crops.data() + (static_cast<std::size_t>(i) * patches.channels + l) * n;
                for (int t = 0; t < n; ++t) {
                    out(i, t) += src[t];
                }
            }
        }
        return out;
    };
    center_ = gather(patches.center);
    for (const auto& crops : patches.directional) {
        directional_.push_back(gather(crops));
    }
    weights_ = stencil.weights;
}

namespace {

void check_shape(const FilterBank& bank, const LearningData& data) {
    if (bank.taps() != data.taps() || bank.side != data.side()) {
        throw std::invalid_argument("learn: filter size does not match patch size");
    }
}

struct SparsityPartial {
    double value = 0.0;
    Eigen::MatrixXd grad;
};

// f and (optionally) df over samples [begin, end), unnormalised.
SparsityPartial sparsity_chunk(const Eigen::MatrixXd& phi, const LearningData& data,
                               const LearnParams& p, std::size_t begin, std::size_t end,
                               bool with_grad) {
    const auto rows = static_cast<Eigen::Index>(end - begin);
    const auto b = static_cast<Eigen::Index>(begin);
    SparsityPartial out;
    if (with_grad) {
        out.grad = Eigen::MatrixXd::Zero(phi.rows(), phi.cols());
    }
    const auto center = data.center().middleRows(b, rows);
    const Eigen::ArrayXXd x0 = (center * phi).array();
    const Eigen::ArrayXXd g0 = (1.0 + p.mu * x0.square()).log();
    const Eigen::ArrayXXd dsig0 = 2.0 * p.mu * x0 / (1.0 + p.mu * x0.square());
    for (std::size_t s = 0; s < data.directions(); ++s) {
        const auto shifted = data.directional(s).middleRows(b, rows);
        const Eigen::ArrayXXd xs = (shifted * phi).array();
        const Eigen::ArrayXXd diff = (1.0 + p.mu * xs.square()).log() - g0;
        const Eigen::ArrayXd q = diff.square().rowwise().sum();
        out.value += data.weight(s) * (p.nu * q).log1p().sum();
        if (with_grad) {
            const Eigen::ArrayXd scale = 2.0 * p.nu / (1.0 + p.nu * q);
            const Eigen::ArrayXXd w = diff.colwise() * scale;
            const Eigen::ArrayXXd dsig_s = 2.0 * p.mu * xs / (1.0 + p.mu * xs.square());
            out.grad.noalias() += data.weight(s) * (shifted.transpose() * (w * dsig_s).matrix());
            out.grad.noalias() -= data.weight(s) * (center.transpose() * (w * dsig0).matrix());
        }
    }
    return out;
}

SparsityPartial sparsity_term(const FilterBank& bank, const LearningData& data, const LearnParams& p,
                              bool with_grad) {
    const auto m = static_cast<std::size_t>(data.samples());
    std::vector<SparsityPartial> partials(chunk_count(m, kSampleChunk));
    parallel_for(m, kSampleChunk, [&](std::size_t begin, std::size_t end) {
        partials[begin / kSampleChunk] = sparsity_chunk(bank.learned, data, p, begin, end, with_grad);
    });
    SparsityPartial total;
    if (with_grad) {
        total.grad = Eigen::MatrixXd::Zero(bank.learned.rows(), bank.learned.cols());
    }
    for (const auto& part : partials) {
        total.value += part.value;
        if (with_grad) {
            total.grad += part.grad;
        }
    }
    const double inv_m = m > 0 ? 1.0 / static_cast<double>(m) : 0.0;
    total.value *= inv_m;
    if (with_grad) {
        total.grad *= inv_m;
    }
    return total;
}

double normalised_moment(const Eigen::VectorXd& filter, const Eigen::VectorXd& coords, int side) {
    const double raw = (filter.array().square() * coords.array()).sum();
    const double half_width = (side - 1) / 2.0;
    return (raw - (side + 1) / 2.0) / half_width;
}

}  // namespace

double objective_f(const FilterBank& bank, const LearningData& data, const LearnParams& params) {
    check_shape(bank, data);
    if (bank.learned_count() == 0) {
        return 0.0;
    }
    return sparsity_term(bank, data, params, false).value;
}

double objective_f(const FilterBank& bank, const PatchSet& patches, const Stencil& stencil,
                   const LearnParams& params) {
    return objective_f(bank, LearningData(patches, stencil), params);
}

double penalty_r(const FilterBank& bank) {
    const Eigen::MatrixXd gram = bank.learned.transpose() * bank.learned;
    double total = 0.0;
    for (Eigen::Index i = 0; i < gram.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < gram.cols(); ++j) {
            const double slack = 1.0 - gram(i, j) * gram(i, j);
            if (!(slack > 0.0)) {
                return kInf;
            }
            total -= std::log(slack);
        }
    }
    return total;
}

CentroidMatrices::CentroidMatrices(int side) : px(side * side), py(side * side) {
    for (int r = 0; r < side; ++r) {
        for (int c = 0; c < side; ++c) {
            px(r * side + c) = r + 1;
            py(r * side + c) = c + 1;
        }
    }
}

std::pair<double, double> compute_centroid(const Eigen::VectorXd& filter, int side) {
    if (filter.size() != side * side || side < 2) {
        throw std::invalid_argument("compute_centroid: filter must be side x side with side >= 2");
    }
    const CentroidMatrices moments(side);
    return {normalised_moment(filter, moments.px, side), normalised_moment(filter, moments.py, side)};
}

double penalty_h(const FilterBank& bank) {
    if (bank.learned_count() == 0) {
        return 0.0;
    }
    const CentroidMatrices moments(bank.side);
    double total = 0.0;
    for (int k = 0; k < bank.learned_count(); ++k) {
        const Eigen::VectorXd col = bank.learned.col(k);
        const double cx = normalised_moment(col, moments.px, bank.side);
        const double cy = normalised_moment(col, moments.py, bank.side);
        const double slack = (1.0 - cx * cx) * (1.0 - cy * cy);
        if (!(slack > 0.0) || std::abs(cx) >= 1.0 || std::abs(cy) >= 1.0) {
            return kInf;
        }
        total += -std::log(slack) + 0.5 * (cx - cy) * (cx - cy);
    }
    return total;
}

ObjectiveValue evaluate_objective(const FilterBank& bank, const LearningData& data,
                                  const LearnParams& params) {
    ObjectiveValue v;
    v.f = objective_f(bank, data, params);
    v.r = penalty_r(bank);
    v.h = penalty_h(bank);
    v.total = v.f + params.lambda * v.r + params.kappa * v.h;
    return v;
}

Eigen::MatrixXd grad_E(const FilterBank& bank, const LearningData& data, const LearnParams& params) {
    check_shape(bank, data);
    const int count = bank.learned_count();
    if (count == 0) {
        return Eigen::MatrixXd::Zero(bank.taps(), 0);
    }
    Eigen::MatrixXd grad = sparsity_term(bank, data, params, true).grad;

    if (params.lambda != 0.0) {
        const Eigen::MatrixXd gram = bank.learned.transpose() * bank.learned;
        Eigen::MatrixXd coupling = Eigen::MatrixXd::Zero(count, count);
        for (int i = 0; i < count; ++i) {
            for (int j = 0; j < count; ++j) {
                if (i != j) {
                    coupling(i, j) = 2.0 * gram(i, j) / (1.0 - gram(i, j) * gram(i, j));
                }
            }
        }
        grad.noalias() += params.lambda * (bank.learned * coupling);
    }

    if (params.kappa != 0.0) {
        const CentroidMatrices moments(bank.side);
        const double half_width = (bank.side - 1) / 2.0;
        for (int k = 0; k < count; ++k) {
            const Eigen::VectorXd col = bank.learned.col(k);
            const double cx = normalised_moment(col, moments.px, bank.side);
            const double cy = normalised_moment(col, moments.py, bank.side);
            const Eigen::ArrayXd weights = cx / (1.0 - cx * cx) * moments.px.array() +
                                           cy / (1.0 - cy * cy) * moments.py.array() +
                                           0.5 * (cx - cy) * (moments.px - moments.py).array();
            grad.col(k) += params.kappa * (4.0 / half_width) * (weights * col.array()).matrix();
        }
    }
    return grad;
}

Eigen::MatrixXd grad_E(const FilterBank& bank, const PatchSet& patches, const Stencil& stencil,
                       const LearnParams& params) {
    return grad_E(bank, LearningData(patches, stencil), params);
}

const char* to_string(LearnStatus status) {
    switch (status) {
        case LearnStatus::Converged: return "converged";
        case LearnStatus::IterationCap: return "iteration-cap";
        case LearnStatus::LineSearchFailed: return "line-search-failed";
    }
    return "unknown";
}

namespace {

double inner(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a.array() * b.array()).sum();
}

struct LineSearchOutcome {
    bool accepted = false;
    double step = 0.0;
    FilterBank bank;
    ObjectiveValue value;
};

LineSearchOutcome armijo_search(const FilterBank& bank, const ObjectiveValue& current,
                                const Tangent& dir, double slope, const LearningData& data,
                                const LearnParams& params) {
    LineSearchOutcome out;
    double t = params.armijo.initial_step;
    for (int attempt = 0; attempt <= params.armijo.max_halvings; ++attempt, t *= params.armijo.shrink) {
        FilterBank trial = geodesic_step(bank, dir, t);
        const ObjectiveValue value = evaluate_objective(trial, data, params);
        if (std::isfinite(value.total) &&
            value.total <= current.total + params.armijo.sufficient_decrease * t * slope) {
            out.accepted = true;
            out.step = t;
            out.bank = std::move(trial);
            out.value = value;
            return out;
        }
    }
    return out;
}

}  // namespace

LearnResult cg_learn(const PatchSet& patches, const Stencil& stencil, const LearnParams& params,
                     int side, int learned_count, std::uint64_t seed, const LearnObserver& observer) {
    params.validate();
    if (side != patches.filter_side) {
        throw std::invalid_argument("cg_learn: filter side does not match patch set");
    }
    LearnResult result;
    if (learned_count == 0) {
        result.bank = mean_only_bank(side);
        result.status = LearnStatus::Converged;
        return result;
    }

    const LearningData data(patches, stencil);
    FilterBank bank = random_init(side, learned_count, seed, /*with_mean_filter=*/false);
    ObjectiveValue value = evaluate_objective(bank, data, params);
    Tangent rgrad = project_tangent(bank, grad_E(bank, data, params));
    Tangent dir = -rgrad;
    const int restart_period = std::max(1, bank.taps() * learned_count);
    int since_restart = 0;

    result.status = LearnStatus::IterationCap;
    int iter = 0;
    for (; iter < params.max_iters; ++iter) {
        const double gnorm = rgrad.norm();
        if (gnorm < params.grad_tol) {
            result.status = LearnStatus::Converged;
            break;
        }
        double slope = inner(rgrad, dir);
        bool steepest = false;
        if (!(slope < 0.0)) {
            dir = -rgrad;
            slope = -gnorm * gnorm;
            steepest = true;
        }
        LineSearchOutcome ls = armijo_search(bank, value, dir, slope, data, params);
        if (!ls.accepted && !steepest) {
            dir = -rgrad;
            slope = -gnorm * gnorm;
            steepest = true;
            ls = armijo_search(bank, value, dir, slope, data, params);
        }
        if (!ls.accepted) {
            result.status = LearnStatus::LineSearchFailed;
            break;
        }

        const Tangent moved_grad = parallel_transport(rgrad, bank, dir, ls.step);
        const Tangent moved_dir = parallel_transport(dir, bank, dir, ls.step);
        const Tangent next_grad = project_tangent(ls.bank, grad_E(ls.bank, data, params));

        double beta = 0.0;
        if (++since_restart < restart_period) {
            beta = std::max(0.0, inner(next_grad, next_grad - moved_grad) / (gnorm * gnorm));
        } else {
            since_restart = 0;
        }

        IterationRecord rec;
        rec.iteration = iter + 1;
        rec.objective = ls.value;
        rec.grad_norm = next_grad.norm();
        rec.step = ls.step;
        rec.steepest_fallback = steepest;
        rec.norm_deviation = ls.bank.max_norm_deviation();
        rec.mean_deviation = ls.bank.max_mean_deviation();
        rec.transport_error = std::abs(moved_grad.norm() - gnorm);

        bank = std::move(ls.bank);
        value = ls.value;
        rgrad = next_grad;
        dir = -rgrad + beta * moved_dir;

        result.trace.push_back(rec);
        if (observer) {
            observer(rec, bank);
        }
    }
    if (iter == params.max_iters && rgrad.norm() < params.grad_tol) {
        result.status = LearnStatus::Converged;
    }

    result.bank = std::move(bank);
    result.bank.has_mean_filter = true;
    result.objective = value;
    result.grad_norm = rgrad.norm();
    result.iterations = iter;
    return result;
}

void write_learn_log(const std::filesystem::path& path, const std::vector<IterationRecord>& trace) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << "iteration,E,f,r,h,grad_norm,step\n" << std::setprecision(17);
    for (const auto& rec : trace) {
        out << rec.iteration << ',' << rec.objective.total << ',' << rec.objective.f << ','
            << rec.objective.r << ',' << rec.objective.h << ',' << rec.grad_norm << ',' << rec.step << '\n';
    }
}

}  // namespace txseg
