#include "txseg/potts.hpp"

#include "txseg/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace txseg {

namespace {

bool differs(std::span<const double> a, std::span<const double> b) {
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (a[k] != b[k]) {
            return true;
        }
    }
    return false;
}

bool in_bounds(const VectorImage& v, int r, int x) {
    return r >= 0 && r < v.height && x >= 0 && x < v.width;
}

}  // namespace

double jump_count(const VectorImage& v, const Stencil& stencil) {
    double total = 0.0;
    for (std::size_t s = 0; s < stencil.size(); ++s) {
        const Offset a = stencil.offsets[s];
        std::size_t count = 0;
        for (int r = 0; r < v.height; ++r) {
            for (int x = 0; x < v.width; ++x) {
                if (in_bounds(v, r + a.dy, x + a.dx) && differs(v.pixel(r, x), v.pixel(r + a.dy, x + a.dx))) {
                    ++count;
                }
            }
        }
        total += stencil.weights[s] * static_cast<double>(count);
    }
    return total;
}

double potts_energy(const VectorImage& v, const VectorImage& f, double gamma, const Stencil& stencil) {
    if (!v.same_shape(f)) {
        throw std::invalid_argument("potts_energy: shape mismatch");
    }
    double data_term = 0.0;
    for (std::size_t i = 0; i < v.data.size(); ++i) {
        const double d = v.data[i] - f.data[i];
        data_term += d * d;
    }
    return gamma * jump_count(v, stencil) + data_term;
}

namespace {

/// Reusable buffers for the univariate dynamic program.
class Potts1dSolver {
public:
    void solve(const double* y, int n, int k, double gamma, const double* weights, double* out,
               std::vector<int>* starts, double* energy) {
        best_.assign(n + 1, 0.0);
        jumps_.assign(n + 1, 0);
        left_.assign(n + 1, 0);
        mean_.resize(k);
        best_[0] = -gamma;
        jumps_[0] = -1;
        for (int r = 1; r <= n; ++r) {
            double best = std::numeric_limits<double>::infinity();
            int best_jumps = 0;
            int best_left = r;
            double wsum = 0.0;
            double dev = 0.0;
            std::fill(mean_.begin(), mean_.end(), 0.0);
            for (int l = r; l >= 1; --l) {
                // add sample l-1 (0-based) to the interval, West's weighted update
                const double w = weights ? weights[l - 1] : 1.0;
                const double* yl = y + static_cast<std::size_t>(l - 1) * k;
                const double new_wsum = wsum + w;
                double sq = 0.0;
                for (int c = 0; c < k; ++c) {
                    const double delta = yl[c] - mean_[c];
                    sq += delta * delta;
                    mean_[c] += delta * (w / new_wsum);
                }
                dev += sq * w * wsum / new_wsum;
                wsum = new_wsum;
                if (dev > best) {
                    break;
                }
                const double cand = best_[l - 1] + gamma + dev;
                const int cand_jumps = jumps_[l - 1] + 1;
                if (cand < best || (cand == best && cand_jumps < best_jumps)) {
                    best = cand;
                    best_jumps = cand_jumps;
                    best_left = l;
                }
            }
            best_[r] = best;
            jumps_[r] = best_jumps;
            left_[r] = best_left;
        }

        // backtrack, filling each segment with its weighted mean
        int r = n;
        if (starts) {
            starts->clear();
        }
        while (r > 0) {
            const int l = left_[r];
            std::fill(mean_.begin(), mean_.end(), 0.0);
            double wsum = 0.0;
            for (int t = l - 1; t < r; ++t) {
                const double w = weights ? weights[t] : 1.0;
                wsum += w;
                for (int c = 0; c < k; ++c) {
                    mean_[c] += w * y[static_cast<std::size_t>(t) * k + c];
                }
            }
            for (int c = 0; c < k; ++c) {
                mean_[c] /= wsum;
            }
            for (int t = l - 1; t < r; ++t) {
                std::copy(mean_.begin(), mean_.end(), out + static_cast<std::size_t>(t) * k);
            }
            if (starts) {
                starts->push_back(l - 1);
            }
            r = l - 1;
        }
        if (starts) {
            std::reverse(starts->begin(), starts->end());
        }
        if (energy) {
            *energy = n > 0 ? best_[n] : 0.0;
        }
    }

private:
    std::vector<double> best_;
    std::vector<int> jumps_;
    std::vector<int> left_;
    std::vector<double> mean_;
};

}  // namespace

Potts1dResult potts_1d(std::span<const double> y, int length, int channels, double gamma,
                       std::span<const double> weights) {
    if (length < 0 || channels < 1 || y.size() != static_cast<std::size_t>(length) * channels) {
        throw std::invalid_argument("potts_1d: data size does not match length x channels");
    }
    if (!(gamma >= 0.0)) {
        throw std::invalid_argument("potts_1d: gamma must be non-negative");
    }
    if (!weights.empty()) {
        if (weights.size() != static_cast<std::size_t>(length)) {
            throw std::invalid_argument("potts_1d: weight count does not match length");
        }
        for (double w : weights) {
            if (!(w > 0.0)) {
                throw std::invalid_argument("potts_1d: weights must be positive");
            }
        }
    }
    Potts1dResult result;
    result.values.resize(y.size());
    Potts1dSolver solver;
    solver.solve(y.data(), length, channels, gamma, weights.empty() ? nullptr : weights.data(),
                 result.values.data(), &result.segment_starts, &result.energy);
    return result;
}

void AdmmSchedule::validate() const {
    if (!(exponent > 1.0) || max_outer < 1 || !(agree_tol > 0.0)) {
        throw std::invalid_argument("admm schedule: need exponent > 1, max_outer >= 1, agree_tol > 0");
    }
}

namespace {

/// Pixel indices of every maximal line along one offset.
std::vector<std::vector<std::size_t>> lines_for(const VectorImage& v, Offset a) {
    std::vector<std::vector<std::size_t>> lines;
    for (int r = 0; r < v.height; ++r) {
        for (int x = 0; x < v.width; ++x) {
            if (in_bounds(v, r - a.dy, x - a.dx)) {
                continue;
            }
            std::vector<std::size_t> line;
            for (int rr = r, xx = x; in_bounds(v, rr, xx); rr += a.dy, xx += a.dx) {
                line.push_back(static_cast<std::size_t>(rr) * v.width + xx);
            }
            lines.push_back(std::move(line));
        }
    }
    return lines;
}

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

    std::size_t find(std::size_t i) {
        while (parent_[i] != i) {
            parent_[i] = parent_[parent_[i]];
            i = parent_[i];
        }
        return i;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) {
            parent_[std::max(a, b)] = std::min(a, b);
        }
    }

private:
    std::vector<std::size_t> parent_;
};

/// Groups 4-neighbours whose vectors agree within tol, then fills each group with the data mean.
VectorImage snap_to_partition(const VectorImage& approx, const VectorImage& f, double tol) {
    const int k = f.channels;
    DisjointSets sets(f.pixel_count());
    auto close = [&](std::size_t p, std::size_t q) {
        for (int c = 0; c < k; ++c) {
            if (std::abs(approx.data[p * k + c] - approx.data[q * k + c]) > tol) {
                return false;
            }
        }
        return true;
    };
    for (int r = 0; r < f.height; ++r) {
        for (int x = 0; x < f.width; ++x) {
            const std::size_t p = static_cast<std::size_t>(r) * f.width + x;
            if (x + 1 < f.width && close(p, p + 1)) {
                sets.unite(p, p + 1);
            }
            if (r + 1 < f.height && close(p, p + f.width)) {
                sets.unite(p, p + f.width);
            }
        }
    }
    std::vector<double> sums(f.data.size(), 0.0);
    std::vector<double> counts(f.pixel_count(), 0.0);
    for (std::size_t p = 0; p < f.pixel_count(); ++p) {
        const std::size_t root = sets.find(p);
        counts[root] += 1.0;
        for (int c = 0; c < k; ++c) {
            sums[root * k + c] += f.data[p * k + c];
        }
    }
    VectorImage out(f.height, f.width, k);
    for (std::size_t p = 0; p < f.pixel_count(); ++p) {
        const std::size_t root = sets.find(p);
        for (int c = 0; c < k; ++c) {
            out.data[p * k + c] = sums[root * k + c] / counts[root];
        }
    }
    return out;
}

VectorImage constant_mean(const VectorImage& f) {
    const int k = f.channels;
    std::vector<double> mean(k, 0.0);
    for (std::size_t p = 0; p < f.pixel_count(); ++p) {
        for (int c = 0; c < k; ++c) {
            mean[c] += f.data[p * k + c];
        }
    }
    VectorImage out(f.height, f.width, k);
    for (int c = 0; c < k; ++c) {
        mean[c] /= static_cast<double>(f.pixel_count());
    }
    for (std::size_t p = 0; p < f.pixel_count(); ++p) {
        std::copy(mean.begin(), mean.end(), out.data.begin() + static_cast<std::ptrdiff_t>(p * k));
    }
    return out;
}

}  // namespace

PottsResult potts_2d_admm(const PottsProblem& problem, const AdmmSchedule& schedule) {
    schedule.validate();
    problem.stencil.validate();
    const VectorImage& f = problem.data;
    if (!(problem.gamma > 0.0)) {
        throw std::invalid_argument("potts_2d_admm: gamma must be positive");
    }
    if (f.height < 1 || f.width < 1 || f.channels < 1 ||
        f.data.size() != f.pixel_count() * static_cast<std::size_t>(f.channels)) {
        throw std::invalid_argument("potts_2d_admm: malformed data tensor");
    }
    for (double v : f.data) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("potts_2d_admm: non-finite data");
        }
    }

    const Stencil& stencil = problem.stencil;
    const std::size_t dirs = stencil.size();
    const int k = f.channels;
    const auto [lo, hi] = std::minmax_element(f.data.begin(), f.data.end());
    const double range = *hi - *lo;
    const double tol = schedule.agree_tol * range;

    PottsResult result;
    auto consider = [&](VectorImage candidate) {
        const double e = potts_energy(candidate, f, problem.gamma, stencil);
        if (result.solution.data.empty() || e < result.energy) {
            result.energy = e;
            result.solution = std::move(candidate);
        }
        return e;
    };
    consider(constant_mean(f));
    consider(f);
    if (range == 0.0) {
        result.status = AdmmStatus::Converged;
        return result;
    }

    std::vector<std::vector<std::vector<std::size_t>>> lines(dirs);
    for (std::size_t s = 0; s < dirs; ++s) {
        lines[s] = lines_for(f, stencil.offsets[s]);
    }

    std::vector<VectorImage> copies(dirs, f);
    // multipliers for pairs s < t, stored at pair_index(s, t)
    auto pair_index = [dirs](std::size_t s, std::size_t t) { return s * dirs + t; };
    std::vector<std::vector<double>> multipliers(dirs * dirs);
    for (std::size_t s = 0; s < dirs; ++s) {
        for (std::size_t t = s + 1; t < dirs; ++t) {
            multipliers[pair_index(s, t)].assign(f.data.size(), 0.0);
        }
    }

    const double mu0 = schedule.mu0 > 0.0 ? schedule.mu0 : 1e-2 * problem.gamma;
    const double copies_d = static_cast<double>(dirs);
    std::vector<double> target(f.data.size());
    VectorImage average(f.height, f.width, k);

    for (int j = 1; j <= schedule.max_outer; ++j) {
        const double mu = mu0 * std::pow(static_cast<double>(j), schedule.exponent);
        const double denom = 1.0 + (copies_d - 1.0) * mu;
        for (std::size_t s = 0; s < dirs; ++s) {
            for (std::size_t i = 0; i < f.data.size(); ++i) {
                double acc = f.data[i];
                for (std::size_t t = 0; t < dirs; ++t) {
                    if (t == s) {
                        continue;
                    }
                    const double lam = s < t ? multipliers[pair_index(s, t)][i] : -multipliers[pair_index(t, s)][i];
                    acc += mu * copies[t].data[i] - lam;
                }
                target[i] = acc / denom;
            }
            const double penalty = copies_d * problem.gamma * stencil.weights[s] / denom;
            auto& dir_lines = lines[s];
            VectorImage& u = copies[s];
            parallel_for(dir_lines.size(), 64, [&](std::size_t b, std::size_t e) {
                Potts1dSolver solver;
                std::vector<double> in, out;
                for (std::size_t li = b; li < e; ++li) {
                    const auto& line = dir_lines[li];
                    const int n = static_cast<int>(line.size());
                    in.resize(line.size() * k);
                    out.resize(line.size() * k);
                    for (int t = 0; t < n; ++t) {
                        std::copy_n(target.data() + line[t] * k, k, in.data() + static_cast<std::size_t>(t) * k);
                    }
                    solver.solve(in.data(), n, k, penalty, nullptr, out.data(), nullptr, nullptr);
                    for (int t = 0; t < n; ++t) {
                        std::copy_n(out.data() + static_cast<std::size_t>(t) * k, k, u.data.data() + line[t] * k);
                    }
                }
            });
        }

        double gap = 0.0;
        for (std::size_t s = 0; s < dirs; ++s) {
            for (std::size_t t = s + 1; t < dirs; ++t) {
                auto& lam = multipliers[pair_index(s, t)];
                for (std::size_t i = 0; i < f.data.size(); ++i) {
                    const double d = copies[s].data[i] - copies[t].data[i];
                    lam[i] += mu * d;
                    gap = std::max(gap, std::abs(d));
                }
            }
        }
        for (std::size_t i = 0; i < f.data.size(); ++i) {
            double acc = 0.0;
            for (std::size_t s = 0; s < dirs; ++s) {
                acc += copies[s].data[i];
            }
            average.data[i] = acc / copies_d;
        }
        const double energy = consider(snap_to_partition(average, f, tol));
        result.trace.push_back({j, mu, gap, energy});
        result.iterations = j;
        result.consensus_gap = gap;
        if (gap < tol) {
            result.status = AdmmStatus::Converged;
            break;
        }
    }
    for (const auto& u : copies) {
        consider(snap_to_partition(u, f, tol));
    }
    return result;
}

void write_energy_trace(const std::filesystem::path& path, const std::vector<AdmmTraceRow>& trace) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << "iteration,coupling,consensus_gap,energy\n" << std::setprecision(17);
    for (const auto& row : trace) {
        out << row.iteration << ',' << row.coupling << ',' << row.consensus_gap << ',' << row.energy << '\n';
    }
}

}  // namespace txseg
