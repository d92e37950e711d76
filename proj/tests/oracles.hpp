#pragma once
// Brute-force reference computations used by the tests. They share no code
// with the library algorithms they check.

#include "txseg/image.hpp"
#include "txseg/learn.hpp"
#include "txseg/manifold.hpp"
#include "txseg/segment.hpp"
#include "txseg/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace oracle {

/// Minimum of gamma * jumps + sum_t w_t |x_t - y_t|^2 over all 2^(n-1) segmentations.
inline double potts_1d_brute(const std::vector<double>& y, int n, int k, double gamma,
                             const std::vector<double>& w = {}) {
    double best = std::numeric_limits<double>::infinity();
    for (unsigned mask = 0; mask < (1u << (n - 1)); ++mask) {
        double energy = 0.0;
        int start = 0;
        for (int t = 1; t <= n; ++t) {
            if (t == n || (mask >> (t - 1)) & 1u) {
                double wsum = 0.0;
                std::vector<double> mean(k, 0.0);
                for (int i = start; i < t; ++i) {
                    const double wi = w.empty() ? 1.0 : w[i];
                    wsum += wi;
                    for (int c = 0; c < k; ++c) mean[c] += wi * y[i * k + c];
                }
                for (int c = 0; c < k; ++c) mean[c] /= wsum;
                for (int i = start; i < t; ++i) {
                    const double wi = w.empty() ? 1.0 : w[i];
                    for (int c = 0; c < k; ++c) energy += wi * (y[i * k + c] - mean[c]) * (y[i * k + c] - mean[c]);
                }
                if (t < n) energy += gamma;
                start = t;
            }
        }
        best = std::min(best, energy);
    }
    return best;
}

/// Jump count by the literal double loop: per direction, count differing pairs, then weight.
inline double jump_count_naive(const txseg::VectorImage& v, const txseg::Stencil& st) {
    double total = 0.0;
    for (std::size_t s = 0; s < st.offsets.size(); ++s) {
        long long jumps = 0;
        for (int r = 0; r < v.height; ++r) {
            for (int x = 0; x < v.width; ++x) {
                const int r2 = r + st.offsets[s].dy;
                const int x2 = x + st.offsets[s].dx;
                if (r2 < 0 || r2 >= v.height || x2 < 0 || x2 >= v.width) continue;
                bool same = true;
                for (int c = 0; c < v.channels; ++c) same = same && v.at(r, x, c) == v.at(r2, x2, c);
                jumps += !same;
            }
        }
        total += st.weights[s] * static_cast<double>(jumps);
    }
    return total;
}

struct PartitionOptimum {
    double connected = std::numeric_limits<double>::infinity();
    double any = std::numeric_limits<double>::infinity();
    long long partitions = 0;
};

/**
 * Exhaustive Potts optimum over every set partition of a small scalar image
 * (Bell(9) = 21147 for 3x3). Each block takes its mean. `connected` restricts
 * to partitions whose blocks are connected in the stencil neighbour graph.
 */
inline PartitionOptimum potts_partition_brute(const std::vector<double>& f, int h, int w, double gamma,
                                              const txseg::Stencil& st) {
    const int n = h * w;
    std::vector<int> block(n, 0);
    PartitionOptimum out;
    auto adjacent = [&](int p, int q) {
        const int dr = q / w - p / w, dx = q % w - p % w;
        for (const auto& a : st.offsets) {
            if ((a.dy == dr && a.dx == dx) || (a.dy == -dr && a.dx == -dx)) return true;
        }
        return false;
    };
    auto evaluate = [&](int blocks) {
        ++out.partitions;
        std::vector<double> sum(blocks, 0.0), cnt(blocks, 0.0);
        for (int p = 0; p < n; ++p) {
            sum[block[p]] += f[p];
            cnt[block[p]] += 1.0;
        }
        double energy = 0.0;
        for (int p = 0; p < n; ++p) {
            const double d = f[p] - sum[block[p]] / cnt[block[p]];
            energy += d * d;
        }
        for (std::size_t s = 0; s < st.offsets.size(); ++s) {
            for (int r = 0; r < h; ++r) {
                for (int x = 0; x < w; ++x) {
                    const int r2 = r + st.offsets[s].dy, x2 = x + st.offsets[s].dx;
                    if (r2 < 0 || r2 >= h || x2 < 0 || x2 >= w) continue;
                    if (block[r * w + x] != block[r2 * w + x2]) energy += gamma * st.weights[s];
                }
            }
        }
        out.any = std::min(out.any, energy);
        // connectivity of every block via flood fill
        std::vector<int> seen(n, 0);
        int components = 0;
        for (int p = 0; p < n; ++p) {
            if (seen[p]) continue;
            ++components;
            std::vector<int> stack{p};
            seen[p] = 1;
            while (!stack.empty()) {
                const int q = stack.back();
                stack.pop_back();
                for (int o = 0; o < n; ++o) {
                    if (!seen[o] && block[o] == block[q] && adjacent(q, o)) {
                        seen[o] = 1;
                        stack.push_back(o);
                    }
                }
            }
        }
        if (components == blocks) out.connected = std::min(out.connected, energy);
    };
    // restricted growth strings enumerate set partitions
    std::function<void(int, int)> rec = [&](int p, int blocks) {
        if (p == n) {
            evaluate(blocks);
            return;
        }
        for (int b = 0; b <= blocks; ++b) {
            block[p] = b;
            rec(p + 1, std::max(blocks, b + 1));
        }
    };
    block[0] = 0;
    rec(1, 1);
    return out;
}

/// Central finite difference of a scalar function of the learned columns.
inline Eigen::MatrixXd finite_difference(const txseg::FilterBank& bank,
                                         const std::function<double(const txseg::FilterBank&)>& fn,
                                         double h = 1e-6) {
    Eigen::MatrixXd g(bank.learned.rows(), bank.learned.cols());
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
        for (Eigen::Index i = 0; i < g.rows(); ++i) {
            txseg::FilterBank plus = bank, minus = bank;
            plus.learned(i, j) += h;
            minus.learned(i, j) -= h;
            g(i, j) = (fn(plus) - fn(minus)) / (2.0 * h);
        }
    }
    return g;
}

/// Objective f evaluated literally from the crops, channel by channel, filter by filter.
inline double objective_f_literal(const txseg::FilterBank& bank, const txseg::PatchSet& ps,
                                  const txseg::Stencil& st, const txseg::LearnParams& p) {
    const Eigen::MatrixXd& phi = bank.learned;  // the mean filter stays out of f
    const int n = ps.taps(), k = static_cast<int>(phi.cols());
    auto response = [&](const std::vector<double>& crops, int i, int f) {
        double acc = 0.0;
        for (int l = 0; l < ps.channels; ++l)
            for (int t = 0; t < n; ++t) acc += phi(t, f) * crops[(static_cast<std::size_t>(i) * ps.channels + l) * n + t];
        return acc;
    };
    double total = 0.0;
    for (int i = 0; i < ps.count; ++i) {
        for (std::size_t s = 0; s < st.offsets.size(); ++s) {
            double sq = 0.0;
            for (int f = 0; f < k; ++f) {
                const double d = std::log(1.0 + p.mu * std::pow(response(ps.directional[s], i, f), 2)) -
                                 std::log(1.0 + p.mu * std::pow(response(ps.center, i, f), 2));
                sq += d * d;
            }
            total += st.weights[s] * std::log(1.0 + p.nu * sq);
        }
    }
    return total / ps.count;
}

/// Response at (r, x) computed by walking the window with mirrored indices.
inline double filter_response_brute(const txseg::Image& img, const Eigen::VectorXd& filter,
                                    const std::vector<double>& mask, int side, int r, int x) {
    auto mirror = [](int i, int size) {
        while (i < 0 || i >= size) i = i < 0 ? -1 - i : 2 * size - 1 - i;
        return i;
    };
    const int lead = (side - 1) / 2;
    double acc = 0.0;
    for (int a = 0; a < side; ++a) {
        for (int b = 0; b < side; ++b) {
            double px = 0.0;
            for (int c = 0; c < img.channels; ++c) px += img.at(mirror(r - lead + a, img.height), mirror(x - lead + b, img.width), c);
            acc += mask[a * side + b] * filter(a * side + b) * px;
        }
    }
    return acc;
}

/// Best pixel accuracy over all one-to-one matchings of predicted to true labels
/// (exact assignment by dynamic programming over subsets of true labels).
inline double matched_accuracy(const txseg::LabelMap& pred, const txseg::LabelMap& gt) {
    const int rp = pred.region_count, rg = gt.region_count;
    if (rg > 16) throw std::invalid_argument("matched_accuracy: too many true labels");
    std::vector<std::vector<long long>> table(rp, std::vector<long long>(rg, 0));
    for (std::size_t p = 0; p < pred.labels.size(); ++p) ++table[pred.labels[p]][gt.labels[p]];
    std::vector<long long> dp(1u << rg, -1);
    dp[0] = 0;
    for (int i = 0; i < rp; ++i) {
        std::vector<long long> next = dp;  // predicted label i left unmatched
        for (unsigned used = 0; used < dp.size(); ++used) {
            if (dp[used] < 0) continue;
            for (int j = 0; j < rg; ++j) {
                if (used >> j & 1u) continue;
                next[used | 1u << j] = std::max(next[used | 1u << j], dp[used] + table[i][j]);
            }
        }
        dp = std::move(next);
    }
    return static_cast<double>(*std::max_element(dp.begin(), dp.end())) / static_cast<double>(pred.labels.size());
}

}  // namespace oracle
