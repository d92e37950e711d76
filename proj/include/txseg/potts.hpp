#pragma once

#include "txseg/image.hpp"
#include "txseg/tensor.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace txseg {

/// sum_s w_s * #{pixels i : v(i) != v(i + a_s)}, both endpoints in bounds, exact comparison.
double jump_count(const VectorImage& v, const Stencil& stencil);

/// gamma * jump_count(v) + |v - f|^2
double potts_energy(const VectorImage& v, const VectorImage& f, double gamma, const Stencil& stencil);

struct Potts1dResult {
    std::vector<double> values;       // n x K, row per sample
    std::vector<int> segment_starts;  // first sample of every segment, ascending, starts with 0
    double energy = 0.0;

    int jumps() const { return static_cast<int>(segment_starts.size()) - 1; }
};

/**
 * @brief Exact minimiser of gamma * #jumps + sum_t w_t |x_t - y_t|^2.
 *
 * Classical O(n^2 K) dynamic program with the usual pruning: once the error of
 * the trailing interval exceeds the best candidate, longer intervals cannot win.
 * Ties go to fewer jumps, then to the shorter last segment.
 *
 * @param y n x K samples, row-major.
 * @param weights empty for unit weights, else n positive weights.
 */
Potts1dResult potts_1d(std::span<const double> y, int length, int channels, double gamma,
                       std::span<const double> weights = {});

struct PottsProblem {
    VectorImage data;
    double gamma = 0.03;
    Stencil stencil = Stencil::near_isotropic();
};

struct AdmmSchedule {
    double mu0 = 0.0;  // <= 0 selects 1e-2 * gamma
    double exponent = 2.01;
    int max_outer = 250;
    double agree_tol = 1e-3;  // relative to the data range

    void validate() const;
};

enum class AdmmStatus { Converged, IterationCap };

struct AdmmTraceRow {
    int iteration = 0;
    double coupling = 0.0;
    double consensus_gap = 0.0;
    double energy = 0.0;  // energy of the snapped consensus
};

struct PottsResult {
    VectorImage solution;
    double energy = 0.0;
    AdmmStatus status = AdmmStatus::IterationCap;
    int iterations = 0;
    double consensus_gap = 0.0;
    std::vector<AdmmTraceRow> trace;
};

/**
 * @brief Multi-direction ADMM for the vector-valued Potts problem.
 *
 * One copy of the solution per stencil direction, pairwise multipliers, and
 * coupling mu_j = mu0 * j^p. Every sweep solves all 1-D lines of a direction
 * exactly with potts_1d. The returned solution is piecewise constant: the
 * partition is read off the consensus of the copies and every part takes the
 * mean of the data, and the lowest-energy of these candidates and the two
 * trivial ones (data, global mean) is returned.
 */
PottsResult potts_2d_admm(const PottsProblem& problem, const AdmmSchedule& schedule);

/// CSV: iteration,coupling,consensus_gap,energy
void write_energy_trace(const std::filesystem::path& path, const std::vector<AdmmTraceRow>& trace);

}  // namespace txseg
