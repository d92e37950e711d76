#pragma once

#include "txseg/image.hpp"
#include "txseg/manifold.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <utility>
#include <vector>

namespace txseg {

struct ArmijoParams {
    double initial_step = 1.0;
    double shrink = 0.5;
    double sufficient_decrease = 1e-4;
    int max_halvings = 40;
};

struct LearnParams {
    double mu = 2000.0;      // nonlinearity log(1 + mu x^2)
    double nu = 2000.0;      // jump relaxation log(1 + nu |d|^2)
    double lambda = 10.0;    // coherence weight
    double kappa = 10.0;     // centroid weight
    double grad_tol = 1e-5;  // Frobenius norm of the Riemannian gradient
    int max_iters = 1000;
    ArmijoParams armijo;

    void validate() const;
};

/// log(1 + mu x^2)
inline double sigma(double x, double mu) { return std::log1p(mu * x * x); }

/**
 * @brief Patch crops rearranged for the learning objective.
 *
 * Multi-channel crops are summed over channels: with one filter shared by all
 * channels and responses summed, <phi, sum_l u_l> is the tied response.
 */
class LearningData {
public:
    LearningData(const PatchSet& patches, const Stencil& stencil);

    int samples() const { return static_cast<int>(center_.rows()); }
    int taps() const { return static_cast<int>(center_.cols()); }
    int side() const { return side_; }
    std::size_t directions() const { return directional_.size(); }

    const Eigen::MatrixXd& center() const { return center_; }
    const Eigen::MatrixXd& directional(std::size_t s) const { return directional_[s]; }
    double weight(std::size_t s) const { return weights_[s]; }

private:
    int side_ = 0;
    Eigen::MatrixXd center_;                    // M x n
    std::vector<Eigen::MatrixXd> directional_;  // S of M x n
    std::vector<double> weights_;
};

struct ObjectiveValue {
    double total = 0.0;
    double f = 0.0;
    double r = 0.0;
    double h = 0.0;
};

double objective_f(const FilterBank& bank, const LearningData& data, const LearnParams& params);
double objective_f(const FilterBank& bank, const PatchSet& patches, const Stencil& stencil,
                   const LearnParams& params);

/// -sum_{i<j} log(1 - <phi_i, phi_j>^2); +inf for a collinear pair.
double penalty_r(const FilterBank& bank);

/// Diagonals of the first-moment matrices, 1-based (row, column) tap coordinates.
struct CentroidMatrices {
    Eigen::VectorXd px;  // row coordinate of each tap
    Eigen::VectorXd py;  // column coordinate of each tap

    explicit CentroidMatrices(int side);
};

/// Normalised centroid of the squared coefficients, in [-1, 1]^2.
std::pair<double, double> compute_centroid(const Eigen::VectorXd& filter, int side);

/// sum_k -log[(1-cx^2)(1-cy^2)] + (cx-cy)^2 / 2; +inf when |c| reaches 1.
double penalty_h(const FilterBank& bank);

ObjectiveValue evaluate_objective(const FilterBank& bank, const LearningData& data,
                                  const LearnParams& params);

/// Euclidean gradient of f + lambda r + kappa h with respect to the learned columns.
Eigen::MatrixXd grad_E(const FilterBank& bank, const LearningData& data, const LearnParams& params);
Eigen::MatrixXd grad_E(const FilterBank& bank, const PatchSet& patches, const Stencil& stencil,
                       const LearnParams& params);

enum class LearnStatus { Converged, IterationCap, LineSearchFailed };

const char* to_string(LearnStatus status);

struct IterationRecord {
    int iteration = 0;
    ObjectiveValue objective;
    double grad_norm = 0.0;
    double step = 0.0;
    bool steepest_fallback = false;
    double norm_deviation = 0.0;
    double mean_deviation = 0.0;
    /// | |transported gradient| - |gradient| | for this step.
    double transport_error = 0.0;
};

struct LearnResult {
    FilterBank bank;
    LearnStatus status = LearnStatus::IterationCap;
    ObjectiveValue objective;
    double grad_norm = 0.0;
    int iterations = 0;
    std::vector<IterationRecord> trace;
};

using LearnObserver = std::function<void(const IterationRecord&, const FilterBank&)>;

/**
 * @brief Geometric nonlinear CG on the zero-mean oblique manifold.
 *
 * Starts from random_init(side, learned_count, seed), uses Polak-Ribiere+
 * with transported directions, restarts every n*K iterations and whenever
 * the direction is not a descent direction, and steps along exact geodesics
 * with Armijo backtracking. The returned bank carries the mean filter.
 */
LearnResult cg_learn(const PatchSet& patches, const Stencil& stencil, const LearnParams& params,
                     int side, int learned_count, std::uint64_t seed,
                     const LearnObserver& observer = {});

/// CSV: iteration,E,f,r,h,grad_norm,step
void write_learn_log(const std::filesystem::path& path, const std::vector<IterationRecord>& trace);

}  // namespace txseg
