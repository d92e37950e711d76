#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>

namespace txseg {

/**
 * @brief Filter bank on (S^{n-1} ∩ 1⊥)^K plus an optional seeded mean filter.
 *
 * `learned` is n x K, one vectorised (row-major) square filter per column.
 * The mean filter is the constant 1/sqrt(n) template and is never optimised;
 * when present it is the first output channel of the bank.
 */
struct FilterBank {
    int side = 0;
    Eigen::MatrixXd learned;
    bool has_mean_filter = false;

    int taps() const { return side * side; }
    int learned_count() const { return static_cast<int>(learned.cols()); }
    int channel_count() const { return learned_count() + (has_mean_filter ? 1 : 0); }

    /// All output filters in channel order (mean filter first when present).
    Eigen::MatrixXd all_filters() const;

    /// Largest |norm - 1| and |sum| over learned columns.
    double max_norm_deviation() const;
    double max_mean_deviation() const;
};

/// Per-column tangent vectors; same shape as FilterBank::learned.
using Tangent = Eigen::MatrixXd;

/// Removes the mean, then the radial component, from every column of g.
Tangent project_tangent(const FilterBank& base, const Eigen::MatrixXd& g);

/// Per-column great-circle step cos(t|h|) x + sin(t|h|) h/|h|.
FilterBank geodesic_step(const FilterBank& base, const Tangent& dir, double t);

/// Transports `v` (tangent at base) along the geodesic defined by (base, dir, t).
Tangent parallel_transport(const Tangent& v, const FilterBank& base, const Tangent& dir, double t);

/// Standard-normal columns, mean-subtracted and normalised; deterministic in seed.
FilterBank random_init(int side, int count, std::uint64_t seed, bool with_mean_filter = false);

/// Bank holding only the mean filter.
FilterBank mean_only_bank(int side);

// TXSF bank file: "TXSF", u16 version 1, u16 flags (bit 0 = mean filter),
// u32 K, u32 side, K*n little-endian f64, filter after filter, row-major taps.
// K counts every stored filter; the mean filter, when flagged, is stored first.
void write_bank(const std::filesystem::path& path, const FilterBank& bank);
FilterBank read_bank(const std::filesystem::path& path);

}  // namespace txseg
