#pragma once

#include "txseg/features.hpp"
#include "txseg/image.hpp"
#include "txseg/manifold.hpp"
#include "txseg/potts.hpp"
#include "txseg/tensor.hpp"

#include <filesystem>
#include <vector>

namespace txseg {

/// H x W map of region ids, contiguous 0..region_count-1, row-major.
struct LabelMap {
    int height = 0;
    int width = 0;
    std::vector<int> labels;
    int region_count = 0;

    LabelMap() = default;
    LabelMap(int h, int w, int fill = 0)
        : height(h), width(w), labels(static_cast<std::size_t>(h) * w, fill), region_count(fill + 1) {}

    std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
    int& at(int r, int x) { return labels[static_cast<std::size_t>(r) * width + x]; }
    int at(int r, int x) const { return labels[static_cast<std::size_t>(r) * width + x]; }

    /// Throws std::invalid_argument unless labels are exactly 0..region_count-1.
    void validate() const;
};

/// Renumbers arbitrary non-negative ids to 0..R-1 in first-encounter raster order.
LabelMap relabel(int height, int width, const std::vector<int>& ids);

/// 4-connected components of equal labels, renumbered in raster order.
LabelMap connected_components(const LabelMap& lm);

/**
 * Groups 4-neighbours whose channel sums differ by at most tol * (range of
 * sums) and whose vectors differ by at most tol * (channel range) in every
 * channel.
 */
LabelMap extract_labels(const VectorImage& v, double tol = 1e-6);

struct MergeParams {
    double min_area_fraction = 1e-3;

    void validate() const;
};

/**
 * @brief Absorbs regions smaller than min_area_fraction * H * W.
 *
 * The smallest offender goes to the neighbour holding the largest share of
 * its 4-neighbour boundary; ties prefer the larger neighbour, then the lower id.
 * `merges`, when given, receives the number of merges performed.
 */
LabelMap merge_small_regions(const LabelMap& lm, const MergeParams& params, int* merges = nullptr);

/// 16-bit grayscale PNG holding the raw label ids.
void write_label_png(const std::filesystem::path& path, const LabelMap& lm);
LabelMap read_label_png(const std::filesystem::path& path);

/// Deterministic pseudo-colour preview, one hashed colour per id.
void write_label_preview(const std::filesystem::path& path, const LabelMap& lm);

struct SegmentParams {
    double gamma = 0.03;
    double sigma_mu = 2000.0;       // nonlinearity parameter
    double whiten_ridge = 1e-8;     // relative covariance ridge
    double mask_sigma = 0.0;        // <= 0 selects side / 4
    double label_tol = 1e-6;
    Stencil stencil = Stencil::near_isotropic();
    AdmmSchedule schedule;
    MergeParams merge;

    void validate() const;
};

struct SegmentResult {
    LabelMap labels;
    double energy = 0.0;
    AdmmStatus status = AdmmStatus::IterationCap;
    int admm_iterations = 0;
    int regions_before_merge = 0;
    std::vector<AdmmTraceRow> trace;
};

/// Features, whitening, Potts, label extraction and merging.
SegmentResult segment_pipeline(const Image& img, const FilterBank& bank, const SegmentParams& params);

}  // namespace txseg
