#pragma once

#include "txseg/segment.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace txseg {

struct MetricsReport {
    double cs = 0.0;  // percentages of ground-truth pixels
    double os = 0.0;
    double us = 0.0;
    double me = 0.0;
    double ne = 0.0;  // percentage of predicted pixels
    double gce = 0.0;
    double lce = 0.0;
    double dd = 0.0;
    double dm = 0.0;
    double dvi = 0.0;  // bits
};

/// Sparse-free contingency table n_ij (rows: pred ids, columns: gt ids).
struct Contingency {
    int rows = 0;
    int cols = 0;
    long long total = 0;
    std::vector<long long> counts;  // rows x cols, row-major
    std::vector<long long> row_sums;
    std::vector<long long> col_sums;

    long long at(int i, int j) const { return counts[static_cast<std::size_t>(i) * cols + j]; }
};

Contingency contingency(const LabelMap& pred, const LabelMap& gt);

struct RegionScores {
    double cs = 0.0, os = 0.0, us = 0.0, me = 0.0, ne = 0.0;
};

/**
 * @brief Correct / over / under / missed / noise classification of regions.
 *
 * A pair is correct when the overlap covers at least `threshold` of both
 * regions. Remaining ground-truth regions are over-segmented when two or more
 * unmatched predicted regions, each lying at least `threshold` inside it,
 * jointly cover `threshold` of it; under-segmentation is the mirror case.
 */
RegionScores region_metrics(const LabelMap& pred, const LabelMap& gt, double threshold = 0.75);

std::pair<double, double> consistency_metrics(const LabelMap& pred, const LabelMap& gt);

struct Distances {
    double dd = 0.0, dm = 0.0, dvi = 0.0;
};

Distances distance_metrics(const LabelMap& pred, const LabelMap& gt);

MetricsReport evaluate(const LabelMap& pred, const LabelMap& gt, double threshold = 0.75);

std::string report_csv_header();
std::string report_csv_row(const std::string& name, const MetricsReport& report);
std::string report_json(const MetricsReport& report);

}  // namespace txseg
