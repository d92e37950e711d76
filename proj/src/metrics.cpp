#include "txseg/metrics.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace txseg {

Contingency contingency(const LabelMap& pred, const LabelMap& gt) {
    if (pred.height != gt.height || pred.width != gt.width) {
        throw std::invalid_argument("metrics: label maps differ in size");
    }
    pred.validate();
    gt.validate();
    Contingency table;
    table.rows = pred.region_count;
    table.cols = gt.region_count;
    table.total = static_cast<long long>(pred.pixel_count());
    table.counts.assign(static_cast<std::size_t>(table.rows) * table.cols, 0);
    table.row_sums.assign(table.rows, 0);
    table.col_sums.assign(table.cols, 0);
    for (std::size_t p = 0; p < pred.pixel_count(); ++p) {
        const int i = pred.labels[p];
        const int j = gt.labels[p];
        ++table.counts[static_cast<std::size_t>(i) * table.cols + j];
        ++table.row_sums[i];
        ++table.col_sums[j];
    }
    return table;
}

RegionScores region_metrics(const LabelMap& pred, const LabelMap& gt, double threshold) {
    if (!(threshold > 0.5 && threshold <= 1.0)) {
        throw std::invalid_argument("region_metrics: threshold must lie in (0.5, 1]");
    }
    const Contingency t = contingency(pred, gt);
    std::vector<char> pred_used(t.rows, 0);
    std::vector<char> gt_used(t.cols, 0);
    auto inside = [threshold](long long part, long long whole) {
        return static_cast<double>(part) >= threshold * static_cast<double>(whole);
    };

    long long correct = 0, over = 0, under = 0;
    for (int i = 0; i < t.rows; ++i) {
        for (int j = 0; j < t.cols; ++j) {
            const long long n = t.at(i, j);
            if (n > 0 && !gt_used[j] && inside(n, t.row_sums[i]) && inside(n, t.col_sums[j])) {
                pred_used[i] = gt_used[j] = 1;
                correct += t.col_sums[j];
                break;
            }
        }
    }
    for (int j = 0; j < t.cols; ++j) {
        if (gt_used[j]) {
            continue;
        }
        std::vector<int> pieces;
        long long covered = 0;
        for (int i = 0; i < t.rows; ++i) {
            if (!pred_used[i] && t.at(i, j) > 0 && inside(t.at(i, j), t.row_sums[i])) {
                pieces.push_back(i);
                covered += t.at(i, j);
            }
        }
        if (pieces.size() >= 2 && inside(covered, t.col_sums[j])) {
            gt_used[j] = 1;
            for (int i : pieces) {
                pred_used[i] = 1;
            }
            over += t.col_sums[j];
        }
    }
    for (int i = 0; i < t.rows; ++i) {
        if (pred_used[i]) {
            continue;
        }
        std::vector<int> pieces;
        long long covered = 0;
        for (int j = 0; j < t.cols; ++j) {
            if (!gt_used[j] && t.at(i, j) > 0 && inside(t.at(i, j), t.col_sums[j])) {
                pieces.push_back(j);
                covered += t.at(i, j);
            }
        }
        if (pieces.size() >= 2 && inside(covered, t.row_sums[i])) {
            pred_used[i] = 1;
            for (int j : pieces) {
                gt_used[j] = 1;
                under += t.col_sums[j];
            }
        }
    }
    long long missed = 0, noise = 0;
    for (int j = 0; j < t.cols; ++j) {
        if (!gt_used[j]) {
            missed += t.col_sums[j];
        }
    }
    for (int i = 0; i < t.rows; ++i) {
        if (!pred_used[i]) {
            noise += t.row_sums[i];
        }
    }
    const double n = static_cast<double>(t.total);
    return {100.0 * correct / n, 100.0 * over / n, 100.0 * under / n, 100.0 * missed / n, 100.0 * noise / n};
}

std::pair<double, double> consistency_metrics(const LabelMap& pred, const LabelMap& gt) {
    const Contingency t = contingency(pred, gt);
    double pred_to_gt = 0.0, gt_to_pred = 0.0, local = 0.0;
    for (int i = 0; i < t.rows; ++i) {
        for (int j = 0; j < t.cols; ++j) {
            const double n = static_cast<double>(t.at(i, j));
            if (n == 0.0) {
                continue;
            }
            const double e1 = (t.row_sums[i] - n) / static_cast<double>(t.row_sums[i]);
            const double e2 = (t.col_sums[j] - n) / static_cast<double>(t.col_sums[j]);
            pred_to_gt += n * e1;
            gt_to_pred += n * e2;
            local += n * std::min(e1, e2);
        }
    }
    const double total = static_cast<double>(t.total);
    return {std::min(pred_to_gt, gt_to_pred) / total, local / total};
}

Distances distance_metrics(const LabelMap& pred, const LabelMap& gt) {
    const Contingency t = contingency(pred, gt);
    const double n = static_cast<double>(t.total);
    long long row_max = 0, col_max = 0;
    for (int i = 0; i < t.rows; ++i) {
        long long m = 0;
        for (int j = 0; j < t.cols; ++j) {
            m = std::max(m, t.at(i, j));
        }
        row_max += m;
    }
    for (int j = 0; j < t.cols; ++j) {
        long long m = 0;
        for (int i = 0; i < t.rows; ++i) {
            m = std::max(m, t.at(i, j));
        }
        col_max += m;
    }
    double sq_rows = 0.0, sq_cols = 0.0, sq_cells = 0.0, vi = 0.0;
    for (long long s : t.row_sums) {
        sq_rows += static_cast<double>(s) * s;
    }
    for (long long s : t.col_sums) {
        sq_cols += static_cast<double>(s) * s;
    }
    for (int i = 0; i < t.rows; ++i) {
        for (int j = 0; j < t.cols; ++j) {
            const double c = static_cast<double>(t.at(i, j));
            if (c == 0.0) {
                continue;
            }
            sq_cells += c * c;
            // H(pred | gt) + H(gt | pred)
            vi -= c / n * (std::log2(c / t.col_sums[j]) + std::log2(c / t.row_sums[i]));
        }
    }
    Distances d;
    d.dd = (2.0 * n - static_cast<double>(row_max) - static_cast<double>(col_max)) / (2.0 * n);
    d.dm = (sq_rows + sq_cols - 2.0 * sq_cells) / (n * n);
    d.dvi = std::max(vi, 0.0);
    return d;
}

MetricsReport evaluate(const LabelMap& pred, const LabelMap& gt, double threshold) {
    const RegionScores r = region_metrics(pred, gt, threshold);
    const auto [gce, lce] = consistency_metrics(pred, gt);
    const Distances d = distance_metrics(pred, gt);
    return {r.cs, r.os, r.us, r.me, r.ne, gce, lce, d.dd, d.dm, d.dvi};
}

std::string report_csv_header() { return "image,cs,os,us,me,ne,gce,lce,dd,dm,dvi"; }

std::string report_csv_row(const std::string& name, const MetricsReport& m) {
    std::string row = name;
    char buf[32];
    for (double v : {m.cs, m.os, m.us, m.me, m.ne, m.gce, m.lce, m.dd, m.dm, m.dvi}) {
        std::snprintf(buf, sizeof buf, ",%.10g", v);
        row += buf;
    }
    return row;
}

std::string report_json(const MetricsReport& m) {
    const nlohmann::ordered_json j = {{"cs", m.cs},   {"os", m.os},   {"us", m.us}, {"me", m.me},
                                      {"ne", m.ne},   {"gce", m.gce}, {"lce", m.lce},
                                      {"dd", m.dd},   {"dm", m.dm},   {"dvi", m.dvi}};
    return j.dump(2);
}

}  // namespace txseg
