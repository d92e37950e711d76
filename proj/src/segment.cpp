#include "txseg/segment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>

namespace txseg {

void LabelMap::validate() const {
    if (height < 1 || width < 1 || labels.size() != pixel_count()) {
        throw std::invalid_argument("label map: size does not match height x width");
    }
    std::vector<char> seen(static_cast<std::size_t>(std::max(region_count, 0)), 0);
    for (int id : labels) {
        if (id < 0 || id >= region_count) {
            throw std::invalid_argument("label map: id " + std::to_string(id) + " out of range");
        }
        seen[id] = 1;
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
        throw std::invalid_argument("label map: unused id in range");
    }
}

LabelMap relabel(int height, int width, const std::vector<int>& ids) {
    LabelMap out(height, width);
    std::map<int, int> remap;
    for (std::size_t p = 0; p < ids.size(); ++p) {
        auto [it, inserted] = remap.try_emplace(ids[p], static_cast<int>(remap.size()));
        out.labels[p] = it->second;
    }
    out.region_count = static_cast<int>(remap.size());
    return out;
}

namespace {

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
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

template <typename Joinable>
LabelMap components(int height, int width, Joinable join) {
    UnionFind sets(static_cast<std::size_t>(height) * width);
    for (int r = 0; r < height; ++r) {
        for (int x = 0; x < width; ++x) {
            const std::size_t p = static_cast<std::size_t>(r) * width + x;
            if (x + 1 < width && join(p, p + 1)) {
                sets.unite(p, p + 1);
            }
            if (r + 1 < height && join(p, p + width)) {
                sets.unite(p, p + width);
            }
        }
    }
    std::vector<int> roots(static_cast<std::size_t>(height) * width);
    for (std::size_t p = 0; p < roots.size(); ++p) {
        roots[p] = static_cast<int>(sets.find(p));
    }
    return relabel(height, width, roots);
}

}  // namespace

LabelMap connected_components(const LabelMap& lm) {
    return components(lm.height, lm.width, [&](std::size_t p, std::size_t q) { return lm.labels[p] == lm.labels[q]; });
}

LabelMap extract_labels(const VectorImage& v, double tol) {
    if (v.height < 1 || v.width < 1 || v.channels < 1) {
        throw std::invalid_argument("extract_labels: empty tensor");
    }
    if (!(tol >= 0.0)) {
        throw std::invalid_argument("extract_labels: tolerance must be non-negative");
    }
    const int k = v.channels;
    const std::size_t n = v.pixel_count();
    std::vector<double> sums(n, 0.0);
    std::vector<double> lo(k, std::numeric_limits<double>::infinity());
    std::vector<double> hi(k, -std::numeric_limits<double>::infinity());
    for (std::size_t p = 0; p < n; ++p) {
        for (int c = 0; c < k; ++c) {
            const double value = v.data[p * k + c];
            sums[p] += value;
            lo[c] = std::min(lo[c], value);
            hi[c] = std::max(hi[c], value);
        }
    }
    const auto [smin, smax] = std::minmax_element(sums.begin(), sums.end());
    const double sum_tol = tol * (*smax - *smin);
    return components(v.height, v.width, [&](std::size_t p, std::size_t q) {
        if (std::abs(sums[p] - sums[q]) > sum_tol) {
            return false;
        }
        for (int c = 0; c < k; ++c) {
            if (std::abs(v.data[p * k + c] - v.data[q * k + c]) > tol * (hi[c] - lo[c])) {
                return false;
            }
        }
        return true;
    });
}

void MergeParams::validate() const {
    if (!(min_area_fraction >= 0.0 && min_area_fraction < 1.0)) {
        throw std::invalid_argument("merge: min_area_fraction must lie in [0, 1)");
    }
}

LabelMap merge_small_regions(const LabelMap& lm, const MergeParams& params, int* merges) {
    params.validate();
    lm.validate();
    const int regions = lm.region_count;
    std::vector<long long> area(regions, 0);
    std::vector<std::map<int, long long>> shared(regions);
    for (int r = 0; r < lm.height; ++r) {
        for (int x = 0; x < lm.width; ++x) {
            const int a = lm.at(r, x);
            ++area[a];
            if (x + 1 < lm.width && lm.at(r, x + 1) != a) {
                ++shared[a][lm.at(r, x + 1)];
                ++shared[lm.at(r, x + 1)][a];
            }
            if (r + 1 < lm.height && lm.at(r + 1, x) != a) {
                ++shared[a][lm.at(r + 1, x)];
                ++shared[lm.at(r + 1, x)][a];
            }
        }
    }

    const double threshold = params.min_area_fraction * static_cast<double>(lm.pixel_count());
    std::set<std::pair<long long, int>> small;
    for (int id = 0; id < regions; ++id) {
        if (static_cast<double>(area[id]) < threshold) {
            small.emplace(area[id], id);
        }
    }
    std::vector<int> target(regions);
    std::iota(target.begin(), target.end(), 0);
    int alive = regions;
    int done = 0;

    while (alive > 1 && !small.empty()) {
        const int a = small.begin()->second;
        small.erase(small.begin());
        // every boundary edge of a is shared with some neighbour, so the ratio
        // ranking reduces to the shared edge count
        int best = -1;
        for (const auto& [b, edges] : shared[a]) {
            if (best < 0) {
                best = b;
                continue;
            }
            const long long cur = shared[a][best];
            if (edges > cur || (edges == cur && (area[b] > area[best] || (area[b] == area[best] && b < best)))) {
                best = b;
            }
        }
        if (best < 0) {
            break;  // isolated region cannot occur on a connected grid
        }
        const int b = best;
        if (small.erase({area[b], b}) > 0) {
            area[b] += area[a];
            if (static_cast<double>(area[b]) < threshold) {
                small.emplace(area[b], b);
            }
        } else {
            area[b] += area[a];
        }
        area[a] = 0;
        for (const auto& [c, edges] : shared[a]) {
            shared[c].erase(a);
            if (c != b) {
                shared[b][c] += edges;
                shared[c][b] += edges;
            }
        }
        shared[a].clear();
        target[a] = b;
        --alive;
        ++done;
    }

    std::vector<int> ids(lm.labels.size());
    for (std::size_t p = 0; p < ids.size(); ++p) {
        int id = lm.labels[p];
        while (target[id] != id) {
            id = target[id];
        }
        ids[p] = id;
    }
    if (merges) {
        *merges = done;
    }
    return relabel(lm.height, lm.width, ids);
}

void write_label_png(const std::filesystem::path& path, const LabelMap& lm) {
    lm.validate();
    if (lm.region_count > 65536) {
        throw IoError("label map has more regions than a 16-bit PNG can hold");
    }
    RawRaster raster;
    raster.height = lm.height;
    raster.width = lm.width;
    raster.channels = 1;
    raster.bit_depth = 16;
    raster.samples.assign(lm.labels.begin(), lm.labels.end());
    write_png(path, raster);
}

LabelMap read_label_png(const std::filesystem::path& path) {
    const RawRaster raster = read_raster(path);
    if (raster.channels != 1) {
        throw IoError("label map must be single-channel: " + path.string());
    }
    std::vector<int> ids(raster.samples.begin(), raster.samples.end());
    return relabel(raster.height, raster.width, ids);
}

void write_label_preview(const std::filesystem::path& path, const LabelMap& lm) {
    RawRaster raster;
    raster.height = lm.height;
    raster.width = lm.width;
    raster.channels = 3;
    raster.bit_depth = 8;
    raster.samples.resize(lm.pixel_count() * 3);
    for (std::size_t p = 0; p < lm.pixel_count(); ++p) {
        std::uint32_t h = static_cast<std::uint32_t>(lm.labels[p]) * 2654435761u + 0x9e3779b9u;
        h ^= h >> 15;
        h *= 0x85ebca6bu;
        h ^= h >> 13;
        for (int c = 0; c < 3; ++c) {
            raster.samples[p * 3 + c] = static_cast<std::uint16_t>(48 + ((h >> (8 * c)) & 0xff) % 200);
        }
    }
    write_png(path, raster);
}

void SegmentParams::validate() const {
    if (!(gamma > 0.0) || !(sigma_mu > 0.0) || !(whiten_ridge > 0.0) || !(label_tol >= 0.0)) {
        throw std::invalid_argument("segment: gamma, mu and ridge must be positive, label tolerance non-negative");
    }
    stencil.validate();
    schedule.validate();
    merge.validate();
}

SegmentResult segment_pipeline(const Image& img, const FilterBank& bank, const SegmentParams& params) {
    params.validate();
    img.validate();
    const double mask_sigma = params.mask_sigma > 0.0 ? params.mask_sigma : default_mask_sigma(bank.side);
    const auto mask = gaussian_mask(bank.side, mask_sigma);

    const FeatureImage raw = apply_filter_bank(img, bank, mask);
    const FeatureImage g = nonlinearity(raw, params.sigma_mu);
    const WhitenOp op = covariance(g, params.whiten_ridge);
    const FeatureImage white = whiten(g, op);

    PottsProblem problem{white.values, params.gamma, params.stencil};
    PottsResult potts = potts_2d_admm(problem, params.schedule);

    SegmentResult out;
    const LabelMap labels = extract_labels(potts.solution, params.label_tol);
    out.regions_before_merge = labels.region_count;
    out.labels = merge_small_regions(labels, params.merge);
    out.energy = potts.energy;
    out.status = potts.status;
    out.admm_iterations = potts.iterations;
    out.trace = std::move(potts.trace);
    return out;
}

}  // namespace txseg
