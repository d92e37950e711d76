#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace txseg {

/// H x W x K real tensor, pixel-major: channel k of pixel (r, x) is at (r * W + x) * K + k.
struct VectorImage {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> data;

    VectorImage() = default;
    VectorImage(int h, int w, int k, double fill = 0.0)
        : height(h), width(w), channels(k),
          data(static_cast<std::size_t>(h) * w * k, fill) {}

    std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
    std::size_t index(int r, int x) const {
        return (static_cast<std::size_t>(r) * width + x) * channels;
    }
    std::span<double> pixel(int r, int x) { return {data.data() + index(r, x), static_cast<std::size_t>(channels)}; }
    std::span<const double> pixel(int r, int x) const {
        return {data.data() + index(r, x), static_cast<std::size_t>(channels)};
    }
    double& at(int r, int x, int k) { return data[index(r, x) + k]; }
    double at(int r, int x, int k) const { return data[index(r, x) + k]; }

    bool same_shape(const VectorImage& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

}  // namespace txseg
