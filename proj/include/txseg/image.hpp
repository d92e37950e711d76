#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace txseg {

/// Raised for unreadable, malformed or unsupported files.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/**
 * @brief H x W x L raster of intensities in [0, 1].
 *
 * Planar storage: channel c, row r, column x lives at (c * height + r) * width + x.
 */
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> data;

    Image() = default;
    Image(int h, int w, int c, double fill = 0.0);

    double& at(int r, int x, int c = 0) {
        return data[(static_cast<std::size_t>(c) * height + r) * width + x];
    }
    double at(int r, int x, int c = 0) const {
        return data[(static_cast<std::size_t>(c) * height + r) * width + x];
    }
    std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }

    /// Throws std::invalid_argument when shape, finiteness or range is violated.
    void validate() const;
};

/// Integer-valued raster as stored on disk (8 or 16 bit samples).
struct RawRaster {
    int height = 0;
    int width = 0;
    int channels = 0;
    int bit_depth = 8;
    std::vector<std::uint16_t> samples;  // interleaved, row-major
};

RawRaster read_raster(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RawRaster& raster);
void write_pnm(const std::filesystem::path& path, const RawRaster& raster);

/// PNG (8/16 bit, gray or RGB) or binary PGM/PPM; x/255 resp. x/65535 scaling.
Image load_image(const std::filesystem::path& path);

/// Writes an 8-bit PNG or PGM/PPM (chosen by extension), clamping to [0, 1].
void save_image(const std::filesystem::path& path, const Image& img);

/// Luma 0.299/0.587/0.114 for RGB, identity for gray.
Image to_grayscale(const Image& img);

/// Finite-difference offset in pixels: dx along columns, dy along rows.
struct Offset {
    int dx = 0;
    int dy = 0;
    bool operator==(const Offset&) const = default;
};

/// Weighted finite-difference system used by the jump penalty.
struct Stencil {
    std::vector<Offset> offsets;
    std::vector<double> weights;

    std::size_t size() const { return offsets.size(); }
    void validate() const;

    /// Eight-connected system {(1,0),(0,1),(1,1),(1,-1)} with weights
    /// sqrt(2)-1 for the axial and 1-sqrt(2)/2 for the diagonal directions.
    static Stencil near_isotropic();
};

/// Gaussian taps exp(-(di^2+dj^2)/(2 sigma^2)) around (side-1)/2, max entry 1.
std::vector<double> gaussian_mask(int side, double sigma_g);

/// Default mask width: side / 4.
inline double default_mask_sigma(int side) { return side / 4.0; }

/**
 * @brief Randomly sampled super-patches with one crop per stencil offset.
 *
 * Crop matrices are stored sample-major: entry (i, l, t) of a crop set is at
 * (i * channels + l) * taps + t with t the row-major tap index in the
 * filter_side x filter_side template. All crops are already mask-weighted.
 */
struct PatchSet {
    int filter_side = 0;
    int count = 0;
    int channels = 0;
    std::vector<Offset> offsets;
    std::vector<double> center;
    std::vector<std::vector<double>> directional;
    std::vector<double> mask;
    /// Top-left corner (row, column) of each centre crop in the source image.
    std::vector<std::pair<int, int>> anchors;

    int taps() const { return filter_side * filter_side; }
};

PatchSet sample_super_patches(const Image& img, int count, int filter_side,
                              const Stencil& stencil, const std::vector<double>& mask,
                              std::uint64_t seed);

}  // namespace txseg
