#include "txseg/image.hpp"

#include "txseg/rng.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <memory>
#include <sstream>

namespace txseg {

Image::Image(int h, int w, int c, double fill)
    : height(h), width(w), channels(c),
      data(static_cast<std::size_t>(h) * w * c, fill) {}

void Image::validate() const {
    if (height <= 0 || width <= 0 || channels <= 0) {
        throw std::invalid_argument("image: non-positive dimensions");
    }
    if (data.size() != static_cast<std::size_t>(height) * width * channels) {
        throw std::invalid_argument("image: data length does not match shape");
    }
    for (double v : data) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
            throw std::invalid_argument("image: intensity outside [0, 1]");
        }
    }
}

namespace {

std::string lower_extension(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return ext;
}

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---------------------------------------------------------------------------
// PNG

struct PngMemorySource {
    const std::vector<unsigned char>* bytes;
    std::size_t pos;
};

void png_read_from_memory(png_structp png, png_bytep out, png_size_t length) {
    auto* src = static_cast<PngMemorySource*>(png_get_io_ptr(png));
    if (src->pos + length > src->bytes->size()) {
        png_error(png, "truncated PNG stream");
    }
    std::copy_n(src->bytes->data() + src->pos, length, out);
    src->pos += length;
}

void png_error_handler(png_structp png, png_const_charp) {
    std::longjmp(png_jmpbuf(png), 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

RawRaster read_png(const std::vector<unsigned char>& bytes, const std::string& name) {
    RawRaster raster;
    std::vector<unsigned char> row_buffer;
    PngMemorySource source{&bytes, 0};

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                             png_error_handler, png_warning_handler);
    if (png == nullptr) {
        throw IoError("png: cannot allocate reader");
    }
    png_infop info = png_create_info_struct(png);
    if (info == nullptr) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png: cannot allocate info");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("png: malformed file " + name);
    }

    png_set_read_fn(png, &source, png_read_from_memory);
    png_read_info(png, info);

    const int color_type = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color_type == PNG_COLOR_TYPE_PALETTE) {
        png_set_palette_to_rgb(png);
    }
    if (color_type == PNG_COLOR_TYPE_GRAY && depth < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
    }
    if (color_type & PNG_COLOR_MASK_ALPHA) {
        png_set_strip_alpha(png);
    }
    png_read_update_info(png, info);

    raster.width = static_cast<int>(png_get_image_width(png, info));
    raster.height = static_cast<int>(png_get_image_height(png, info));
    raster.channels = png_get_channels(png, info);
    raster.bit_depth = png_get_bit_depth(png, info);
    if (raster.bit_depth != 8 && raster.bit_depth != 16) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("png: unsupported bit depth in " + name);
    }
    if (raster.channels != 1 && raster.channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("png: unsupported channel layout in " + name);
    }

    const std::size_t row_bytes = png_get_rowbytes(png, info);
    const std::size_t row_samples = static_cast<std::size_t>(raster.width) * raster.channels;
    row_buffer.resize(row_bytes);
    raster.samples.resize(row_samples * raster.height);
    for (int r = 0; r < raster.height; ++r) {
        png_read_row(png, row_buffer.data(), nullptr);
        std::uint16_t* out = raster.samples.data() + r * row_samples;
        if (raster.bit_depth == 8) {
            std::copy_n(row_buffer.data(), row_samples, out);
        } else {
            for (std::size_t i = 0; i < row_samples; ++i) {
                out[i] = static_cast<std::uint16_t>((row_buffer[2 * i] << 8) | row_buffer[2 * i + 1]);
            }
        }
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return raster;
}

// ---------------------------------------------------------------------------
// PNM

class PnmHeaderReader {
public:
    explicit PnmHeaderReader(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

    long next_int() {
        skip_space_and_comments();
        long value = 0;
        bool any = false;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            value = value * 10 + (bytes_[pos_] - '0');
            if (value > 1'000'000'000) {
                throw IoError("pnm: header value too large");
            }
            ++pos_;
            any = true;
        }
        if (!any) {
            throw IoError("pnm: malformed header");
        }
        return value;
    }

    std::size_t data_start() {
        // exactly one whitespace byte separates maxval from the raster
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
            throw IoError("pnm: malformed header");
        }
        return pos_ + 1;
    }

    void set_pos(std::size_t p) { pos_ = p; }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') {
                    ++pos_;
                }
            } else {
                break;
            }
        }
    }

    const std::vector<unsigned char>& bytes_;
    std::size_t pos_ = 0;
};

RawRaster read_pnm(const std::vector<unsigned char>& bytes, int& maxval_out) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
        throw IoError("pnm: only binary P5/P6 supported");
    }
    PnmHeaderReader header(bytes);
    header.set_pos(2);
    RawRaster raster;
    raster.channels = bytes[1] == '5' ? 1 : 3;
    raster.width = static_cast<int>(header.next_int());
    raster.height = static_cast<int>(header.next_int());
    const long maxval = header.next_int();
    if (maxval <= 0 || maxval > 65535) {
        throw IoError("pnm: unsupported maxval");
    }
    if (raster.width <= 0 || raster.height <= 0) {
        throw IoError("pnm: empty image");
    }
    maxval_out = static_cast<int>(maxval);
    raster.bit_depth = maxval < 256 ? 8 : 16;
    const std::size_t start = header.data_start();
    const std::size_t count = static_cast<std::size_t>(raster.width) * raster.height * raster.channels;
    const std::size_t bytes_per = raster.bit_depth == 8 ? 1 : 2;
    if (bytes.size() < start + count * bytes_per) {
        throw IoError("pnm: truncated raster");
    }
    raster.samples.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        if (bytes_per == 1) {
            raster.samples[i] = bytes[start + i];
        } else {
            raster.samples[i] = static_cast<std::uint16_t>((bytes[start + 2 * i] << 8) | bytes[start + 2 * i + 1]);
        }
    }
    return raster;
}

bool is_png(const std::vector<unsigned char>& bytes) {
    return bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0;
}

}  // namespace

RawRaster read_raster(const std::filesystem::path& path) {
    const auto bytes = read_bytes(path);
    if (is_png(bytes)) {
        return read_png(bytes, path.string());
    }
    if (bytes.size() >= 2 && bytes[0] == 'P') {
        int maxval = 0;
        return read_pnm(bytes, maxval);
    }
    throw IoError("unsupported image format: " + path.string());
}

void write_png(const std::filesystem::path& path, const RawRaster& raster) {
    if (raster.channels != 1 && raster.channels != 3) {
        throw IoError("png: only gray or RGB output supported");
    }
    if (raster.bit_depth != 8 && raster.bit_depth != 16) {
        throw IoError("png: unsupported bit depth");
    }
    const std::size_t row_samples = static_cast<std::size_t>(raster.width) * raster.channels;
    const std::size_t row_bytes = row_samples * (raster.bit_depth / 8);
    std::vector<unsigned char> row(row_bytes);

    std::FILE* fp = std::fopen(path.string().c_str(), "wb");
    if (fp == nullptr) {
        throw IoError("cannot write " + path.string());
    }
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                              png_error_handler, png_warning_handler);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (png == nullptr || info == nullptr) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw IoError("png: cannot allocate writer");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw IoError("png: write failed for " + path.string());
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(raster.width),
                 static_cast<png_uint_32>(raster.height), raster.bit_depth,
                 raster.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int r = 0; r < raster.height; ++r) {
        const std::uint16_t* in = raster.samples.data() + r * row_samples;
        for (std::size_t i = 0; i < row_samples; ++i) {
            if (raster.bit_depth == 8) {
                row[i] = static_cast<unsigned char>(in[i]);
            } else {
                row[2 * i] = static_cast<unsigned char>(in[i] >> 8);
                row[2 * i + 1] = static_cast<unsigned char>(in[i] & 0xFF);
            }
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    if (std::fclose(fp) != 0) {
        throw IoError("cannot write " + path.string());
    }
}

void write_pnm(const std::filesystem::path& path, const RawRaster& raster) {
    if (raster.channels != 1 && raster.channels != 3) {
        throw IoError("pnm: only gray or RGB output supported");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    const int maxval = raster.bit_depth == 8 ? 255 : 65535;
    out << (raster.channels == 1 ? "P5" : "P6") << '\n'
        << raster.width << ' ' << raster.height << '\n' << maxval << '\n';
    for (std::uint16_t s : raster.samples) {
        if (raster.bit_depth == 8) {
            out.put(static_cast<char>(s));
        } else {
            out.put(static_cast<char>(s >> 8));
            out.put(static_cast<char>(s & 0xFF));
        }
    }
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
}

Image load_image(const std::filesystem::path& path) {
    const auto bytes = read_bytes(path);
    RawRaster raster;
    double scale = 0.0;
    if (is_png(bytes)) {
        raster = read_png(bytes, path.string());
        scale = raster.bit_depth == 8 ? 255.0 : 65535.0;
    } else if (bytes.size() >= 2 && bytes[0] == 'P') {
        int maxval = 0;
        raster = read_pnm(bytes, maxval);
        scale = maxval;
    } else {
        throw IoError("unsupported image format: " + path.string());
    }

    Image img(raster.height, raster.width, raster.channels);
    for (int r = 0; r < raster.height; ++r) {
        for (int x = 0; x < raster.width; ++x) {
            for (int c = 0; c < raster.channels; ++c) {
                const std::size_t i = (static_cast<std::size_t>(r) * raster.width + x) * raster.channels + c;
                img.at(r, x, c) = std::min(1.0, raster.samples[i] / scale);
            }
        }
    }
    return img;
}

void save_image(const std::filesystem::path& path, const Image& img) {
    RawRaster raster;
    raster.height = img.height;
    raster.width = img.width;
    raster.channels = img.channels;
    raster.bit_depth = 8;
    raster.samples.resize(img.data.size());
    for (int r = 0; r < img.height; ++r) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < img.channels; ++c) {
                const double v = std::clamp(img.at(r, x, c), 0.0, 1.0);
                raster.samples[(static_cast<std::size_t>(r) * img.width + x) * img.channels + c] =
                    static_cast<std::uint16_t>(std::lround(v * 255.0));
            }
        }
    }
    const std::string ext = lower_extension(path);
    if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") {
        write_pnm(path, raster);
    } else {
        write_png(path, raster);
    }
}

Image to_grayscale(const Image& img) {
    if (img.channels == 1) {
        return img;
    }
    if (img.channels != 3) {
        throw std::invalid_argument("to_grayscale: expected 1 or 3 channels");
    }
    Image gray(img.height, img.width, 1);
    for (int r = 0; r < img.height; ++r) {
        for (int x = 0; x < img.width; ++x) {
            gray.at(r, x) = 0.299 * img.at(r, x, 0) + 0.587 * img.at(r, x, 1) + 0.114 * img.at(r, x, 2);
        }
    }
    return gray;
}

void Stencil::validate() const {
    if (offsets.empty() || offsets.size() != weights.size()) {
        throw std::invalid_argument("stencil: offsets and weights must be non-empty and paired");
    }
    for (std::size_t s = 0; s < offsets.size(); ++s) {
        if (offsets[s].dx == 0 && offsets[s].dy == 0) {
            throw std::invalid_argument("stencil: zero offset");
        }
        if (!(weights[s] > 0.0)) {
            throw std::invalid_argument("stencil: weights must be positive");
        }
        for (std::size_t t = 0; t < s; ++t) {
            if (offsets[s] == offsets[t]) {
                throw std::invalid_argument("stencil: duplicate offset");
            }
        }
    }
}

Stencil Stencil::near_isotropic() {
    const double axial = std::sqrt(2.0) - 1.0;
    const double diagonal = 1.0 - std::sqrt(2.0) / 2.0;
    return Stencil{{{1, 0}, {0, 1}, {1, 1}, {1, -1}}, {axial, axial, diagonal, diagonal}};
}

std::vector<double> gaussian_mask(int side, double sigma_g) {
    if (side < 1) {
        throw std::invalid_argument("gaussian_mask: side must be >= 1");
    }
    if (!(sigma_g > 0.0)) {
        throw std::invalid_argument("gaussian_mask: sigma must be positive");
    }
    const double center = (side - 1) / 2.0;
    std::vector<double> mask(static_cast<std::size_t>(side) * side);
    double peak = 0.0;
    for (int i = 0; i < side; ++i) {
        for (int j = 0; j < side; ++j) {
            const double di = i - center;
            const double dj = j - center;
            const double v = std::exp(-(di * di + dj * dj) / (2.0 * sigma_g * sigma_g));
            mask[static_cast<std::size_t>(i) * side + j] = v;
            peak = std::max(peak, v);
        }
    }
    for (double& v : mask) {
        v /= peak;
    }
    return mask;
}

PatchSet sample_super_patches(const Image& img, int count, int filter_side,
                              const Stencil& stencil, const std::vector<double>& mask,
                              std::uint64_t seed) {
    stencil.validate();
    if (count < 1) {
        throw std::invalid_argument("sample_super_patches: count must be >= 1");
    }
    if (filter_side < 1) {
        throw std::invalid_argument("sample_super_patches: filter side must be >= 1");
    }
    const int taps = filter_side * filter_side;
    if (mask.size() != static_cast<std::size_t>(taps)) {
        throw std::invalid_argument("sample_super_patches: mask size does not match filter");
    }

    int min_dx = 0, max_dx = 0, min_dy = 0, max_dy = 0;
    for (const auto& a : stencil.offsets) {
        min_dx = std::min(min_dx, a.dx);
        max_dx = std::max(max_dx, a.dx);
        min_dy = std::min(min_dy, a.dy);
        max_dy = std::max(max_dy, a.dy);
    }
    // valid top-left corners of the centre crop
    const int x_lo = -min_dx;
    const int x_hi = img.width - filter_side - max_dx;
    const int y_lo = -min_dy;
    const int y_hi = img.height - filter_side - max_dy;
    if (x_hi < x_lo || y_hi < y_lo) {
        throw std::invalid_argument("sample_super_patches: image smaller than super-patch");
    }

    PatchSet ps;
    ps.filter_side = filter_side;
    ps.count = count;
    ps.channels = img.channels;
    ps.offsets = stencil.offsets;
    ps.mask = mask;
    const std::size_t block = static_cast<std::size_t>(img.channels) * taps;
    ps.center.resize(block * count);
    ps.directional.assign(stencil.size(), std::vector<double>(block * count));
    ps.anchors.resize(count);

    auto crop = [&](std::vector<double>& dst, int i, int top, int left) {
        for (int l = 0; l < img.channels; ++l) {
            double* out = dst.data() + (static_cast<std::size_t>(i) * img.channels + l) * taps;
            for (int r = 0; r < filter_side; ++r) {
                for (int c = 0; c < filter_side; ++c) {
                    const int t = r * filter_side + c;
                    out[t] = mask[t] * img.at(top + r, left + c, l);
                }
            }
        }
    };

    CounterRng rng(seed);
    const auto cols = static_cast<std::uint64_t>(x_hi - x_lo + 1);
    const auto rows = static_cast<std::uint64_t>(y_hi - y_lo + 1);
    for (int i = 0; i < count; ++i) {
        const int left = x_lo + static_cast<int>(rng.uniform_index(cols));
        const int top = y_lo + static_cast<int>(rng.uniform_index(rows));
        ps.anchors[i] = {top, left};
        crop(ps.center, i, top, left);
        for (std::size_t s = 0; s < stencil.size(); ++s) {
            crop(ps.directional[s], i, top + stencil.offsets[s].dy, left + stencil.offsets[s].dx);
        }
    }
    return ps;
}

}  // namespace txseg
