#include "txseg/features.hpp"

#include "txseg/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace txseg {

namespace {

int symmetric_index(int i, int size) {
    while (i < 0 || i >= size) {
        i = i < 0 ? -i - 1 : 2 * size - i - 1;
    }
    return i;
}

constexpr std::size_t kRowChunk = 8;

}  // namespace

FeatureImage apply_filter_bank(const Image& img, const FilterBank& bank, const std::vector<double>& mask) {
    const int side = bank.side;
    const int n = bank.taps();
    if (side < 1 || side > std::min(img.height, img.width)) {
        throw std::invalid_argument("apply_filter_bank: filter larger than image");
    }
    if (mask.size() != static_cast<std::size_t>(n)) {
        throw std::invalid_argument("apply_filter_bank: mask size does not match filters");
    }
    const int k_total = bank.channel_count();

    // Shared filters with summed responses act on the channel sum.
    std::vector<double> plane(img.pixel_count(), 0.0);
    for (int c = 0; c < img.channels; ++c) {
        for (std::size_t p = 0; p < plane.size(); ++p) {
            plane[p] += img.data[c * plane.size() + p];
        }
    }

    Eigen::MatrixXd filters = bank.all_filters();
    for (int t = 0; t < n; ++t) {
        filters.row(t) *= mask[t];
    }

    const int lead = (side - 1) / 2;
    FeatureImage out{VectorImage(img.height, img.width, k_total), FeatureStage::Raw};
    parallel_for(static_cast<std::size_t>(img.height), kRowChunk, [&](std::size_t begin, std::size_t end) {
        Eigen::MatrixXd windows(img.width, n);
        Eigen::MatrixXd responses(img.width, k_total);
        for (auto r = static_cast<int>(begin); r < static_cast<int>(end); ++r) {
            for (int i = 0; i < side; ++i) {
                const int src_row = symmetric_index(r - lead + i, img.height);
                const double* row = plane.data() + static_cast<std::size_t>(src_row) * img.width;
                for (int j = 0; j < side; ++j) {
                    for (int x = 0; x < img.width; ++x) {
                        windows(x, i * side + j) = row[symmetric_index(x - lead + j, img.width)];
                    }
                }
            }
            responses.noalias() = windows * filters;
            for (int x = 0; x < img.width; ++x) {
                for (int k = 0; k < k_total; ++k) {
                    out.values.at(r, x, k) = responses(x, k);
                }
            }
        }
    });
    return out;
}

FeatureImage nonlinearity(const FeatureImage& raw, double mu) {
    if (!(mu > 0.0)) {
        throw std::invalid_argument("nonlinearity: mu must be positive");
    }
    FeatureImage out{raw.values, FeatureStage::Nonlinear};
    for (double& v : out.values.data) {
        v = std::log1p(mu * v * v);
    }
    return out;
}

WhitenOp covariance(const FeatureImage& feat, double epsilon_scale) {
    const auto& v = feat.values;
    const std::size_t pixels = v.pixel_count();
    const int k = v.channels;
    if (pixels < 2 || k < 1) {
        throw std::invalid_argument("covariance: need at least two pixels and one channel");
    }
    for (double x : v.data) {
        if (!std::isfinite(x)) {
            throw std::invalid_argument("covariance: non-finite feature value");
        }
    }
    const Eigen::Map<const Eigen::MatrixXd> samples(v.data.data(), k, static_cast<Eigen::Index>(pixels));

    constexpr std::size_t kPixelChunk = 4096;
    const std::size_t chunks = chunk_count(pixels, kPixelChunk);
    std::vector<Eigen::VectorXd> sums(chunks);
    parallel_for(pixels, kPixelChunk, [&](std::size_t b, std::size_t e) {
        sums[b / kPixelChunk] = samples.middleCols(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(e - b)).rowwise().sum();
    });
    const Eigen::VectorXd mean = ordered_sum<Eigen::VectorXd>(sums, Eigen::VectorXd::Zero(k)) / static_cast<double>(pixels);

    std::vector<Eigen::MatrixXd> scatters(chunks);
    parallel_for(pixels, kPixelChunk, [&](std::size_t b, std::size_t e) {
        const Eigen::MatrixXd centred =
            samples.middleCols(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(e - b)).colwise() - mean;
        scatters[b / kPixelChunk] = centred * centred.transpose();
    });
    Eigen::MatrixXd sigma = ordered_sum<Eigen::MatrixXd>(scatters, Eigen::MatrixXd::Zero(k, k)) / static_cast<double>(pixels);
    sigma = 0.5 * (sigma + sigma.transpose()).eval();

    WhitenOp op;
    const double trace = sigma.trace();
    op.epsilon = trace > 0.0 ? epsilon_scale * trace / k : epsilon_scale;
    if (!(op.epsilon > 0.0)) {
        throw std::invalid_argument("covariance: ridge must be positive");
    }
    sigma.diagonal().array() += op.epsilon;
    op.sigma = sigma;

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
    if (eig.info() != Eigen::Success) {
        throw std::runtime_error("covariance: eigendecomposition failed");
    }
    const Eigen::VectorXd scales = eig.eigenvalues().cwiseMax(op.epsilon).cwiseSqrt().cwiseInverse();
    Eigen::MatrixXd inv_sqrt = eig.eigenvectors() * scales.asDiagonal() * eig.eigenvectors().transpose();
    inv_sqrt = 0.5 * (inv_sqrt + inv_sqrt.transpose()).eval();

    // Signed maximum as the normaliser; absolute maximum if no entry is positive.
    double norm = inv_sqrt.maxCoeff();
    if (!(norm > 0.0)) {
        norm = inv_sqrt.cwiseAbs().maxCoeff();
    }
    op.normalisation = norm;
    op.inv_sqrt = inv_sqrt / norm;
    return op;
}

FeatureImage whiten(const FeatureImage& feat, const Eigen::MatrixXd& transform) {
    const int k = feat.values.channels;
    if (transform.rows() != k || transform.cols() != k) {
        throw std::invalid_argument("whiten: transform does not match channel count");
    }
    FeatureImage out{VectorImage(feat.values.height, feat.values.width, k), FeatureStage::Whitened};
    const auto pixels = static_cast<Eigen::Index>(feat.values.pixel_count());
    const Eigen::Map<const Eigen::MatrixXd> in(feat.values.data.data(), k, pixels);
    Eigen::Map<Eigen::MatrixXd> dst(out.values.data.data(), k, pixels);
    constexpr std::size_t kPixelChunk = 4096;
    parallel_for(static_cast<std::size_t>(pixels), kPixelChunk, [&](std::size_t b, std::size_t e) {
        const auto cols = static_cast<Eigen::Index>(e - b);
        dst.middleCols(static_cast<Eigen::Index>(b), cols).noalias() =
            transform * in.middleCols(static_cast<Eigen::Index>(b), cols);
    });
    return out;
}

FeatureImage whiten(const FeatureImage& feat, const WhitenOp& op) {
    if (feat.stage != FeatureStage::Nonlinear) {
        throw std::invalid_argument("whiten: expected nonlinear features");
    }
    return whiten(feat, op.inv_sqrt);
}

namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) {
        out.push_back(static_cast<unsigned char>((v >> (8 * b)) & 0xFF));
    }
}

std::uint32_t get_u32(const std::vector<unsigned char>& in, std::size_t pos) {
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) {
        v |= static_cast<std::uint32_t>(in[pos + b]) << (8 * b);
    }
    return v;
}

}  // namespace

void write_features(const std::filesystem::path& path, const FeatureImage& feat) {
    std::vector<unsigned char> bytes = {'T', 'X', 'F', 'T'};
    put_u32(bytes, static_cast<std::uint32_t>(feat.values.height));
    put_u32(bytes, static_cast<std::uint32_t>(feat.values.width));
    put_u32(bytes, static_cast<std::uint32_t>(feat.values.channels));
    for (double v : feat.values.data) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int b = 0; b < 8; ++b) {
            bytes.push_back(static_cast<unsigned char>((bits >> (8 * b)) & 0xFF));
        }
    }
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
}

FeatureImage read_features(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    if (bytes.size() < 16 || std::memcmp(bytes.data(), "TXFT", 4) != 0) {
        throw IoError("features: bad magic");
    }
    const auto h = get_u32(bytes, 4);
    const auto w = get_u32(bytes, 8);
    const auto k = get_u32(bytes, 12);
    const std::size_t count = static_cast<std::size_t>(h) * w * k;
    if (bytes.size() != 16 + count * 8) {
        throw IoError("features: payload size does not match header");
    }
    FeatureImage feat{VectorImage(static_cast<int>(h), static_cast<int>(w), static_cast<int>(k)), FeatureStage::Raw};
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) {
            bits |= static_cast<std::uint64_t>(bytes[16 + 8 * i + b]) << (8 * b);
        }
        feat.values.data[i] = std::bit_cast<double>(bits);
    }
    return feat;
}

}  // namespace txseg
