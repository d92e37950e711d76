#include "txseg/manifold.hpp"

#include "txseg/image.hpp"
#include "txseg/rng.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <vector>

namespace txseg {

Eigen::MatrixXd FilterBank::all_filters() const {
    const int n = taps();
    Eigen::MatrixXd out(n, channel_count());
    int col = 0;
    if (has_mean_filter) {
        out.col(col++).setConstant(1.0 / std::sqrt(static_cast<double>(n)));
    }
    if (learned_count() > 0) {
        out.rightCols(learned_count()) = learned;
    }
    return out;
}

double FilterBank::max_norm_deviation() const {
    double worst = 0.0;
    for (int k = 0; k < learned_count(); ++k) {
        worst = std::max(worst, std::abs(learned.col(k).norm() - 1.0));
    }
    return worst;
}

double FilterBank::max_mean_deviation() const {
    double worst = 0.0;
    for (int k = 0; k < learned_count(); ++k) {
        worst = std::max(worst, std::abs(learned.col(k).sum()));
    }
    return worst;
}

namespace {

// Returns a copy of x projected back onto the zero-mean unit sphere.
void clean_column(Eigen::Ref<Eigen::VectorXd> x) {
    x.array() -= x.mean();
    x /= x.norm();
}

}  // namespace

Tangent project_tangent(const FilterBank& base, const Eigen::MatrixXd& g) {
    if (g.rows() != base.learned.rows() || g.cols() != base.learned.cols()) {
        throw std::invalid_argument("project_tangent: shape mismatch");
    }
    Tangent out = g;
    for (Eigen::Index k = 0; k < out.cols(); ++k) {
        auto col = out.col(k);
        col.array() -= col.mean();
        col -= col.dot(base.learned.col(k)) * base.learned.col(k);
    }
    return out;
}

FilterBank geodesic_step(const FilterBank& base, const Tangent& dir, double t) {
    FilterBank out = base;
    for (Eigen::Index k = 0; k < dir.cols(); ++k) {
        const double len = dir.col(k).norm();
        const double angle = t * len;
        if (len == 0.0 || angle == 0.0) {
            continue;
        }
        auto col = out.learned.col(k);
        col = std::cos(angle) * base.learned.col(k) + (std::sin(angle) / len) * dir.col(k);
        clean_column(col);
    }
    return out;
}

Tangent parallel_transport(const Tangent& v, const FilterBank& base, const Tangent& dir, double t) {
    Tangent out = v;
    for (Eigen::Index k = 0; k < dir.cols(); ++k) {
        const double len = dir.col(k).norm();
        const double angle = t * len;
        if (len == 0.0 || angle == 0.0) {
            continue;
        }
        const Eigen::VectorXd u = dir.col(k) / len;
        const double along = u.dot(v.col(k));
        out.col(k) += along * ((std::cos(angle) - 1.0) * u - std::sin(angle) * base.learned.col(k));
    }
    return out;
}

FilterBank random_init(int side, int count, std::uint64_t seed, bool with_mean_filter) {
    const int n = side * side;
    if (n < 2 || count < 1) {
        throw std::invalid_argument("random_init: need n >= 2 and K >= 1");
    }
    FilterBank bank;
    bank.side = side;
    bank.has_mean_filter = with_mean_filter;
    bank.learned.resize(n, count);
    CounterRng rng(seed);
    for (int k = 0; k < count; ++k) {
        auto col = bank.learned.col(k);
        double norm = 0.0;
        while (!(norm > 1e-8)) {
            for (int i = 0; i < n; ++i) {
                col(i) = rng.normal();
            }
            col.array() -= col.mean();
            norm = col.norm();
        }
        col /= norm;
    }
    return bank;
}

FilterBank mean_only_bank(int side) {
    FilterBank bank;
    bank.side = side;
    bank.has_mean_filter = true;
    bank.learned.resize(side * side, 0);
    return bank;
}

namespace {

constexpr char kBankMagic[4] = {'T', 'X', 'S', 'F'};
constexpr std::uint16_t kBankVersion = 1;

template <typename T>
void put_le(std::vector<unsigned char>& out, T value) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
              std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
    const U bits = std::bit_cast<U>(value);
    for (std::size_t b = 0; b < sizeof(T); ++b) {
        out.push_back(static_cast<unsigned char>((bits >> (8 * b)) & 0xFF));
    }
}

template <typename T>
T get_le(const std::vector<unsigned char>& in, std::size_t& pos) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
              std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
    if (pos + sizeof(T) > in.size()) {
        throw IoError("bank: truncated file");
    }
    U bits = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b) {
        bits |= static_cast<U>(in[pos + b]) << (8 * b);
    }
    pos += sizeof(T);
    return std::bit_cast<T>(bits);
}

}  // namespace

void write_bank(const std::filesystem::path& path, const FilterBank& bank) {
    const Eigen::MatrixXd filters = bank.all_filters();
    std::vector<unsigned char> bytes(kBankMagic, kBankMagic + 4);
    put_le<std::uint16_t>(bytes, kBankVersion);
    put_le<std::uint16_t>(bytes, bank.has_mean_filter ? 1 : 0);
    put_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(filters.cols()));
    put_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(bank.side));
    for (Eigen::Index k = 0; k < filters.cols(); ++k) {
        for (Eigen::Index i = 0; i < filters.rows(); ++i) {
            put_le<double>(bytes, filters(i, k));
        }
    }
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("cannot write bank " + path.string());
    }
}

FilterBank read_bank(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open bank " + path.string());
    }
    const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kBankMagic, 4) != 0) {
        throw IoError("bank: bad magic in " + path.string());
    }
    std::size_t pos = 4;
    const auto version = get_le<std::uint16_t>(bytes, pos);
    if (version != kBankVersion) {
        throw IoError("bank: unsupported version " + std::to_string(version));
    }
    const auto flags = get_le<std::uint16_t>(bytes, pos);
    const auto count = get_le<std::uint32_t>(bytes, pos);
    const auto side = get_le<std::uint32_t>(bytes, pos);
    if (side == 0 || side > 4096) {
        throw IoError("bank: invalid filter side");
    }
    const bool has_mean = (flags & 1u) != 0;
    if (has_mean && count == 0) {
        throw IoError("bank: mean flag set but no filters stored");
    }
    const std::size_t n = static_cast<std::size_t>(side) * side;
    if (bytes.size() != 16 + static_cast<std::size_t>(count) * n * 8) {
        throw IoError("bank: payload size does not match header");
    }
    FilterBank bank;
    bank.side = static_cast<int>(side);
    bank.has_mean_filter = has_mean;
    const int learned = static_cast<int>(count) - (has_mean ? 1 : 0);
    bank.learned.resize(static_cast<Eigen::Index>(n), learned);
    if (has_mean) {
        pos += n * 8;
    }
    for (int k = 0; k < learned; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            bank.learned(static_cast<Eigen::Index>(i), k) = get_le<double>(bytes, pos);
        }
    }
    return bank;
}

}  // namespace txseg
