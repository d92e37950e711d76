#pragma once

#include "txseg/image.hpp"
#include "txseg/manifold.hpp"
#include "txseg/tensor.hpp"

#include <Eigen/Dense>

#include <filesystem>

namespace txseg {

enum class FeatureStage { Raw, Nonlinear, Whitened };

struct FeatureImage {
    VectorImage values;
    FeatureStage stage = FeatureStage::Raw;
};

/**
 * @brief Mask-weighted correlation of every bank filter with the image.
 *
 * The window is centred at each pixel (top-left offset -(side-1)/2) with
 * half-sample symmetric padding. Channels of a multi-channel image share the
 * filter and their responses are summed. Output channel order follows
 * FilterBank::all_filters().
 */
FeatureImage apply_filter_bank(const Image& img, const FilterBank& bank, const std::vector<double>& mask);

/// Elementwise log(1 + mu x^2).
FeatureImage nonlinearity(const FeatureImage& raw, double mu);

/// Covariance whitening operator with max-normalised inverse square root.
struct WhitenOp {
    Eigen::MatrixXd sigma;     // covariance including the ridge
    Eigen::MatrixXd inv_sqrt;  // Sigma^{-1/2} / normalisation
    double normalisation = 1.0;
    double epsilon = 0.0;

    Eigen::MatrixXd raw_inv_sqrt() const { return inv_sqrt * normalisation; }
};

WhitenOp covariance(const FeatureImage& feat, double epsilon_scale = 1e-8);

/// Per pixel: inv_sqrt * g.
FeatureImage whiten(const FeatureImage& feat, const WhitenOp& op);
FeatureImage whiten(const FeatureImage& feat, const Eigen::MatrixXd& transform);

/// TXFT dump: "TXFT", u32 H, u32 W, u32 K, little-endian f64 pixel-major.
void write_features(const std::filesystem::path& path, const FeatureImage& feat);
FeatureImage read_features(const std::filesystem::path& path);

}  // namespace txseg
