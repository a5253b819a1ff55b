#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "flameforge/backend.hpp"

namespace flameforge::metrics {

using backend::EmbeddingSpace;
using backend::EmbeddingVector;

struct GaussianStats {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
    std::size_t n = 0;
};

// Sample mean and unbiased covariance, symmetrized as (S + S^T) / 2.
// Rejects fewer than two vectors, mixed spaces and mixed dimensions.
GaussianStats fit_gaussian(std::span<const EmbeddingVector> embeddings);

// Square root of a symmetric PSD matrix through its eigendecomposition.
// Eigenvalues down to -1e-8 (relative to the largest) are clipped to zero;
// anything more negative is rejected.
Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& matrix);

// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}), with the trace of the
// product root taken from the symmetric form S_a^{1/2} S_b S_a^{1/2}.
// Clamped to >= 0.
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

enum class Normalization { None, DivideByReference };

std::string_view to_string(Normalization mode);
std::optional<Normalization> parse_normalization(std::string_view name);

double normalize_fid(double fid, Normalization mode, double reference);

double cosine(std::span<const float> a, std::span<const float> b);

// 100 * max(0, cos(image, text)).
double clip_score(const EmbeddingVector& image, const EmbeddingVector& text);

inline constexpr double kDefaultTemperature = 100.0;

// Fire-class probability of a two-way softmax over temperature-scaled cosines.
double clip_confidence(const EmbeddingVector& patch, const EmbeddingVector& fire_text,
                       const EmbeddingVector& nonfire_text, double temperature = kDefaultTemperature);

// Per-image inputs to an arm report.
struct ImageScores {
    double clip_score = 0.0;
    std::vector<double> region_confidences;
};

struct ReportCounts {
    std::size_t images = 0;
    std::size_t regions = 0;
    std::size_t real_images = 0;

    bool operator==(const ReportCounts&) const = default;
};

struct MetricsReport {
    std::string arm;
    double fid = 0.0;
    double nfid = 0.0;
    double clip_score_mean = 0.0;
    std::optional<double> clip_confidence_mean;  // absent when no image has regions
    ReportCounts counts;
    Normalization normalization_mode = Normalization::None;

    bool operator==(const MetricsReport&) const = default;
};

// Per-image confidence is the mean over its regions; arm confidence is the
// mean over images that have regions. CLIP Score is the mean over images.
MetricsReport aggregate(std::string arm, std::span<const ImageScores> images, double fid, double nfid,
                        Normalization mode, std::size_t real_images = 0);

std::string report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const std::string& text);

// Header `arm,nFID,CLIP Score,CLIP Conf.`; absent confidence prints as NA.
std::string reports_to_csv(std::span<const MetricsReport> reports);

} // namespace flameforge::metrics
