#include "flameforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "flameforge/error.hpp"

namespace flameforge::metrics {

namespace {

constexpr double kEigenClip = 1e-8;

void require_finite(const GaussianStats& s, const char* name) {
    if (!s.mean.allFinite() || !s.covariance.allFinite()) {
        throw std::invalid_argument(std::string("frechet_distance: non-finite statistics in ") + name);
    }
    if (s.covariance.rows() != s.mean.size() || s.covariance.cols() != s.mean.size()) {
        throw std::invalid_argument(std::string("frechet_distance: inconsistent dimensions in ") + name);
    }
}

// Eigenvalues of a symmetric PSD matrix, tolerating rounding below zero.
Eigen::VectorXd clipped_eigenvalues(const Eigen::VectorXd& values) {
    const double scale = std::max(1.0, values.cwiseAbs().maxCoeff());
    if (values.minCoeff() < -kEigenClip * scale) {
        throw std::invalid_argument("matrix is not positive semi-definite (eigenvalue " +
                                    std::to_string(values.minCoeff()) + ")");
    }
    return values.cwiseMax(0.0);
}

} // namespace

GaussianStats fit_gaussian(std::span<const EmbeddingVector> embeddings) {
    if (embeddings.size() < 2) {
        throw std::invalid_argument("fit_gaussian: need at least 2 embeddings, got " + std::to_string(embeddings.size()));
    }
    const auto space = embeddings.front().space;
    const auto dim = static_cast<Eigen::Index>(embeddings.front().dim());
    if (dim == 0) {
        throw std::invalid_argument("fit_gaussian: empty embeddings");
    }
    const auto n = static_cast<Eigen::Index>(embeddings.size());
    Eigen::MatrixXd samples(n, dim);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& e = embeddings[static_cast<std::size_t>(i)];
        if (e.space != space) {
            throw std::invalid_argument("fit_gaussian: mixed embedding spaces");
        }
        if (static_cast<Eigen::Index>(e.dim()) != dim) {
            throw std::invalid_argument("fit_gaussian: mixed embedding dimensions");
        }
        for (Eigen::Index j = 0; j < dim; ++j) {
            samples(i, j) = e.values[static_cast<std::size_t>(j)];
        }
    }
    GaussianStats stats;
    stats.n = embeddings.size();
    stats.mean = samples.colwise().mean().transpose();
    const Eigen::MatrixXd centered = samples.rowwise() - stats.mean.transpose();
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
    stats.covariance = (cov + cov.transpose()) / 2.0;
    return stats;
}

Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& matrix) {
    if (matrix.rows() != matrix.cols()) {
        throw std::invalid_argument("sqrtm_psd: matrix is not square");
    }
    const Eigen::MatrixXd sym = (matrix + matrix.transpose()) / 2.0;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("sqrtm_psd: eigendecomposition did not converge");
    }
    const Eigen::VectorXd roots = clipped_eigenvalues(solver.eigenvalues()).cwiseSqrt();
    return solver.eigenvectors() * roots.asDiagonal() * solver.eigenvectors().transpose();
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
    require_finite(a, "first argument");
    require_finite(b, "second argument");
    if (a.mean.size() != b.mean.size()) {
        throw std::invalid_argument("frechet_distance: dimension mismatch (" + std::to_string(a.mean.size()) + " vs " +
                                    std::to_string(b.mean.size()) + ")");
    }
    const double mean_term = (a.mean - b.mean).squaredNorm();

    // Tr((S_a S_b)^{1/2}) = Tr((S_a^{1/2} S_b S_a^{1/2})^{1/2}); the inner
    // product is symmetric PSD, so only its eigenvalues are needed.
    const Eigen::MatrixXd root_a = sqrtm_psd(a.covariance);
    Eigen::MatrixXd inner = root_a * b.covariance * root_a;
    inner = (inner + inner.transpose()) / 2.0;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(inner, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("frechet_distance: eigendecomposition did not converge");
    }
    const double trace_root = clipped_eigenvalues(solver.eigenvalues()).cwiseSqrt().sum();

    const double d = mean_term + a.covariance.trace() + b.covariance.trace() - 2.0 * trace_root;
    return std::max(0.0, d);
}

std::string_view to_string(Normalization mode) {
    return mode == Normalization::None ? "none" : "divide_by_reference";
}

std::optional<Normalization> parse_normalization(std::string_view name) {
    if (name == "none") {
        return Normalization::None;
    }
    if (name == "divide_by_reference") {
        return Normalization::DivideByReference;
    }
    return std::nullopt;
}

double normalize_fid(double fid, Normalization mode, double reference) {
    if (mode == Normalization::None) {
        return fid;
    }
    if (!(reference > 0.0) || !std::isfinite(reference)) {
        throw std::invalid_argument("normalize_fid: reference must be > 0");
    }
    return fid / reference;
}

double cosine(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size() || a.empty()) {
        throw std::invalid_argument("cosine: vectors must have equal, non-zero length");
    }
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na == 0.0 || nb == 0.0) {
        throw std::invalid_argument("cosine: zero-norm vector");
    }
    return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

double clip_score(const EmbeddingVector& image, const EmbeddingVector& text) {
    if (image.space != EmbeddingSpace::ClipImage || text.space != EmbeddingSpace::ClipText) {
        throw std::invalid_argument("clip_score: expects a clip_image and a clip_text embedding");
    }
    return 100.0 * std::max(0.0, cosine(image.values, text.values));
}

double clip_confidence(const EmbeddingVector& patch, const EmbeddingVector& fire_text,
                       const EmbeddingVector& nonfire_text, double temperature) {
    if (patch.space != EmbeddingSpace::ClipImage || fire_text.space != EmbeddingSpace::ClipText ||
        nonfire_text.space != EmbeddingSpace::ClipText) {
        throw std::invalid_argument("clip_confidence: expects a clip_image patch and two clip_text class prompts");
    }
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw std::invalid_argument("clip_confidence: temperature must be > 0");
    }
    const double fire = temperature * cosine(patch.values, fire_text.values);
    const double nonfire = temperature * cosine(patch.values, nonfire_text.values);
    // Two-way softmax as a logistic of the logit gap.
    return 1.0 / (1.0 + std::exp(nonfire - fire));
}

MetricsReport aggregate(std::string arm, std::span<const ImageScores> images, double fid, double nfid,
                        Normalization mode, std::size_t real_images) {
    if (images.empty()) {
        throw std::invalid_argument("aggregate: arm '" + arm + "' has no images");
    }
    MetricsReport report;
    report.arm = std::move(arm);
    report.fid = fid;
    report.nfid = nfid;
    report.normalization_mode = mode;
    report.counts.images = images.size();
    report.counts.real_images = real_images;

    double score_sum = 0.0;
    double confidence_sum = 0.0;
    std::size_t with_regions = 0;
    for (const auto& img : images) {
        score_sum += img.clip_score;
        if (!img.region_confidences.empty()) {
            const double sum =
                std::accumulate(img.region_confidences.begin(), img.region_confidences.end(), 0.0);
            confidence_sum += sum / static_cast<double>(img.region_confidences.size());
            report.counts.regions += img.region_confidences.size();
            ++with_regions;
        }
    }
    report.clip_score_mean = score_sum / static_cast<double>(images.size());
    if (with_regions > 0) {
        report.clip_confidence_mean = confidence_sum / static_cast<double>(with_regions);
    }
    return report;
}

std::string report_to_json(const MetricsReport& r) {
    nlohmann::ordered_json doc;
    doc["schema_version"] = 1;
    doc["arm"] = r.arm;
    doc["fid"] = r.fid;
    doc["nfid"] = r.nfid;
    doc["clip_score_mean"] = r.clip_score_mean;
    doc["clip_confidence_mean"] = r.clip_confidence_mean ? nlohmann::ordered_json(*r.clip_confidence_mean) : nullptr;
    doc["counts"] = {{"images", r.counts.images}, {"regions", r.counts.regions}, {"real_images", r.counts.real_images}};
    doc["normalization_mode"] = to_string(r.normalization_mode);
    return doc.dump(2);
}

MetricsReport report_from_json(const std::string& text) {
    try {
        const auto doc = nlohmann::json::parse(text);
        if (doc.at("schema_version").get<int>() != 1) {
            throw ConfigError("unsupported metrics report schema_version");
        }
        MetricsReport r;
        r.arm = doc.at("arm").get<std::string>();
        r.fid = doc.at("fid").get<double>();
        r.nfid = doc.at("nfid").get<double>();
        r.clip_score_mean = doc.at("clip_score_mean").get<double>();
        if (!doc.at("clip_confidence_mean").is_null()) {
            r.clip_confidence_mean = doc.at("clip_confidence_mean").get<double>();
        }
        const auto& c = doc.at("counts");
        r.counts = {c.at("images").get<std::size_t>(), c.at("regions").get<std::size_t>(),
                    c.at("real_images").get<std::size_t>()};
        const auto mode = parse_normalization(doc.at("normalization_mode").get<std::string>());
        if (!mode) {
            throw ConfigError("unknown normalization_mode in metrics report");
        }
        r.normalization_mode = *mode;
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed metrics report: ") + e.what());
    }
}

std::string reports_to_csv(std::span<const MetricsReport> reports) {
    std::ostringstream out;
    out << "arm,nFID,CLIP Score,CLIP Conf.\n";
    char buf[64];
    for (const auto& r : reports) {
        out << r.arm << ',';
        std::snprintf(buf, sizeof buf, "%.4f", r.nfid);
        out << buf << ',';
        std::snprintf(buf, sizeof buf, "%.2f", r.clip_score_mean);
        out << buf << ',';
        if (r.clip_confidence_mean) {
            std::snprintf(buf, sizeof buf, "%.4f", *r.clip_confidence_mean);
            out << buf;
        } else {
            out << "NA";
        }
        out << '\n';
    }
    return out.str();
}

} // namespace flameforge::metrics
