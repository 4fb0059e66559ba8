#pragma once

#include <span>
#include <string>
#include <vector>

#include "oodkit/losses.hpp"
#include "oodkit/matrix.hpp"

namespace oodkit {

// Every score is oriented so that higher means more in-distribution.
enum class ScoreKind { msp, energy, mahalanobis, max_cosine };

std::string score_kind_name(ScoreKind k);  // msp | energy | mahalanobis | maxcos
ScoreKind score_kind_from_name(const std::string& name);

// Class-conditional Gaussians with a single pooled covariance.
struct GaussianStats {
    RealMatrix means;       // C x d
    RealMatrix covariance;  // d x d, ridge included
    RealMatrix precision;   // d x d

    std::size_t num_classes() const { return means.rows; }
    std::size_t dim() const { return means.cols; }
};

// Highest posterior probability. Input must be a normalized distribution.
double msp_score(std::span<const double> probabilities);

// T * ln sum_i exp(logit_i / T), max-subtracted. Shifting every logit by c
// shifts the score by exactly c.
double energy_score(std::span<const double> logits, double temperature = 1.0);

// Per-class means plus pooled covariance with ridge 1e-6 * trace/d; the ridge
// grows x10 (up to 3 retries) if the factorization fails.
GaussianStats fit_gaussian_stats(const RealMatrix& features, const std::vector<int>& labels);

// Negated minimum squared Mahalanobis distance to any class mean.
double mahalanobis_score(std::span<const double> z, const GaussianStats& stats);

// Largest cosine between z and any (unit-normalized) head weight column.
double max_cosine_score(std::span<const double> z, const MetricHead& head);

// Batch driver over penultimate features. stats may be null for kinds that do
// not use it; mahalanobis without stats is a configuration error.
std::vector<double> score_features(ScoreKind kind, const RealMatrix& z,
                                   const MetricHead& head, const GaussianStats* stats,
                                   double temperature = 1.0);

// Dense symmetric positive definite helpers (exposed for tests).
RealMatrix cholesky(const RealMatrix& a);     // lower L with A = L L^T
RealMatrix spd_inverse(const RealMatrix& a);  // via the Cholesky factor

}  // namespace oodkit
