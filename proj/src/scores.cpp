#include "oodkit/scores.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "oodkit/errors.hpp"

namespace oodkit {

std::string score_kind_name(ScoreKind k) {
    switch (k) {
        case ScoreKind::msp: return "msp";
        case ScoreKind::energy: return "energy";
        case ScoreKind::mahalanobis: return "mahalanobis";
        case ScoreKind::max_cosine: return "maxcos";
    }
    return "msp";
}

ScoreKind score_kind_from_name(const std::string& name) {
    if (name == "msp") return ScoreKind::msp;
    if (name == "energy") return ScoreKind::energy;
    if (name == "mahalanobis") return ScoreKind::mahalanobis;
    if (name == "maxcos") return ScoreKind::max_cosine;
    throw ConfigError("unknown score kind: " + name);
}

double msp_score(std::span<const double> probabilities) {
    if (probabilities.empty()) throw ConfigError("msp_score: empty probability vector");
    double sum = 0.0;
    double best = probabilities[0];
    for (double p : probabilities) {
        if (p < 0.0) throw ConfigError("msp_score: negative probability");
        sum += p;
        best = std::max(best, p);
    }
    if (std::abs(sum - 1.0) > 1e-6) {
        throw ConfigError("msp_score: probabilities sum to " + std::to_string(sum));
    }
    return best;
}

double energy_score(std::span<const double> logits, double temperature) {
    if (logits.empty()) throw ConfigError("energy_score: empty logit vector");
    if (!(temperature > 0.0)) throw ConfigError("energy_score: temperature must be > 0");
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : logits) sum += std::exp((v - mx) / temperature);
    return mx + temperature * std::log(sum);
}

RealMatrix cholesky(const RealMatrix& a) {
    if (a.rows != a.cols) throw ConfigError("cholesky: matrix not square");
    const std::size_t d = a.rows;
    RealMatrix l(d, d);
    for (std::size_t j = 0; j < d; ++j) {
        double diag = a(j, j);
        for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
        if (!(diag > 0.0)) {
            throw NumericError("cholesky: matrix not positive definite at row " +
                               std::to_string(j));
        }
        l(j, j) = std::sqrt(diag);
        for (std::size_t i = j + 1; i < d; ++i) {
            double v = a(i, j);
            for (std::size_t k = 0; k < j; ++k) v -= l(i, k) * l(j, k);
            l(i, j) = v / l(j, j);
        }
    }
    return l;
}

RealMatrix spd_inverse(const RealMatrix& a) {
    const RealMatrix l = cholesky(a);
    const std::size_t d = a.rows;
    RealMatrix inv(d, d);
    std::vector<double> y(d);
    for (std::size_t col = 0; col < d; ++col) {
        // L y = e_col, then L^T x = y
        for (std::size_t i = 0; i < d; ++i) {
            double v = (i == col) ? 1.0 : 0.0;
            for (std::size_t k = 0; k < i; ++k) v -= l(i, k) * y[k];
            y[i] = v / l(i, i);
        }
        for (std::size_t ii = d; ii-- > 0;) {
            double v = y[ii];
            for (std::size_t k = ii + 1; k < d; ++k) v -= l(k, ii) * inv(k, col);
            inv(ii, col) = v / l(ii, ii);
        }
    }
    // enforce exact symmetry against substitution round-off
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) {
            const double s = 0.5 * (inv(i, j) + inv(j, i));
            inv(i, j) = s;
            inv(j, i) = s;
        }
    }
    return inv;
}

GaussianStats fit_gaussian_stats(const RealMatrix& features, const std::vector<int>& labels) {
    const std::size_t n = features.rows;
    const std::size_t d = features.cols;
    if (n == 0 || d == 0) throw ConfigError("fit_gaussian_stats: empty feature matrix");
    if (labels.size() != n) throw ConfigError("fit_gaussian_stats: labels size != rows");
    int max_label = -1;
    for (int y : labels) {
        if (y < 0) throw ConfigError("fit_gaussian_stats: negative label (OOD rows not allowed)");
        max_label = std::max(max_label, y);
    }
    const std::size_t c = static_cast<std::size_t>(max_label) + 1;
    std::vector<std::size_t> counts(c, 0);
    GaussianStats stats;
    stats.means = RealMatrix(c, d);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t y = static_cast<std::size_t>(labels[i]);
        ++counts[y];
        for (std::size_t k = 0; k < d; ++k) stats.means(y, k) += features(i, k);
    }
    for (std::size_t j = 0; j < c; ++j) {
        if (counts[j] < 2) {
            throw ConfigError("fit_gaussian_stats: class " + std::to_string(j) +
                              " has fewer than 2 samples");
        }
        for (std::size_t k = 0; k < d; ++k) stats.means(j, k) /= static_cast<double>(counts[j]);
    }

    RealMatrix sigma(d, d);
    std::vector<double> diff(d);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t y = static_cast<std::size_t>(labels[i]);
        for (std::size_t k = 0; k < d; ++k) diff[k] = features(i, k) - stats.means(y, k);
        for (std::size_t r = 0; r < d; ++r) {
            for (std::size_t s = r; s < d; ++s) sigma(r, s) += diff[r] * diff[s];
        }
    }
    for (std::size_t r = 0; r < d; ++r) {
        for (std::size_t s = r; s < d; ++s) {
            sigma(r, s) /= static_cast<double>(n);
            sigma(s, r) = sigma(r, s);
        }
    }

    double trace = 0.0;
    for (std::size_t k = 0; k < d; ++k) trace += sigma(k, k);
    double ridge = 1e-6 * trace / static_cast<double>(d);
    if (ridge <= 0.0) ridge = 1e-10;

    for (int attempt = 0;; ++attempt) {
        stats.covariance = sigma;
        for (std::size_t k = 0; k < d; ++k) stats.covariance(k, k) += ridge;
        try {
            stats.precision = spd_inverse(stats.covariance);
            break;
        } catch (const NumericError&) {
            if (attempt >= 3) {
                throw NumericError("fit_gaussian_stats: covariance stayed singular after "
                                   "ridge escalation");
            }
            ridge *= 10.0;
        }
    }
    return stats;
}

double mahalanobis_score(std::span<const double> z, const GaussianStats& stats) {
    const std::size_t d = stats.dim();
    if (z.size() != d) throw ConfigError("mahalanobis_score: dimension mismatch");
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> diff(d);
    for (std::size_t j = 0; j < stats.num_classes(); ++j) {
        for (std::size_t k = 0; k < d; ++k) diff[k] = z[k] - stats.means(j, k);
        double q = 0.0;
        for (std::size_t r = 0; r < d; ++r) {
            double acc = 0.0;
            for (std::size_t s = 0; s < d; ++s) acc += stats.precision(r, s) * diff[s];
            q += diff[r] * acc;
        }
        best = std::min(best, q);
    }
    return -best;
}

double max_cosine_score(std::span<const double> z, const MetricHead& head) {
    RealMatrix row(1, z.size());
    std::copy(z.begin(), z.end(), row.data.begin());
    const RealMatrix cos = cosine_logits(row, head);
    double best = cos(0, 0);
    for (std::size_t j = 1; j < cos.cols; ++j) best = std::max(best, cos(0, j));
    return best;
}

std::vector<double> score_features(ScoreKind kind, const RealMatrix& z,
                                   const MetricHead& head, const GaussianStats* stats,
                                   double temperature) {
    std::vector<double> out(z.rows);
    switch (kind) {
        case ScoreKind::msp: {
            const RealMatrix p = softmax_rows(margin_free_logits(z, head));
            for (std::size_t i = 0; i < z.rows; ++i) out[i] = msp_score(p.row(i));
            break;
        }
        case ScoreKind::energy: {
            const RealMatrix logits = margin_free_logits(z, head);
            for (std::size_t i = 0; i < z.rows; ++i) {
                out[i] = energy_score(logits.row(i), temperature);
            }
            break;
        }
        case ScoreKind::mahalanobis: {
            if (!stats) throw ConfigError("score_features: mahalanobis requires fitted stats");
            for (std::size_t i = 0; i < z.rows; ++i) {
                out[i] = mahalanobis_score(z.row(i), *stats);
            }
            break;
        }
        case ScoreKind::max_cosine: {
            const RealMatrix cos = cosine_logits(z, head);
            for (std::size_t i = 0; i < z.rows; ++i) {
                double best = cos(i, 0);
                for (std::size_t j = 1; j < cos.cols; ++j) best = std::max(best, cos(i, j));
                out[i] = best;
            }
            break;
        }
    }
    return out;
}

}  // namespace oodkit
