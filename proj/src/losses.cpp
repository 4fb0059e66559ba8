#include "oodkit/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "oodkit/errors.hpp"

namespace oodkit {

namespace {

constexpr double kCosClamp = 1e-7;
constexpr double kNormGuard = 1e-12;

}  // namespace

std::string loss_kind_name(LossKind k) {
    switch (k) {
        case LossKind::softmax: return "softmax";
        case LossKind::scaled_cosine: return "scaled_cosine";
        case LossKind::sphereface: return "sphereface";
        case LossKind::cosface: return "cosface";
        case LossKind::arcface: return "arcface";
        case LossKind::adacos: return "adacos";
    }
    return "softmax";
}

LossKind loss_kind_from_name(const std::string& name) {
    if (name == "softmax") return LossKind::softmax;
    if (name == "scaled_cosine") return LossKind::scaled_cosine;
    if (name == "sphereface") return LossKind::sphereface;
    if (name == "cosface") return LossKind::cosface;
    if (name == "arcface") return LossKind::arcface;
    if (name == "adacos") return LossKind::adacos;
    throw ConfigError("unknown loss kind: " + name);
}

double adacos_scale(std::size_t num_classes) {
    if (num_classes < 2) throw ConfigError("adacos_scale: need at least 2 classes");
    const double s = std::numbers::sqrt2 * std::log(static_cast<double>(num_classes - 1));
    if (s <= 0.0) {
        warn("adacos_scale: sqrt(2)*ln(C-1) is 0 for C=2, clamping scale to 1.0");
        return 1.0;
    }
    return s;
}

void MetricHead::validate() const {
    if (weight.rows == 0 || weight.cols < 2) {
        throw ConfigError("MetricHead: weight must be feature_dim x C with C >= 2");
    }
    if (bias.size() != weight.cols) throw ConfigError("MetricHead: bias size != C");
    if (!(scale > 0.0)) throw ConfigError("MetricHead: scale must be > 0");
    switch (kind) {
        case LossKind::sphereface: {
            const double r = std::round(margin);
            if (!(margin >= 1.0) || std::abs(margin - r) > 1e-9) {
                throw ConfigError("sphereface margin must be a positive integer");
            }
            break;
        }
        case LossKind::arcface:
        case LossKind::adacos:
            if (margin < 0.0 || margin >= std::numbers::pi / 2.0) {
                throw ConfigError("arcface margin must lie in [0, pi/2)");
            }
            break;
        case LossKind::cosface:
            if (margin < 0.0 || margin >= 1.0) {
                throw ConfigError("cosface margin must lie in [0, 1)");
            }
            break;
        case LossKind::softmax:
        case LossKind::scaled_cosine:
            break;
    }
}

MetricHead MetricHead::make(LossKind kind, std::size_t feature_dim, std::size_t num_classes,
                            Rng& rng) {
    MetricHead head;
    head.kind = kind;
    head.weight = RealMatrix(feature_dim, num_classes);
    const double std_dev = 1.0 / std::sqrt(static_cast<double>(feature_dim));
    for (double& w : head.weight.data) w = std_dev * rng.normal();
    head.bias.assign(num_classes, 0.0);
    switch (kind) {
        case LossKind::softmax:
            head.margin = 0.0;
            head.scale = 1.0;
            break;
        case LossKind::scaled_cosine:
            head.margin = 0.0;
            head.scale = 10.0;
            head.scale_learnable = true;
            break;
        case LossKind::sphereface:
            head.margin = 2.0;
            head.scale = 1.0;
            break;
        case LossKind::cosface:
            head.margin = 0.2;
            head.scale = 10.0;
            break;
        case LossKind::arcface:
            head.margin = 0.3;
            head.scale = 10.0;
            break;
        case LossKind::adacos:
            head.margin = 0.3;
            head.scale = adacos_scale(num_classes);
            break;
    }
    head.validate();
    return head;
}

namespace {

// Shared precompute for every cosine-based head.
struct CosineForward {
    RealMatrix cos;                 // n x C, clamped
    std::vector<std::uint8_t> clamped;
    RealMatrix zhat;                // n x d
    std::vector<double> znorm;      // guarded feature norms
    RealMatrix what;                // d x C, unit columns
    std::vector<double> wnorm;      // guarded column norms
};

CosineForward cosine_forward(const RealMatrix& z, const MetricHead& head) {
    if (z.cols != head.feature_dim()) {
        throw ConfigError("cosine_logits: feature width " + std::to_string(z.cols) +
                          " != head feature dim " + std::to_string(head.feature_dim()));
    }
    const std::size_t n = z.rows;
    const std::size_t d = z.cols;
    const std::size_t c = head.num_classes();
    CosineForward f;
    f.znorm.resize(n);
    f.zhat = RealMatrix(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        double nu = norm2(z.row(i));
        if (nu < kNormGuard) nu += kNormGuard;
        f.znorm[i] = nu;
        for (std::size_t k = 0; k < d; ++k) f.zhat(i, k) = z(i, k) / nu;
    }
    f.wnorm.resize(c);
    f.what = RealMatrix(d, c);
    for (std::size_t j = 0; j < c; ++j) {
        double w2 = 0.0;
        for (std::size_t k = 0; k < d; ++k) w2 += head.weight(k, j) * head.weight(k, j);
        double omega = std::sqrt(w2);
        if (omega < kNormGuard) omega += kNormGuard;
        f.wnorm[j] = omega;
        for (std::size_t k = 0; k < d; ++k) f.what(k, j) = head.weight(k, j) / omega;
    }
    f.cos = matmul(f.zhat, f.what);
    f.clamped.assign(n * c, 0);
    const double hi = 1.0 - kCosClamp;
    const double lo = -1.0 + kCosClamp;
    for (std::size_t idx = 0; idx < f.cos.data.size(); ++idx) {
        double& v = f.cos.data[idx];
        if (v > hi) {
            v = hi;
            f.clamped[idx] = 1;
        } else if (v < lo) {
            v = lo;
            f.clamped[idx] = 1;
        }
    }
    return f;
}

void check_labels(const std::vector<int>& labels, std::size_t n, std::size_t c) {
    if (labels.size() != n) throw ConfigError("labels size != batch rows");
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= c) {
            throw ConfigError("label out of range: " + std::to_string(y));
        }
    }
}

// Per-kind logit map on top of the cosine forward. Fills logits L and the
// partials A = dL/dcos, B = dL/d|z| (sphereface only), S = dL/ds. Passing
// labels = nullptr gives the margin-free map shared by OE and test time.
struct MarginLogits {
    RealMatrix logits;
    RealMatrix dcos;
    RealMatrix dznorm;
    RealMatrix dscale;
    bool uses_znorm = false;
};

MarginLogits margin_logits(const CosineForward& f, const MetricHead& head,
                           const std::vector<int>* labels) {
    const std::size_t n = f.cos.rows;
    const std::size_t c = f.cos.cols;
    MarginLogits ml;
    ml.logits = RealMatrix(n, c);
    ml.dcos = RealMatrix(n, c);
    ml.dscale = RealMatrix(n, c);
    const double s = head.scale;
    if (head.kind == LossKind::sphereface) {
        ml.uses_znorm = true;
        ml.dznorm = RealMatrix(n, c);
        for (std::size_t i = 0; i < n; ++i) {
            const double nu = f.znorm[i];
            for (std::size_t j = 0; j < c; ++j) {
                const double cv = f.cos(i, j);
                ml.logits(i, j) = nu * cv;
                ml.dcos(i, j) = nu;
                ml.dznorm(i, j) = cv;
            }
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < c; ++j) {
                const double cv = f.cos(i, j);
                ml.logits(i, j) = s * cv;
                ml.dcos(i, j) = s;
                ml.dscale(i, j) = cv;
            }
        }
    }
    if (!labels) return ml;

    const double m = head.margin;
    std::size_t arcface_fallbacks = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t y = static_cast<std::size_t>((*labels)[i]);
        const double cv = f.cos(i, y);
        switch (head.kind) {
            case LossKind::softmax:
            case LossKind::scaled_cosine:
                break;  // no margin
            case LossKind::cosface:
                ml.logits(i, y) = s * (cv - m);
                ml.dscale(i, y) = cv - m;
                break;
            case LossKind::arcface:
            case LossKind::adacos: {
                if (cv > -std::cos(m)) {
                    const double sin_theta = std::sqrt(1.0 - cv * cv);
                    const double phi = cv * std::cos(m) - sin_theta * std::sin(m);
                    ml.logits(i, y) = s * phi;
                    ml.dcos(i, y) = s * (std::cos(m) + cv * std::sin(m) / sin_theta);
                    ml.dscale(i, y) = phi;
                } else {
                    // theta + m would pass pi; monotone fallback cos(theta) - m sin(m)
                    const double phi = cv - m * std::sin(m);
                    ml.logits(i, y) = s * phi;
                    ml.dcos(i, y) = s;
                    ml.dscale(i, y) = phi;
                    ++arcface_fallbacks;
                }
                break;
            }
            case LossKind::sphereface: {
                const int mi = static_cast<int>(std::lround(m));
                const double theta = std::acos(cv);
                int k = static_cast<int>(std::floor(theta * mi / std::numbers::pi));
                k = std::clamp(k, 0, mi - 1);
                const double sign = (k % 2 == 0) ? 1.0 : -1.0;
                const double psi = sign * std::cos(mi * theta) - 2.0 * k;
                const double sin_theta = std::sqrt(1.0 - cv * cv);
                const double dpsi_dcos = sign * mi * std::sin(mi * theta) / sin_theta;
                const double nu = f.znorm[i];
                ml.logits(i, y) = nu * psi;
                ml.dcos(i, y) = nu * dpsi_dcos;
                ml.dznorm(i, y) = psi;
                break;
            }
        }
    }
    if (arcface_fallbacks > 0) {
        warn("arcface: theta + m > pi on " + std::to_string(arcface_fallbacks) +
             " sample(s), used monotone cosine fallback");
    }
    return ml;
}

// Chains d loss / d logits back to features, raw weight and scale.
LossValue assemble_cosine_grads(const RealMatrix& z, const MetricHead& head,
                                const CosineForward& f, const MarginLogits& ml,
                                double loss, const RealMatrix& dlogits) {
    const std::size_t n = z.rows;
    const std::size_t d = z.cols;
    const std::size_t c = head.num_classes();
    LossValue out;
    out.loss = loss;
    out.dbias.assign(c, 0.0);

    // cosine-path weights with the clamp mask applied
    RealMatrix p(n, c);
    for (std::size_t idx = 0; idx < p.data.size(); ++idx) {
        p.data[idx] = f.clamped[idx] ? 0.0 : dlogits.data[idx] * ml.dcos.data[idx];
    }

    // dz_i = (sum_j p_ij what_j - zhat_i sum_j p_ij cos_ij) / nu_i
    //        + zhat_i sum_j dlogit_ij dznorm_ij
    out.dz = matmul_a_bt(p, f.what);
    for (std::size_t i = 0; i < n; ++i) {
        double cos_path = 0.0;
        double norm_path = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            cos_path += p(i, j) * f.cos(i, j);
            if (ml.uses_znorm) norm_path += dlogits(i, j) * ml.dznorm(i, j);
        }
        const double nu = f.znorm[i];
        for (std::size_t k = 0; k < d; ++k) {
            out.dz(i, k) = (out.dz(i, k) - f.zhat(i, k) * cos_path) / nu +
                           f.zhat(i, k) * norm_path;
        }
    }

    // dW_j = (sum_i p_ij zhat_i - what_j sum_i p_ij cos_ij) / omega_j
    out.dweight = matmul_at_b(f.zhat, p);
    std::vector<double> col_cos(c, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < c; ++j) col_cos[j] += p(i, j) * f.cos(i, j);
    }
    for (std::size_t j = 0; j < c; ++j) {
        const double omega = f.wnorm[j];
        for (std::size_t k = 0; k < d; ++k) {
            out.dweight(k, j) = (out.dweight(k, j) - f.what(k, j) * col_cos[j]) / omega;
        }
    }

    out.dscale = 0.0;
    if (head.kind != LossKind::sphereface) {
        for (std::size_t idx = 0; idx < dlogits.data.size(); ++idx) {
            out.dscale += dlogits.data[idx] * ml.dscale.data[idx];
        }
    }
    return out;
}

LossValue softmax_head_loss(const RealMatrix& z, const MetricHead& head,
                            const std::vector<int>& labels) {
    RealMatrix logits = matmul(z, head.weight);
    add_row_inplace(logits, head.bias);
    LossValue ce = softmax_ce(logits, labels);
    LossValue out;
    out.loss = ce.loss;
    out.dz = matmul_a_bt(ce.dz, head.weight);
    out.dweight = matmul_at_b(z, ce.dz);
    out.dbias = column_sums(ce.dz);
    out.dscale = 0.0;
    return out;
}

LossValue cosine_head_loss(const RealMatrix& z, const MetricHead& head,
                           const std::vector<int>& labels) {
    const CosineForward f = cosine_forward(z, head);
    const MarginLogits ml = margin_logits(f, head, &labels);
    LossValue ce = softmax_ce(ml.logits, labels);
    return assemble_cosine_grads(z, head, f, ml, ce.loss, ce.dz);
}

}  // namespace

RealMatrix cosine_logits(const RealMatrix& z, const MetricHead& head) {
    return cosine_forward(z, head).cos;
}

RealMatrix softmax_rows(const RealMatrix& logits) {
    RealMatrix p(logits.rows, logits.cols);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        const auto row = logits.row(i);
        double mx = row[0];
        for (double v : row) mx = std::max(mx, v);
        double denom = 0.0;
        for (std::size_t j = 0; j < logits.cols; ++j) {
            p(i, j) = std::exp(row[j] - mx);
            denom += p(i, j);
        }
        for (std::size_t j = 0; j < logits.cols; ++j) p(i, j) /= denom;
    }
    return p;
}

LossValue softmax_ce(const RealMatrix& logits, const std::vector<int>& labels) {
    check_labels(labels, logits.rows, logits.cols);
    const std::size_t n = logits.rows;
    RealMatrix p = softmax_rows(logits);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = logits.row(i);
        double mx = row[0];
        for (double v : row) mx = std::max(mx, v);
        double denom = 0.0;
        for (double v : row) denom += std::exp(v - mx);
        loss += -(row[static_cast<std::size_t>(labels[i])] - mx) + std::log(denom);
    }
    loss /= static_cast<double>(n);
    LossValue out;
    out.loss = loss;
    out.dz = std::move(p);
    for (std::size_t i = 0; i < n; ++i) {
        out.dz(i, static_cast<std::size_t>(labels[i])) -= 1.0;
    }
    scale_inplace(out.dz, 1.0 / static_cast<double>(n));
    out.dbias.assign(logits.cols, 0.0);
    return out;
}

LossValue head_loss(const RealMatrix& z, const MetricHead& head,
                    const std::vector<int>& labels) {
    head.validate();
    check_labels(labels, z.rows, head.num_classes());
    if (head.kind == LossKind::softmax) return softmax_head_loss(z, head, labels);
    return cosine_head_loss(z, head, labels);
}

namespace {

LossValue checked_kind(const RealMatrix& z, const MetricHead& head,
                       const std::vector<int>& labels, LossKind expected,
                       const char* name) {
    if (head.kind != expected) {
        throw ConfigError(std::string(name) + ": head kind is " + loss_kind_name(head.kind));
    }
    return head_loss(z, head, labels);
}

}  // namespace

LossValue scaled_cosine_loss(const RealMatrix& z, const MetricHead& head,
                             const std::vector<int>& labels) {
    return checked_kind(z, head, labels, LossKind::scaled_cosine, "scaled_cosine_loss");
}

LossValue sphereface_loss(const RealMatrix& z, const MetricHead& head,
                          const std::vector<int>& labels) {
    return checked_kind(z, head, labels, LossKind::sphereface, "sphereface_loss");
}

LossValue cosface_loss(const RealMatrix& z, const MetricHead& head,
                       const std::vector<int>& labels) {
    return checked_kind(z, head, labels, LossKind::cosface, "cosface_loss");
}

LossValue arcface_loss(const RealMatrix& z, const MetricHead& head,
                       const std::vector<int>& labels) {
    if (head.kind != LossKind::arcface && head.kind != LossKind::adacos) {
        throw ConfigError("arcface_loss: head kind is " + loss_kind_name(head.kind));
    }
    return head_loss(z, head, labels);
}

RealMatrix margin_free_logits(const RealMatrix& z, const MetricHead& head) {
    if (head.kind == LossKind::softmax) {
        RealMatrix logits = matmul(z, head.weight);
        add_row_inplace(logits, head.bias);
        return logits;
    }
    const CosineForward f = cosine_forward(z, head);
    return margin_logits(f, head, nullptr).logits;
}

double sphereface_psi(double cos_theta, int m) {
    if (m < 1) throw ConfigError("sphereface_psi: m must be >= 1");
    const double cv = std::clamp(cos_theta, -1.0, 1.0);
    const double theta = std::acos(cv);
    int k = static_cast<int>(std::floor(theta * m / std::numbers::pi));
    k = std::clamp(k, 0, m - 1);
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    return sign * std::cos(m * theta) - 2.0 * k;
}

LossValue uniform_posterior_loss(const RealMatrix& z, const MetricHead& head) {
    head.validate();
    const std::size_t n = z.rows;
    const std::size_t c = head.num_classes();
    if (head.kind == LossKind::softmax) {
        RealMatrix logits = matmul(z, head.weight);
        add_row_inplace(logits, head.bias);
        RealMatrix p = softmax_rows(logits);
        double loss = 0.0;
        RealMatrix dlogits(n, c);
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = logits.row(i);
            double mx = row[0];
            for (double v : row) mx = std::max(mx, v);
            double denom = 0.0;
            for (double v : row) denom += std::exp(v - mx);
            const double lse = mx + std::log(denom);
            double mean_logit = 0.0;
            for (double v : row) mean_logit += v;
            mean_logit /= static_cast<double>(c);
            loss += lse - mean_logit;
            for (std::size_t j = 0; j < c; ++j) {
                dlogits(i, j) = (p(i, j) - 1.0 / static_cast<double>(c)) /
                                static_cast<double>(n);
            }
        }
        LossValue out;
        out.loss = loss / static_cast<double>(n);
        out.dz = matmul_a_bt(dlogits, head.weight);
        out.dweight = matmul_at_b(z, dlogits);
        out.dbias = column_sums(dlogits);
        return out;
    }
    const CosineForward f = cosine_forward(z, head);
    const MarginLogits ml = margin_logits(f, head, nullptr);
    double loss = 0.0;
    RealMatrix dlogits(n, c);
    RealMatrix p = softmax_rows(ml.logits);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = ml.logits.row(i);
        double mx = row[0];
        for (double v : row) mx = std::max(mx, v);
        double denom = 0.0;
        for (double v : row) denom += std::exp(v - mx);
        const double lse = mx + std::log(denom);
        double mean_logit = 0.0;
        for (double v : row) mean_logit += v;
        mean_logit /= static_cast<double>(c);
        loss += lse - mean_logit;
        for (std::size_t j = 0; j < c; ++j) {
            dlogits(i, j) = (p(i, j) - 1.0 / static_cast<double>(c)) /
                            static_cast<double>(n);
        }
    }
    return assemble_cosine_grads(z, head, f, ml, loss / static_cast<double>(n), dlogits);
}

CompositeLoss outlier_exposure_loss(const RealMatrix& id_batch,
                                    const std::vector<int>& id_labels,
                                    const RealMatrix& ood_batch, const MlpModel& model,
                                    const MetricHead& head, double lambda) {
    if (lambda < 0.0) throw ConfigError("outlier_exposure_loss: lambda must be >= 0");
    CompositeLoss out;
    LayerCache id_cache;
    const RealMatrix z_id = mlp_forward(model, id_batch, &id_cache);
    LossValue base = head_loss(z_id, head, id_labels);
    out.id_loss = base.loss;
    out.model_tape = mlp_backward(model, id_cache, base.dz);
    out.dweight = std::move(base.dweight);
    out.dbias = std::move(base.dbias);
    out.dscale = base.dscale;
    out.oe_term = 0.0;
    if (ood_batch.rows > 0 && lambda > 0.0) {
        LayerCache ood_cache;
        const RealMatrix z_ood = mlp_forward(model, ood_batch, &ood_cache);
        LossValue oe = uniform_posterior_loss(z_ood, head);
        out.oe_term = oe.loss;
        scale_inplace(oe.dz, lambda);
        GradientTape oe_tape = mlp_backward(model, ood_cache, oe.dz);
        out.model_tape.add(oe_tape);
        axpy_inplace(out.dweight, lambda, oe.dweight);
        for (std::size_t j = 0; j < out.dbias.size(); ++j) {
            out.dbias[j] += lambda * oe.dbias[j];
        }
        out.dscale += lambda * oe.dscale;
    } else if (ood_batch.rows > 0) {
        // lambda == 0: still report the OE term for diagnostics
        out.oe_term = uniform_posterior_loss(mlp_forward(model, ood_batch), head).loss;
    }
    out.loss = out.id_loss + lambda * out.oe_term;
    return out;
}

HeadSgd::HeadSgd(double lr, double momentum) : lr_(lr), momentum_(momentum) {
    if (!(lr > 0.0)) throw ConfigError("HeadSgd: lr must be > 0");
    if (momentum < 0.0 || momentum >= 1.0) {
        throw ConfigError("HeadSgd: momentum must lie in [0, 1)");
    }
}

void HeadSgd::step(MetricHead& head, const RealMatrix& dweight,
                   const std::vector<double>& dbias, double dscale) {
    if (!dweight.same_shape(head.weight) || dbias.size() != head.bias.size()) {
        throw ConfigError("HeadSgd::step: gradient shape mismatch");
    }
    if (!dweight.all_finite() || !std::isfinite(dscale)) {
        throw NumericError("HeadSgd::step: non-finite head gradient");
    }
    if (vweight_.empty()) {
        vweight_ = RealMatrix(head.weight.rows, head.weight.cols);
        vbias_.assign(head.bias.size(), 0.0);
    }
    for (std::size_t i = 0; i < vweight_.data.size(); ++i) {
        vweight_.data[i] = momentum_ * vweight_.data[i] + dweight.data[i];
        head.weight.data[i] -= lr_ * vweight_.data[i];
    }
    for (std::size_t j = 0; j < vbias_.size(); ++j) {
        if (!std::isfinite(dbias[j])) {
            throw NumericError("HeadSgd::step: non-finite bias gradient");
        }
        vbias_[j] = momentum_ * vbias_[j] + dbias[j];
        head.bias[j] -= lr_ * vbias_[j];
    }
    if (head.scale_learnable) {
        vscale_ = momentum_ * vscale_ + dscale;
        head.scale -= lr_ * vscale_;
        if (head.scale <= 0.0) {
            warn("HeadSgd: learnable scale driven to " + std::to_string(head.scale) +
                 ", clamping to 1e-3");
            head.scale = 1e-3;
            vscale_ = 0.0;
        }
    }
}

}  // namespace oodkit
