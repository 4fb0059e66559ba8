#pragma once

#include <optional>
#include <string>
#include <vector>

#include "oodkit/matrix.hpp"
#include "oodkit/mlp.hpp"
#include "oodkit/rng.hpp"

namespace oodkit {

enum class LossKind { softmax, scaled_cosine, sphereface, cosface, arcface, adacos };

std::string loss_kind_name(LossKind k);
LossKind loss_kind_from_name(const std::string& name);

// AdaCos fixed scale sqrt(2) * ln(C - 1); degenerate C = 2 clamps to 1.
double adacos_scale(std::size_t num_classes);

// Classification head. For every kind except softmax the weight columns are
// renormalized to unit length inside the logit computation; the bias is only
// used by the softmax head.
struct MetricHead {
    RealMatrix weight;           // feature_dim x C
    std::vector<double> bias;    // C
    LossKind kind = LossKind::softmax;
    double margin = 0.0;
    double scale = 1.0;
    bool scale_learnable = false;

    std::size_t feature_dim() const { return weight.rows; }
    std::size_t num_classes() const { return weight.cols; }
    void validate() const;

    // Default hyperparameters per kind (sphereface m=2; cosface s=10 m=0.2;
    // arcface s=10 m=0.3; adacos s from adacos_scale, m=0.3; scaled cosine
    // s=10 learnable).
    static MetricHead make(LossKind kind, std::size_t feature_dim, std::size_t num_classes,
                           Rng& rng);
};

// Loss plus gradients for everything that feeds it.
struct LossValue {
    double loss = 0.0;
    RealMatrix dz;               // d loss / d features
    RealMatrix dweight;          // d loss / d head weight (raw, pre-normalization)
    std::vector<double> dbias;   // softmax head only, zeros otherwise
    double dscale = 0.0;
};

// cos(theta_{i,j}) between every feature row and every (unit-normalized)
// weight column, clamped to [-1 + 1e-7, 1 - 1e-7]. Feature norms below 1e-12
// get 1e-12 added before dividing.
RealMatrix cosine_logits(const RealMatrix& z, const MetricHead& head);

// Row-wise softmax with max subtraction.
RealMatrix softmax_rows(const RealMatrix& logits);

// Mean cross-entropy over arbitrary logits; dz holds d loss / d logits.
LossValue softmax_ce(const RealMatrix& logits, const std::vector<int>& labels);

// Dispatch on head.kind; the named wrappers below check the kind.
LossValue head_loss(const RealMatrix& z, const MetricHead& head,
                    const std::vector<int>& labels);

LossValue scaled_cosine_loss(const RealMatrix& z, const MetricHead& head,
                             const std::vector<int>& labels);
LossValue sphereface_loss(const RealMatrix& z, const MetricHead& head,
                          const std::vector<int>& labels);
LossValue cosface_loss(const RealMatrix& z, const MetricHead& head,
                       const std::vector<int>& labels);
LossValue arcface_loss(const RealMatrix& z, const MetricHead& head,
                       const std::vector<int>& labels);

// Margin-free logits used at test time and for the OE posterior: affine for
// the softmax head, s*cos for the cosine heads, |z|*cos for sphereface.
RealMatrix margin_free_logits(const RealMatrix& z, const MetricHead& head);

// Mean cross-entropy between the uniform distribution and the margin-free
// posterior: H(U, p) = -(1/C) sum_c ln p_c = ln C + KL(U || p).
LossValue uniform_posterior_loss(const RealMatrix& z, const MetricHead& head);

// SphereFace's monotonic piecewise extension of cos(m theta), exposed for
// tests: psi(theta) = (-1)^k cos(m theta) - 2k on [k pi/m, (k+1) pi/m].
double sphereface_psi(double cos_theta, int m);

// Composite outlier-exposure objective over a full model:
//   L = L_base(ID) + lambda * mean_OOD H(U, p_margin_free)
struct CompositeLoss {
    double loss = 0.0;       // total
    double id_loss = 0.0;    // base term
    double oe_term = 0.0;    // mean H(U, p) over the OOD batch, before lambda
    GradientTape model_tape;
    RealMatrix dweight;
    std::vector<double> dbias;
    double dscale = 0.0;
};

CompositeLoss outlier_exposure_loss(const RealMatrix& id_batch,
                                    const std::vector<int>& id_labels,
                                    const RealMatrix& ood_batch, const MlpModel& model,
                                    const MetricHead& head, double lambda);

// SGD with momentum over the head parameters. The scale only moves when
// head.scale_learnable; a step that drives it to <= 0 clamps it to 1e-3 and
// warns instead of letting the logits collapse.
class HeadSgd {
  public:
    HeadSgd(double lr, double momentum);

    void step(MetricHead& head, const RealMatrix& dweight,
              const std::vector<double>& dbias, double dscale);

  private:
    double lr_;
    double momentum_;
    RealMatrix vweight_;
    std::vector<double> vbias_;
    double vscale_ = 0.0;
};

}  // namespace oodkit
