#pragma once

#include <functional>
#include <string>
#include <vector>

#include "oodkit/matrix.hpp"
#include "oodkit/rng.hpp"

namespace oodkit {

enum class Activation { identity, relu, smooth_relu };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct DenseLayer {
    RealMatrix weight;          // in_dim x out_dim
    std::vector<double> bias;   // out_dim
    Activation act = Activation::identity;

    std::size_t in_dim() const { return weight.rows; }
    std::size_t out_dim() const { return weight.cols; }
};

// Plain multilayer perceptron. The last layer's output is the penultimate
// feature space z that the metric heads and scores operate on.
struct MlpModel {
    std::vector<DenseLayer> layers;

    std::size_t input_dim() const { return layers.front().in_dim(); }
    std::size_t feature_dim() const { return layers.back().out_dim(); }
    std::size_t parameter_count() const;
    bool all_finite() const;

    // dims = {in, h1, ..., feature_dim}; hidden layers get hidden_act, the
    // last layer gets output_act. Fan-in scaled Gaussian init.
    static MlpModel random(const std::vector<std::size_t>& dims, Activation hidden_act,
                           Activation output_act, Rng& rng);
};

// Pre- and post-activation values retained for the backward pass.
struct LayerCache {
    RealMatrix input;
    std::vector<RealMatrix> pre;
    std::vector<RealMatrix> post;
    bool valid = false;
};

struct GradientTape {
    struct LayerGrad {
        RealMatrix weight;
        std::vector<double> bias;
    };
    std::vector<LayerGrad> layers;

    static GradientTape zeros_like(const MlpModel& model);
    void add(const GradientTape& other);
    void scale(double alpha);
    bool all_finite() const;
    double max_abs() const;
};

RealMatrix mlp_forward(const MlpModel& model, const RealMatrix& batch,
                       LayerCache* cache = nullptr);

// Chain-rule gradients for every parameter; output_grad is dLoss/dFeatures.
// When input_grad is non-null it receives dLoss/dBatch.
GradientTape mlp_backward(const MlpModel& model, const LayerCache& cache,
                          const RealMatrix& output_grad, RealMatrix* input_grad = nullptr);

// Central-difference oracle: (L(p + eps) - L(p - eps)) / (2 eps) per parameter.
GradientTape finite_diff_grad(const std::function<double(const MlpModel&)>& loss_fn,
                              const MlpModel& model, double epsilon = 1e-5);

// SGD with momentum: v = mu * v + g; p -= lr * v.
class SgdMomentum {
public:
    SgdMomentum(double lr, double momentum) : lr_(lr), momentum_(momentum) {}

    void step(MlpModel& model, const GradientTape& tape);
    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }

private:
    double lr_;
    double momentum_;
    GradientTape velocity_;  // lazily shaped on first step
};

}  // namespace oodkit
