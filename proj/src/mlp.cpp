#include "oodkit/mlp.hpp"

#include <cmath>

#include "oodkit/errors.hpp"

namespace oodkit {

std::string activation_name(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::relu: return "relu";
        case Activation::smooth_relu: return "smooth_relu";
    }
    return "identity";
}

Activation activation_from_name(const std::string& name) {
    if (name == "identity") return Activation::identity;
    if (name == "relu") return Activation::relu;
    if (name == "smooth_relu") return Activation::smooth_relu;
    throw ConfigError("unknown activation: " + name);
}

namespace {

double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

double activate(Activation a, double x) {
    switch (a) {
        case Activation::identity: return x;
        case Activation::relu: return x > 0.0 ? x : 0.0;
        case Activation::smooth_relu: return x * sigmoid(x);
    }
    return x;
}

double activate_deriv(Activation a, double x) {
    switch (a) {
        case Activation::identity: return 1.0;
        case Activation::relu: return x > 0.0 ? 1.0 : 0.0;
        case Activation::smooth_relu: {
            const double s = sigmoid(x);
            return s + x * s * (1.0 - s);
        }
    }
    return 1.0;
}

}  // namespace

std::size_t MlpModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.data.size() + l.bias.size();
    return n;
}

bool MlpModel::all_finite() const {
    for (const auto& l : layers) {
        if (!l.weight.all_finite()) return false;
        for (double b : l.bias) {
            if (!std::isfinite(b)) return false;
        }
    }
    return true;
}

MlpModel MlpModel::random(const std::vector<std::size_t>& dims, Activation hidden_act,
                          Activation output_act, Rng& rng) {
    if (dims.size() < 2) throw ConfigError("MlpModel::random needs at least two dims");
    MlpModel model;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        DenseLayer layer;
        layer.weight = RealMatrix(dims[l], dims[l + 1]);
        layer.bias.assign(dims[l + 1], 0.0);
        layer.act = (l + 2 == dims.size()) ? output_act : hidden_act;
        const double gain = (layer.act == Activation::relu) ? 2.0 : 1.0;
        const double std_dev = std::sqrt(gain / static_cast<double>(dims[l]));
        for (double& w : layer.weight.data) w = std_dev * rng.normal();
        model.layers.push_back(std::move(layer));
    }
    return model;
}

RealMatrix mlp_forward(const MlpModel& model, const RealMatrix& batch, LayerCache* cache) {
    if (batch.cols != model.input_dim()) {
        throw ConfigError("mlp_forward: batch width " + std::to_string(batch.cols) +
                          " does not match model input width " +
                          std::to_string(model.input_dim()));
    }
    if (cache) {
        cache->input = batch;
        cache->pre.clear();
        cache->post.clear();
        cache->valid = true;
    }
    RealMatrix x = batch;
    for (const auto& layer : model.layers) {
        RealMatrix pre = matmul(x, layer.weight);
        add_row_inplace(pre, layer.bias);
        RealMatrix post(pre.rows, pre.cols);
        for (std::size_t i = 0; i < pre.data.size(); ++i) {
            post.data[i] = activate(layer.act, pre.data[i]);
        }
        if (cache) {
            cache->pre.push_back(pre);
            cache->post.push_back(post);
        }
        x = std::move(post);
    }
    return x;
}

GradientTape GradientTape::zeros_like(const MlpModel& model) {
    GradientTape tape;
    for (const auto& l : model.layers) {
        tape.layers.push_back({RealMatrix(l.weight.rows, l.weight.cols),
                               std::vector<double>(l.bias.size(), 0.0)});
    }
    return tape;
}

void GradientTape::add(const GradientTape& other) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
        axpy_inplace(layers[l].weight, 1.0, other.layers[l].weight);
        for (std::size_t i = 0; i < layers[l].bias.size(); ++i) {
            layers[l].bias[i] += other.layers[l].bias[i];
        }
    }
}

void GradientTape::scale(double alpha) {
    for (auto& l : layers) {
        scale_inplace(l.weight, alpha);
        for (double& b : l.bias) b *= alpha;
    }
}

bool GradientTape::all_finite() const {
    for (const auto& l : layers) {
        if (!l.weight.all_finite()) return false;
        for (double b : l.bias) {
            if (!std::isfinite(b)) return false;
        }
    }
    return true;
}

double GradientTape::max_abs() const {
    double m = 0.0;
    for (const auto& l : layers) {
        for (double v : l.weight.data) m = std::max(m, std::abs(v));
        for (double v : l.bias) m = std::max(m, std::abs(v));
    }
    return m;
}

GradientTape mlp_backward(const MlpModel& model, const LayerCache& cache,
                          const RealMatrix& output_grad, RealMatrix* input_grad) {
    if (!cache.valid || cache.pre.size() != model.layers.size()) {
        throw NumericError("mlp_backward: forward cache missing or stale");
    }
    if (output_grad.cols != model.feature_dim()) {
        throw ConfigError("mlp_backward: output_grad width " +
                          std::to_string(output_grad.cols) + " != feature dim " +
                          std::to_string(model.feature_dim()));
    }
    GradientTape tape = GradientTape::zeros_like(model);
    RealMatrix grad = output_grad;
    for (std::size_t li = model.layers.size(); li-- > 0;) {
        const auto& layer = model.layers[li];
        const RealMatrix& pre = cache.pre[li];
        RealMatrix dpre(grad.rows, grad.cols);
        for (std::size_t i = 0; i < grad.data.size(); ++i) {
            dpre.data[i] = grad.data[i] * activate_deriv(layer.act, pre.data[i]);
        }
        const RealMatrix& below = (li == 0) ? cache.input : cache.post[li - 1];
        tape.layers[li].weight = matmul_at_b(below, dpre);
        tape.layers[li].bias = column_sums(dpre);
        if (li > 0 || input_grad) {
            grad = matmul_a_bt(dpre, layer.weight);
        }
    }
    if (input_grad) *input_grad = std::move(grad);
    return tape;
}

GradientTape finite_diff_grad(const std::function<double(const MlpModel&)>& loss_fn,
                              const MlpModel& model, double epsilon) {
    if (!(epsilon > 0.0)) throw ConfigError("finite_diff_grad: epsilon must be > 0");
    MlpModel probe = model;
    GradientTape tape = GradientTape::zeros_like(model);
    auto central = [&](double& param) {
        const double saved = param;
        param = saved + epsilon;
        const double up = loss_fn(probe);
        param = saved - epsilon;
        const double down = loss_fn(probe);
        param = saved;
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw NumericError("finite_diff_grad: non-finite loss");
        }
        return (up - down) / (2.0 * epsilon);
    };
    for (std::size_t li = 0; li < probe.layers.size(); ++li) {
        auto& layer = probe.layers[li];
        for (std::size_t i = 0; i < layer.weight.data.size(); ++i) {
            tape.layers[li].weight.data[i] = central(layer.weight.data[i]);
        }
        for (std::size_t i = 0; i < layer.bias.size(); ++i) {
            tape.layers[li].bias[i] = central(layer.bias[i]);
        }
    }
    return tape;
}

void SgdMomentum::step(MlpModel& model, const GradientTape& tape) {
    if (!(lr_ > 0.0)) throw ConfigError("optimizer_step: lr must be > 0");
    for (std::size_t li = 0; li < tape.layers.size(); ++li) {
        if (!tape.layers[li].weight.all_finite()) {
            throw NumericError("optimizer_step: non-finite gradient in layer " +
                               std::to_string(li));
        }
        for (double b : tape.layers[li].bias) {
            if (!std::isfinite(b)) {
                throw NumericError("optimizer_step: non-finite bias gradient in layer " +
                                   std::to_string(li));
            }
        }
    }
    if (velocity_.layers.empty()) velocity_ = GradientTape::zeros_like(model);
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        auto& v = velocity_.layers[li];
        const auto& g = tape.layers[li];
        auto& p = model.layers[li];
        for (std::size_t i = 0; i < v.weight.data.size(); ++i) {
            v.weight.data[i] = momentum_ * v.weight.data[i] + g.weight.data[i];
            p.weight.data[i] -= lr_ * v.weight.data[i];
        }
        for (std::size_t i = 0; i < v.bias.size(); ++i) {
            v.bias[i] = momentum_ * v.bias[i] + g.bias[i];
            p.bias[i] -= lr_ * v.bias[i];
        }
    }
}

}  // namespace oodkit
