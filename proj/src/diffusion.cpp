#include "oodkit/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "oodkit/errors.hpp"

namespace oodkit {

DiffusionSchedule make_schedule(std::size_t steps, double beta_start, double beta_end) {
    if (steps < 2) throw ConfigError("make_schedule: need at least 2 steps");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
        throw ConfigError("make_schedule: need 0 < beta_start <= beta_end < 1");
    }
    DiffusionSchedule s;
    s.steps = steps;
    s.beta_start = beta_start;
    s.beta_end = beta_end;
    s.beta.resize(steps);
    s.alpha.resize(steps);
    s.alpha_bar.resize(steps);
    double running = 1.0;
    for (std::size_t t = 0; t < steps; ++t) {
        const double frac = static_cast<double>(t) / static_cast<double>(steps - 1);
        s.beta[t] = beta_start + (beta_end - beta_start) * frac;
        s.alpha[t] = 1.0 - s.beta[t];
        running *= s.alpha[t];
        s.alpha_bar[t] = running;
    }
    if (s.alpha_bar.back() >= 0.05) {
        warn("make_schedule: terminal alpha_bar " + std::to_string(s.alpha_bar.back()) +
             " >= 0.05; samples will retain visible signal at t = T");
    }
    return s;
}

void time_embedding(double t_over_steps, std::span<double> out) {
    if (out.size() != kTimeEmbedDim) {
        throw ConfigError("time_embedding: output span must have size " +
                          std::to_string(kTimeEmbedDim));
    }
    out[0] = t_over_steps;
    double freq = std::numbers::pi;
    for (std::size_t k = 0; k < 8; ++k) {
        out[1 + 2 * k] = std::sin(freq * t_over_steps);
        out[2 + 2 * k] = std::cos(freq * t_over_steps);
        freq *= 2.0;
    }
}

void DenoiserModel::validate() const {
    if (net.layers.empty()) throw ConfigError("denoiser: empty network");
    if (net.input_dim() != input_dim()) {
        throw ConfigError("denoiser: net input " + std::to_string(net.input_dim()) +
                          " != expected " + std::to_string(input_dim()));
    }
    if (net.feature_dim() != data_dim) {
        throw ConfigError("denoiser: net output width != data dimension");
    }
    if (schedule.steps == 0) throw ConfigError("denoiser: missing schedule");
}

RealMatrix forward_noise(const RealMatrix& x0, std::size_t t, const RealMatrix& eps,
                         const DiffusionSchedule& schedule) {
    if (t < 1 || t > schedule.steps) {
        throw ConfigError("forward_noise: t " + std::to_string(t) + " outside [1, " +
                          std::to_string(schedule.steps) + "]");
    }
    if (!eps.same_shape(x0)) throw ConfigError("forward_noise: eps shape != x0 shape");
    const double ab = schedule.alpha_bar[t - 1];
    const double signal = std::sqrt(ab);
    const double noise = std::sqrt(1.0 - ab);
    RealMatrix xt(x0.rows, x0.cols);
    for (std::size_t i = 0; i < x0.data.size(); ++i) {
        xt.data[i] = signal * x0.data[i] + noise * eps.data[i];
    }
    return xt;
}

namespace {

// concat(x_t, label_vec, time_embedding) rows for one shared timestep
RealMatrix build_input(const RealMatrix& x_t, std::span<const double> label_vec,
                       std::size_t t, const DiffusionSchedule& schedule) {
    const std::size_t d = x_t.cols;
    const std::size_t c = label_vec.size();
    RealMatrix input(x_t.rows, d + c + kTimeEmbedDim);
    std::vector<double> embed(kTimeEmbedDim);
    time_embedding(static_cast<double>(t) / static_cast<double>(schedule.steps), embed);
    for (std::size_t i = 0; i < x_t.rows; ++i) {
        for (std::size_t k = 0; k < d; ++k) input(i, k) = x_t(i, k);
        for (std::size_t k = 0; k < c; ++k) input(i, d + k) = label_vec[k];
        for (std::size_t k = 0; k < kTimeEmbedDim; ++k) input(i, d + c + k) = embed[k];
    }
    return input;
}

}  // namespace

RealMatrix denoise_predict(const DenoiserModel& denoiser, const RealMatrix& x_t,
                           std::span<const double> label_vec, std::size_t t,
                           const DiffusionSchedule& schedule) {
    denoiser.validate();
    if (t < 1 || t > schedule.steps) throw ConfigError("denoise_predict: t out of range");
    if (label_vec.size() != denoiser.num_classes) {
        throw ConfigError("denoise_predict: label vector size != class count");
    }
    if (x_t.cols != denoiser.data_dim) {
        throw ConfigError("denoise_predict: data width != denoiser data dim");
    }
    return mlp_forward(denoiser.net, build_input(x_t, label_vec, t, schedule));
}

namespace {

// per-sample timesteps and noise; shared by training and the MSE diagnostic
struct NoisedBatch {
    RealMatrix input;   // rows ready for the denoiser net
    RealMatrix target;  // the injected eps
};

NoisedBatch make_noised_batch(const LabeledDataset& data,
                              const std::vector<std::size_t>& rows, std::size_t num_classes,
                              const DiffusionSchedule& schedule, Rng& rng) {
    const std::size_t d = data.dim();
    NoisedBatch batch;
    batch.input = RealMatrix(rows.size(), d + num_classes + kTimeEmbedDim);
    batch.target = RealMatrix(rows.size(), d);
    std::vector<double> embed(kTimeEmbedDim);
    for (std::size_t b = 0; b < rows.size(); ++b) {
        const std::size_t i = rows[b];
        const std::size_t t = 1 + rng.bounded(schedule.steps);
        const double ab = schedule.alpha_bar[t - 1];
        const double signal = std::sqrt(ab);
        const double noise = std::sqrt(1.0 - ab);
        for (std::size_t k = 0; k < d; ++k) {
            const double eps = rng.normal();
            batch.target(b, k) = eps;
            batch.input(b, k) = signal * data.features(i, k) + noise * eps;
        }
        const auto y = static_cast<std::size_t>(data.labels[i]);
        batch.input(b, d + y) = 1.0;
        time_embedding(static_cast<double>(t) / static_cast<double>(schedule.steps), embed);
        for (std::size_t k = 0; k < kTimeEmbedDim; ++k) {
            batch.input(b, d + num_classes + k) = embed[k];
        }
    }
    return batch;
}

double mse_and_grad(const RealMatrix& pred, const RealMatrix& target, RealMatrix* grad) {
    double sum = 0.0;
    if (grad) *grad = RealMatrix(pred.rows, pred.cols);
    const double denom = static_cast<double>(pred.data.size());
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const double diff = pred.data[i] - target.data[i];
        sum += diff * diff;
        if (grad) grad->data[i] = 2.0 * diff / denom;
    }
    return sum / denom;
}

}  // namespace

DenoiserModel train_denoiser(const LabeledDataset& id_data,
                             const DiffusionSchedule& schedule,
                             const DdpmTrainConfig& config, Rng& rng) {
    id_data.validate();
    if (!id_data.is_pure_id()) {
        throw ConfigError("train_denoiser: dataset contains OOD rows");
    }
    if (config.epochs == 0 || config.batch == 0) {
        throw ConfigError("train_denoiser: epochs and batch must be > 0");
    }
    const std::size_t num_classes = id_data.num_classes();
    DenoiserModel denoiser;
    denoiser.data_dim = id_data.dim();
    denoiser.num_classes = num_classes;
    denoiser.schedule = schedule;

    std::vector<std::size_t> dims;
    dims.push_back(denoiser.input_dim());
    dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
    dims.push_back(denoiser.data_dim);
    denoiser.net = MlpModel::random(dims, Activation::smooth_relu, Activation::identity, rng);

    SgdMomentum opt(config.lr, config.momentum);
    MlpModel last_good = denoiser.net;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const auto order = rng.permutation(id_data.size());
        for (std::size_t start = 0; start < order.size(); start += config.batch) {
            const std::size_t stop = std::min(order.size(), start + config.batch);
            std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                          order.begin() + static_cast<std::ptrdiff_t>(stop));
            NoisedBatch batch = make_noised_batch(id_data, rows, num_classes, schedule, rng);
            LayerCache cache;
            const RealMatrix pred = mlp_forward(denoiser.net, batch.input, &cache);
            RealMatrix dpred;
            const double loss = mse_and_grad(pred, batch.target, &dpred);
            if (!std::isfinite(loss)) {
                warn("train_denoiser: loss diverged at epoch " + std::to_string(epoch) +
                     ", keeping last finite model");
                denoiser.net = last_good;
                return denoiser;
            }
            const GradientTape tape = mlp_backward(denoiser.net, cache, dpred);
            opt.step(denoiser.net, tape);
        }
        if (denoiser.net.all_finite()) last_good = denoiser.net;
    }
    return denoiser;
}

double denoiser_mse(const DenoiserModel& denoiser, const LabeledDataset& id_data,
                    const DiffusionSchedule& schedule, Rng& rng) {
    denoiser.validate();
    id_data.validate();
    if (!id_data.is_pure_id()) throw ConfigError("denoiser_mse: dataset contains OOD rows");
    std::vector<std::size_t> rows(id_data.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    NoisedBatch batch =
        make_noised_batch(id_data, rows, denoiser.num_classes, schedule, rng);
    const RealMatrix pred = mlp_forward(denoiser.net, batch.input);
    return mse_and_grad(pred, batch.target, nullptr);
}

RealMatrix sample(const DenoiserModel& denoiser, std::span<const double> label_vec,
                  const DiffusionSchedule& schedule, std::size_t n, Rng& rng) {
    denoiser.validate();
    if (label_vec.size() != denoiser.num_classes) {
        throw ConfigError("sample: label vector size != class count");
    }
    if (n == 0) throw ConfigError("sample: n must be > 0");
    if (schedule.steps == 0) throw ConfigError("sample: empty schedule");

    // one substream per chain, re-keyed each call so repeated sampling from
    // the same parent rng yields fresh draws
    Rng chain_root(rng.next_u64(), 0);
    std::vector<Rng> chains;
    chains.reserve(n);
    for (std::size_t i = 0; i < n; ++i) chains.push_back(chain_root.split(i));

    const std::size_t d = denoiser.data_dim;
    RealMatrix x(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < d; ++k) x(i, k) = chains[i].normal();
    }
    for (std::size_t t = schedule.steps; t >= 1; --t) {
        const RealMatrix eps_hat =
            mlp_forward(denoiser.net, build_input(x, label_vec, t, schedule));
        const double beta = schedule.beta[t - 1];
        const double ab = schedule.alpha_bar[t - 1];
        const double inv_sqrt_alpha = 1.0 / std::sqrt(schedule.alpha[t - 1]);
        const double eps_coef = beta / std::sqrt(1.0 - ab);
        double sigma = 0.0;
        if (t > 1) {
            const double ab_prev = schedule.alpha_bar[t - 2];
            sigma = std::sqrt((1.0 - ab_prev) / (1.0 - ab) * beta);
        }
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < d; ++k) {
                double mean = inv_sqrt_alpha * (x(i, k) - eps_coef * eps_hat(i, k));
                x(i, k) = (t > 1) ? mean + sigma * chains[i].normal() : mean;
            }
        }
    }
    if (!x.all_finite()) throw NumericError("sample: reverse chain produced non-finite values");
    return x;
}

RealMatrix generate_label_mixup(const DenoiserModel& denoiser, std::size_t class_a,
                                std::size_t class_b, std::size_t n,
                                const DiffusionSchedule& schedule, Rng& rng,
                                double interpolation) {
    if (class_a == class_b) {
        throw ConfigError("generate_label_mixup: identical classes would generate ID data");
    }
    if (class_a >= denoiser.num_classes || class_b >= denoiser.num_classes) {
        throw ConfigError("generate_label_mixup: class index out of range");
    }
    std::vector<double> label(denoiser.num_classes, 0.0);
    if (interpolation < 0.0) {
        label[class_a] = 1.0;  // element-wise sum of the two one-hot encodings
        label[class_b] = 1.0;
    } else if (interpolation <= 1.0) {
        label[class_a] = interpolation;
        label[class_b] = 1.0 - interpolation;
    } else {
        throw ConfigError("generate_label_mixup: interpolation must be in [0,1]");
    }
    return sample(denoiser, label, schedule, n, rng);
}

}  // namespace oodkit
