#pragma once

#include <span>
#include <vector>

#include "oodkit/datagen.hpp"
#include "oodkit/matrix.hpp"
#include "oodkit/mlp.hpp"
#include "oodkit/rng.hpp"

namespace oodkit {

// Linear-beta noising schedule. Timesteps are 1-based: beta[t-1] belongs to
// step t, alpha_bar[t-1] is the running product up to t.
struct DiffusionSchedule {
    std::size_t steps = 0;
    double beta_start = 0.0;
    double beta_end = 0.0;
    std::vector<double> beta;
    std::vector<double> alpha;
    std::vector<double> alpha_bar;
};

// Defaults keep the terminal signal below 5%: alpha_bar_T ~ 6e-3.
constexpr std::size_t kDefaultDiffusionSteps = 200;
constexpr double kDefaultBetaStart = 1e-4;
constexpr double kDefaultBetaEnd = 0.05;

DiffusionSchedule make_schedule(std::size_t steps, double beta_start, double beta_end);

// Scalar t/T plus sin/cos at 8 geometric frequencies.
constexpr std::size_t kTimeEmbedDim = 17;
void time_embedding(double t_over_steps, std::span<double> out);

// Noise predictor conditioned on a label vector: the net maps
// concat(x_t, label_vector, time_embedding) -> predicted noise.
struct DenoiserModel {
    MlpModel net;
    std::size_t data_dim = 0;
    std::size_t num_classes = 0;
    DiffusionSchedule schedule;  // the schedule it was trained under

    std::size_t input_dim() const { return data_dim + num_classes + kTimeEmbedDim; }
    void validate() const;
};

// x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps, rows independent.
RealMatrix forward_noise(const RealMatrix& x0, std::size_t t, const RealMatrix& eps,
                         const DiffusionSchedule& schedule);

// Predicted noise for a batch sharing one label vector and one timestep.
RealMatrix denoise_predict(const DenoiserModel& denoiser, const RealMatrix& x_t,
                           std::span<const double> label_vec, std::size_t t,
                           const DiffusionSchedule& schedule);

struct DdpmTrainConfig {
    std::size_t epochs = 40;
    double lr = 0.01;
    double momentum = 0.9;
    std::size_t batch = 64;
    std::vector<std::size_t> hidden = {128, 128, 128};
};

// Noise-prediction MSE training on one-hot-labeled ID data. A NaN epoch
// aborts and returns the last finite model.
DenoiserModel train_denoiser(const LabeledDataset& id_data,
                             const DiffusionSchedule& schedule,
                             const DdpmTrainConfig& config, Rng& rng);

// Mean squared noise-prediction error over freshly drawn (t, eps) pairs;
// the progress diagnostic used by tests and the training loop.
double denoiser_mse(const DenoiserModel& denoiser, const LabeledDataset& id_data,
                    const DiffusionSchedule& schedule, Rng& rng);

// Ancestral reverse chain from x_T ~ N(0, I), conditioning every step on the
// same label vector; one split RNG stream per chain.
RealMatrix sample(const DenoiserModel& denoiser, std::span<const double> label_vec,
                  const DiffusionSchedule& schedule, std::size_t n, Rng& rng);

// Two-hot [1,1] conditioning (or (lambda, 1-lambda) when an interpolation
// coefficient in [0,1] is supplied) to land between two classes.
RealMatrix generate_label_mixup(const DenoiserModel& denoiser, std::size_t class_a,
                                std::size_t class_b, std::size_t n,
                                const DiffusionSchedule& schedule, Rng& rng,
                                double interpolation = -1.0);

}  // namespace oodkit
