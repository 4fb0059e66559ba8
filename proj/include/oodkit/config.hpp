#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace oodkit {

// Flat `section.key = value` experiment configuration. Every field has a
// default; unknown keys are rejected so typos cannot silently fall back.
struct ExperimentConfig {
    std::uint64_t seed = 1;

    // synthetic benchmark geometry
    std::size_t data_classes = 4;
    std::size_t data_dim = 2;
    double data_radius = 4.0;
    double data_sigma = 0.5;
    std::size_t data_n_per_class = 500;
    std::size_t data_n_test_per_class = 250;
    double data_val_fraction = 0.1;
    double data_noise_box_inflate = 2.0;   // uniform-noise box vs ID bounding box
    double data_noise_sigma = 1.0;         // gaussian-noise spread, 2x the ID cluster sigma
    double data_held_out_radius = 8.0;     // 5th-cluster distance
    std::size_t data_n_ood = 500;          // rows per evaluation OOD suite

    // encoder; a narrow single hidden layer keeps the relu region count low so
    // exposure training generalizes beyond the exact outlier locations
    std::vector<std::size_t> model_hidden = {32};
    std::size_t model_feature_dim = 8;

    // loss head; negative margin/scale mean "use the kind's default"
    std::string loss_kind = "softmax";
    double loss_margin = -1.0;
    double loss_scale = -1.0;
    std::string loss_scale_learnable = "auto";  // auto | true | false

    // outlier exposure
    bool oe_enabled = false;
    double oe_lambda = 0.5;
    std::string oe_source;  // CSV of exposure outliers (required when enabled)

    // classifier training
    std::size_t train_epochs = 60;
    double train_lr = 0.02;
    double train_momentum = 0.9;
    std::size_t train_batch = 64;

    // diffusion model
    std::size_t ddpm_steps = 200;
    double ddpm_beta_start = 1e-4;
    double ddpm_beta_end = 0.05;
    std::size_t ddpm_epochs = 40;
    double ddpm_lr = 0.01;
    double ddpm_momentum = 0.9;
    std::size_t ddpm_batch = 64;
    std::vector<std::size_t> ddpm_hidden = {128, 128, 128};

    // mixup generation
    std::string gen_pairs = "all";     // all | "a-b,c-d,..."
    double gen_fraction = 1.0;         // of the ID training-set size
    double gen_interpolation = -1.0;   // <0 -> two-hot [1,1]

    // evaluation
    double eval_tpr = 0.95;
    std::string eval_scores = "msp,energy,mahalanobis,maxcos";
    double eval_temperature = 1.0;

    // Set one field by its config key; unknown key or unparsable value throws.
    void apply(const std::string& key, const std::string& value);

    // Canonical `key = value` lines in fixed order; parse(serialize()) is the
    // identity, and the RunManifest embeds exactly this text.
    std::string serialize() const;

    void validate() const;
};

// Defaults overlaid with the file's assignments. Lines are `key = value`,
// blank lines and #-comments ignored.
ExperimentConfig load_config(const std::string& path);

// Same grammar from an in-memory string (tests, CLI --set handling).
ExperimentConfig parse_config(const std::string& text);

// "k=v" strings applied on top (CLI overrides).
void apply_overrides(ExperimentConfig& config, const std::vector<std::string>& overrides);

}  // namespace oodkit
