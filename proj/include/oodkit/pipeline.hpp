#pragma once

#include <string>
#include <vector>

#include "oodkit/config.hpp"
#include "oodkit/datagen.hpp"
#include "oodkit/diffusion.hpp"
#include "oodkit/eval.hpp"
#include "oodkit/losses.hpp"
#include "oodkit/mlp.hpp"
#include "oodkit/rng.hpp"

namespace oodkit {

// Substream ids hanging off Rng(config.seed); every stage owns one so a
// config change in stage A cannot shift the draws of stage B.
enum class RngStream : std::uint64_t {
    data = 0,
    model_init = 1,
    train = 2,
    ddpm = 3,
    gen = 4,
    eval = 5,
};

Rng stream_rng(const ExperimentConfig& config, RngStream stream);

// The synthetic benchmark: ID circle-of-Gaussians train/val/test plus the
// three closed-form OOD suites.
struct BenchmarkData {
    LabeledDataset train;
    LabeledDataset val;
    LabeledDataset test;
    LabeledDataset ood_uniform;
    LabeledDataset ood_gaussian;
    LabeledDataset ood_held_out;
};

BenchmarkData make_benchmark(const ExperimentConfig& config);

// Head per the loss.* block; negative margin/scale fall back to the kind
// defaults, scale_learnable "auto" keeps the kind default.
MetricHead make_head(const ExperimentConfig& config, std::size_t feature_dim,
                     std::size_t num_classes, Rng& rng);

struct TrainedClassifier {
    MlpModel model;
    MetricHead head;
    std::vector<double> epoch_losses;  // mean batch loss per epoch
};

// Encoder + metric head SGD training; when oe_set is non-null every ID batch
// is paired with an outlier batch through the composite objective. A NaN loss
// aborts and keeps the last finite epoch snapshot.
TrainedClassifier train_classifier(const ExperimentConfig& config,
                                   const LabeledDataset& train_id,
                                   const LabeledDataset* oe_set, Rng& init_rng,
                                   Rng& train_rng);

DenoiserModel train_ddpm(const ExperimentConfig& config, const LabeledDataset& train_id,
                         Rng& rng);

// "a-b,c-d" pair list, or every unordered pair when the string is "all".
std::vector<std::pair<std::size_t, std::size_t>> parse_class_pairs(
    const std::string& text, std::size_t num_classes);

// Mixup outliers across the configured pairs, balanced per pair, totaling
// roughly gen.fraction of the given ID train size. Labels are all -1.
LabeledDataset generate_mixup_set(const ExperimentConfig& config,
                                  const DenoiserModel& denoiser,
                                  std::size_t id_train_size, Rng& rng);

// Penultimate features for a whole dataset.
RealMatrix encode(const MlpModel& model, const LabeledDataset& data);

struct EvalArtifacts {
    EvalReport report;
    // one ROC curve per report row, same order
    std::vector<std::vector<std::pair<double, double>>> roc_curves;
};

// Scores every configured kind against every OOD set: tau comes from the
// validation split, metrics compare ID test scores with the OOD scores.
EvalArtifacts evaluate(const ExperimentConfig& config, const MlpModel& model,
                       const MetricHead& head, const LabeledDataset& train_id,
                       const LabeledDataset& val_id, const LabeledDataset& test_id,
                       const std::vector<const LabeledDataset*>& ood_sets);

// FNV-1a 64-bit digest of a file's bytes, rendered as 16 hex chars.
std::string file_digest(const std::string& path);

// JSON run manifest: config snapshot, toolkit version, digests of the listed
// output files. Written atomically (temp file + rename).
void write_run_manifest(const ExperimentConfig& config,
                        const std::vector<std::string>& output_paths,
                        const std::string& path);

constexpr const char* kToolkitVersion = "oodkit 0.1.0";

}  // namespace oodkit
