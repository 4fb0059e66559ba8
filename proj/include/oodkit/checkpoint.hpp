#pragma once

#include <string>

#include "oodkit/diffusion.hpp"
#include "oodkit/losses.hpp"
#include "oodkit/mlp.hpp"

namespace oodkit {

// Self-describing binary checkpoints: magic "OODKIT", u32 format version,
// u32 payload kind, then an architecture descriptor and the parameter arrays
// as little-endian 32-bit floats in layer order. Classifier files append the
// metric head; denoiser files append the schedule and conditioning metadata.

constexpr std::uint32_t kCheckpointVersion = 1;

enum class CheckpointKind : std::uint32_t { mlp = 0, classifier = 1, denoiser = 2 };

struct ClassifierCheckpoint {
    MlpModel model;
    MetricHead head;
};

void save_mlp(const MlpModel& model, const std::string& path);
MlpModel load_mlp(const std::string& path);

void save_classifier(const MlpModel& model, const MetricHead& head, const std::string& path);
ClassifierCheckpoint load_classifier(const std::string& path);

void save_denoiser(const DenoiserModel& denoiser, const std::string& path);
DenoiserModel load_denoiser(const std::string& path);

// Kind probe without loading parameters (missing file -> error).
CheckpointKind peek_checkpoint_kind(const std::string& path);

}  // namespace oodkit
