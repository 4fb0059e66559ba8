#include "oodkit/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "oodkit/errors.hpp"

namespace oodkit {

namespace {

constexpr char kMagic[6] = {'O', 'O', 'D', 'K', 'I', 'T'};

// this format is little-endian on disk; the build targets little-endian hosts
static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::ifstream& in, const std::string& path) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw ConfigError("truncated checkpoint: " + path);
    return v;
}

void put_f32_array(std::ofstream& out, const std::vector<double>& values) {
    for (double v : values) put(out, static_cast<float>(v));
}

void take_f32_array(std::ifstream& in, std::vector<double>& values, const std::string& path) {
    for (double& v : values) v = static_cast<double>(take<float>(in, path));
}

void write_mlp_block(std::ofstream& out, const MlpModel& model) {
    put(out, static_cast<std::uint32_t>(model.layers.size()));
    for (const DenseLayer& layer : model.layers) {
        put(out, static_cast<std::uint32_t>(layer.in_dim()));
        put(out, static_cast<std::uint32_t>(layer.out_dim()));
        put(out, static_cast<std::uint32_t>(layer.act));
    }
    for (const DenseLayer& layer : model.layers) {
        put_f32_array(out, layer.weight.data);
        put_f32_array(out, layer.bias);
    }
}

MlpModel read_mlp_block(std::ifstream& in, const std::string& path) {
    const auto n_layers = take<std::uint32_t>(in, path);
    if (n_layers == 0 || n_layers > 64) {
        throw ConfigError("implausible layer count in checkpoint: " + path);
    }
    MlpModel model;
    model.layers.resize(n_layers);
    for (DenseLayer& layer : model.layers) {
        const auto in_dim = take<std::uint32_t>(in, path);
        const auto out_dim = take<std::uint32_t>(in, path);
        const auto act = take<std::uint32_t>(in, path);
        if (in_dim == 0 || out_dim == 0 || act > 2) {
            throw ConfigError("bad layer descriptor in checkpoint: " + path);
        }
        layer.weight = RealMatrix(in_dim, out_dim);
        layer.bias.assign(out_dim, 0.0);
        layer.act = static_cast<Activation>(act);
    }
    for (std::size_t l = 1; l < model.layers.size(); ++l) {
        if (model.layers[l].in_dim() != model.layers[l - 1].out_dim()) {
            throw ConfigError("layer widths do not chain in checkpoint: " + path);
        }
    }
    for (DenseLayer& layer : model.layers) {
        take_f32_array(in, layer.weight.data, path);
        take_f32_array(in, layer.bias, path);
    }
    return model;
}

std::ofstream open_out(const std::string& path, CheckpointKind kind) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open for write: " + path);
    out.write(kMagic, sizeof(kMagic));
    put(out, kCheckpointVersion);
    put(out, static_cast<std::uint32_t>(kind));
    return out;
}

std::ifstream open_in(const std::string& path, CheckpointKind expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifactError("cannot open checkpoint: " + path);
    char magic[6];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw ConfigError("not a checkpoint file: " + path);
    }
    const auto version = take<std::uint32_t>(in, path);
    if (version != kCheckpointVersion) {
        throw ConfigError("unsupported checkpoint version " + std::to_string(version) +
                          " in " + path);
    }
    const auto kind = take<std::uint32_t>(in, path);
    if (kind != static_cast<std::uint32_t>(expected)) {
        throw ConfigError("checkpoint " + path + " holds kind " + std::to_string(kind) +
                          ", expected " + std::to_string(static_cast<std::uint32_t>(expected)));
    }
    return in;
}

void finish_write(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw ConfigError("write failed: " + path);
}

}  // namespace

void save_mlp(const MlpModel& model, const std::string& path) {
    std::ofstream out = open_out(path, CheckpointKind::mlp);
    write_mlp_block(out, model);
    finish_write(out, path);
}

MlpModel load_mlp(const std::string& path) {
    std::ifstream in = open_in(path, CheckpointKind::mlp);
    return read_mlp_block(in, path);
}

void save_classifier(const MlpModel& model, const MetricHead& head, const std::string& path) {
    head.validate();
    std::ofstream out = open_out(path, CheckpointKind::classifier);
    write_mlp_block(out, model);
    put(out, static_cast<std::uint32_t>(head.kind));
    put(out, head.margin);
    put(out, head.scale);
    put(out, static_cast<std::uint8_t>(head.scale_learnable ? 1 : 0));
    put(out, static_cast<std::uint32_t>(head.feature_dim()));
    put(out, static_cast<std::uint32_t>(head.num_classes()));
    put_f32_array(out, head.weight.data);
    put_f32_array(out, head.bias);
    finish_write(out, path);
}

ClassifierCheckpoint load_classifier(const std::string& path) {
    std::ifstream in = open_in(path, CheckpointKind::classifier);
    ClassifierCheckpoint ckpt;
    ckpt.model = read_mlp_block(in, path);
    const auto kind = take<std::uint32_t>(in, path);
    if (kind > 5) throw ConfigError("bad head kind in checkpoint: " + path);
    ckpt.head.kind = static_cast<LossKind>(kind);
    ckpt.head.margin = take<double>(in, path);
    ckpt.head.scale = take<double>(in, path);
    ckpt.head.scale_learnable = take<std::uint8_t>(in, path) != 0;
    const auto fd = take<std::uint32_t>(in, path);
    const auto c = take<std::uint32_t>(in, path);
    if (fd == 0 || c < 2) throw ConfigError("bad head shape in checkpoint: " + path);
    if (fd != ckpt.model.feature_dim()) {
        throw ConfigError("head feature dim != model feature dim in " + path);
    }
    ckpt.head.weight = RealMatrix(fd, c);
    ckpt.head.bias.assign(c, 0.0);
    take_f32_array(in, ckpt.head.weight.data, path);
    take_f32_array(in, ckpt.head.bias, path);
    ckpt.head.validate();
    return ckpt;
}

void save_denoiser(const DenoiserModel& denoiser, const std::string& path) {
    denoiser.validate();
    std::ofstream out = open_out(path, CheckpointKind::denoiser);
    write_mlp_block(out, denoiser.net);
    put(out, static_cast<std::uint32_t>(denoiser.schedule.steps));
    put(out, denoiser.schedule.beta_start);
    put(out, denoiser.schedule.beta_end);
    put(out, static_cast<std::uint32_t>(denoiser.data_dim));
    put(out, static_cast<std::uint32_t>(denoiser.num_classes));
    finish_write(out, path);
}

DenoiserModel load_denoiser(const std::string& path) {
    std::ifstream in = open_in(path, CheckpointKind::denoiser);
    DenoiserModel denoiser;
    denoiser.net = read_mlp_block(in, path);
    const auto steps = take<std::uint32_t>(in, path);
    const double beta_start = take<double>(in, path);
    const double beta_end = take<double>(in, path);
    denoiser.data_dim = take<std::uint32_t>(in, path);
    denoiser.num_classes = take<std::uint32_t>(in, path);
    denoiser.schedule = make_schedule(steps, beta_start, beta_end);
    denoiser.validate();
    return denoiser;
}

CheckpointKind peek_checkpoint_kind(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifactError("cannot open checkpoint: " + path);
    char magic[6];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw ConfigError("not a checkpoint file: " + path);
    }
    take<std::uint32_t>(in, path);  // version
    const auto kind = take<std::uint32_t>(in, path);
    if (kind > 2) throw ConfigError("unknown checkpoint kind in " + path);
    return static_cast<CheckpointKind>(kind);
}

}  // namespace oodkit
