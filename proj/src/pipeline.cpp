#include "oodkit/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "oodkit/errors.hpp"
#include "oodkit/scores.hpp"

namespace oodkit {

Rng stream_rng(const ExperimentConfig& config, RngStream stream) {
    return Rng(config.seed).split(static_cast<std::uint64_t>(stream));
}

BenchmarkData make_benchmark(const ExperimentConfig& config) {
    config.validate();
    Rng rng = stream_rng(config, RngStream::data);

    const RealMatrix means =
        circle_means(config.data_classes, config.data_radius, config.data_dim);
    const LabeledDataset pool =
        gaussian_mixture_id(means, config.data_sigma, config.data_n_per_class, rng, "id");

    BenchmarkData bench;
    auto split = train_val_split(pool, config.data_val_fraction, rng);
    bench.train = std::move(split.first);
    bench.val = std::move(split.second);
    bench.test = gaussian_mixture_id(means, config.data_sigma, config.data_n_test_per_class,
                                     rng, "id_test");

    const auto box = bounding_box(pool.features, config.data_noise_box_inflate);
    bench.ood_uniform = uniform_noise_ood(box, config.data_n_ood, rng, "uniform_noise");

    const std::vector<double> origin(config.data_dim, 0.0);
    bench.ood_gaussian =
        gaussian_noise_ood(origin, config.data_noise_sigma, config.data_n_ood, rng,
                           "gaussian_noise");

    // a single unseen cluster, offset to the angular midpoint between the
    // first two ID classes so it is far from every class mean
    RealMatrix held_mean(1, config.data_dim);
    const double angle = std::numbers::pi / static_cast<double>(config.data_classes);
    held_mean(0, 0) = config.data_held_out_radius * std::cos(angle);
    held_mean(0, 1) = config.data_held_out_radius * std::sin(angle);
    bench.ood_held_out =
        held_out_cluster_ood(held_mean, config.data_sigma, config.data_n_ood, rng, "held_out");
    return bench;
}

MetricHead make_head(const ExperimentConfig& config, std::size_t feature_dim,
                     std::size_t num_classes, Rng& rng) {
    const LossKind kind = loss_kind_from_name(config.loss_kind);
    MetricHead head = MetricHead::make(kind, feature_dim, num_classes, rng);
    if (config.loss_margin >= 0.0) head.margin = config.loss_margin;
    if (config.loss_scale > 0.0) head.scale = config.loss_scale;
    if (config.loss_scale_learnable == "true") {
        head.scale_learnable = true;
    } else if (config.loss_scale_learnable == "false") {
        head.scale_learnable = false;
    }
    head.validate();
    return head;
}

namespace {

void take_batch(const LabeledDataset& data, const std::vector<std::size_t>& order,
                std::size_t start, std::size_t stop, RealMatrix& features,
                std::vector<int>& labels) {
    features = RealMatrix(stop - start, data.dim());
    labels.resize(stop - start);
    for (std::size_t b = start; b < stop; ++b) {
        const std::size_t i = order[b];
        for (std::size_t k = 0; k < data.dim(); ++k) features(b - start, k) = data.features(i, k);
        labels[b - start] = data.labels[i];
    }
}

// cycling shuffled cursor over the outlier rows
struct OutlierFeeder {
    const LabeledDataset* set = nullptr;
    std::vector<std::size_t> order;
    std::size_t cursor = 0;

    RealMatrix next(std::size_t n, Rng& rng) {
        if (!set) return RealMatrix();
        RealMatrix batch(n, set->dim());
        for (std::size_t b = 0; b < n; ++b) {
            if (cursor == order.size()) {
                order = rng.permutation(set->size());
                cursor = 0;
            }
            const std::size_t i = order[cursor++];
            for (std::size_t k = 0; k < set->dim(); ++k) batch(b, k) = set->features(i, k);
        }
        return batch;
    }
};

}  // namespace

TrainedClassifier train_classifier(const ExperimentConfig& config,
                                   const LabeledDataset& train_id,
                                   const LabeledDataset* oe_set, Rng& init_rng,
                                   Rng& train_rng) {
    config.validate();
    train_id.validate();
    if (!train_id.is_pure_id()) {
        throw ConfigError("train_classifier: training set contains OOD rows");
    }
    const std::size_t num_classes = train_id.num_classes();
    if (num_classes < 2) throw ConfigError("train_classifier: need at least 2 classes");
    if (oe_set) {
        oe_set->validate();
        if (!oe_set->is_pure_ood()) {
            throw ConfigError("train_classifier: exposure set contains labeled rows");
        }
        if (oe_set->dim() != train_id.dim()) {
            throw ConfigError("train_classifier: exposure set dimension mismatch");
        }
    }

    std::vector<std::size_t> dims;
    dims.push_back(train_id.dim());
    dims.insert(dims.end(), config.model_hidden.begin(), config.model_hidden.end());
    dims.push_back(config.model_feature_dim);

    TrainedClassifier out;
    out.model = MlpModel::random(dims, Activation::relu, Activation::identity, init_rng);
    out.head = make_head(config, config.model_feature_dim, num_classes, init_rng);

    SgdMomentum model_opt(config.train_lr, config.train_momentum);
    HeadSgd head_opt(config.train_lr, config.train_momentum);
    OutlierFeeder feeder;
    feeder.set = oe_set;
    const double lambda = oe_set ? config.oe_lambda : 0.0;

    MlpModel last_model = out.model;
    MetricHead last_head = out.head;
    RealMatrix id_batch;
    std::vector<int> id_labels;
    for (std::size_t epoch = 0; epoch < config.train_epochs; ++epoch) {
        const auto order = train_rng.permutation(train_id.size());
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.train_batch) {
            const std::size_t stop = std::min(order.size(), start + config.train_batch);
            take_batch(train_id, order, start, stop, id_batch, id_labels);
            const RealMatrix ood_batch = feeder.next(oe_set ? stop - start : 0, train_rng);
            const CompositeLoss composite = outlier_exposure_loss(
                id_batch, id_labels, ood_batch, out.model, out.head, lambda);
            if (!std::isfinite(composite.loss)) {
                warn("train_classifier: loss diverged at epoch " + std::to_string(epoch) +
                     ", keeping last finite snapshot");
                out.model = last_model;
                out.head = last_head;
                return out;
            }
            model_opt.step(out.model, composite.model_tape);
            head_opt.step(out.head, composite.dweight, composite.dbias, composite.dscale);
            epoch_loss += composite.loss;
            ++batches;
        }
        out.epoch_losses.push_back(epoch_loss / static_cast<double>(batches));
        if (out.model.all_finite() && out.head.weight.all_finite()) {
            last_model = out.model;
            last_head = out.head;
        }
    }
    return out;
}

DenoiserModel train_ddpm(const ExperimentConfig& config, const LabeledDataset& train_id,
                         Rng& rng) {
    config.validate();
    const DiffusionSchedule schedule =
        make_schedule(config.ddpm_steps, config.ddpm_beta_start, config.ddpm_beta_end);
    DdpmTrainConfig tcfg;
    tcfg.epochs = config.ddpm_epochs;
    tcfg.lr = config.ddpm_lr;
    tcfg.momentum = config.ddpm_momentum;
    tcfg.batch = config.ddpm_batch;
    tcfg.hidden = config.ddpm_hidden;
    return train_denoiser(train_id, schedule, tcfg, rng);
}

std::vector<std::pair<std::size_t, std::size_t>> parse_class_pairs(const std::string& text,
                                                                   std::size_t num_classes) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    if (text == "all") {
        for (std::size_t a = 0; a < num_classes; ++a) {
            for (std::size_t b = a + 1; b < num_classes; ++b) pairs.emplace_back(a, b);
        }
    } else {
        if (text.empty() || text.back() == ',') {
            throw ConfigError("gen.pairs is empty or has a trailing comma");
        }
        std::stringstream ss(text);
        std::string token;
        while (std::getline(ss, token, ',')) {
            const std::size_t dash = token.find('-');
            if (dash == std::string::npos) {
                throw ConfigError("gen.pairs entry '" + token + "' is not a-b");
            }
            try {
                std::size_t used_a = 0, used_b = 0;
                const std::string left = token.substr(0, dash);
                const std::string right = token.substr(dash + 1);
                const std::size_t a = std::stoull(left, &used_a);
                const std::size_t b = std::stoull(right, &used_b);
                if (used_a != left.size() || used_b != right.size()) throw ConfigError("");
                pairs.emplace_back(a, b);
            } catch (const std::exception&) {
                throw ConfigError("gen.pairs entry '" + token + "' is not a-b");
            }
        }
    }
    if (pairs.empty()) throw ConfigError("gen.pairs resolved to no class pairs");
    for (const auto& [a, b] : pairs) {
        if (a == b) throw ConfigError("gen.pairs contains an identical pair");
        if (a >= num_classes || b >= num_classes) {
            throw ConfigError("gen.pairs references class " + std::to_string(std::max(a, b)) +
                              " but the model has " + std::to_string(num_classes));
        }
    }
    return pairs;
}

LabeledDataset generate_mixup_set(const ExperimentConfig& config,
                                  const DenoiserModel& denoiser, std::size_t id_train_size,
                                  Rng& rng) {
    const auto pairs = parse_class_pairs(config.gen_pairs, denoiser.num_classes);
    const auto total = static_cast<std::size_t>(
        std::llround(config.gen_fraction * static_cast<double>(id_train_size)));
    const std::size_t per_pair = std::max<std::size_t>(1, total / pairs.size());

    LabeledDataset out;
    out.name = "ddpm_mixup";
    out.features = RealMatrix(per_pair * pairs.size(), denoiser.data_dim);
    out.labels.assign(out.features.rows, kOodLabel);
    std::size_t row = 0;
    for (const auto& [a, b] : pairs) {
        const RealMatrix block = generate_label_mixup(denoiser, a, b, per_pair,
                                                      denoiser.schedule, rng,
                                                      config.gen_interpolation);
        for (std::size_t i = 0; i < block.rows; ++i, ++row) {
            for (std::size_t k = 0; k < block.cols; ++k) out.features(row, k) = block(i, k);
        }
    }
    out.validate();
    return out;
}

RealMatrix encode(const MlpModel& model, const LabeledDataset& data) {
    if (data.dim() != model.input_dim()) {
        throw ConfigError("encode: dataset dimension " + std::to_string(data.dim()) +
                          " != model input " + std::to_string(model.input_dim()));
    }
    return mlp_forward(model, data.features);
}

namespace {

std::vector<ScoreKind> parse_score_kinds(const std::string& text) {
    std::vector<ScoreKind> kinds;
    std::stringstream ss(text);
    std::string token;
    while (std::getline(ss, token, ',')) {
        const std::size_t a = token.find_first_not_of(" \t");
        if (a == std::string::npos) continue;
        const std::size_t b = token.find_last_not_of(" \t");
        kinds.push_back(score_kind_from_name(token.substr(a, b - a + 1)));
    }
    if (kinds.empty()) throw ConfigError("eval.scores resolved to no score kinds");
    return kinds;
}

}  // namespace

EvalArtifacts evaluate(const ExperimentConfig& config, const MlpModel& model,
                       const MetricHead& head, const LabeledDataset& train_id,
                       const LabeledDataset& val_id, const LabeledDataset& test_id,
                       const std::vector<const LabeledDataset*>& ood_sets) {
    if (ood_sets.empty()) throw ConfigError("evaluate: need at least one OOD set");
    const std::vector<ScoreKind> kinds = parse_score_kinds(config.eval_scores);

    const RealMatrix z_train = encode(model, train_id);
    const RealMatrix z_val = encode(model, val_id);
    const RealMatrix z_test = encode(model, test_id);

    const bool needs_stats =
        std::find(kinds.begin(), kinds.end(), ScoreKind::mahalanobis) != kinds.end();
    GaussianStats stats;
    if (needs_stats) stats = fit_gaussian_stats(z_train, train_id.labels);
    const GaussianStats* stats_ptr = needs_stats ? &stats : nullptr;

    struct PerKind {
        std::vector<double> test_scores;
        double tau = 0.0;
        double tpr_at_tau = 0.0;
    };
    std::vector<PerKind> per_kind(kinds.size());
    for (std::size_t k = 0; k < kinds.size(); ++k) {
        const auto val_scores =
            score_features(kinds[k], z_val, head, stats_ptr, config.eval_temperature);
        per_kind[k].test_scores =
            score_features(kinds[k], z_test, head, stats_ptr, config.eval_temperature);
        per_kind[k].tau = threshold_at_tpr(val_scores, config.eval_tpr);
        std::size_t kept = 0;
        for (double s : val_scores) {
            if (detect(s, per_kind[k].tau) == Detection::id) ++kept;
        }
        per_kind[k].tpr_at_tau =
            static_cast<double>(kept) / static_cast<double>(val_scores.size());
    }

    EvalArtifacts artifacts;
    artifacts.report.loss_kind = loss_kind_name(head.kind);
    artifacts.report.seed = config.seed;
    artifacts.report.closed_set_accuracy =
        closed_set_accuracy(model, head, test_id.features, test_id.labels);

    for (const LabeledDataset* ood : ood_sets) {
        if (!ood) throw ConfigError("evaluate: null OOD set");
        if (!ood->is_pure_ood()) {
            throw ConfigError("evaluate: OOD set '" + ood->name + "' has ID labels");
        }
        const RealMatrix z_ood = encode(model, *ood);
        for (std::size_t k = 0; k < kinds.size(); ++k) {
            const auto ood_scores =
                score_features(kinds[k], z_ood, head, stats_ptr, config.eval_temperature);
            EvalRow row;
            row.ood_set = ood->name;
            row.score_kind = score_kind_name(kinds[k]);
            row.auroc = auroc(per_kind[k].test_scores, ood_scores);
            row.aupr_in = aupr(per_kind[k].test_scores, ood_scores, PositiveClass::id);
            row.aupr_out = aupr(per_kind[k].test_scores, ood_scores, PositiveClass::ood);
            row.tau = per_kind[k].tau;
            row.tpr_at_tau = per_kind[k].tpr_at_tau;
            artifacts.report.rows.push_back(std::move(row));
            artifacts.roc_curves.push_back(roc_curve(per_kind[k].test_scores, ood_scores));
        }
    }
    return artifacts;
}

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifactError("cannot digest missing file: " + path);
    std::uint64_t hash = 14695981039346656037ull;
    char chunk[4096];
    while (in.read(chunk, sizeof(chunk)) || in.gcount() > 0) {
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            hash ^= static_cast<unsigned char>(chunk[i]);
            hash *= 1099511628211ull;
        }
        if (!in) break;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

void write_run_manifest(const ExperimentConfig& config,
                        const std::vector<std::string>& output_paths,
                        const std::string& path) {
    nlohmann::json manifest;
    manifest["version"] = kToolkitVersion;
    manifest["generated_at_unix"] = static_cast<std::int64_t>(std::time(nullptr));
    manifest["config"] = config.serialize();
    manifest["outputs"] = nlohmann::json::array();
    for (const std::string& out_path : output_paths) {
        manifest["outputs"].push_back({{"path", out_path}, {"fnv1a64", file_digest(out_path)}});
    }

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw ConfigError("cannot open for write: " + tmp);
        out << manifest.dump(2) << "\n";
        if (!out) throw ConfigError("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw ConfigError("cannot move manifest into place: " + path);
    }
}

}  // namespace oodkit
