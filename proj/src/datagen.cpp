#include "oodkit/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "oodkit/errors.hpp"
#include "oodkit/eval.hpp"

namespace oodkit {

std::size_t LabeledDataset::num_classes() const {
    int max_label = -1;
    for (int y : labels) max_label = std::max(max_label, y);
    return static_cast<std::size_t>(max_label + 1);
}

bool LabeledDataset::is_pure_id() const {
    return std::none_of(labels.begin(), labels.end(), [](int y) { return y == kOodLabel; });
}

bool LabeledDataset::is_pure_ood() const {
    return std::all_of(labels.begin(), labels.end(), [](int y) { return y == kOodLabel; });
}

void LabeledDataset::validate() const {
    if (features.rows == 0 || features.cols == 0) {
        throw ConfigError("dataset '" + name + "' is empty");
    }
    if (labels.size() != features.rows) {
        throw ConfigError("dataset '" + name + "': labels size != rows");
    }
    if (!features.all_finite()) {
        throw NumericError("dataset '" + name + "': non-finite feature");
    }
    for (int y : labels) {
        if (y < kOodLabel) {
            throw ConfigError("dataset '" + name + "': label below -1: " + std::to_string(y));
        }
    }
}

RealMatrix circle_means(std::size_t num_classes, double radius, std::size_t dim) {
    if (num_classes == 0) throw ConfigError("circle_means: need at least one class");
    if (dim < 2) throw ConfigError("circle_means: dimension must be >= 2");
    RealMatrix means(num_classes, dim);
    for (std::size_t c = 0; c < num_classes; ++c) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) /
                             static_cast<double>(num_classes);
        means(c, 0) = radius * std::cos(angle);
        means(c, 1) = radius * std::sin(angle);
    }
    return means;
}

LabeledDataset gaussian_mixture_id(const RealMatrix& means, double sigma,
                                   std::size_t n_per_class, Rng& rng, std::string name) {
    if (!(sigma > 0.0)) throw ConfigError("gaussian_mixture_id: sigma must be > 0");
    if (means.rows == 0 || n_per_class == 0) {
        throw ConfigError("gaussian_mixture_id: need classes and samples");
    }
    for (std::size_t a = 0; a < means.rows; ++a) {
        for (std::size_t b = a + 1; b < means.rows; ++b) {
            bool same = true;
            for (std::size_t k = 0; k < means.cols; ++k) {
                if (means(a, k) != means(b, k)) {
                    same = false;
                    break;
                }
            }
            if (same) {
                throw ConfigError("gaussian_mixture_id: duplicate class means " +
                                  std::to_string(a) + " and " + std::to_string(b));
            }
        }
    }
    LabeledDataset out;
    out.name = std::move(name);
    out.features = RealMatrix(means.rows * n_per_class, means.cols);
    out.labels.resize(out.features.rows);
    std::size_t row = 0;
    for (std::size_t c = 0; c < means.rows; ++c) {
        for (std::size_t i = 0; i < n_per_class; ++i, ++row) {
            out.labels[row] = static_cast<int>(c);
            for (std::size_t k = 0; k < means.cols; ++k) {
                out.features(row, k) = means(c, k) + sigma * rng.normal();
            }
        }
    }
    return out;
}

LabeledDataset uniform_noise_ood(const std::vector<std::pair<double, double>>& bounds,
                                 std::size_t n, Rng& rng, std::string name) {
    if (bounds.empty()) throw ConfigError("uniform_noise_ood: empty bounds");
    if (n == 0) throw ConfigError("uniform_noise_ood: n must be > 0");
    for (const auto& [lo, hi] : bounds) {
        if (!(lo < hi)) throw ConfigError("uniform_noise_ood: degenerate bound");
    }
    LabeledDataset out;
    out.name = std::move(name);
    out.features = RealMatrix(n, bounds.size());
    out.labels.assign(n, kOodLabel);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < bounds.size(); ++k) {
            out.features(i, k) = rng.uniform(bounds[k].first, bounds[k].second);
        }
    }
    return out;
}

LabeledDataset gaussian_noise_ood(std::span<const double> mu, double sigma, std::size_t n,
                                  Rng& rng, std::string name) {
    if (mu.empty()) throw ConfigError("gaussian_noise_ood: empty mean");
    if (!(sigma > 0.0)) throw ConfigError("gaussian_noise_ood: sigma must be > 0");
    if (n == 0) throw ConfigError("gaussian_noise_ood: n must be > 0");
    LabeledDataset out;
    out.name = std::move(name);
    out.features = RealMatrix(n, mu.size());
    out.labels.assign(n, kOodLabel);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < mu.size(); ++k) {
            out.features(i, k) = mu[k] + sigma * rng.normal();
        }
    }
    return out;
}

LabeledDataset held_out_cluster_ood(const RealMatrix& means_ood, double sigma,
                                    std::size_t n, Rng& rng, std::string name) {
    if (means_ood.rows == 0) throw ConfigError("held_out_cluster_ood: no cluster means");
    if (n == 0) throw ConfigError("held_out_cluster_ood: n must be > 0");
    if (!(sigma > 0.0)) throw ConfigError("held_out_cluster_ood: sigma must be > 0");
    LabeledDataset out;
    out.name = std::move(name);
    out.features = RealMatrix(n, means_ood.cols);
    out.labels.assign(n, kOodLabel);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = means_ood.rows == 1 ? 0 : rng.bounded(means_ood.rows);
        for (std::size_t k = 0; k < means_ood.cols; ++k) {
            out.features(i, k) = means_ood(c, k) + sigma * rng.normal();
        }
    }
    return out;
}

std::pair<LabeledDataset, LabeledDataset> train_val_split(const LabeledDataset& dataset,
                                                          double val_fraction, Rng& rng) {
    dataset.validate();
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
        throw ConfigError("train_val_split: val_fraction must be in (0,1)");
    }
    // group row indices by label, then draw the validation subset per group
    std::vector<int> distinct;
    for (int y : dataset.labels) {
        if (std::find(distinct.begin(), distinct.end(), y) == distinct.end()) {
            distinct.push_back(y);
        }
    }
    std::sort(distinct.begin(), distinct.end());

    std::vector<bool> in_val(dataset.size(), false);
    for (int y : distinct) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < dataset.size(); ++i) {
            if (dataset.labels[i] == y) rows.push_back(i);
        }
        const auto n_val = static_cast<std::size_t>(
            std::llround(val_fraction * static_cast<double>(rows.size())));
        const auto order = rng.permutation(rows.size());
        for (std::size_t i = 0; i < n_val; ++i) in_val[rows[order[i]]] = true;
    }

    LabeledDataset train, val;
    train.name = dataset.name + "_train";
    val.name = dataset.name + "_val";
    const std::size_t n_val_total =
        static_cast<std::size_t>(std::count(in_val.begin(), in_val.end(), true));
    train.features = RealMatrix(dataset.size() - n_val_total, dataset.dim());
    val.features = RealMatrix(n_val_total, dataset.dim());
    std::size_t ti = 0, vi = 0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        LabeledDataset& dst = in_val[i] ? val : train;
        std::size_t& at = in_val[i] ? vi : ti;
        for (std::size_t k = 0; k < dataset.dim(); ++k) {
            dst.features(at, k) = dataset.features(i, k);
        }
        dst.labels.push_back(dataset.labels[i]);
        ++at;
    }
    return {std::move(train), std::move(val)};
}

std::vector<std::pair<double, double>> bounding_box(const RealMatrix& features,
                                                    double inflate) {
    if (features.rows == 0) throw ConfigError("bounding_box: empty features");
    if (!(inflate > 0.0)) throw ConfigError("bounding_box: inflate must be > 0");
    std::vector<std::pair<double, double>> box(features.cols);
    for (std::size_t k = 0; k < features.cols; ++k) {
        double lo = features(0, k), hi = features(0, k);
        for (std::size_t i = 1; i < features.rows; ++i) {
            lo = std::min(lo, features(i, k));
            hi = std::max(hi, features(i, k));
        }
        const double center = 0.5 * (lo + hi);
        const double half = 0.5 * (hi - lo) * inflate;
        box[k] = {center - half, center + half};
    }
    return box;
}

void write_dataset_csv(const LabeledDataset& dataset, const std::string& path) {
    dataset.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open for write: " + path);
    for (std::size_t k = 0; k < dataset.dim(); ++k) out << 'f' << k << ',';
    out << "label\n";
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        for (std::size_t k = 0; k < dataset.dim(); ++k) {
            out << format_double(dataset.features(i, k)) << ',';
        }
        out << dataset.labels[i] << "\n";
    }
    if (!out) throw ConfigError("write failed: " + path);
}

LabeledDataset read_dataset_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifactError("cannot open dataset: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty dataset file: " + path);

    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) header.push_back(field);
    }
    if (header.size() < 2 || header.back() != "label") {
        throw ConfigError("bad dataset header in " + path);
    }
    const std::size_t d = header.size() - 1;
    for (std::size_t k = 0; k < d; ++k) {
        if (header[k] != "f" + std::to_string(k)) {
            throw ConfigError("bad dataset header column '" + header[k] + "' in " + path);
        }
    }

    std::vector<double> values;
    std::vector<int> labels;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::size_t col = 0;
        while (std::getline(ss, field, ',')) {
            try {
                if (col < d) {
                    values.push_back(std::stod(field));
                } else if (col == d) {
                    labels.push_back(std::stoi(field));
                } else {
                    throw ConfigError("");
                }
            } catch (const std::exception&) {
                throw ConfigError("unparsable dataset row in " + path + ": " + line);
            }
            ++col;
        }
        if (col != d + 1) {
            throw ConfigError("dataset row has " + std::to_string(col) + " fields, expected " +
                              std::to_string(d + 1) + " in " + path);
        }
        ++rows;
    }
    LabeledDataset out;
    out.name = path;
    out.features = RealMatrix(rows, d);
    out.features.data = std::move(values);
    out.labels = std::move(labels);
    out.validate();
    return out;
}

namespace {

LabeledDataset select_rows(const LabeledDataset& dataset, const std::vector<bool>& keep,
                           std::string name) {
    const std::size_t n =
        static_cast<std::size_t>(std::count(keep.begin(), keep.end(), true));
    LabeledDataset out;
    out.name = std::move(name);
    out.features = RealMatrix(n, dataset.dim());
    out.labels.reserve(n);
    std::size_t at = 0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (!keep[i]) continue;
        for (std::size_t k = 0; k < dataset.dim(); ++k) {
            out.features(at, k) = dataset.features(i, k);
        }
        out.labels.push_back(dataset.labels[i]);
        ++at;
    }
    return out;
}

}  // namespace

LabeledDataset select_id_rows(const LabeledDataset& dataset) {
    std::vector<bool> keep(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) keep[i] = dataset.labels[i] != kOodLabel;
    return select_rows(dataset, keep, dataset.name + "_id");
}

LabeledDataset select_class_rows(const LabeledDataset& dataset, int label) {
    std::vector<bool> keep(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) keep[i] = dataset.labels[i] == label;
    return select_rows(dataset, keep, dataset.name + "_class" + std::to_string(label));
}

}  // namespace oodkit
