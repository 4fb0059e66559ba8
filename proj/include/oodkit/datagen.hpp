#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "oodkit/matrix.hpp"
#include "oodkit/rng.hpp"

namespace oodkit {

// ID classes carry labels 0..C-1; OOD rows carry the sentinel -1.
constexpr int kOodLabel = -1;

struct LabeledDataset {
    RealMatrix features;
    std::vector<int> labels;
    std::string name;

    std::size_t size() const { return features.rows; }
    std::size_t dim() const { return features.cols; }
    std::size_t num_classes() const;  // max ID label + 1
    bool is_pure_id() const;          // no -1 rows
    bool is_pure_ood() const;         // only -1 rows
    void validate() const;
};

// C points evenly spaced on a circle of the given radius, embedded in the
// first two coordinates of a d-dimensional space.
RealMatrix circle_means(std::size_t num_classes, double radius, std::size_t dim);

// n_per_class draws from N(mean_c, sigma^2 I) per class, labels 0..C-1.
LabeledDataset gaussian_mixture_id(const RealMatrix& means, double sigma,
                                   std::size_t n_per_class, Rng& rng,
                                   std::string name = "id");

// Axis-aligned uniform box, all labels -1.
LabeledDataset uniform_noise_ood(const std::vector<std::pair<double, double>>& bounds,
                                 std::size_t n, Rng& rng,
                                 std::string name = "uniform_noise");

// Isotropic Gaussian noise around mu, all labels -1.
LabeledDataset gaussian_noise_ood(std::span<const double> mu, double sigma, std::size_t n,
                                  Rng& rng, std::string name = "gaussian_noise");

// Gaussian clusters at means the ID set never saw, all labels -1.
LabeledDataset held_out_cluster_ood(const RealMatrix& means_ood, double sigma,
                                    std::size_t n, Rng& rng,
                                    std::string name = "held_out");

// Stratified split; every row lands in exactly one side, per-class
// proportions preserved within one sample.
std::pair<LabeledDataset, LabeledDataset> train_val_split(const LabeledDataset& dataset,
                                                          double val_fraction, Rng& rng);

// Per-dimension (lo, hi) of the feature rows, side lengths inflated by the
// given factor about the box center.
std::vector<std::pair<double, double>> bounding_box(const RealMatrix& features,
                                                    double inflate = 1.0);

// CSV with header f0,...,f{d-1},label; label -1 marks OOD rows.
void write_dataset_csv(const LabeledDataset& dataset, const std::string& path);
LabeledDataset read_dataset_csv(const std::string& path);

// Row subsets by label, preserving order.
LabeledDataset select_id_rows(const LabeledDataset& dataset);
LabeledDataset select_class_rows(const LabeledDataset& dataset, int label);

}  // namespace oodkit
