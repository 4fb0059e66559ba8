#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "oodkit/losses.hpp"
#include "oodkit/matrix.hpp"
#include "oodkit/mlp.hpp"

namespace oodkit {

// Probability that a random ID score beats a random OOD score, ties worth
// half. Rank-based, O(n log n).
double auroc(std::span<const double> id_scores, std::span<const double> ood_scores);

// Literal O(n*m) pairwise mean; the oracle auroc must match to 1e-12.
double brute_force_auroc(std::span<const double> id_scores,
                         std::span<const double> ood_scores);

enum class PositiveClass { id, ood };

// Area under precision-recall via the step curve over grouped thresholds.
// positive = ood ranks on negated scores.
double aupr(std::span<const double> id_scores, std::span<const double> ood_scores,
            PositiveClass positive);

// Largest tau with fraction(scores >= tau) >= tpr: the ceil(tpr*n)-th largest
// validation score. Warns when n < 20.
double threshold_at_tpr(std::span<const double> val_id_scores, double tpr = 0.95);

enum class Detection { id, ood };

// OOD iff score < tau (score == tau stays ID).
Detection detect(double score, double tau);

// (fpr, tpr) points of the ROC step curve, from (0,0) to (1,1).
std::vector<std::pair<double, double>> roc_curve(std::span<const double> id_scores,
                                                 std::span<const double> ood_scores);

// Argmax class per feature row under the margin-free logits.
std::vector<int> predict_classes(const RealMatrix& z, const MetricHead& head);

double closed_set_accuracy(const MlpModel& model, const MetricHead& head,
                           const RealMatrix& inputs, const std::vector<int>& labels);

// One row per (OOD set, score kind) pairing.
struct EvalRow {
    std::string ood_set;
    std::string score_kind;
    double auroc = 0.0;
    double aupr_in = 0.0;
    double aupr_out = 0.0;
    double tau = 0.0;         // TPR-95 threshold for this score kind
    double tpr_at_tau = 0.0;  // achieved on the validation split
};

struct EvalReport {
    std::string loss_kind;
    std::uint64_t seed = 0;
    double closed_set_accuracy = 0.0;
    std::vector<EvalRow> rows;
};

// Fixed "%.12g" rendering shared by every CSV writer so that reruns are
// byte-identical.
std::string format_double(double v);

void write_eval_report_csv(const EvalReport& report, const std::string& path);
EvalReport read_eval_report_csv(const std::string& path);

void write_roc_csv(const std::vector<std::pair<double, double>>& curve,
                   const std::string& path);

}  // namespace oodkit
