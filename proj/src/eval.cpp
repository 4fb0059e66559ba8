#include "oodkit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "oodkit/errors.hpp"

namespace oodkit {

namespace {

void check_scores(std::span<const double> id_scores, std::span<const double> ood_scores,
                  const char* who) {
    if (id_scores.empty() || ood_scores.empty()) {
        throw ConfigError(std::string(who) + ": empty score vector");
    }
    for (double s : id_scores) {
        if (!std::isfinite(s)) throw NumericError(std::string(who) + ": non-finite ID score");
    }
    for (double s : ood_scores) {
        if (!std::isfinite(s)) throw NumericError(std::string(who) + ": non-finite OOD score");
    }
}

}  // namespace

double auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
    check_scores(id_scores, ood_scores, "auroc");
    const std::size_t ni = id_scores.size();
    const std::size_t no = ood_scores.size();
    struct Item {
        double s;
        bool is_id;
    };
    std::vector<Item> all;
    all.reserve(ni + no);
    for (double s : id_scores) all.push_back({s, true});
    for (double s : ood_scores) all.push_back({s, false});
    std::sort(all.begin(), all.end(), [](const Item& a, const Item& b) { return a.s < b.s; });

    // midrank sum of the ID scores; every term is an exact half-integer, so
    // the Mann-Whitney U below is bit-identical to the pairwise count
    double id_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        std::size_t ties_id = 0;
        while (j < all.size() && all[j].s == all[i].s) {
            if (all[j].is_id) ++ties_id;
            ++j;
        }
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);
        id_rank_sum += midrank * static_cast<double>(ties_id);
        i = j;
    }
    const double u = id_rank_sum -
                     0.5 * static_cast<double>(ni) * static_cast<double>(ni + 1);
    return u / (static_cast<double>(ni) * static_cast<double>(no));
}

double brute_force_auroc(std::span<const double> id_scores,
                         std::span<const double> ood_scores) {
    check_scores(id_scores, ood_scores, "brute_force_auroc");
    double wins = 0.0;
    for (double a : id_scores) {
        for (double b : ood_scores) {
            if (a > b) {
                wins += 1.0;
            } else if (a == b) {
                wins += 0.5;
            }
        }
    }
    return wins / (static_cast<double>(id_scores.size()) *
                   static_cast<double>(ood_scores.size()));
}

double aupr(std::span<const double> id_scores, std::span<const double> ood_scores,
            PositiveClass positive) {
    check_scores(id_scores, ood_scores, "aupr");
    struct Item {
        double s;
        bool pos;
    };
    std::vector<Item> all;
    all.reserve(id_scores.size() + ood_scores.size());
    const bool id_positive = positive == PositiveClass::id;
    for (double s : id_scores) all.push_back({id_positive ? s : -s, id_positive});
    for (double s : ood_scores) all.push_back({id_positive ? s : -s, !id_positive});
    std::sort(all.begin(), all.end(), [](const Item& a, const Item& b) { return a.s > b.s; });

    const double total_pos =
        static_cast<double>(id_positive ? id_scores.size() : ood_scores.size());
    double tp = 0.0, fp = 0.0, ap = 0.0, prev_recall = 0.0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j < all.size() && all[j].s == all[i].s) {
            if (all[j].pos) {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            ++j;
        }
        const double precision = tp / (tp + fp);
        const double recall = tp / total_pos;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    return ap;
}

double threshold_at_tpr(std::span<const double> val_id_scores, double tpr) {
    const std::size_t n = val_id_scores.size();
    if (n == 0) throw ConfigError("threshold_at_tpr: empty validation scores");
    if (!(tpr > 0.0 && tpr < 1.0)) throw ConfigError("threshold_at_tpr: tpr must be in (0,1)");
    if (n < 20) {
        warn("threshold_at_tpr: only " + std::to_string(n) +
             " validation scores; quantile is unstable");
    }
    std::vector<double> sorted(val_id_scores.begin(), val_id_scores.end());
    std::sort(sorted.begin(), sorted.end());
    // k scores must sit at or above tau; the -1e-9 absorbs cases where
    // tpr * n lands an ulp above an integer
    auto k = static_cast<std::size_t>(std::ceil(tpr * static_cast<double>(n) - 1e-9));
    k = std::clamp<std::size_t>(k, 1, n);
    return sorted[n - k];
}

Detection detect(double score, double tau) {
    return score < tau ? Detection::ood : Detection::id;
}

std::vector<std::pair<double, double>> roc_curve(std::span<const double> id_scores,
                                                 std::span<const double> ood_scores) {
    check_scores(id_scores, ood_scores, "roc_curve");
    struct Item {
        double s;
        bool is_id;
    };
    std::vector<Item> all;
    all.reserve(id_scores.size() + ood_scores.size());
    for (double s : id_scores) all.push_back({s, true});
    for (double s : ood_scores) all.push_back({s, false});
    std::sort(all.begin(), all.end(), [](const Item& a, const Item& b) { return a.s > b.s; });

    std::vector<std::pair<double, double>> curve;
    curve.emplace_back(0.0, 0.0);
    double tp = 0.0, fp = 0.0;
    const double ni = static_cast<double>(id_scores.size());
    const double no = static_cast<double>(ood_scores.size());
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j < all.size() && all[j].s == all[i].s) {
            if (all[j].is_id) {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            ++j;
        }
        curve.emplace_back(fp / no, tp / ni);
        i = j;
    }
    return curve;
}

std::vector<int> predict_classes(const RealMatrix& z, const MetricHead& head) {
    const RealMatrix logits = margin_free_logits(z, head);
    std::vector<int> preds(z.rows);
    for (std::size_t i = 0; i < z.rows; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < logits.cols; ++j) {
            if (logits(i, j) > logits(i, best)) best = j;
        }
        preds[i] = static_cast<int>(best);
    }
    return preds;
}

double closed_set_accuracy(const MlpModel& model, const MetricHead& head,
                           const RealMatrix& inputs, const std::vector<int>& labels) {
    if (inputs.rows == 0) throw ConfigError("closed_set_accuracy: empty test set");
    if (labels.size() != inputs.rows) {
        throw ConfigError("closed_set_accuracy: labels size != rows");
    }
    for (int y : labels) {
        if (y < 0) throw ConfigError("closed_set_accuracy: test set contains OOD labels");
    }
    const RealMatrix z = mlp_forward(model, inputs);
    const std::vector<int> preds = predict_classes(z, head);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (preds[i] == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

std::string format_double(double v) {
    if (v == 0.0) return "0";  // avoid the "-0" rendering
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

namespace {

void check_csv_field(const std::string& s) {
    if (s.find(',') != std::string::npos || s.find('\n') != std::string::npos) {
        throw ConfigError("CSV field contains a separator: " + s);
    }
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::stringstream ss(line);
    while (std::getline(ss, cur, ',')) out.push_back(cur);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

constexpr const char* kReportHeader =
    "ood_set,loss_kind,score_kind,auroc,aupr_in,aupr_out,tau,tpr_at_tau,"
    "closed_set_accuracy,seed";

}  // namespace

void write_eval_report_csv(const EvalReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open for write: " + path);
    out << kReportHeader << "\n";
    for (const EvalRow& row : report.rows) {
        check_csv_field(row.ood_set);
        check_csv_field(row.score_kind);
        check_csv_field(report.loss_kind);
        out << row.ood_set << ',' << report.loss_kind << ',' << row.score_kind << ','
            << format_double(row.auroc) << ',' << format_double(row.aupr_in) << ','
            << format_double(row.aupr_out) << ',' << format_double(row.tau) << ','
            << format_double(row.tpr_at_tau) << ','
            << format_double(report.closed_set_accuracy) << ',' << report.seed << "\n";
    }
    if (!out) throw ConfigError("write failed: " + path);
}

EvalReport read_eval_report_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifactError("cannot open eval report: " + path);
    std::string line;
    if (!std::getline(in, line) || line != kReportHeader) {
        throw ConfigError("bad eval report header in " + path);
    }
    EvalReport report;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 10) {
            throw ConfigError("bad eval report row in " + path + ": " + line);
        }
        EvalRow row;
        row.ood_set = fields[0];
        row.score_kind = fields[2];
        try {
            row.auroc = std::stod(fields[3]);
            row.aupr_in = std::stod(fields[4]);
            row.aupr_out = std::stod(fields[5]);
            row.tau = std::stod(fields[6]);
            row.tpr_at_tau = std::stod(fields[7]);
            if (first) {
                report.loss_kind = fields[1];
                report.closed_set_accuracy = std::stod(fields[8]);
                report.seed = std::stoull(fields[9]);
                first = false;
            }
        } catch (const std::exception&) {
            throw ConfigError("unparsable eval report row in " + path + ": " + line);
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

void write_roc_csv(const std::vector<std::pair<double, double>>& curve,
                   const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open for write: " + path);
    out << "fpr,tpr\n";
    for (const auto& [fpr, tpr] : curve) {
        out << format_double(fpr) << ',' << format_double(tpr) << "\n";
    }
    if (!out) throw ConfigError("write failed: " + path);
}

}  // namespace oodkit
