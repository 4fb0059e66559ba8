#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "oodkit/config.hpp"
#include "oodkit/diffusion.hpp"
#include "oodkit/errors.hpp"
#include "oodkit/eval.hpp"
#include "oodkit/losses.hpp"
#include "oodkit/pipeline.hpp"
#include "oodkit/scores.hpp"

namespace py = pybind11;
using namespace oodkit;

namespace {

RealMatrix to_matrix(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw ConfigError("expected a non-empty list of rows");
    RealMatrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != m.cols) throw ConfigError("ragged rows");
        for (std::size_t j = 0; j < m.cols; ++j) m(i, j) = rows[i][j];
    }
    return m;
}

PositiveClass positive_from_name(const std::string& name) {
    if (name == "id") return PositiveClass::id;
    if (name == "ood") return PositiveClass::ood;
    throw ConfigError("positive must be 'id' or 'ood', got '" + name + "'");
}

}  // namespace

PYBIND11_MODULE(oodkit, m) {
    m.doc() = "OOD-detection toolkit: rank metrics, detection scores, diffusion schedules";
    m.attr("__version__") = kToolkitVersion;

    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ConfigError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const MissingArtifactError& e) {
            PyErr_SetString(PyExc_FileNotFoundError, e.what());
        } catch (const NumericError& e) {
            PyErr_SetString(PyExc_ArithmeticError, e.what());
        }
    });

    m.def(
        "auroc",
        [](const std::vector<double>& id_scores, const std::vector<double>& ood_scores) {
            return auroc(id_scores, ood_scores);
        },
        py::arg("id_scores"), py::arg("ood_scores"),
        "rank-based AUROC; ties earn half credit");
    m.def(
        "brute_force_auroc",
        [](const std::vector<double>& id_scores, const std::vector<double>& ood_scores) {
            return brute_force_auroc(id_scores, ood_scores);
        },
        py::arg("id_scores"), py::arg("ood_scores"), "O(n*m) pairwise oracle for auroc");
    m.def(
        "aupr",
        [](const std::vector<double>& id_scores, const std::vector<double>& ood_scores,
           const std::string& positive) {
            return aupr(id_scores, ood_scores, positive_from_name(positive));
        },
        py::arg("id_scores"), py::arg("ood_scores"), py::arg("positive") = "id",
        "area under precision-recall; positive is 'id' or 'ood'");
    m.def(
        "threshold_at_tpr",
        [](const std::vector<double>& val_id_scores, double tpr) {
            return threshold_at_tpr(val_id_scores, tpr);
        },
        py::arg("val_id_scores"), py::arg("tpr") = 0.95,
        "largest tau keeping the requested TPR on ID scores");
    m.def(
        "is_ood", [](double score, double tau) { return detect(score, tau) == Detection::ood; },
        py::arg("score"), py::arg("tau"), "True when the score falls below tau");

    m.def(
        "msp_score",
        [](const std::vector<double>& probabilities) { return msp_score(probabilities); },
        py::arg("probabilities"), "maximum softmax probability of one row");
    m.def(
        "energy_score",
        [](const std::vector<double>& logits, double temperature) {
            return energy_score(logits, temperature);
        },
        py::arg("logits"), py::arg("temperature") = 1.0,
        "temperature-scaled log-sum-exp of one logit row");
    m.def(
        "mahalanobis_scores",
        [](const std::vector<std::vector<double>>& train_features,
           const std::vector<int>& train_labels,
           const std::vector<std::vector<double>>& query_features) {
            const GaussianStats stats =
                fit_gaussian_stats(to_matrix(train_features), train_labels);
            const RealMatrix queries = to_matrix(query_features);
            std::vector<double> scores(queries.rows);
            for (std::size_t i = 0; i < queries.rows; ++i) {
                scores[i] = mahalanobis_score(queries.row(i), stats);
            }
            return scores;
        },
        py::arg("train_features"), py::arg("train_labels"), py::arg("query_features"),
        "fit class-conditional Gaussians, score queries by negated distance");

    m.def("adacos_scale", &adacos_scale, py::arg("num_classes"),
          "fixed AdaCos scale sqrt(2)*ln(C-1), clamped at 1 for C=2");

    m.def(
        "ddpm_schedule",
        [](std::size_t steps, double beta_start, double beta_end) {
            const DiffusionSchedule s = make_schedule(steps, beta_start, beta_end);
            py::dict out;
            out["beta"] = s.beta;
            out["alpha"] = s.alpha;
            out["alpha_bar"] = s.alpha_bar;
            return out;
        },
        py::arg("steps") = 200, py::arg("beta_start") = 1e-4, py::arg("beta_end") = 0.05,
        "linear beta schedule with cumulative alpha products");

    m.def(
        "canonical_config",
        [](const std::string& text) {
            const ExperimentConfig cfg = parse_config(text);
            cfg.validate();
            return cfg.serialize();
        },
        py::arg("text"), "parse config text and re-emit it in canonical key order");
    m.def(
        "default_config", [] { return ExperimentConfig{}.serialize(); },
        "canonical serialization of the built-in defaults");
}
