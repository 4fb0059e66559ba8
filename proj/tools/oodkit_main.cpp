#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "oodkit/checkpoint.hpp"
#include "oodkit/errors.hpp"
#include "oodkit/pipeline.hpp"

namespace {

using namespace oodkit;

constexpr const char* kIdTrainCsv = "id_train.csv";
constexpr const char* kIdValCsv = "id_val.csv";
constexpr const char* kIdTestCsv = "id_test.csv";

std::string join_path(const std::string& dir, const std::string& leaf) {
    return (std::filesystem::path(dir) / leaf).string();
}

std::string sibling(const std::string& path, const std::string& suffix) {
    std::filesystem::path p(path);
    return (p.parent_path() / (p.stem().string() + suffix)).string();
}

ExperimentConfig effective_config(const std::string& config_path,
                                  const std::vector<std::string>& overrides) {
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    apply_overrides(cfg, overrides);
    cfg.validate();
    return cfg;
}

std::size_t default_id_train_size(const ExperimentConfig& cfg) {
    const auto val_per_class = static_cast<std::size_t>(
        std::llround(cfg.data_val_fraction * static_cast<double>(cfg.data_n_per_class)));
    return cfg.data_classes * (cfg.data_n_per_class - val_per_class);
}

int cmd_make_data(const ExperimentConfig& cfg, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const BenchmarkData bench = make_benchmark(cfg);
    std::vector<std::string> written;
    const auto emit = [&](const LabeledDataset& set, const std::string& leaf) {
        const std::string path = join_path(out_dir, leaf);
        write_dataset_csv(set, path);
        written.push_back(path);
    };
    emit(bench.train, kIdTrainCsv);
    emit(bench.val, kIdValCsv);
    emit(bench.test, kIdTestCsv);
    emit(bench.ood_uniform, "uniform_noise.csv");
    emit(bench.ood_gaussian, "gaussian_noise.csv");
    emit(bench.ood_held_out, "held_out.csv");
    write_run_manifest(cfg, written, join_path(out_dir, "manifest.json"));
    std::cout << "wrote " << written.size() << " datasets to " << out_dir << "\n";
    return 0;
}

int cmd_train(const ExperimentConfig& cfg, const std::string& data_dir,
              const std::string& out_path) {
    const LabeledDataset train_id = read_dataset_csv(join_path(data_dir, kIdTrainCsv));
    LabeledDataset oe_set;
    const LabeledDataset* oe_ptr = nullptr;
    if (cfg.oe_enabled) {
        if (cfg.oe_source.empty()) {
            throw ConfigError("oe.enabled requires oe.source to point at an outlier CSV");
        }
        oe_set = read_dataset_csv(cfg.oe_source);
        oe_ptr = &oe_set;
    }

    Rng init_rng = stream_rng(cfg, RngStream::model_init);
    Rng train_rng = stream_rng(cfg, RngStream::train);
    const TrainedClassifier fit = train_classifier(cfg, train_id, oe_ptr, init_rng, train_rng);
    save_classifier(fit.model, fit.head, out_path);

    const std::string curve_path = sibling(out_path, "_curve.csv");
    {
        std::ofstream curve(curve_path, std::ios::binary);
        if (!curve) throw ConfigError("cannot open for write: " + curve_path);
        curve << "epoch,loss\n";
        for (std::size_t e = 0; e < fit.epoch_losses.size(); ++e) {
            curve << (e + 1) << "," << format_double(fit.epoch_losses[e]) << "\n";
        }
    }
    write_run_manifest(cfg, {out_path, curve_path}, sibling(out_path, "_manifest.json"));
    std::cout << "trained " << loss_kind_name(fit.head.kind) << " head"
              << (oe_ptr ? " with outlier exposure" : "") << ", final loss "
              << (fit.epoch_losses.empty() ? std::string("n/a (aborted)")
                                           : format_double(fit.epoch_losses.back()))
              << "\n";
    return 0;
}

int cmd_train_ddpm(const ExperimentConfig& cfg, const std::string& data_dir,
                   const std::string& out_path) {
    const LabeledDataset train_id = read_dataset_csv(join_path(data_dir, kIdTrainCsv));
    Rng rng = stream_rng(cfg, RngStream::ddpm);
    const DenoiserModel denoiser = train_ddpm(cfg, train_id, rng);
    save_denoiser(denoiser, out_path);
    write_run_manifest(cfg, {out_path}, sibling(out_path, "_manifest.json"));
    std::cout << "trained denoiser (" << denoiser.schedule.steps << " steps) to " << out_path
              << "\n";
    return 0;
}

int cmd_gen_ood(ExperimentConfig cfg, const std::string& ddpm_path,
                const std::string& out_path, const std::string& classes,
                std::size_t n_override) {
    const DenoiserModel denoiser = load_denoiser(ddpm_path);
    if (!classes.empty()) {
        const std::size_t comma = classes.find(',');
        if (comma == std::string::npos) {
            throw ConfigError("--classes expects two comma-separated class ids");
        }
        cfg.gen_pairs = classes.substr(0, comma) + "-" + classes.substr(comma + 1);
    }
    std::size_t budget = default_id_train_size(cfg);
    if (n_override > 0) {
        cfg.gen_fraction = 1.0;
        budget = n_override;
    }
    Rng rng = stream_rng(cfg, RngStream::gen);
    const LabeledDataset mixup = generate_mixup_set(cfg, denoiser, budget, rng);
    write_dataset_csv(mixup, out_path);
    write_run_manifest(cfg, {out_path}, sibling(out_path, "_manifest.json"));
    std::cout << "generated " << mixup.size() << " outliers over pairs " << cfg.gen_pairs
              << "\n";
    return 0;
}

int cmd_eval(const ExperimentConfig& cfg, const std::string& model_path,
             const std::string& data_dir, const std::vector<std::string>& ood_paths,
             const std::string& out_path, const std::string& roc_dir) {
    const ClassifierCheckpoint ck = load_classifier(model_path);
    const LabeledDataset train_id = read_dataset_csv(join_path(data_dir, kIdTrainCsv));
    const LabeledDataset val_id = read_dataset_csv(join_path(data_dir, kIdValCsv));
    const LabeledDataset test_id = read_dataset_csv(join_path(data_dir, kIdTestCsv));

    std::vector<LabeledDataset> ood_sets;
    ood_sets.reserve(ood_paths.size());
    for (const std::string& path : ood_paths) {
        LabeledDataset set = read_dataset_csv(path);
        set.name = std::filesystem::path(path).stem().string();
        ood_sets.push_back(std::move(set));
    }
    std::vector<const LabeledDataset*> ood_ptrs;
    for (const LabeledDataset& set : ood_sets) ood_ptrs.push_back(&set);

    const EvalArtifacts artifacts =
        evaluate(cfg, ck.model, ck.head, train_id, val_id, test_id, ood_ptrs);
    write_eval_report_csv(artifacts.report, out_path);

    std::vector<std::string> written = {out_path};
    if (!roc_dir.empty()) {
        std::filesystem::create_directories(roc_dir);
        for (std::size_t i = 0; i < artifacts.report.rows.size(); ++i) {
            const EvalRow& row = artifacts.report.rows[i];
            const std::string path =
                join_path(roc_dir, "roc_" + row.ood_set + "_" + row.score_kind + ".csv");
            write_roc_csv(artifacts.roc_curves[i], path);
            written.push_back(path);
        }
    }
    write_run_manifest(cfg, written, sibling(out_path, "_manifest.json"));
    std::cout << "evaluated " << artifacts.report.rows.size() << " (ood_set, score) pairings, "
              << "closed-set accuracy "
              << format_double(artifacts.report.closed_set_accuracy) << "\n";
    return 0;
}

struct ReportKey {
    std::string loss_kind;
    std::string ood_set;
    std::string score_kind;
    bool operator<(const ReportKey& other) const {
        if (loss_kind != other.loss_kind) return loss_kind < other.loss_kind;
        if (ood_set != other.ood_set) return ood_set < other.ood_set;
        return score_kind < other.score_kind;
    }
};

struct ReportCell {
    EvalRow row;
    double accuracy = 0.0;
};

// canonical column order for the by-loss table
const std::vector<std::string> kLossOrder = {"softmax", "scaled_cosine", "sphereface",
                                             "cosface",  "arcface",      "adacos"};

std::string triple(const EvalRow& row) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f/%.3f/%.3f", row.auroc, row.aupr_in, row.aupr_out);
    return buf;
}

int cmd_report(const std::string& dir, const std::string& out_path,
               std::string table_path) {
    std::map<ReportKey, ReportCell> baseline;
    std::map<ReportKey, ReportCell> exposed;
    std::vector<std::string> report_files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const std::string leaf = entry.path().filename().string();
        if (leaf.rfind("eval_", 0) == 0 && entry.path().extension() == ".csv") {
            report_files.push_back(entry.path().string());
        }
    }
    std::sort(report_files.begin(), report_files.end());
    if (report_files.empty()) {
        throw MissingArtifactError("no eval_*.csv reports under " + dir);
    }

    for (const std::string& path : report_files) {
        const std::string stem = std::filesystem::path(path).stem().string();
        std::map<ReportKey, ReportCell>* side = nullptr;
        if (stem.size() >= 3 && stem.compare(stem.size() - 3, 3, "_oe") == 0) {
            side = &exposed;
        } else if (stem.size() >= 9 &&
                   stem.compare(stem.size() - 9, 9, "_baseline") == 0) {
            side = &baseline;
        } else {
            warn("report: skipping " + path + " (expects *_baseline.csv or *_oe.csv)");
            continue;
        }
        const EvalReport report = read_eval_report_csv(path);
        for (const EvalRow& row : report.rows) {
            (*side)[{report.loss_kind, row.ood_set, row.score_kind}] = {
                row, report.closed_set_accuracy};
        }
    }

    std::set<ReportKey> keys;
    for (const auto& [key, cell] : baseline) keys.insert(key);
    for (const auto& [key, cell] : exposed) keys.insert(key);
    if (keys.empty()) throw MissingArtifactError("no joinable eval rows under " + dir);

    bool incomplete = false;
    {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) throw ConfigError("cannot open for write: " + out_path);
        out << "loss_kind,ood_set,score_kind,auroc_base,auroc_oe,auroc_delta,"
               "aupr_in_base,aupr_in_oe,aupr_in_delta,"
               "aupr_out_base,aupr_out_oe,aupr_out_delta,"
               "accuracy_base,accuracy_oe,accuracy_delta,status\n";
        for (const ReportKey& key : keys) {
            const auto b = baseline.find(key);
            const auto e = exposed.find(key);
            out << key.loss_kind << "," << key.ood_set << "," << key.score_kind << ",";
            if (b != baseline.end() && e != exposed.end()) {
                const EvalRow& rb = b->second.row;
                const EvalRow& re = e->second.row;
                out << format_double(rb.auroc) << "," << format_double(re.auroc) << ","
                    << format_double(re.auroc - rb.auroc) << ","
                    << format_double(rb.aupr_in) << "," << format_double(re.aupr_in) << ","
                    << format_double(re.aupr_in - rb.aupr_in) << ","
                    << format_double(rb.aupr_out) << "," << format_double(re.aupr_out) << ","
                    << format_double(re.aupr_out - rb.aupr_out) << ","
                    << format_double(b->second.accuracy) << ","
                    << format_double(e->second.accuracy) << ","
                    << format_double(e->second.accuracy - b->second.accuracy) << ",ok\n";
            } else {
                // one side missing: emit what exists, blank the rest
                incomplete = true;
                const bool has_b = b != baseline.end();
                const EvalRow& row = has_b ? b->second.row : e->second.row;
                const double acc = has_b ? b->second.accuracy : e->second.accuracy;
                const auto pair_cells = [&](double v) {
                    return has_b ? format_double(v) + "," : "," + format_double(v);
                };
                out << pair_cells(row.auroc) << ",," << pair_cells(row.aupr_in) << ",,"
                    << pair_cells(row.aupr_out) << ",," << pair_cells(acc)
                    << ",,incomplete\n";
            }
        }
    }

    // grid view: per variant and score kind, OOD sets down the rows, loss
    // kinds across the columns, auroc/aupr_in/aupr_out in each cell
    if (table_path.empty()) table_path = sibling(out_path, "_by_loss.csv");
    {
        std::set<std::string> ood_names, score_names, loss_names;
        for (const ReportKey& key : keys) {
            ood_names.insert(key.ood_set);
            score_names.insert(key.score_kind);
            loss_names.insert(key.loss_kind);
        }
        std::vector<std::string> losses;
        for (const std::string& name : kLossOrder) {
            if (loss_names.count(name)) losses.push_back(name);
        }
        for (const std::string& name : loss_names) {
            if (std::find(losses.begin(), losses.end(), name) == losses.end()) {
                losses.push_back(name);
            }
        }

        std::ofstream out(table_path, std::ios::binary);
        if (!out) throw ConfigError("cannot open for write: " + table_path);
        const std::pair<const char*, std::map<ReportKey, ReportCell>*> variants[] = {
            {"baseline", &baseline}, {"with_oe", &exposed}};
        for (const auto& [label, side] : variants) {
            for (const std::string& score : score_names) {
                out << "variant=" << label << ",score=" << score << "\n";
                out << "ood_set";
                for (const std::string& loss : losses) out << "," << loss;
                out << "\n";
                for (const std::string& ood : ood_names) {
                    out << ood;
                    for (const std::string& loss : losses) {
                        const auto it = side->find({loss, ood, score});
                        out << "," << (it == side->end() ? std::string() : triple(it->second.row));
                    }
                    out << "\n";
                }
                out << "\n";
            }
        }
    }

    std::cout << "joined " << keys.size() << " rows into " << out_path
              << (incomplete ? " (incomplete: missing counterpart runs)" : "") << "\n";
    return incomplete ? 4 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"oodkit: metric-loss classifiers, diffusion outliers, OOD evaluation"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "experiment config file (section.key = value)");
    app.add_option("--set", overrides, "override a config key, e.g. --set train.epochs=5");

    auto* make_data = app.add_subcommand("make-data", "generate the benchmark datasets");
    std::string md_out;
    make_data->add_option("--out", md_out, "output directory")->required();

    auto* train = app.add_subcommand("train", "train a classifier (with OE when enabled)");
    std::string tr_data, tr_out;
    train->add_option("--data", tr_data, "directory from make-data")->required();
    train->add_option("--out", tr_out, "checkpoint path")->required();

    auto* train_ddpm_cmd = app.add_subcommand("train-ddpm", "train the conditional denoiser");
    std::string dd_data, dd_out;
    train_ddpm_cmd->add_option("--data", dd_data, "directory from make-data")->required();
    train_ddpm_cmd->add_option("--out", dd_out, "checkpoint path")->required();

    auto* gen_ood = app.add_subcommand("gen-ood", "sample label-mixup outliers from a denoiser");
    std::string go_ddpm, go_out, go_classes;
    std::size_t go_n = 0;
    gen_ood->add_option("--ddpm", go_ddpm, "denoiser checkpoint")->required();
    gen_ood->add_option("--out", go_out, "output CSV")->required();
    gen_ood->add_option("--classes", go_classes, "single pair a,b (default: gen.pairs)");
    gen_ood->add_option("--n", go_n, "total sample budget (default: gen.fraction of train)");

    auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint against OOD suites");
    std::string ev_model, ev_data, ev_out, ev_roc;
    std::vector<std::string> ev_ood;
    eval_cmd->add_option("--model", ev_model, "classifier checkpoint")->required();
    eval_cmd->add_option("--data", ev_data, "directory from make-data")->required();
    eval_cmd->add_option("--ood", ev_ood, "OOD CSV (repeatable)")->required();
    eval_cmd->add_option("--out", ev_out, "report CSV path")->required();
    eval_cmd->add_option("--roc-dir", ev_roc, "also write per-row ROC curves here");

    auto* report = app.add_subcommand("report", "join eval_*_{baseline,oe}.csv into one table");
    std::string rp_dir, rp_out, rp_table;
    report->add_option("--dir", rp_dir, "directory holding eval_*.csv reports")->required();
    report->add_option("--out", rp_out, "joined CSV path")->required();
    report->add_option("--table", rp_table, "by-loss table path (default: <out>_by_loss.csv)");

    try {
        app.parse(argc, argv);
        if (report->parsed()) return cmd_report(rp_dir, rp_out, rp_table);

        const ExperimentConfig cfg = effective_config(config_path, overrides);
        if (make_data->parsed()) return cmd_make_data(cfg, md_out);
        if (train->parsed()) return cmd_train(cfg, tr_data, tr_out);
        if (train_ddpm_cmd->parsed()) return cmd_train_ddpm(cfg, dd_data, dd_out);
        if (gen_ood->parsed()) return cmd_gen_ood(cfg, go_ddpm, go_out, go_classes, go_n);
        if (eval_cmd->parsed()) return cmd_eval(cfg, ev_model, ev_data, ev_ood, ev_out, ev_roc);
        return 2;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const oodkit::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const oodkit::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const oodkit::MissingArtifactError& e) {
        std::cerr << "missing artifact: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
