#include "oodkit/config.hpp"

#include <fstream>
#include <sstream>

#include "oodkit/errors.hpp"
#include "oodkit/eval.hpp"
#include "oodkit/losses.hpp"

namespace oodkit {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const std::uint64_t out = std::stoull(v, &used);
        if (used != v.size()) throw ConfigError("");
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected unsigned integer, got '" + v + "'");
    }
}

std::size_t parse_count(const std::string& key, const std::string& v) {
    return static_cast<std::size_t>(parse_u64(key, v));
}

double parse_real(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double out = std::stod(v, &used);
        if (used != v.size()) throw ConfigError("");
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected number, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

std::vector<std::size_t> parse_count_list(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    std::stringstream ss(v);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(parse_count(key, trim(field)));
    if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
    return out;
}

std::string join_counts(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

}  // namespace

void ExperimentConfig::apply(const std::string& key, const std::string& value) {
    if (key == "seed") {
        seed = parse_u64(key, value);
    } else if (key == "data.classes") {
        data_classes = parse_count(key, value);
    } else if (key == "data.dim") {
        data_dim = parse_count(key, value);
    } else if (key == "data.radius") {
        data_radius = parse_real(key, value);
    } else if (key == "data.sigma") {
        data_sigma = parse_real(key, value);
    } else if (key == "data.n_per_class") {
        data_n_per_class = parse_count(key, value);
    } else if (key == "data.n_test_per_class") {
        data_n_test_per_class = parse_count(key, value);
    } else if (key == "data.val_fraction") {
        data_val_fraction = parse_real(key, value);
    } else if (key == "data.noise_box_inflate") {
        data_noise_box_inflate = parse_real(key, value);
    } else if (key == "data.noise_sigma") {
        data_noise_sigma = parse_real(key, value);
    } else if (key == "data.held_out_radius") {
        data_held_out_radius = parse_real(key, value);
    } else if (key == "data.n_ood") {
        data_n_ood = parse_count(key, value);
    } else if (key == "model.hidden") {
        model_hidden = parse_count_list(key, value);
    } else if (key == "model.feature_dim") {
        model_feature_dim = parse_count(key, value);
    } else if (key == "loss.kind") {
        loss_kind = value;
    } else if (key == "loss.margin") {
        loss_margin = parse_real(key, value);
    } else if (key == "loss.scale") {
        loss_scale = parse_real(key, value);
    } else if (key == "loss.scale_learnable") {
        if (value != "auto" && value != "true" && value != "false") {
            throw ConfigError("config key 'loss.scale_learnable': expected auto/true/false");
        }
        loss_scale_learnable = value;
    } else if (key == "oe.enabled") {
        oe_enabled = parse_bool(key, value);
    } else if (key == "oe.lambda") {
        oe_lambda = parse_real(key, value);
    } else if (key == "oe.source") {
        oe_source = value;
    } else if (key == "train.epochs") {
        train_epochs = parse_count(key, value);
    } else if (key == "train.lr") {
        train_lr = parse_real(key, value);
    } else if (key == "train.momentum") {
        train_momentum = parse_real(key, value);
    } else if (key == "train.batch") {
        train_batch = parse_count(key, value);
    } else if (key == "ddpm.steps") {
        ddpm_steps = parse_count(key, value);
    } else if (key == "ddpm.beta_start") {
        ddpm_beta_start = parse_real(key, value);
    } else if (key == "ddpm.beta_end") {
        ddpm_beta_end = parse_real(key, value);
    } else if (key == "ddpm.epochs") {
        ddpm_epochs = parse_count(key, value);
    } else if (key == "ddpm.lr") {
        ddpm_lr = parse_real(key, value);
    } else if (key == "ddpm.momentum") {
        ddpm_momentum = parse_real(key, value);
    } else if (key == "ddpm.batch") {
        ddpm_batch = parse_count(key, value);
    } else if (key == "ddpm.hidden") {
        ddpm_hidden = parse_count_list(key, value);
    } else if (key == "gen.pairs") {
        gen_pairs = value;
    } else if (key == "gen.fraction") {
        gen_fraction = parse_real(key, value);
    } else if (key == "gen.interpolation") {
        gen_interpolation = parse_real(key, value);
    } else if (key == "eval.tpr") {
        eval_tpr = parse_real(key, value);
    } else if (key == "eval.scores") {
        eval_scores = value;
    } else if (key == "eval.temperature") {
        eval_temperature = parse_real(key, value);
    } else {
        throw ConfigError("unknown config key: " + key);
    }
}

std::string ExperimentConfig::serialize() const {
    std::ostringstream out;
    out << "seed = " << seed << "\n";
    out << "data.classes = " << data_classes << "\n";
    out << "data.dim = " << data_dim << "\n";
    out << "data.radius = " << format_double(data_radius) << "\n";
    out << "data.sigma = " << format_double(data_sigma) << "\n";
    out << "data.n_per_class = " << data_n_per_class << "\n";
    out << "data.n_test_per_class = " << data_n_test_per_class << "\n";
    out << "data.val_fraction = " << format_double(data_val_fraction) << "\n";
    out << "data.noise_box_inflate = " << format_double(data_noise_box_inflate) << "\n";
    out << "data.noise_sigma = " << format_double(data_noise_sigma) << "\n";
    out << "data.held_out_radius = " << format_double(data_held_out_radius) << "\n";
    out << "data.n_ood = " << data_n_ood << "\n";
    out << "model.hidden = " << join_counts(model_hidden) << "\n";
    out << "model.feature_dim = " << model_feature_dim << "\n";
    out << "loss.kind = " << loss_kind << "\n";
    out << "loss.margin = " << format_double(loss_margin) << "\n";
    out << "loss.scale = " << format_double(loss_scale) << "\n";
    out << "loss.scale_learnable = " << loss_scale_learnable << "\n";
    out << "oe.enabled = " << (oe_enabled ? "true" : "false") << "\n";
    out << "oe.lambda = " << format_double(oe_lambda) << "\n";
    out << "oe.source = " << oe_source << "\n";
    out << "train.epochs = " << train_epochs << "\n";
    out << "train.lr = " << format_double(train_lr) << "\n";
    out << "train.momentum = " << format_double(train_momentum) << "\n";
    out << "train.batch = " << train_batch << "\n";
    out << "ddpm.steps = " << ddpm_steps << "\n";
    out << "ddpm.beta_start = " << format_double(ddpm_beta_start) << "\n";
    out << "ddpm.beta_end = " << format_double(ddpm_beta_end) << "\n";
    out << "ddpm.epochs = " << ddpm_epochs << "\n";
    out << "ddpm.lr = " << format_double(ddpm_lr) << "\n";
    out << "ddpm.momentum = " << format_double(ddpm_momentum) << "\n";
    out << "ddpm.batch = " << ddpm_batch << "\n";
    out << "ddpm.hidden = " << join_counts(ddpm_hidden) << "\n";
    out << "gen.pairs = " << gen_pairs << "\n";
    out << "gen.fraction = " << format_double(gen_fraction) << "\n";
    out << "gen.interpolation = " << format_double(gen_interpolation) << "\n";
    out << "eval.tpr = " << format_double(eval_tpr) << "\n";
    out << "eval.scores = " << eval_scores << "\n";
    out << "eval.temperature = " << format_double(eval_temperature) << "\n";
    return out.str();
}

void ExperimentConfig::validate() const {
    if (data_classes < 2) throw ConfigError("data.classes must be >= 2");
    if (data_dim < 2) throw ConfigError("data.dim must be >= 2");
    if (!(data_sigma > 0.0)) throw ConfigError("data.sigma must be > 0");
    if (data_n_per_class == 0 || data_n_test_per_class == 0 || data_n_ood == 0) {
        throw ConfigError("data sample counts must be > 0");
    }
    if (!(data_val_fraction > 0.0 && data_val_fraction < 1.0)) {
        throw ConfigError("data.val_fraction must be in (0,1)");
    }
    if (model_feature_dim == 0) throw ConfigError("model.feature_dim must be > 0");
    loss_kind_from_name(loss_kind);  // rejects unknown names
    if (!(oe_lambda >= 0.0)) throw ConfigError("oe.lambda must be >= 0");
    if (train_epochs == 0 || train_batch == 0) {
        throw ConfigError("train.epochs and train.batch must be > 0");
    }
    if (!(train_lr > 0.0)) throw ConfigError("train.lr must be > 0");
    if (!(train_momentum >= 0.0 && train_momentum < 1.0)) {
        throw ConfigError("train.momentum must be in [0,1)");
    }
    if (!(eval_tpr > 0.0 && eval_tpr < 1.0)) throw ConfigError("eval.tpr must be in (0,1)");
    if (!(eval_temperature > 0.0)) throw ConfigError("eval.temperature must be > 0");
    if (!(gen_fraction > 0.0)) throw ConfigError("gen.fraction must be > 0");
}

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig config;
    std::stringstream ss(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + " has no '=': " + line);
        }
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("config line " + std::to_string(lineno) + " has empty key");
        }
        config.apply(key, value);
    }
    return config;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifactError("cannot open config: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

void apply_overrides(ExperimentConfig& config, const std::vector<std::string>& overrides) {
    for (const std::string& item : overrides) {
        const std::size_t eq = item.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("override '" + item + "' is not key=value");
        }
        std::string key = item.substr(0, eq);
        std::string value = item.substr(eq + 1);
        config.apply(trim(key), trim(value));
    }
}

}  // namespace oodkit
