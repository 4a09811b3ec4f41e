#include "rcdt/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "rcdt/errors.hpp"

namespace rcdt {

namespace {

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
    }
}

long long parse_int(const std::string& key, const std::string& v) {
    long long out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw ConfigError("config key '" + key + "': '" + v + "' is not an integer");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "off" || v == "0" || v == "no") return false;
    throw ConfigError("config key '" + key + "': '" + v + "' is not a boolean");
}

std::string fmt_scales(const std::array<bool, 3>& s) {
    return std::string(s[0] ? "1" : "0") + "," + (s[1] ? "1" : "0") + "," + (s[2] ? "1" : "0");
}

// Accepts "1,0,1" per-scale flags or a single boolean applied to all scales.
std::array<bool, 3> parse_scales(const std::string& key, const std::string& v) {
    if (v.find(',') == std::string::npos) {
        const bool all = parse_bool(key, v);
        return {all, all, all};
    }
    std::array<bool, 3> out{};
    std::stringstream ss(v);
    std::string item;
    int i = 0;
    while (std::getline(ss, item, ',')) {
        if (i >= 3) throw ConfigError("config key '" + key + "': expected 3 per-scale flags");
        out[i++] = parse_bool(key, trim(item));
    }
    if (i != 3) throw ConfigError("config key '" + key + "': expected 3 per-scale flags");
    return out;
}

struct Field {
    const char* key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

template <typename T>
Field int_field(const char* key, T RunConfig::*member) {
    return {key, [member](const RunConfig& c) { return std::to_string(c.*member); },
            [key, member](RunConfig& c, const std::string& v) { c.*member = static_cast<T>(parse_int(key, v)); }};
}

Field double_field(const char* key, double RunConfig::*member) {
    return {key, [member](const RunConfig& c) { return fmt_double(c.*member); },
            [key, member](RunConfig& c, const std::string& v) { c.*member = parse_double(key, v); }};
}

template <typename T>
Field model_int(const char* key, T ModelConfig::*member) {
    return {key, [member](const RunConfig& c) { return std::to_string(c.model.*member); },
            [key, member](RunConfig& c, const std::string& v) { c.model.*member = static_cast<T>(parse_int(key, v)); }};
}

Field model_bool(const char* key, bool ModelConfig::*member) {
    return {key, [member](const RunConfig& c) { return std::string(c.model.*member ? "true" : "false"); },
            [key, member](RunConfig& c, const std::string& v) { c.model.*member = parse_bool(key, v); }};
}

Field aug_double(const char* key, double AugmentConfig::*member) {
    return {key, [member](const RunConfig& c) { return fmt_double(c.augment.*member); },
            [key, member](RunConfig& c, const std::string& v) { c.augment.*member = parse_double(key, v); }};
}

Field aug_bool(const char* key, bool AugmentConfig::*member) {
    return {key, [member](const RunConfig& c) { return std::string(c.augment.*member ? "true" : "false"); },
            [key, member](RunConfig& c, const std::string& v) { c.augment.*member = parse_bool(key, v); }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        int_field("seed", &RunConfig::seed),
        int_field("epochs", &RunConfig::epochs),
        int_field("batch_size", &RunConfig::batch_size),
        int_field("crop_size", &RunConfig::crop_size),
        double_field("lr", &RunConfig::lr),
        double_field("weight_decay", &RunConfig::weight_decay),
        double_field("beta1", &RunConfig::beta1),
        double_field("beta2", &RunConfig::beta2),
        double_field("adam_eps", &RunConfig::adam_eps),
        double_field("backbone_lr_multiplier", &RunConfig::backbone_lr_multiplier),
        double_field("poly_power", &RunConfig::poly_power),
        double_field("alpha", &RunConfig::alpha),
        double_field("dice_eps", &RunConfig::dice_eps),
        {"profile", [](const RunConfig& c) { return c.profile; },
         [](RunConfig& c, const std::string& v) { c.profile = v; }},
        {"ds_ce", [](const RunConfig& c) { return fmt_scales(c.supervision.ce); },
         [](RunConfig& c, const std::string& v) { c.supervision.ce = parse_scales("ds_ce", v); }},
        {"ds_dice", [](const RunConfig& c) { return fmt_scales(c.supervision.dice); },
         [](RunConfig& c, const std::string& v) { c.supervision.dice = parse_scales("ds_dice", v); }},
        {"final_output_loss", [](const RunConfig& c) { return std::string(c.supervision.final_output ? "true" : "false"); },
         [](RunConfig& c, const std::string& v) { c.supervision.final_output = parse_bool("final_output_loss", v); }},
        model_int("base_channels", &ModelConfig::base_channels),
        model_int("channels", &ModelConfig::channels),
        model_int("groups", &ModelConfig::groups),
        model_int("categories", &ModelConfig::categories),
        model_int("decoder_layers", &ModelConfig::decoder_layers),
        model_int("ffn_multiplier", &ModelConfig::ffn_multiplier),
        {"dropout", [](const RunConfig& c) { return fmt_double(c.model.dropout); },
         [](RunConfig& c, const std::string& v) { c.model.dropout = parse_double("dropout", v); }},
        model_bool("cosine", &ModelConfig::cosine),
        model_bool("subtraction", &ModelConfig::subtraction),
        model_bool("ffn", &ModelConfig::ffn),
        model_bool("self_attention", &ModelConfig::self_attention),
        model_bool("fcm", &ModelConfig::fcm),
        model_bool("constrain_relu", &ModelConfig::constrain_relu),
        aug_bool("augment", &AugmentConfig::enabled),
        aug_double("scale_min", &AugmentConfig::scale_min),
        aug_double("scale_max", &AugmentConfig::scale_max),
        aug_double("p_scale", &AugmentConfig::p_scale),
        aug_double("p_flip", &AugmentConfig::p_flip),
        aug_double("p_color", &AugmentConfig::p_color),
        aug_double("p_noise", &AugmentConfig::p_noise),
        aug_double("p_blur", &AugmentConfig::p_blur),
        aug_bool("shared_photometric", &AugmentConfig::shared_photometric),
    };
    return table;
}

}  // namespace

void ModelConfig::validate() const {
    if (base_channels <= 0 || base_channels % groups != 0)
        throw ConfigError("base_channels must be a positive multiple of groups");
    if (channels <= 0 || channels % groups != 0) throw ConfigError("channels must be a positive multiple of groups");
    if (channels % 4 != 0) throw ConfigError("channels must be divisible by 4 for the sine positional encoding");
    if (categories != 2) throw ConfigError("only binary change detection (categories = 2) is supported");
    if (decoder_layers <= 0 || decoder_layers % 3 != 0)
        throw ConfigError("decoder_layers must be a positive multiple of 3");
    if (ffn_multiplier <= 0) throw ConfigError("ffn_multiplier must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
}

void RunConfig::validate() const {
    model.validate();
    if (epochs <= 0) throw ConfigError("epochs must be positive");
    if (batch_size <= 0) throw ConfigError("batch_size must be positive");
    if (crop_size <= 0 || crop_size % 32 != 0) throw ConfigError("crop_size must be a positive multiple of 32");
    if (lr < 0.0) throw ConfigError("lr must be non-negative");
    if (alpha < 0.0) throw ConfigError("alpha must be non-negative");
    if (augment.scale_min <= 0.0 || augment.scale_max < augment.scale_min)
        throw ConfigError("scale jitter range is empty");
    if (profile != "default" && profile != "ablation")
        throw ConfigError("profile must be 'default' or 'ablation', got '" + profile + "'");
    if (model.self_attention && profile == "default")
        throw ConfigError(
            "self_attention = true is rejected in the default profile: the decoder is cross-attention only and "
            "self-attention adds parameters and FLOPs without an accuracy gain; set profile = ablation to run it");
}

std::string to_config_text(const RunConfig& cfg) {
    std::string out;
    for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(cfg) + "\n";
    return out;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& f : fields())
        if (key == f.key) return f.set(cfg, trim(value));
    throw ConfigError("unknown config key '" + key + "'");
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& f : fields()) keys.emplace_back(f.key);
    return keys;
}

RunConfig parse_config_text(const std::string& text, RunConfig base) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        set_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return base;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

void save_config(const RunConfig& cfg, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << to_config_text(cfg);
}

}  // namespace rcdt
