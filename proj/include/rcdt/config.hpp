#pragma once

// Model and run configuration, with the line-oriented `key = value` file form.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace rcdt {

struct ModelConfig {
    int base_channels = 16;  // encoder stage widths are base * [1, 2, 4, 8]
    int channels = 64;       // unified decoder width C
    int groups = 8;          // GroupNorm groups
    int categories = 2;      // K; binary change detection only
    int decoder_layers = 3;  // cross attention layers, a multiple of the 3 scales
    int ffn_multiplier = 4;  // FFN hidden width = multiplier * C
    double dropout = 0.2;    // on attention maps, training only

    // Offset cross attention = cosine logits + subtraction; both off gives the
    // standard scaled dot-product form with residual addition.
    bool cosine = true;
    bool subtraction = true;
    bool ffn = true;
    bool self_attention = false;
    bool fcm = true;
    bool constrain_relu = true;  // ReLU after the FCM 1x1 projection

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

// Which auxiliary decoder scales contribute each loss term (coarse to fine).
struct DeepSupervision {
    std::array<bool, 3> ce{true, true, true};
    std::array<bool, 3> dice{true, true, true};
    bool final_output = true;

    bool operator==(const DeepSupervision&) const = default;
};

struct AugmentConfig {
    bool enabled = true;
    double scale_min = 0.5;
    double scale_max = 2.0;
    double p_scale = 0.5;
    double p_flip = 0.5;
    double p_color = 0.5;
    double p_noise = 0.5;
    double p_blur = 0.5;
    bool shared_photometric = false;  // same photometric draw for both frames

    bool operator==(const AugmentConfig&) const = default;
};

struct RunConfig {
    std::uint64_t seed = 1;
    int epochs = 30;
    int batch_size = 8;
    int crop_size = 64;

    double lr = 2e-3;
    double weight_decay = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double backbone_lr_multiplier = 0.1;
    double poly_power = 0.9;

    double alpha = 0.4;
    double dice_eps = 1.0;
    DeepSupervision supervision;
    AugmentConfig augment;
    ModelConfig model;

    // "default" rejects the self-attention switch; "ablation" permits it.
    std::string profile = "default";

    void validate() const;
    bool operator==(const RunConfig&) const = default;
};

// Serializes every setting, one `key = value` per line, doubles at full
// precision so parsing the text reproduces the config exactly.
std::string to_config_text(const RunConfig& cfg);
RunConfig parse_config_text(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path);
void save_config(const RunConfig& cfg, const std::filesystem::path& path);

// Applies one `key = value` override in place.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
std::vector<std::string> config_keys();

}  // namespace rcdt
