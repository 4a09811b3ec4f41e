#pragma once

// The full change detector: Siamese backbone -> relational cross attention ->
// features constrain head.

#include <cstdint>
#include <optional>
#include <random>

#include "rcdt/backbone.hpp"
#include "rcdt/fcm.hpp"
#include "rcdt/mask.hpp"
#include "rcdt/rcam.hpp"

namespace rcdt {

struct ModelOutput {
    Tensor logits;                   // K x H x W
    std::vector<Tensor> aux_logits;  // one per decoder scale, strides 32, 16, 8
    RcamOutput rcam;
    DecodedPyramid before;
    DecodedPyramid after;
};

class ChangeDetector {
   public:
    ChangeDetector(const ModelConfig& cfg, std::uint64_t init_seed);
    ChangeDetector(const ChangeDetector&) = delete;
    ChangeDetector& operator=(const ChangeDetector&) = delete;
    ChangeDetector(ChangeDetector&&) = default;

    // Training mode enables attention dropout, drawing from rng.
    ModelOutput forward(const Tensor& before, const Tensor& after, bool training = false,
                        std::mt19937_64* rng = nullptr) const;

    const ModelConfig& config() const { return cfg_; }
    ParameterStore& parameters() { return store_; }
    const ParameterStore& parameters() const { return store_; }
    const SiameseBackbone& backbone() const { return backbone_; }
    const RelationalCrossAttention& rcam() const { return rcam_; }
    const FeaturesConstrainModule* fcm() const { return fcm_ ? &*fcm_ : nullptr; }

    // Encoder and FPN parameters train at the reduced backbone rate.
    static bool is_backbone_parameter(const std::string& name);

   private:
    ModelConfig cfg_;
    ParameterStore store_;
    std::mt19937_64 init_rng_;
    SiameseBackbone backbone_;
    RelationalCrossAttention rcam_;
    std::optional<FeaturesConstrainModule> fcm_;
};

// Per-pixel argmax over the class axis of K x H x W logits.
Mask predict_mask(const Tensor& logits);

}  // namespace rcdt
