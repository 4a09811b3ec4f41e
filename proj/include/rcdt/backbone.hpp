#pragma once

// Weight-sharing Siamese encoder with a light FPN decoder.

#include <array>
#include <random>
#include <utility>

#include "rcdt/config.hpp"
#include "rcdt/nn.hpp"

namespace rcdt {

inline constexpr std::array<int, 4> kPyramidStrides{4, 8, 16, 32};

// Encoder stages X1..X4 at strides 4, 8, 16, 32.
struct FeaturePyramid {
    std::array<Tensor, 4> levels;
};

// FPN outputs P1..P4, all with the unified channel count C.
struct DecodedPyramid {
    std::array<Tensor, 4> levels;
};

class SiameseBackbone {
   public:
    SiameseBackbone(ParameterStore& store, const ModelConfig& cfg, std::mt19937_64& rng);

    // image: 3 x H x W with H, W divisible by 32.
    FeaturePyramid encode(const Tensor& image) const;
    DecodedPyramid fpn_decode(const FeaturePyramid& pyramid) const;
    DecodedPyramid forward(const Tensor& image) const { return fpn_decode(encode(image)); }

    // Both temporal images go through the one parameter set.
    std::pair<DecodedPyramid, DecodedPyramid> siamese_forward(const Tensor& before, const Tensor& after) const;

    // FPN pieces, exposed so the top-down sum can be recomposed externally.
    Tensor lateral(int level, const Tensor& x) const;  // 1x1 projection of X_level to C
    Tensor smooth(int level, const Tensor& x) const;   // 3x3 conv + GroupNorm

    int channels() const { return channels_; }

   private:
    struct ConvBlock {
        Conv2d conv;
        GroupNorm norm;
        Tensor operator()(const Tensor& x) const;
    };

    int channels_;
    std::array<ConvBlock, 2> stem_;
    std::array<std::array<ConvBlock, 2>, 3> stages_;
    std::array<Conv2d, 4> laterals_;
    std::array<ConvBlock, 4> smooth_;
};

}  // namespace rcdt
