#include "rcdt/backbone.hpp"

#include "rcdt/errors.hpp"
#include "rcdt/ops.hpp"

namespace rcdt {

Tensor SiameseBackbone::ConvBlock::operator()(const Tensor& x) const { return norm(conv(x)); }

SiameseBackbone::SiameseBackbone(ParameterStore& store, const ModelConfig& cfg, std::mt19937_64& rng)
    : channels_(cfg.channels) {
    cfg.validate();
    const int b = cfg.base_channels;
    const std::array<int, 4> widths{b, 2 * b, 4 * b, 8 * b};
    const std::string enc = "backbone.encoder.";
    stem_[0] = {Conv2d::make(store, enc + "stem0.conv", 3, b, 3, 2, rng),
                GroupNorm::make(store, enc + "stem0.norm", b, cfg.groups)};
    stem_[1] = {Conv2d::make(store, enc + "stem1.conv", b, b, 3, 2, rng),
                GroupNorm::make(store, enc + "stem1.norm", b, cfg.groups)};
    for (int s = 0; s < 3; ++s) {
        const std::string name = enc + "stage" + std::to_string(s + 2) + ".";
        const int cin = widths[s], cout = widths[s + 1];
        stages_[s][0] = {Conv2d::make(store, name + "block0.conv", cin, cout, 3, 2, rng),
                         GroupNorm::make(store, name + "block0.norm", cout, cfg.groups)};
        stages_[s][1] = {Conv2d::make(store, name + "block1.conv", cout, cout, 3, 1, rng),
                         GroupNorm::make(store, name + "block1.norm", cout, cfg.groups)};
    }
    for (int l = 0; l < 4; ++l) {
        const std::string name = "backbone.fpn.level" + std::to_string(l + 1) + ".";
        laterals_[l] = Conv2d::make(store, name + "lateral", widths[l], cfg.channels, 1, 1, rng);
        smooth_[l] = {Conv2d::make(store, name + "smooth.conv", cfg.channels, cfg.channels, 3, 1, rng),
                      GroupNorm::make(store, name + "smooth.norm", cfg.channels, cfg.groups)};
    }
}

FeaturePyramid SiameseBackbone::encode(const Tensor& image) const {
    if (image.rank() != 3 || image.dim(0) != 3)
        throw DimensionError("encode: expected a 3 x H x W image, got " + shape_str(image.shape()));
    if (image.dim(1) % 32 != 0 || image.dim(2) % 32 != 0)
        throw ConfigError("encode: image extent " + shape_str(image.shape()) + " is not divisible by 32");
    FeaturePyramid out;
    Tensor x = relu(stem_[0](image));
    x = relu(stem_[1](x));
    out.levels[0] = x;
    for (int s = 0; s < 3; ++s) {
        x = relu(stages_[s][0](x));
        x = relu(stages_[s][1](x));
        out.levels[s + 1] = x;
    }
    return out;
}

Tensor SiameseBackbone::lateral(int level, const Tensor& x) const { return laterals_.at(level)(x); }

Tensor SiameseBackbone::smooth(int level, const Tensor& x) const { return smooth_.at(level)(x); }

DecodedPyramid SiameseBackbone::fpn_decode(const FeaturePyramid& pyramid) const {
    DecodedPyramid out;
    out.levels[3] = smooth(3, lateral(3, pyramid.levels[3]));
    for (int l = 2; l >= 0; --l)
        out.levels[l] = smooth(l, add(lateral(l, pyramid.levels[l]), bilinear_resize(out.levels[l + 1], 2)));
    return out;
}

std::pair<DecodedPyramid, DecodedPyramid> SiameseBackbone::siamese_forward(const Tensor& before,
                                                                           const Tensor& after) const {
    if (before.shape() != after.shape())
        throw InputError("siamese_forward: temporal images differ in shape, " + shape_str(before.shape()) + " vs " +
                         shape_str(after.shape()));
    return {forward(before), forward(after)};
}

}  // namespace rcdt
