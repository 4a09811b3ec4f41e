#pragma once

// Training-time augmentation of bi-temporal samples and the raster helpers it
// shares with the generator.

#include <array>
#include <cstdint>
#include <random>

#include "rcdt/config.hpp"
#include "rcdt/synth.hpp"

namespace rcdt {

// Separable Gaussian blur with clamped borders; sigma <= 0 is identity.
Tensor gaussian_blur(const Tensor& image, double sigma);

// Bilinear resize of a C x H x W image to arbitrary (h, w), half-pixel centres.
Tensor resize_image(const Tensor& image, int h, int w);

struct PhotometricParams {
    bool color = false;
    std::array<double, 3> gain{1.0, 1.0, 1.0};
    std::array<double, 3> bias{0.0, 0.0, 0.0};
    bool noise = false;
    double noise_sigma = 0.0;
    std::uint64_t noise_seed = 0;
    bool blur = false;
    double blur_sigma = 0.0;
};

struct AugmentParams {
    bool scale = false;
    double factor = 1.0;
    // Position of the crop window (factor > 1) or of the shrunken image inside
    // the zero canvas (factor < 1), as fractions of the available slack.
    double offset_y = 0.5;
    double offset_x = 0.5;
    bool flip = false;
    PhotometricParams before;
    PhotometricParams after;
};

AugmentParams sample_augment(const AugmentConfig& cfg, std::mt19937_64& rng);

// Geometric parts move images and labels together (labels by nearest
// neighbour); photometric parts touch the images only. Output size equals
// input size.
SamplePair apply_augment(const SamplePair& s, const AugmentParams& p);

SamplePair augment(const SamplePair& s, std::uint64_t seed, const AugmentConfig& cfg = {});

Tensor apply_photometric(const Tensor& image, const PhotometricParams& p);
Tensor flip_horizontal(const Tensor& image);
Mask flip_horizontal(const Mask& m);

}  // namespace rcdt
