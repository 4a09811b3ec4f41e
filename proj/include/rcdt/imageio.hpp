#pragma once

// Binary portable graymap / pixmap (P5 / P6, maxval 255) reading and writing.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "rcdt/errors.hpp"
#include "rcdt/mask.hpp"
#include "rcdt/tensor.hpp"

namespace rcdt {

struct RasterImage {
    int width = 0;
    int height = 0;
    int channels = 1;  // 1 -> P5, 3 -> P6
    std::vector<std::uint8_t> samples;  // row-major, channels interleaved

    RasterImage() = default;
    RasterImage(int w, int h, int c) : width(w), height(h), channels(c), samples(static_cast<std::size_t>(w) * h * c) {}

    bool operator==(const RasterImage&) const = default;
};

class UnsupportedFormatError : public ParseError {
   public:
    using ParseError::ParseError;
};

std::vector<std::uint8_t> encode_pnm(const RasterImage& img);
RasterImage decode_pnm(std::span<const std::uint8_t> bytes);

RasterImage read_pnm(const std::filesystem::path& path);
void write_pnm(const RasterImage& img, const std::filesystem::path& path);

// Clamp to [0, 1], then round half away from zero onto 0..255.
std::uint8_t to_byte(double v);

// C x H x W tensor (C = 1 or 3) in [0, 1] <-> interleaved raster.
RasterImage to_raster(const Tensor& image);
Tensor to_tensor(const RasterImage& img);

// Binary mask <-> graymap with values 0 / 255. Reading treats any nonzero
// sample as changed.
RasterImage mask_to_raster(const Mask& m);
Mask raster_to_mask(const RasterImage& img);

}  // namespace rcdt
