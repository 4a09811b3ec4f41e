#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace rcdt {

// Binary per-pixel label map (0 = unchanged, 1 = changed), row-major.
struct Mask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> values;

    Mask() = default;
    Mask(int h, int w, std::uint8_t fill = 0)
        : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}

    std::uint8_t& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
    std::size_t size() const { return values.size(); }
    std::size_t count() const;

    bool operator==(const Mask&) const = default;
};

// Nearest-neighbour resampling to (h, w); label values are carried unchanged.
Mask resize_nearest(const Mask& m, int h, int w);

}  // namespace rcdt
