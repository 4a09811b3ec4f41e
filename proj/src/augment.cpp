#include "rcdt/augment.hpp"

#include <algorithm>
#include <cmath>

#include "rcdt/errors.hpp"

namespace rcdt {

namespace {

void require_image(const Tensor& t, const char* what) {
    if (!t.defined() || t.rank() != 3) throw DimensionError(std::string(what) + ": expected C x H x W image");
}

}  // namespace

Tensor gaussian_blur(const Tensor& image, double sigma) {
    require_image(image, "gaussian_blur");
    if (sigma <= 0.0) return image.detach();
    const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double norm = 0;
    for (int i = -radius; i <= radius; ++i) norm += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    for (double& v : k) v /= norm;
    const auto src = image.data();
    std::vector<double> tmp(src.size()), out(src.size());
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int ch = 0; ch < c; ++ch) {
        const double* s = src.data() + ch * plane;
        double* t = tmp.data() + ch * plane;
        double* o = out.data() + ch * plane;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = 0;
                for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * s[y * w + std::clamp(x + i, 0, w - 1)];
                t[y * w + x] = acc;
            }
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = 0;
                for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * t[std::clamp(y + i, 0, h - 1) * w + x];
                o[y * w + x] = acc;
            }
    }
    return Tensor(image.shape(), std::move(out));
}

Tensor resize_image(const Tensor& image, int oh, int ow) {
    require_image(image, "resize_image");
    if (oh <= 0 || ow <= 0) throw DimensionError("resize_image: empty target size");
    const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
    const auto src = image.data();
    std::vector<double> out(static_cast<std::size_t>(c) * oh * ow);
    const double sy = static_cast<double>(h) / oh, sx = static_cast<double>(w) / ow;
    for (int y = 0; y < oh; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, h - 1.0);
        const int y0 = static_cast<int>(fy), y1 = std::min(y0 + 1, h - 1);
        const double wy = fy - y0;
        for (int x = 0; x < ow; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, w - 1.0);
            const int x0 = static_cast<int>(fx), x1 = std::min(x0 + 1, w - 1);
            const double wx = fx - x0;
            for (int ch = 0; ch < c; ++ch) {
                const double* p = src.data() + static_cast<std::size_t>(ch) * h * w;
                out[(static_cast<std::size_t>(ch) * oh + y) * ow + x] =
                    (1 - wy) * ((1 - wx) * p[y0 * w + x0] + wx * p[y0 * w + x1]) +
                    wy * ((1 - wx) * p[y1 * w + x0] + wx * p[y1 * w + x1]);
            }
        }
    }
    return Tensor(Shape{c, oh, ow}, std::move(out));
}

Tensor flip_horizontal(const Tensor& image) {
    require_image(image, "flip_horizontal");
    const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
    Tensor out(image.shape());
    auto dst = out.data();
    const auto src = image.data();
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                dst[(static_cast<std::size_t>(ch) * h + y) * w + x] =
                    src[(static_cast<std::size_t>(ch) * h + y) * w + (w - 1 - x)];
    return out;
}

Mask flip_horizontal(const Mask& m) {
    Mask out(m.height, m.width);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) out.at(y, x) = m.at(y, m.width - 1 - x);
    return out;
}

Tensor apply_photometric(const Tensor& image, const PhotometricParams& p) {
    require_image(image, "apply_photometric");
    Tensor out = image.detach();
    auto data = out.data();
    const std::size_t plane = data.size() / image.dim(0);
    if (p.color)
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto ch = std::min<std::size_t>(i / plane, 2);
            data[i] = std::clamp(p.gain[ch] * data[i] + p.bias[ch], 0.0, 1.0);
        }
    if (p.blur) out = gaussian_blur(out, p.blur_sigma);
    if (p.noise && p.noise_sigma > 0) {
        std::mt19937_64 rng(p.noise_seed);
        std::normal_distribution<double> n(0.0, p.noise_sigma);
        for (double& v : out.data()) v = std::clamp(v + n(rng), 0.0, 1.0);
    }
    return out;
}

namespace {

PhotometricParams sample_photometric(const AugmentConfig& cfg, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    PhotometricParams p;
    p.color = u(rng) < cfg.p_color;
    for (int c = 0; c < 3; ++c) {
        p.gain[c] = 0.8 + 0.4 * u(rng);
        p.bias[c] = -0.08 + 0.16 * u(rng);
    }
    p.noise = u(rng) < cfg.p_noise;
    p.noise_sigma = 0.05 * u(rng);
    p.noise_seed = rng();
    p.blur = u(rng) < cfg.p_blur;
    p.blur_sigma = 0.2 + 0.8 * u(rng);
    return p;
}

// Places a (sh x sw) source into an (h x w) frame: crops when larger, zero pads
// when smaller. Offsets are fractions of the slack.
template <typename Get, typename Set>
void place(int sh, int sw, int h, int w, double oy, double ox, Get get, Set set) {
    const int slack_y = std::abs(sh - h), slack_x = std::abs(sw - w);
    const int dy = std::min(slack_y, static_cast<int>(std::floor(oy * (slack_y + 1))));
    const int dx = std::min(slack_x, static_cast<int>(std::floor(ox * (slack_x + 1))));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int syy = sh >= h ? y + dy : y - dy;
            const int sxx = sw >= w ? x + dx : x - dx;
            if (syy >= 0 && syy < sh && sxx >= 0 && sxx < sw)
                set(y, x, get(syy, sxx));
            else
                set(y, x, -1);
        }
}

Tensor place_image(const Tensor& src, int h, int w, double oy, double ox) {
    const int c = src.dim(0), sh = src.dim(1), sw = src.dim(2);
    Tensor out(Shape{c, h, w});
    auto dst = out.data();
    const auto s = src.data();
    for (int ch = 0; ch < c; ++ch) {
        const std::size_t so = static_cast<std::size_t>(ch) * sh * sw, d = static_cast<std::size_t>(ch) * h * w;
        place(
            sh, sw, h, w, oy, ox, [&](int y, int x) { return s[so + static_cast<std::size_t>(y) * sw + x]; },
            [&](int y, int x, double v) { dst[d + static_cast<std::size_t>(y) * w + x] = v < 0 ? 0.0 : v; });
    }
    return out;
}

Mask place_mask(const Mask& src, int h, int w, double oy, double ox) {
    Mask out(h, w);
    place(
        src.height, src.width, h, w, oy, ox, [&](int y, int x) { return static_cast<double>(src.at(y, x)); },
        [&](int y, int x, double v) { out.at(y, x) = v < 0 ? 0 : static_cast<std::uint8_t>(v); });
    return out;
}

}  // namespace

AugmentParams sample_augment(const AugmentConfig& cfg, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    AugmentParams p;
    if (!cfg.enabled) return p;
    p.scale = u(rng) < cfg.p_scale;
    // log-uniform in [scale_min, scale_max]
    p.factor = std::exp(std::log(cfg.scale_min) + u(rng) * (std::log(cfg.scale_max) - std::log(cfg.scale_min)));
    p.offset_y = u(rng);
    p.offset_x = u(rng);
    p.flip = u(rng) < cfg.p_flip;
    p.before = sample_photometric(cfg, rng);
    p.after = cfg.shared_photometric ? p.before : sample_photometric(cfg, rng);
    if (!cfg.shared_photometric) p.after.noise_seed = rng();
    return p;
}

SamplePair apply_augment(const SamplePair& s, const AugmentParams& p) {
    require_image(s.before, "augment");
    require_image(s.after, "augment");
    const int h = s.before.dim(1), w = s.before.dim(2);
    if (s.after.shape() != s.before.shape() || s.gt.height != h || s.gt.width != w)
        throw DimensionError("augment: before, after and label sizes differ");
    SamplePair out;
    out.seed = s.seed;
    out.scene = s.scene;
    Tensor before = s.before, after = s.after;
    Mask gt = s.gt;
    if (p.scale && p.factor != 1.0) {
        const int sh = std::max(1, static_cast<int>(std::lround(h * p.factor)));
        const int sw = std::max(1, static_cast<int>(std::lround(w * p.factor)));
        before = place_image(resize_image(before, sh, sw), h, w, p.offset_y, p.offset_x);
        after = place_image(resize_image(after, sh, sw), h, w, p.offset_y, p.offset_x);
        gt = place_mask(resize_nearest(gt, sh, sw), h, w, p.offset_y, p.offset_x);
    }
    if (p.flip) {
        before = flip_horizontal(before);
        after = flip_horizontal(after);
        gt = flip_horizontal(gt);
    }
    out.before = apply_photometric(before, p.before);
    out.after = apply_photometric(after, p.after);
    out.gt = std::move(gt);
    return out;
}

SamplePair augment(const SamplePair& s, std::uint64_t seed, const AugmentConfig& cfg) {
    std::mt19937_64 rng(seed);
    return apply_augment(s, sample_augment(cfg, rng));
}

}  // namespace rcdt
