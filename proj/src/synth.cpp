#include "rcdt/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rcdt/augment.hpp"
#include "rcdt/errors.hpp"

namespace rcdt {

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

double segment_distance(double px, double py, std::pair<double, double> a, std::pair<double, double> b) {
    const double dx = b.first - a.first, dy = b.second - a.second;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0 ? ((px - a.first) * dx + (py - a.second) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double ex = a.first + t * dx - px, ey = a.second + t * dy - py;
    return std::sqrt(ex * ex + ey * ey);
}

std::array<double, 3> palette_color(ShapeKind kind, Rng& rng) {
    switch (kind) {
        case ShapeKind::Rectangle: {
            // roofs: bright concrete, red tile or dark slate
            const int which = uniform_int(rng, 0, 2);
            if (which == 0) { const double v = uniform(rng, 0.78, 0.95); return {v, v, v * 0.97}; }
            if (which == 1) return {uniform(rng, 0.65, 0.85), uniform(rng, 0.20, 0.35), uniform(rng, 0.15, 0.30)};
            return {uniform(rng, 0.10, 0.20), uniform(rng, 0.15, 0.25), uniform(rng, 0.30, 0.45)};
        }
        case ShapeKind::Ellipse:
            // vegetation clumps or water
            if (uniform_int(rng, 0, 1) == 0)
                return {uniform(rng, 0.05, 0.15), uniform(rng, 0.35, 0.55), uniform(rng, 0.05, 0.15)};
            return {uniform(rng, 0.05, 0.15), uniform(rng, 0.20, 0.35), uniform(rng, 0.50, 0.70)};
        case ShapeKind::Road: {
            const double v = uniform(rng, 0.30, 0.42);
            return {v, v, v};
        }
    }
    return {};
}

double color_distance(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    double s = 0;
    for (int c = 0; c < 3; ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
    return std::sqrt(s);
}

SceneObject sample_object(int h, int w, const Difficulty& d, Rng& rng) {
    SceneObject o;
    const double r = uniform(rng, 0.0, 1.0);
    o.kind = r < d.road_probability ? ShapeKind::Road
             : r < d.road_probability + (1.0 - d.road_probability) * 0.6 ? ShapeKind::Rectangle
                                                                         : ShapeKind::Ellipse;
    if (o.kind == ShapeKind::Road) {
        o.width = uniform(rng, 3.0, 5.0);
        double x = uniform(rng, 0.15 * w, 0.85 * w), y = uniform(rng, 0.15 * h, 0.85 * h);
        o.path.emplace_back(x, y);
        double heading = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        const int segments = uniform_int(rng, 1, 2);
        for (int s = 0; s < segments; ++s) {
            const double len = uniform(rng, 2.0 * d.min_half_extent, 2.5 * d.max_half_extent);
            x = std::clamp(x + len * std::cos(heading), 2.0, w - 2.0);
            y = std::clamp(y + len * std::sin(heading), 2.0, h - 2.0);
            o.path.emplace_back(x, y);
            heading += uniform(rng, -1.2, 1.2);
        }
        double minx = w, miny = h, maxx = 0, maxy = 0;
        for (auto [px, py] : o.path) {
            minx = std::min(minx, px), maxx = std::max(maxx, px);
            miny = std::min(miny, py), maxy = std::max(maxy, py);
        }
        o.cx = 0.5 * (minx + maxx), o.cy = 0.5 * (miny + maxy);
        o.rx = 0.5 * (maxx - minx) + o.width, o.ry = 0.5 * (maxy - miny) + o.width;
    } else {
        o.rx = uniform(rng, d.min_half_extent, d.max_half_extent);
        o.ry = std::clamp(o.rx * uniform(rng, 0.6, 1.6), d.min_half_extent, d.max_half_extent);
        o.cx = uniform(rng, o.rx + 1.0, w - o.rx - 1.0);
        o.cy = uniform(rng, o.ry + 1.0, h - o.ry - 1.0);
    }
    o.color = palette_color(o.kind, rng);
    return o;
}

Mask rasterize(const SceneObject& o, int h, int w) {
    Mask m(h, w);
    const int y0 = std::max(0, static_cast<int>(std::floor(o.cy - o.ry - 1)));
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(o.cy + o.ry + 1)));
    const int x0 = std::max(0, static_cast<int>(std::floor(o.cx - o.rx - 1)));
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(o.cx + o.rx + 1)));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
            if (covers(o, x + 0.5, y + 0.5)) m.at(y, x) = 1;
    return m;
}

// True when the object's footprint, grown by `margin` pixels, touches `taken`.
bool collides(const Mask& footprint, const Mask& taken, int margin) {
    for (int y = 0; y < footprint.height; ++y)
        for (int x = 0; x < footprint.width; ++x) {
            if (!footprint.at(y, x)) continue;
            for (int dy = -margin; dy <= margin; ++dy)
                for (int dx = -margin; dx <= margin; ++dx) {
                    const int yy = y + dy, xx = x + dx;
                    if (yy >= 0 && yy < taken.height && xx >= 0 && xx < taken.width && taken.at(yy, xx)) return true;
                }
        }
    return false;
}

double background_value(const BackgroundSpec& bg, int c, double x, double y) {
    double v = bg.base[c];
    for (const auto& wv : bg.waves[c]) v += wv[0] * std::sin(wv[1] * x + wv[2] * y + wv[3]);
    return v;
}

// Deterministic per-pixel texture hash in [-1, 1].
double texture_noise(std::uint64_t seed, int c, int y, int x) {
    std::uint64_t z = seed ^ (static_cast<std::uint64_t>(c) << 58) ^ (static_cast<std::uint64_t>(y) << 29) ^
                      static_cast<std::uint64_t>(x);
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return static_cast<double>(z >> 11) / static_cast<double>(1ULL << 53) * 2.0 - 1.0;
}

Tensor render_frame(const SceneDescriptor& scene, bool after) {
    const int h = scene.height, w = scene.width;
    Tensor img(Shape{3, h, w});
    auto data = img.data();
    const auto plane = static_cast<std::size_t>(h) * w;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                data[c * plane + static_cast<std::size_t>(y) * w + x] =
                    background_value(scene.background, c, x + 0.5, y + 0.5) +
                    scene.background.texture_amplitude * texture_noise(scene.background.texture_seed, c, y, x);
    for (std::size_t k = 0; k < scene.objects.size(); ++k) {
        const SceneObject& o = scene.objects[k];
        if (after ? !o.in_after() : !o.in_before()) continue;
        const Mask m = rasterize(o, h, w);
        for (int c = 0; c < 3; ++c)
            for (std::size_t i = 0; i < plane; ++i)
                if (m.values[i])
                    data[c * plane + i] =
                        o.color[c] + 0.02 * texture_noise(scene.seed + 7919 * (k + 1), c, static_cast<int>(i / w),
                                                          static_cast<int>(i % w));
    }
    for (double& v : data) v = std::clamp(v, 0.0, 1.0);
    return img;
}

Tensor apply_nuisance(Tensor img, const Difficulty& d, Rng& rng) {
    const double i = d.illumination;
    const double gain = uniform(rng, 1.0 - i, 1.0 + i);
    const double offset = uniform(rng, -0.5 * i, 0.5 * i + 1e-12);
    std::array<double, 3> tint{};
    for (double& t : tint) t = uniform(rng, -0.25 * i, 0.25 * i + 1e-12);
    const double sigma = uniform(rng, 0.0, d.max_blur_sigma + 1e-12);
    auto data = img.data();
    const std::size_t plane = data.size() / 3;
    for (int c = 0; c < 3; ++c)
        for (std::size_t k = 0; k < plane; ++k) {
            double& v = data[c * plane + k];
            v = std::clamp(gain * v + offset + tint[c], 0.0, 1.0);
        }
    img = gaussian_blur(img, sigma);
    std::normal_distribution<double> noise(0.0, d.noise_sigma > 0 ? d.noise_sigma : 1.0);
    for (double& v : img.data()) v = std::clamp(v + (d.noise_sigma > 0 ? noise(rng) : 0.0), 0.0, 1.0);
    return img;
}

}  // namespace

bool covers(const SceneObject& o, double x, double y) {
    switch (o.kind) {
        case ShapeKind::Rectangle:
            return std::abs(x - o.cx) <= o.rx && std::abs(y - o.cy) <= o.ry;
        case ShapeKind::Ellipse: {
            const double u = (x - o.cx) / o.rx, v = (y - o.cy) / o.ry;
            return u * u + v * v <= 1.0;
        }
        case ShapeKind::Road:
            for (std::size_t i = 0; i + 1 < o.path.size(); ++i)
                if (segment_distance(x, y, o.path[i], o.path[i + 1]) <= 0.5 * o.width) return true;
            return false;
    }
    return false;
}

SceneDescriptor sample_scene(std::uint64_t seed, int h, int w, const Difficulty& d) {
    if (h <= 0 || w <= 0) throw ConfigError("sample_scene: empty image size");
    if (d.min_changes < 0 || d.max_changes < d.min_changes || d.min_persistent < 0 ||
        d.max_persistent < d.min_persistent)
        throw ConfigError("sample_scene: inconsistent object counts");
    Rng rng(seed);
    SceneDescriptor scene;
    scene.height = h;
    scene.width = w;
    scene.seed = seed;
    auto& bg = scene.background;
    const double tone = uniform(rng, 0.0, 1.0);
    // soil / dry grass / pale field
    bg.base = tone < 0.33   ? std::array<double, 3>{0.45, 0.40, 0.30}
              : tone < 0.66 ? std::array<double, 3>{0.40, 0.45, 0.28}
                            : std::array<double, 3>{0.55, 0.52, 0.45};
    for (double& b : bg.base) b += uniform(rng, -0.04, 0.04);
    for (auto& channel : bg.waves)
        for (auto& wv : channel) {
            const double period = uniform(rng, 16.0, 64.0);
            const double angle = uniform(rng, 0.0, std::numbers::pi);
            wv = {uniform(rng, 0.0, 0.04), 2 * std::numbers::pi / period * std::cos(angle),
                  2 * std::numbers::pi / period * std::sin(angle), uniform(rng, 0.0, 2 * std::numbers::pi)};
        }
    bg.texture_seed = rng();

    const int changes = uniform_int(rng, d.min_changes, d.max_changes);
    const int persistent = uniform_int(rng, d.min_persistent, d.max_persistent);
    Mask taken(h, w);
    auto place = [&](ObjectState state) {
        for (int attempt = 0; attempt < 60; ++attempt) {
            SceneObject o = sample_object(h, w, d, rng);
            if (color_distance(o.color, bg.base) < 0.2) continue;
            const Mask m = rasterize(o, h, w);
            if (m.count() == 0 || collides(m, taken, 2)) continue;
            for (std::size_t i = 0; i < m.size(); ++i) taken.values[i] |= m.values[i];
            o.state = state;
            scene.objects.push_back(std::move(o));
            return;
        }
    };
    for (int i = 0; i < changes; ++i) place(uniform_int(rng, 0, 1) == 0 ? ObjectState::Appear : ObjectState::Disappear);
    for (int i = 0; i < persistent; ++i) place(ObjectState::Persist);
    return scene;
}

Mask occupancy(const SceneDescriptor& scene, bool after) {
    Mask m(scene.height, scene.width);
    for (const auto& o : scene.objects) {
        if (after ? !o.in_after() : !o.in_before()) continue;
        const Mask r = rasterize(o, scene.height, scene.width);
        for (std::size_t i = 0; i < m.size(); ++i) m.values[i] |= r.values[i];
    }
    return m;
}

SamplePair render_pair(const SceneDescriptor& scene, std::uint64_t nuisance_seed, const Difficulty& d) {
    Rng rng(nuisance_seed);
    SamplePair out;
    out.seed = scene.seed;
    out.scene = scene;
    out.before = apply_nuisance(render_frame(scene, false), d, rng);
    out.after = apply_nuisance(render_frame(scene, true), d, rng);
    const Mask a = occupancy(scene, false), b = occupancy(scene, true);
    out.gt = Mask(scene.height, scene.width);
    for (std::size_t i = 0; i < a.size(); ++i) out.gt.values[i] = a.values[i] != b.values[i];
    return out;
}

SamplePair generate_pair(std::uint64_t seed, int h, int w, const Difficulty& d) {
    if (h <= 0 || w <= 0 || h % 32 != 0 || w % 32 != 0)
        throw ConfigError("generate_pair: image size " + std::to_string(h) + "x" + std::to_string(w) +
                          " must be a positive multiple of 32");
    return render_pair(sample_scene(seed, h, w, d), seed ^ 0xa5a5a5a5a5a5a5a5ULL, d);
}

}  // namespace rcdt
