#pragma once

// Synthetic bi-temporal scenes: a shared textured background with objects
// that persist, appear or disappear, rendered under independent per-frame
// illumination, blur and sensor noise. Only the object-set difference is
// labelled as change.

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "rcdt/mask.hpp"
#include "rcdt/tensor.hpp"

namespace rcdt {

enum class ShapeKind { Rectangle, Ellipse, Road };
enum class ObjectState { Persist, Appear, Disappear };

struct SceneObject {
    ShapeKind kind = ShapeKind::Rectangle;
    ObjectState state = ObjectState::Persist;
    // Rectangle / Ellipse: centre and half extents (axis aligned), in pixels.
    double cx = 0, cy = 0, rx = 0, ry = 0;
    // Road: polyline vertices (x, y) and full stroke width.
    std::vector<std::pair<double, double>> path;
    double width = 0;
    std::array<double, 3> color{};

    bool in_before() const { return state != ObjectState::Appear; }
    bool in_after() const { return state != ObjectState::Disappear; }
};

struct BackgroundSpec {
    std::array<double, 3> base{};
    // Per channel: three sinusoid components (amplitude, fx, fy, phase).
    std::array<std::array<std::array<double, 4>, 3>, 3> waves{};
    double texture_amplitude = 0.03;
    std::uint64_t texture_seed = 0;
};

struct SceneDescriptor {
    int height = 0;
    int width = 0;
    std::uint64_t seed = 0;
    BackgroundSpec background;
    std::vector<SceneObject> objects;
};

struct Difficulty {
    int min_changes = 2;      // appear/disappear events per scene
    int max_changes = 5;
    int min_persistent = 1;   // unchanged objects present in both frames
    int max_persistent = 4;
    double min_half_extent = 4.0;
    double max_half_extent = 11.0;
    double road_probability = 0.2;
    // Per-frame nuisances.
    double illumination = 0.10;  // gain in [1 - i, 1 + i], offset in [-i/2, i/2]
    double max_blur_sigma = 0.7;
    double noise_sigma = 0.02;

    static Difficulty standard() { return {}; }
    static Difficulty no_change() {
        Difficulty d;
        d.min_changes = d.max_changes = 0;
        return d;
    }
};

struct SamplePair {
    Tensor before;  // 3 x H x W in [0, 1]
    Tensor after;
    Mask gt;        // H x W, 1 = changed
    std::uint64_t seed = 0;
    SceneDescriptor scene;
};

// Whether the pixel-centre point (x, y) lies on the object.
bool covers(const SceneObject& obj, double x, double y);

SceneDescriptor sample_scene(std::uint64_t seed, int h, int w, const Difficulty& difficulty = {});

// Rasterized union of the objects present in one frame.
Mask occupancy(const SceneDescriptor& scene, bool after);

// Renders both frames; nuisance_seed drives only the per-frame photometric
// nuisances, never the labels.
SamplePair render_pair(const SceneDescriptor& scene, std::uint64_t nuisance_seed, const Difficulty& difficulty = {});

// h, w divisible by 32.
SamplePair generate_pair(std::uint64_t seed, int h, int w, const Difficulty& difficulty = {});

}  // namespace rcdt
