#include "rcdt/nn.hpp"

#include <cmath>

#include "rcdt/errors.hpp"
#include "rcdt/ops.hpp"

namespace rcdt {

Tensor ParameterStore::add(const std::string& name, Tensor value) {
    if (contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
    value.set_requires_grad(true);
    entries_.push_back({name, value});
    return value;
}

Tensor ParameterStore::get(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return e.value;
    throw ConfigError("no parameter named '" + name + "'");
}

bool ParameterStore::contains(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return true;
    return false;
}

std::size_t ParameterStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.numel();
    return n;
}

void ParameterStore::zero_grad() {
    for (auto& e : entries_) e.value.zero_grad();
}

Tensor init_tensor(const Shape& shape, Init init, std::mt19937_64& rng, int fan_in, int fan_out, double stddev) {
    Tensor t(shape);
    auto v = t.data();
    switch (init) {
        case Init::Zeros:
            break;
        case Init::Ones:
            std::fill(v.begin(), v.end(), 1.0);
            break;
        case Init::KaimingNormal: {
            std::normal_distribution<double> d(0.0, std::sqrt(2.0 / fan_in));
            for (auto& x : v) x = d(rng);
            break;
        }
        case Init::XavierUniform: {
            const double a = std::sqrt(6.0 / (fan_in + fan_out));
            std::uniform_real_distribution<double> d(-a, a);
            for (auto& x : v) x = d(rng);
            break;
        }
        case Init::Normal: {
            std::normal_distribution<double> d(0.0, stddev);
            for (auto& x : v) x = d(rng);
            break;
        }
    }
    return t;
}

Conv2d Conv2d::make(ParameterStore& store, const std::string& name, int cin, int cout, int kernel, int stride,
                    std::mt19937_64& rng) {
    Conv2d c;
    c.weight = store.add(name + ".weight",
                         init_tensor({cout, cin, kernel, kernel}, Init::KaimingNormal, rng, cin * kernel * kernel));
    c.bias = store.add(name + ".bias", Tensor({cout}));
    c.stride = stride;
    return c;
}

Tensor Conv2d::operator()(const Tensor& x) const { return conv2d(x, weight, bias, stride); }

GroupNorm GroupNorm::make(ParameterStore& store, const std::string& name, int channels, int groups) {
    GroupNorm g;
    g.gamma = store.add(name + ".gamma", Tensor({channels}, 1.0));
    g.beta = store.add(name + ".beta", Tensor({channels}));
    g.groups = groups;
    return g;
}

Tensor GroupNorm::operator()(const Tensor& x) const { return group_norm(x, groups, gamma, beta); }

Linear Linear::make(ParameterStore& store, const std::string& name, int in, int out, std::mt19937_64& rng) {
    Linear l;
    l.weight = store.add(name + ".weight", init_tensor({out, in}, Init::XavierUniform, rng, in, out));
    l.bias = store.add(name + ".bias", Tensor({out}));
    return l;
}

Tensor Linear::operator()(const Tensor& x) const { return linear(x, weight, bias); }

LayerNorm LayerNorm::make(ParameterStore& store, const std::string& name, int width) {
    LayerNorm n;
    n.gamma = store.add(name + ".gamma", Tensor({width}, 1.0));
    n.beta = store.add(name + ".beta", Tensor({width}));
    return n;
}

Tensor LayerNorm::operator()(const Tensor& x) const { return layer_norm_rows(x, gamma, beta); }

}  // namespace rcdt
