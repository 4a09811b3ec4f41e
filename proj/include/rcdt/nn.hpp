#pragma once

// Named parameter registry and the small layer types the model is built from.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "rcdt/tensor.hpp"

namespace rcdt {

struct NamedParameter {
    std::string name;
    Tensor value;
};

// Owns every learnable tensor of a model under a unique dotted name, in
// registration order (which is also checkpoint order).
class ParameterStore {
   public:
    Tensor add(const std::string& name, Tensor value);
    Tensor get(const std::string& name) const;
    bool contains(const std::string& name) const;

    const std::vector<NamedParameter>& entries() const { return entries_; }
    std::size_t scalar_count() const;
    void zero_grad();

   private:
    std::vector<NamedParameter> entries_;
};

enum class Init { Zeros, Ones, KaimingNormal, XavierUniform, Normal };

Tensor init_tensor(const Shape& shape, Init init, std::mt19937_64& rng, int fan_in = 1, int fan_out = 1,
                   double stddev = 1.0);

struct Conv2d {
    Tensor weight;  // C_out x C_in x k x k
    Tensor bias;    // C_out
    int stride = 1;

    static Conv2d make(ParameterStore& store, const std::string& name, int cin, int cout, int kernel, int stride,
                       std::mt19937_64& rng);
    Tensor operator()(const Tensor& x) const;
};

struct GroupNorm {
    Tensor gamma;
    Tensor beta;
    int groups = 1;

    static GroupNorm make(ParameterStore& store, const std::string& name, int channels, int groups);
    Tensor operator()(const Tensor& x) const;
};

struct Linear {
    Tensor weight;  // out x in
    Tensor bias;    // out

    static Linear make(ParameterStore& store, const std::string& name, int in, int out, std::mt19937_64& rng);
    Tensor operator()(const Tensor& x) const;
};

struct LayerNorm {
    Tensor gamma;
    Tensor beta;

    static LayerNorm make(ParameterStore& store, const std::string& name, int width);
    Tensor operator()(const Tensor& x) const;
};

}  // namespace rcdt
