#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rcdt/tensor.hpp"

namespace rcdt {

using DifferentiableFn = std::function<Tensor(std::span<const Tensor>)>;

// Compares reverse-mode gradients of a fixed random projection <w, fn(inputs)>
// against central differences with step h. Returns the largest
// |analytic - numeric| / max(1, |numeric|) over every element of every input
// that requires a gradient. fn must be deterministic across calls.
//
// Throws Error naming the op that produced the output when an analytic
// gradient is not finite.
//
// With max_elements > 0, each input larger than that is checked on a seeded
// random subset of max_elements positions instead of every element.
double finite_difference_check(const DifferentiableFn& fn, std::vector<Tensor> inputs, double h = 1e-5,
                               std::uint64_t projection_seed = 0x5eed, std::size_t max_elements = 0);

// Directional variant for large parameter sets: for each tensor in params a
// random unit direction d is drawn and <grad, d> of the scalar loss() is
// compared with (loss(p + h d) - loss(p - h d)) / 2h. Returns one error per
// tensor, same relative measure as above. params are perturbed in place and
// restored.
std::vector<double> directional_derivative_check(const std::function<Tensor()>& loss, std::vector<Tensor> params,
                                                 double h = 1e-6, std::uint64_t direction_seed = 0x5eed);

}  // namespace rcdt
