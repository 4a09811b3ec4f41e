#pragma once

// Gradient check cases, one per differentiable op, on small random inputs.

#include <random>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "rcdt/gradcheck.hpp"
#include "rcdt/ops.hpp"
#include "rcdt/rcam.hpp"

namespace rcdt::test {

struct OpCase {
    std::string name;
    DifferentiableFn fn;
    std::vector<Tensor> inputs;
    double tol;
};

inline std::vector<OpCase> differentiable_op_cases(std::mt19937_64& rng) {
    auto g = [&](const Shape& s, double lo = -1, double hi = 1) { return random_tensor(s, rng, lo, hi, true); };
    Mask m(4, 4);
    for (int i = 0; i < 16; i += 3) m.values[i] = 1;
    const Tensor pos = sine_positional_encoding(2, 2, 8);
    return {
        {"add", [](auto in) { return add(in[0], in[1]); }, {g({3, 4}), g({3, 4})}, 1e-6},
        {"sub", [](auto in) { return sub(in[0], in[1]); }, {g({3, 4}), g({3, 4})}, 1e-6},
        {"mul", [](auto in) { return mul(in[0], in[1]); }, {g({3, 4}), g({3, 4})}, 1e-6},
        {"scale", [](auto in) { return scale(in[0], -2.5); }, {g({5})}, 1e-6},
        {"relu", [](auto in) { return relu(in[0]); }, {g({4, 4}, 0.1, 1.0)}, 1e-6},
        {"sum", [](auto in) { return sum(in[0]); }, {g({2, 3})}, 1e-6},
        {"mean", [](auto in) { return mean(in[0]); }, {g({2, 3})}, 1e-6},
        {"reshape", [](auto in) { return reshape(in[0], {6, 2}); }, {g({3, 4})}, 1e-6},
        {"transpose", [](auto in) { return transpose(in[0]); }, {g({3, 4})}, 1e-6},
        {"matmul", [](auto in) { return matmul(in[0], in[1]); }, {g({3, 3}), g({3, 3})}, 1e-6},
        {"linear", [](auto in) { return linear(in[0], in[1], in[2]); }, {g({4, 3}), g({5, 3}), g({5})}, 1e-6},
        {"softmax", [](auto in) { return softmax_lastdim(in[0]); }, {g({8}, -2, 2)}, 1e-6},
        {"softmax rows", [](auto in) { return softmax_lastdim(in[0]); }, {g({3, 5}, -2, 2)}, 1e-6},
        {"l2_normalize", [](auto in) { return l2_normalize_rows(in[0]); }, {g({3, 4})}, 1e-6},
        {"layer_norm", [](auto in) { return layer_norm_rows(in[0], in[1], in[2]); }, {g({3, 6}), g({6}), g({6})}, 1e-5},
        {"conv3x3 s1", [](auto in) { return conv2d(in[0], in[1], in[2], 1); }, {g({2, 5, 5}), g({3, 2, 3, 3}), g({3})}, 1e-6},
        {"conv3x3 s2", [](auto in) { return conv2d(in[0], in[1], in[2], 2); }, {g({2, 6, 5}), g({3, 2, 3, 3}), g({3})}, 1e-6},
        {"conv1x1 s1", [](auto in) { return conv2d(in[0], in[1], in[2], 1); }, {g({4, 3, 3}), g({2, 4, 1, 1}), g({2})}, 1e-6},
        {"conv1x1 s2", [](auto in) { return conv2d(in[0], in[1], Tensor(), 2); }, {g({4, 4, 4}), g({2, 4, 1, 1})}, 1e-6},
        {"group_norm", [](auto in) { return group_norm(in[0], 2, in[1], in[2]); }, {g({4, 3, 3}), g({4}), g({4})}, 1e-5},
        {"bilinear x2", [](auto in) { return bilinear_resize(in[0], 2); }, {g({2, 3, 3})}, 1e-6},
        {"bilinear x4", [](auto in) { return bilinear_resize(in[0], 4); }, {g({1, 2, 3})}, 1e-6},
        {"concat", [](auto in) { return concat_channels(in[0], in[1]); }, {g({2, 3, 3}), g({1, 3, 3})}, 1e-6},
        {"flatten", [](auto in) { return flatten_tokens(in[0]); }, {g({3, 2, 4})}, 1e-6},
        {"unflatten", [](auto in) { return unflatten_tokens(in[0], 2, 3); }, {g({6, 4})}, 1e-6},
        {"dropout",
         [](auto in) {
             std::mt19937_64 r(5);
             return dropout(in[0], 0.3, r, true);
         },
         {g({4, 5})}, 1e-6},
        {"cross_entropy", [m](auto in) { return cross_entropy(in[0], m); }, {g({2, 4, 4}, -3, 3)}, 1e-6},
        {"dice", [m](auto in) { return dice_loss(in[0], m); }, {g({2, 4, 4}, -3, 3)}, 1e-6},
        {"offset cross attention",
         [pos](auto in) {
             return relational_cross_attention(in[0], in[1], pos, pos, {true, true}, {}).output;
         },
         {g({4, 8}), g({4, 8})}, 1e-6},
        {"standard cross attention",
         [pos](auto in) {
             return relational_cross_attention(in[0], in[1], pos, pos, {false, false}, {}).output;
         },
         {g({4, 8}), g({4, 8})}, 1e-6},
    };
}

}  // namespace rcdt::test
