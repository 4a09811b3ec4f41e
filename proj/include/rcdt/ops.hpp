#pragma once

// Differentiable tensor operations. Shapes are explicit: images are C x H x W,
// token sequences are L x C, and nothing broadcasts except scalar factors.

#include <random>

#include "rcdt/mask.hpp"
#include "rcdt/tensor.hpp"

namespace rcdt {

// Elementwise, operands of identical shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor relu(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// Same values under a new shape with the same element count.
Tensor reshape(const Tensor& a, Shape shape);
Tensor transpose(const Tensor& a);

Tensor matmul(const Tensor& a, const Tensor& b);
// x (m x in) times w^T (w is out x in) plus bias (out); bias may be undefined.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

// Probability vectors along the last axis, max-subtracted for stability.
Tensor softmax_lastdim(const Tensor& x);

// Rows divided by max(||row||_2, eps).
Tensor l2_normalize_rows(const Tensor& x, double eps = 1e-12);

// Per-row normalization of an m x d matrix with d-element affine parameters.
Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// Zero-padded "same" cross-correlation of a C_in x H x W image with
// C_out x C_in x k x k weights, k in {1, 3}, stride in {1, 2}. Output extent is
// ceil(H / stride). Bias may be undefined.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride);

// Group normalization over C x H x W with per-channel affine parameters.
Tensor group_norm(const Tensor& x, int groups, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// Bilinear upsampling by a power-of-two factor, half-pixel centres
// (align_corners = false).
Tensor bilinear_resize(const Tensor& x, int factor);

Tensor concat_channels(const Tensor& a, const Tensor& b);

// C x H x W feature map <-> (H*W) x C token sequence (row-major positions).
Tensor flatten_tokens(const Tensor& x);
Tensor unflatten_tokens(const Tensor& tokens, int h, int w);

// Inverted dropout: zeroes with probability p and rescales survivors by
// 1 / (1 - p) when training; identity otherwise.
Tensor dropout(const Tensor& x, double p, std::mt19937_64& rng, bool training);

// Mean over pixels of -log softmax probability of the labelled class.
// logits is K x H x W, labels in [0, K).
Tensor cross_entropy(const Tensor& logits, const Mask& gt);

// 1 - (2 sum(p g) + eps) / (sum(p) + sum(g) + eps) on the foreground (class 1)
// softmax probability.
Tensor dice_loss(const Tensor& logits, const Mask& gt, double eps = 1.0);

}  // namespace rcdt
