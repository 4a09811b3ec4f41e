#pragma once

// Multi-scale dice + cross-entropy objective with deep supervision switches.

#include <span>
#include <vector>

#include "rcdt/config.hpp"
#include "rcdt/mask.hpp"
#include "rcdt/tensor.hpp"

namespace rcdt {

// One prediction's loss terms; a disabled term is carried as 0.
struct ScaleLoss {
    double dice = 0.0;
    double ce = 0.0;
};

// total == sum over terms of (dice + alpha * ce). Terms are the auxiliary
// scales (coarse to fine) followed by the final output when it is included.
struct LossReport {
    double total = 0.0;
    std::vector<double> ce;
    std::vector<double> dice;
    double alpha = 0.4;
};

// The weighted sum for already-evaluated terms.
double combine_losses(std::span<const ScaleLoss> terms, double alpha);

struct LossResult {
    Tensor total;  // differentiable scalar
    LossReport report;
};

// aux_logits: exactly three K x h x w predictions (strides 32, 16, 8);
// final_logits: K x H x W. The ground truth is resized to each auxiliary
// scale by nearest neighbour.
LossResult total_loss(std::span<const Tensor> aux_logits, const Tensor& final_logits, const Mask& gt, double alpha,
                      const DeepSupervision& flags, double dice_eps = 1.0);

}  // namespace rcdt
