#include "rcdt/loss.hpp"

#include "rcdt/errors.hpp"
#include "rcdt/ops.hpp"

namespace rcdt {

double combine_losses(std::span<const ScaleLoss> terms, double alpha) {
    double total = 0.0;
    for (const auto& t : terms) total += t.dice + alpha * t.ce;
    return total;
}

LossResult total_loss(std::span<const Tensor> aux_logits, const Tensor& final_logits, const Mask& gt, double alpha,
                      const DeepSupervision& flags, double dice_eps) {
    if (aux_logits.size() != 3)
        throw ConfigError("total_loss: expected 3 decoder scales, got " + std::to_string(aux_logits.size()));
    std::vector<Tensor> parts;
    std::vector<ScaleLoss> terms;
    auto add_term = [&](const Tensor& logits, const Mask& target, bool use_ce, bool use_dice) {
        ScaleLoss term;
        if (use_dice) {
            Tensor d = dice_loss(logits, target, dice_eps);
            term.dice = d.item();
            parts.push_back(std::move(d));
        }
        if (use_ce) {
            Tensor c = cross_entropy(logits, target);
            term.ce = c.item();
            parts.push_back(scale(c, alpha));
        }
        terms.push_back(term);
    };
    for (std::size_t s = 0; s < 3; ++s) {
        const Tensor& logits = aux_logits[s];
        if (!flags.ce[s] && !flags.dice[s]) {
            terms.push_back({});
            continue;
        }
        add_term(logits, resize_nearest(gt, logits.dim(1), logits.dim(2)), flags.ce[s], flags.dice[s]);
    }
    if (flags.final_output) add_term(final_logits, gt, true, true);

    LossResult out;
    out.report.alpha = alpha;
    for (const auto& t : terms) {
        out.report.ce.push_back(t.ce);
        out.report.dice.push_back(t.dice);
    }
    out.report.total = combine_losses(terms, alpha);
    if (parts.empty()) {
        out.total = Tensor::scalar(0.0);
        return out;
    }
    Tensor total = parts.front();
    for (std::size_t i = 1; i < parts.size(); ++i) total = add(total, parts[i]);
    out.total = total;
    return out;
}

}  // namespace rcdt
