#pragma once

// AdamW with decoupled weight decay, per-parameter learning-rate multipliers
// and the poly schedule.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rcdt/nn.hpp"

namespace rcdt {

struct AdamWHyper {
    double weight_decay = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// One in-place update of a flat parameter at step t >= 1:
//   theta -= lr * wd * theta
//   m = b1 m + (1 - b1) g;  v = b2 v + (1 - b2) g^2
//   theta -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
void adamw_update(std::span<double> param, std::span<const double> grad, std::span<double> m, std::span<double> v,
                  long long t, double lr, const AdamWHyper& hyper);

class AdamW {
   public:
    // multiplier(name) scales the step's lr for that parameter.
    AdamW(ParameterStore& store, AdamWHyper hyper, std::function<double(const std::string&)> multiplier = {});

    // Applies one step with base rate lr to every parameter; parameters that
    // received no gradient are treated as having a zero gradient. A non-finite
    // gradient throws DivergenceError naming the parameter before anything is
    // modified.
    void step(double lr);

    long long steps() const { return t_; }
    // Learning rate the last step used for parameter i (store order).
    double applied_lr(std::size_t i) const { return applied_[i]; }
    double multiplier(std::size_t i) const { return multipliers_[i]; }

   private:
    ParameterStore& store_;
    AdamWHyper hyper_;
    std::vector<double> multipliers_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    std::vector<double> applied_;
    long long t_ = 0;
};

// base * (1 - iter / max_iter)^power, for 0 <= iter <= max_iter.
double poly_lr(long long iter, long long max_iter, double base, double power = 0.9);

}  // namespace rcdt
