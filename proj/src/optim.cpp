#include "rcdt/optim.hpp"

#include <cmath>
#include <utility>

#include "rcdt/errors.hpp"

namespace rcdt {

void adamw_update(std::span<double> param, std::span<const double> grad, std::span<double> m, std::span<double> v,
                  long long t, double lr, const AdamWHyper& h) {
    if (grad.size() != param.size() || m.size() != param.size() || v.size() != param.size())
        throw DimensionError("adamw_update: parameter, gradient and moment sizes differ");
    if (t < 1) throw ConfigError("adamw_update: step count starts at 1");
    if (lr < 0) throw ConfigError("adamw_update: negative learning rate");
    const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < param.size(); ++i) {
        param[i] -= lr * h.weight_decay * param[i];
        m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * grad[i];
        v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * grad[i] * grad[i];
        param[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + h.eps);
    }
}

AdamW::AdamW(ParameterStore& store, AdamWHyper hyper, std::function<double(const std::string&)> multiplier)
    : store_(store), hyper_(hyper) {
    for (const auto& p : store_.entries()) {
        multipliers_.push_back(multiplier ? multiplier(p.name) : 1.0);
        m_.emplace_back(p.value.numel(), 0.0);
        v_.emplace_back(p.value.numel(), 0.0);
    }
    applied_.assign(multipliers_.size(), 0.0);
}

void AdamW::step(double lr) {
    const auto& entries = store_.entries();
    if (entries.size() != m_.size()) throw ConfigError("AdamW: parameter set changed after construction");
    for (const auto& p : entries) {
        if (!p.value.has_grad()) continue;
        for (double g : p.value.grad())
            if (!std::isfinite(g)) throw DivergenceError("non-finite gradient in parameter '" + p.name + "'");
    }
    ++t_;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        Tensor value = entries[i].value;
        applied_[i] = lr * multipliers_[i];
        std::vector<double> zero;
        std::span<const double> g;
        if (value.has_grad()) {
            g = std::as_const(value).grad();
        } else {
            zero.assign(value.numel(), 0.0);
            g = zero;
        }
        adamw_update(value.data(), g, m_[i], v_[i], t_, applied_[i], hyper_);
    }
}

double poly_lr(long long iter, long long max_iter, double base, double power) {
    if (max_iter <= 0 || iter < 0 || iter > max_iter)
        throw ConfigError("poly_lr: iteration " + std::to_string(iter) + " outside [0, " + std::to_string(max_iter) +
                          "]");
    return base * std::pow(1.0 - static_cast<double>(iter) / static_cast<double>(max_iter), power);
}

}  // namespace rcdt
