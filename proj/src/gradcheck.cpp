#include "rcdt/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <utility>

#include "rcdt/errors.hpp"

namespace rcdt {

namespace {

double projected(const DifferentiableFn& fn, std::span<const Tensor> inputs, const std::vector<double>& w) {
    NoGradGuard guard;
    const Tensor y = fn(inputs);
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * y[i];
    return s;
}

}  // namespace

double finite_difference_check(const DifferentiableFn& fn, std::vector<Tensor> inputs, double h,
                               std::uint64_t projection_seed, std::size_t max_elements) {
    for (auto& t : inputs) t.zero_grad();
    const Tensor y = fn(inputs);
    std::mt19937_64 rng(projection_seed);
    std::normal_distribution<double> normal;
    std::vector<double> w(y.numel());
    for (auto& v : w) v = normal(rng);
    backward(y, w);

    std::mt19937_64 pick(projection_seed + 1);
    double worst = 0.0;
    for (auto& t : inputs) {
        if (!t.requires_grad()) continue;
        const std::vector<double> analytic(t.grad().begin(), t.grad().end());
        std::vector<std::size_t> positions(t.numel());
        std::iota(positions.begin(), positions.end(), 0);
        if (max_elements > 0 && positions.size() > max_elements) {
            std::shuffle(positions.begin(), positions.end(), pick);
            positions.resize(max_elements);
        }
        for (const std::size_t j : positions) {
            if (!std::isfinite(analytic[j]))
                throw Error("finite_difference_check: non-finite gradient through op '" + y.op() + "'");
            const double saved = t.data()[j];
            t.data()[j] = saved + h;
            const double up = projected(fn, inputs, w);
            t.data()[j] = saved - h;
            const double down = projected(fn, inputs, w);
            t.data()[j] = saved;
            const double numeric = (up - down) / (2.0 * h);
            worst = std::max(worst, std::abs(analytic[j] - numeric) / std::max(1.0, std::abs(numeric)));
        }
    }
    return worst;
}

std::vector<double> directional_derivative_check(const std::function<Tensor()>& loss, std::vector<Tensor> params,
                                                 double h, std::uint64_t direction_seed) {
    for (auto& t : params) t.zero_grad();
    const Tensor y = loss();
    if (y.numel() != 1) throw DimensionError("directional_derivative_check: loss must be a scalar");
    backward(y);
    auto value = [&] {
        NoGradGuard guard;
        return loss().item();
    };
    std::mt19937_64 rng(direction_seed);
    std::normal_distribution<double> normal;
    std::vector<double> errors;
    for (auto& t : params) {
        std::vector<double> d(t.numel());
        double norm = 0.0;
        for (auto& v : d) {
            v = normal(rng);
            norm += v * v;
        }
        norm = std::sqrt(norm);
        double analytic = 0.0;
        const auto grad = std::as_const(t).grad();
        for (std::size_t j = 0; j < d.size(); ++j) {
            d[j] /= norm;
            if (!std::isfinite(grad[j]))
                throw Error("directional_derivative_check: non-finite gradient through op '" + y.op() + "'");
            analytic += grad[j] * d[j];
        }
        const std::vector<double> saved(t.data().begin(), t.data().end());
        for (std::size_t j = 0; j < d.size(); ++j) t.data()[j] = saved[j] + h * d[j];
        const double up = value();
        for (std::size_t j = 0; j < d.size(); ++j) t.data()[j] = saved[j] - h * d[j];
        const double down = value();
        std::copy(saved.begin(), saved.end(), t.data().begin());
        const double numeric = (up - down) / (2.0 * h);
        errors.push_back(std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric)));
    }
    return errors;
}

}  // namespace rcdt
