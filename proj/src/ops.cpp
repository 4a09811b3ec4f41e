#include "rcdt/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rcdt/errors.hpp"
#include "rcdt/kernels.hpp"

namespace rcdt {

using detail::grad_target;
using detail::make_result;
using kernels::MatView;

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
}

void require_rank(const Tensor& a, int rank, const char* op) {
    if (a.rank() != rank)
        throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                             shape_str(a.shape()));
}

void accumulate(std::span<double> dst, std::span<const double> src, double factor = 1.0) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += factor * src[i];
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
    return make_result(a.shape(), std::move(out), "add", {a, b}, [](const Node& self) {
        if (auto g = grad_target(self, 0); !g.empty()) accumulate(g, self.grad);
        if (auto g = grad_target(self, 1); !g.empty()) accumulate(g, self.grad);
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
    return make_result(a.shape(), std::move(out), "sub", {a, b}, [](const Node& self) {
        if (auto g = grad_target(self, 0); !g.empty()) accumulate(g, self.grad);
        if (auto g = grad_target(self, 1); !g.empty()) accumulate(g, self.grad, -1.0);
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
    return make_result(a.shape(), std::move(out), "mul", {a, b}, [](const Node& self) {
        const auto& av = self.parents[0]->data;
        const auto& bv = self.parents[1]->data;
        if (auto g = grad_target(self, 0); !g.empty())
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bv[i];
        if (auto g = grad_target(self, 1); !g.empty())
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * av[i];
    });
}

Tensor scale(const Tensor& a, double factor) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
    return make_result(a.shape(), std::move(out), "scale", {a}, [factor](const Node& self) {
        if (auto g = grad_target(self, 0); !g.empty()) accumulate(g, self.grad, factor);
    });
}

Tensor relu(const Tensor& a) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
    return make_result(a.shape(), std::move(out), "relu", {a}, [](const Node& self) {
        if (auto g = grad_target(self, 0); !g.empty())
            for (std::size_t i = 0; i < g.size(); ++i)
                if (self.data[i] > 0.0) g[i] += self.grad[i];
    });
}

Tensor sum(const Tensor& a) {
    const double total = std::accumulate(a.data().begin(), a.data().end(), 0.0);
    return make_result(Shape{1}, {total}, "sum", {a}, [](const Node& self) {
        if (auto g = grad_target(self, 0); !g.empty())
            for (auto& v : g) v += self.grad[0];
    });
}

Tensor mean(const Tensor& a) {
    if (a.numel() == 0) throw DimensionError("mean of empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (numel(shape) != a.numel())
        throw DimensionError("reshape: " + shape_str(a.shape()) + " cannot become " + shape_str(shape));
    std::vector<double> out(a.data().begin(), a.data().end());
    return make_result(std::move(shape), std::move(out), "reshape", {a}, [](const Node& self) {
        if (auto g = grad_target(self, 0); !g.empty()) accumulate(g, self.grad);
    });
}

Tensor transpose(const Tensor& a) {
    require_rank(a, 2, "transpose");
    const int m = a.dim(0), n = a.dim(1);
    std::vector<double> out(a.numel());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(j) * m + i] = a[static_cast<std::size_t>(i) * n + j];
    return make_result(Shape{n, m}, std::move(out), "transpose", {a}, [m, n](const Node& self) {
        if (auto g = grad_target(self, 0); !g.empty())
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    g[static_cast<std::size_t>(i) * n + j] += self.grad[static_cast<std::size_t>(j) * m + i];
    });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k)
        throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " @ " +
                             shape_str(b.shape()));
    std::vector<double> out(static_cast<std::size_t>(m) * n);
    kernels::gemm(MatView{a.data(), m, k}, MatView{b.data(), k, n}, out);
    return make_result(Shape{m, n}, std::move(out), "matmul", {a, b}, [m, k, n](const Node& self) {
        const MatView dy{self.grad, m, n};
        if (auto g = grad_target(self, 0); !g.empty())
            kernels::gemm(dy, MatView{self.parents[1]->data, k, n}.t(), g, 1.0);
        if (auto g = grad_target(self, 1); !g.empty())
            kernels::gemm(MatView{self.parents[0]->data, m, k}.t(), dy, g, 1.0);
    });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
    require_rank(x, 2, "linear");
    require_rank(w, 2, "linear");
    const int m = x.dim(0), in = x.dim(1), out_dim = w.dim(0);
    if (w.dim(1) != in)
        throw DimensionError("linear: input " + shape_str(x.shape()) + " vs weight " + shape_str(w.shape()));
    const bool has_bias = bias.defined();
    if (has_bias && bias.numel() != static_cast<std::size_t>(out_dim))
        throw DimensionError("linear: bias " + shape_str(bias.shape()) + " vs weight " + shape_str(w.shape()));
    std::vector<double> out(static_cast<std::size_t>(m) * out_dim);
    kernels::gemm(MatView{x.data(), m, in}, MatView{w.data(), out_dim, in}.t(), out);
    if (has_bias)
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < out_dim; ++j) out[static_cast<std::size_t>(i) * out_dim + j] += bias[j];
    auto backward = [m, in, out_dim, has_bias](const Node& self) {
        const MatView dy{self.grad, m, out_dim};
        if (auto g = grad_target(self, 0); !g.empty())
            kernels::gemm(dy, MatView{self.parents[1]->data, out_dim, in}, g, 1.0);
        if (auto g = grad_target(self, 1); !g.empty())
            kernels::gemm(dy.t(), MatView{self.parents[0]->data, m, in}, g, 1.0);
        if (has_bias)
            if (auto g = grad_target(self, 2); !g.empty())
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < out_dim; ++j) g[j] += self.grad[static_cast<std::size_t>(i) * out_dim + j];
    };
    if (has_bias) return make_result(Shape{m, out_dim}, std::move(out), "linear", {x, w, bias}, backward);
    return make_result(Shape{m, out_dim}, std::move(out), "linear", {x, w}, backward);
}

Tensor softmax_lastdim(const Tensor& x) {
    if (x.rank() < 1 || x.dim(-1) < 1) throw DimensionError("softmax_lastdim: empty last axis");
    const int n = x.dim(-1);
    const std::size_t rows = x.numel() / n;
    std::vector<double> out(x.numel());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* src = x.data().data() + r * n;
        double* dst = out.data() + r * n;
        const double mx = *std::max_element(src, src + n);
        double z = 0.0;
        for (int j = 0; j < n; ++j) z += (dst[j] = std::exp(src[j] - mx));
        for (int j = 0; j < n; ++j) dst[j] /= z;
    }
    return make_result(x.shape(), std::move(out), "softmax_lastdim", {x}, [n, rows](const Node& self) {
        auto g = grad_target(self, 0);
        if (g.empty()) return;
        for (std::size_t r = 0; r < rows; ++r) {
            const double* y = self.data.data() + r * n;
            const double* dy = self.grad.data() + r * n;
            double dot = 0.0;
            for (int j = 0; j < n; ++j) dot += y[j] * dy[j];
            for (int j = 0; j < n; ++j) g[r * n + j] += y[j] * (dy[j] - dot);
        }
    });
}

Tensor l2_normalize_rows(const Tensor& x, double eps) {
    require_rank(x, 2, "l2_normalize_rows");
    if (!(eps > 0.0)) throw ConfigError("l2_normalize_rows: eps must be positive");
    const int m = x.dim(0), d = x.dim(1);
    std::vector<double> out(x.numel());
    std::vector<double> denom(m);
    for (int i = 0; i < m; ++i) {
        const double* row = x.data().data() + static_cast<std::size_t>(i) * d;
        double sq = 0.0;
        for (int j = 0; j < d; ++j) sq += row[j] * row[j];
        denom[i] = std::max(std::sqrt(sq), eps);
        for (int j = 0; j < d; ++j) out[static_cast<std::size_t>(i) * d + j] = row[j] / denom[i];
    }
    return make_result(x.shape(), std::move(out), "l2_normalize_rows", {x},
                       [m, d, eps, denom = std::move(denom)](const Node& self) {
                           auto g = grad_target(self, 0);
                           if (g.empty()) return;
                           for (int i = 0; i < m; ++i) {
                               const std::size_t off = static_cast<std::size_t>(i) * d;
                               const double* y = self.data.data() + off;
                               const double* dy = self.grad.data() + off;
                               if (denom[i] > eps) {
                                   double dot = 0.0;
                                   for (int j = 0; j < d; ++j) dot += y[j] * dy[j];
                                   for (int j = 0; j < d; ++j) g[off + j] += (dy[j] - y[j] * dot) / denom[i];
                               } else {
                                   for (int j = 0; j < d; ++j) g[off + j] += dy[j] / eps;
                               }
                           }
                       });
}

Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    require_rank(x, 2, "layer_norm_rows");
    const int m = x.dim(0), d = x.dim(1);
    if (gamma.numel() != static_cast<std::size_t>(d) || beta.numel() != static_cast<std::size_t>(d))
        throw DimensionError("layer_norm_rows: affine parameters " + shape_str(gamma.shape()) + "/" +
                             shape_str(beta.shape()) + " for rows of width " + std::to_string(d));
    std::vector<double> xhat(x.numel());
    std::vector<double> inv_std(m);
    std::vector<double> out(x.numel());
    for (int i = 0; i < m; ++i) {
        const std::size_t off = static_cast<std::size_t>(i) * d;
        double mu = 0.0;
        for (int j = 0; j < d; ++j) mu += x[off + j];
        mu /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) var += (x[off + j] - mu) * (x[off + j] - mu);
        var /= d;
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        for (int j = 0; j < d; ++j) {
            xhat[off + j] = (x[off + j] - mu) * inv_std[i];
            out[off + j] = gamma[j] * xhat[off + j] + beta[j];
        }
    }
    return make_result(
        x.shape(), std::move(out), "layer_norm_rows", {x, gamma, beta},
        [m, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](const Node& self) {
            const auto& gam = self.parents[1]->data;
            auto gx = grad_target(self, 0);
            auto gg = grad_target(self, 1);
            auto gb = grad_target(self, 2);
            for (int i = 0; i < m; ++i) {
                const std::size_t off = static_cast<std::size_t>(i) * d;
                double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                for (int j = 0; j < d; ++j) {
                    const double dy = self.grad[off + j];
                    if (!gg.empty()) gg[j] += dy * xhat[off + j];
                    if (!gb.empty()) gb[j] += dy;
                    const double dxh = dy * gam[j];
                    mean_dxhat += dxh;
                    mean_dxhat_xhat += dxh * xhat[off + j];
                }
                if (gx.empty()) continue;
                mean_dxhat /= d;
                mean_dxhat_xhat /= d;
                for (int j = 0; j < d; ++j) {
                    const double dxh = self.grad[off + j] * gam[j];
                    gx[off + j] += inv_std[i] * (dxh - mean_dxhat - xhat[off + j] * mean_dxhat_xhat);
                }
            }
        });
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride) {
    require_rank(x, 3, "conv2d");
    require_rank(weight, 4, "conv2d");
    const int cin = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int cout = weight.dim(0), kernel = weight.dim(2);
    if (weight.dim(1) != cin)
        throw DimensionError("conv2d: input " + shape_str(x.shape()) + " vs weight " + shape_str(weight.shape()));
    if ((kernel != 1 && kernel != 3) || weight.dim(3) != kernel)
        throw ConfigError("conv2d: kernel must be 1x1 or 3x3, got weight " + shape_str(weight.shape()));
    if (stride != 1 && stride != 2) throw ConfigError("conv2d: stride must be 1 or 2");
    if (h < 1 || w < 1) throw DimensionError("conv2d: empty input " + shape_str(x.shape()));
    const bool has_bias = bias.defined();
    if (has_bias && bias.numel() != static_cast<std::size_t>(cout))
        throw DimensionError("conv2d: bias " + shape_str(bias.shape()) + " for " + std::to_string(cout) +
                             " output channels");
    const int pad = kernel / 2;
    const int oh = kernels::conv_out_extent(h, kernel, stride, pad);
    const int ow = kernels::conv_out_extent(w, kernel, stride, pad);
    const int krows = cin * kernel * kernel;
    const int plane = oh * ow;

    // 1x1 stride-1 convolutions use the input directly as the column matrix.
    const bool direct = kernel == 1 && stride == 1;
    std::vector<double> col;
    if (!direct) {
        col.resize(static_cast<std::size_t>(krows) * plane);
        kernels::im2col(x.data(), cin, h, w, kernel, stride, pad, col);
    }
    std::vector<double> out(static_cast<std::size_t>(cout) * plane);
    kernels::gemm(MatView{weight.data(), cout, krows}, MatView{direct ? x.data() : col, krows, plane}, out);
    if (has_bias)
        for (int c = 0; c < cout; ++c)
            for (int p = 0; p < plane; ++p) out[static_cast<std::size_t>(c) * plane + p] += bias[c];

    auto backward = [=, col = std::move(col)](const Node& self) {
        const MatView dy{self.grad, cout, plane};
        const std::span<const double> cols = direct ? std::span<const double>(self.parents[0]->data) : col;
        if (auto g = grad_target(self, 1); !g.empty()) kernels::gemm(dy, MatView{cols, krows, plane}.t(), g, 1.0);
        if (has_bias)
            if (auto g = grad_target(self, 2); !g.empty())
                for (int c = 0; c < cout; ++c) {
                    double s = 0.0;
                    for (int p = 0; p < plane; ++p) s += self.grad[static_cast<std::size_t>(c) * plane + p];
                    g[c] += s;
                }
        if (auto g = grad_target(self, 0); !g.empty()) {
            const MatView wt = MatView{self.parents[1]->data, cout, krows}.t();
            if (direct) {
                kernels::gemm(wt, dy, g, 1.0);
            } else {
                std::vector<double> dcol(static_cast<std::size_t>(krows) * plane);
                kernels::gemm(wt, dy, dcol);
                kernels::col2im(dcol, cin, h, w, kernel, stride, pad, g);
            }
        }
    };
    if (has_bias) return make_result(Shape{cout, oh, ow}, std::move(out), "conv2d", {x, weight, bias}, backward);
    return make_result(Shape{cout, oh, ow}, std::move(out), "conv2d", {x, weight}, backward);
}

Tensor group_norm(const Tensor& x, int groups, const Tensor& gamma, const Tensor& beta, double eps) {
    require_rank(x, 3, "group_norm");
    const int c = x.dim(0);
    const std::size_t plane = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
    if (groups <= 0 || c % groups != 0)
        throw ConfigError("group_norm: " + std::to_string(c) + " channels not divisible into " +
                          std::to_string(groups) + " groups");
    if (gamma.numel() != static_cast<std::size_t>(c) || beta.numel() != static_cast<std::size_t>(c))
        throw DimensionError("group_norm: affine parameters do not match " + std::to_string(c) + " channels");
    const int per_group = c / groups;
    const std::size_t group_size = per_group * plane;
    std::vector<double> xhat(x.numel());
    std::vector<double> inv_std(groups);
    std::vector<double> out(x.numel());
    for (int g = 0; g < groups; ++g) {
        const std::size_t off = g * group_size;
        double mu = 0.0;
        for (std::size_t i = 0; i < group_size; ++i) mu += x[off + i];
        mu /= static_cast<double>(group_size);
        double var = 0.0;
        for (std::size_t i = 0; i < group_size; ++i) var += (x[off + i] - mu) * (x[off + i] - mu);
        var /= static_cast<double>(group_size);
        inv_std[g] = 1.0 / std::sqrt(var + eps);
        for (std::size_t i = 0; i < group_size; ++i) {
            const int ch = g * per_group + static_cast<int>(i / plane);
            xhat[off + i] = (x[off + i] - mu) * inv_std[g];
            out[off + i] = gamma[ch] * xhat[off + i] + beta[ch];
        }
    }
    return make_result(
        x.shape(), std::move(out), "group_norm", {x, gamma, beta},
        [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](const Node& self) {
            const auto& gam = self.parents[1]->data;
            auto gx = grad_target(self, 0);
            auto gg = grad_target(self, 1);
            auto gb = grad_target(self, 2);
            for (int g = 0; g < groups; ++g) {
                const std::size_t off = g * group_size;
                double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                for (std::size_t i = 0; i < group_size; ++i) {
                    const int ch = g * per_group + static_cast<int>(i / plane);
                    const double dy = self.grad[off + i];
                    if (!gg.empty()) gg[ch] += dy * xhat[off + i];
                    if (!gb.empty()) gb[ch] += dy;
                    const double dxh = dy * gam[ch];
                    mean_dxhat += dxh;
                    mean_dxhat_xhat += dxh * xhat[off + i];
                }
                if (gx.empty()) continue;
                mean_dxhat /= static_cast<double>(group_size);
                mean_dxhat_xhat /= static_cast<double>(group_size);
                for (std::size_t i = 0; i < group_size; ++i) {
                    const int ch = g * per_group + static_cast<int>(i / plane);
                    const double dxh = self.grad[off + i] * gam[ch];
                    gx[off + i] += inv_std[g] * (dxh - mean_dxhat - xhat[off + i] * mean_dxhat_xhat);
                }
            }
        });
}

namespace {

// Source taps for one output coordinate under half-pixel-centre sampling.
struct Tap {
    int lo, hi;
    double frac;
};

std::vector<Tap> bilinear_taps(int in, int factor) {
    std::vector<Tap> taps(static_cast<std::size_t>(in) * factor);
    for (int o = 0; o < in * factor; ++o) {
        double src = (o + 0.5) / factor - 0.5;
        if (src < 0.0) src = 0.0;
        const int lo = std::min(static_cast<int>(src), in - 1);
        const int hi = std::min(lo + 1, in - 1);
        taps[o] = {lo, hi, src - lo};
    }
    return taps;
}

}  // namespace

Tensor bilinear_resize(const Tensor& x, int factor) {
    require_rank(x, 3, "bilinear_resize");
    if (factor < 1 || (factor & (factor - 1)) != 0)
        throw ConfigError("bilinear_resize: factor must be a power of two, got " + std::to_string(factor));
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int oh = h * factor, ow = w * factor;
    auto ty = bilinear_taps(h, factor);
    auto tx = bilinear_taps(w, factor);
    std::vector<double> out(static_cast<std::size_t>(c) * oh * ow);
    for (int ch = 0; ch < c; ++ch) {
        const double* src = x.data().data() + static_cast<std::size_t>(ch) * h * w;
        double* dst = out.data() + static_cast<std::size_t>(ch) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
            const Tap& a = ty[oy];
            for (int ox = 0; ox < ow; ++ox) {
                const Tap& b = tx[ox];
                const double top = src[a.lo * w + b.lo] * (1 - b.frac) + src[a.lo * w + b.hi] * b.frac;
                const double bot = src[a.hi * w + b.lo] * (1 - b.frac) + src[a.hi * w + b.hi] * b.frac;
                dst[oy * ow + ox] = top * (1 - a.frac) + bot * a.frac;
            }
        }
    }
    return make_result(Shape{c, oh, ow}, std::move(out), "bilinear_resize", {x},
                       [=, ty = std::move(ty), tx = std::move(tx)](const Node& self) {
                           auto g = grad_target(self, 0);
                           if (g.empty()) return;
                           for (int ch = 0; ch < c; ++ch) {
                               double* dsrc = g.data() + static_cast<std::size_t>(ch) * h * w;
                               const double* dy = self.grad.data() + static_cast<std::size_t>(ch) * oh * ow;
                               for (int oy = 0; oy < oh; ++oy) {
                                   const Tap& a = ty[oy];
                                   for (int ox = 0; ox < ow; ++ox) {
                                       const Tap& b = tx[ox];
                                       const double v = dy[oy * ow + ox];
                                       dsrc[a.lo * w + b.lo] += v * (1 - a.frac) * (1 - b.frac);
                                       dsrc[a.lo * w + b.hi] += v * (1 - a.frac) * b.frac;
                                       dsrc[a.hi * w + b.lo] += v * a.frac * (1 - b.frac);
                                       dsrc[a.hi * w + b.hi] += v * a.frac * b.frac;
                                   }
                               }
                           }
                       });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    require_rank(a, 3, "concat_channels");
    require_rank(b, 3, "concat_channels");
    if (a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2))
        throw DimensionError("concat_channels: spatial mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    std::vector<double> out;
    out.reserve(a.numel() + b.numel());
    out.insert(out.end(), a.data().begin(), a.data().end());
    out.insert(out.end(), b.data().begin(), b.data().end());
    const std::size_t split = a.numel();
    return make_result(Shape{a.dim(0) + b.dim(0), a.dim(1), a.dim(2)}, std::move(out), "concat_channels", {a, b},
                       [split](const Node& self) {
                           const std::span<const double> dy(self.grad);
                           if (auto g = grad_target(self, 0); !g.empty()) accumulate(g, dy.first(split));
                           if (auto g = grad_target(self, 1); !g.empty()) accumulate(g, dy.subspan(split));
                       });
}

Tensor flatten_tokens(const Tensor& x) {
    require_rank(x, 3, "flatten_tokens");
    return transpose(reshape(x, Shape{x.dim(0), x.dim(1) * x.dim(2)}));
}

Tensor unflatten_tokens(const Tensor& tokens, int h, int w) {
    require_rank(tokens, 2, "unflatten_tokens");
    if (tokens.dim(0) != h * w)
        throw DimensionError("unflatten_tokens: " + shape_str(tokens.shape()) + " is not " + std::to_string(h) +
                             "x" + std::to_string(w) + " positions");
    return reshape(transpose(tokens), Shape{tokens.dim(1), h, w});
}

Tensor dropout(const Tensor& x, double p, std::mt19937_64& rng, bool training) {
    if (p < 0.0 || p >= 1.0) throw ConfigError("dropout: probability must lie in [0, 1)");
    if (!training || p == 0.0) return x;
    std::bernoulli_distribution keep(1.0 - p);
    const double factor = 1.0 / (1.0 - p);
    std::vector<double> multiplier(x.numel());
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        multiplier[i] = keep(rng) ? factor : 0.0;
        out[i] = x[i] * multiplier[i];
    }
    return make_result(x.shape(), std::move(out), "dropout", {x},
                       [multiplier = std::move(multiplier)](const Node& self) {
                           if (auto g = grad_target(self, 0); !g.empty())
                               for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * multiplier[i];
                       });
}

namespace {

void require_logits_for(const Tensor& logits, const Mask& gt, const char* op) {
    require_rank(logits, 3, op);
    if (logits.dim(1) != gt.height || logits.dim(2) != gt.width)
        throw DimensionError(std::string(op) + ": logits " + shape_str(logits.shape()) + " vs mask " +
                             std::to_string(gt.height) + "x" + std::to_string(gt.width));
    if (logits.dim(0) < 2) throw DimensionError(std::string(op) + ": need at least two classes");
}

// Per-pixel softmax over the class axis of a K x H x W tensor.
std::vector<double> class_softmax(const Tensor& logits) {
    const int k = logits.dim(0);
    const std::size_t plane = static_cast<std::size_t>(logits.dim(1)) * logits.dim(2);
    std::vector<double> prob(logits.numel());
    for (std::size_t p = 0; p < plane; ++p) {
        double mx = logits[p];
        for (int c = 1; c < k; ++c) mx = std::max(mx, logits[c * plane + p]);
        double z = 0.0;
        for (int c = 0; c < k; ++c) z += (prob[c * plane + p] = std::exp(logits[c * plane + p] - mx));
        for (int c = 0; c < k; ++c) prob[c * plane + p] /= z;
    }
    return prob;
}

}  // namespace

Tensor cross_entropy(const Tensor& logits, const Mask& gt) {
    require_logits_for(logits, gt, "cross_entropy");
    const int k = logits.dim(0);
    const std::size_t plane = gt.size();
    double total = 0.0;
    for (std::size_t p = 0; p < plane; ++p) {
        const int label = gt.values[p];
        if (label >= k) throw InputError("cross_entropy: label " + std::to_string(label) + " out of range");
        double mx = logits[p];
        for (int c = 1; c < k; ++c) mx = std::max(mx, logits[c * plane + p]);
        double z = 0.0;
        for (int c = 0; c < k; ++c) z += std::exp(logits[c * plane + p] - mx);
        total += std::log(z) + mx - logits[label * plane + p];
    }
    const double loss = total / static_cast<double>(plane);
    return make_result(Shape{1}, {loss}, "cross_entropy", {logits},
                       [k, plane, labels = gt.values](const Node& self) {
                           auto g = grad_target(self, 0);
                           if (g.empty()) return;
                           const Tensor parent(self.parents[0]);
                           const auto prob = class_softmax(parent);
                           const double scale_ = self.grad[0] / static_cast<double>(plane);
                           for (std::size_t p = 0; p < plane; ++p)
                               for (int c = 0; c < k; ++c)
                                   g[c * plane + p] += scale_ * (prob[c * plane + p] - (labels[p] == c ? 1.0 : 0.0));
                       });
}

Tensor dice_loss(const Tensor& logits, const Mask& gt, double eps) {
    require_logits_for(logits, gt, "dice_loss");
    const int k = logits.dim(0);
    const std::size_t plane = gt.size();
    auto prob = class_softmax(logits);
    double inter = 0.0, psum = 0.0, gsum = 0.0;
    for (std::size_t p = 0; p < plane; ++p) {
        const double fg = prob[plane + p];
        const double g = gt.values[p] ? 1.0 : 0.0;
        inter += fg * g;
        psum += fg;
        gsum += g;
    }
    const double num = 2.0 * inter + eps;
    const double den = psum + gsum + eps;
    const double loss = 1.0 - num / den;
    return make_result(Shape{1}, {loss}, "dice_loss", {logits},
                       [=, prob = std::move(prob), labels = gt.values](const Node& self) {
                           auto g = grad_target(self, 0);
                           if (g.empty()) return;
                           for (std::size_t p = 0; p < plane; ++p) {
                               const double gv = labels[p] ? 1.0 : 0.0;
                               // d loss / d p_fg at this pixel.
                               const double dp = -(2.0 * gv * den - num) / (den * den) * self.grad[0];
                               const double fg = prob[plane + p];
                               for (int c = 0; c < k; ++c) {
                                   const double jac = fg * ((c == 1 ? 1.0 : 0.0) - prob[c * plane + p]);
                                   g[c * plane + p] += dp * jac;
                               }
                           }
                       });
}

std::size_t Mask::count() const {
    return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](auto v) { return v != 0; }));
}

Mask resize_nearest(const Mask& m, int h, int w) {
    Mask out(h, w);
    for (int y = 0; y < h; ++y) {
        const int sy = std::min(m.height - 1, static_cast<int>(std::floor((y + 0.5) * m.height / h)));
        for (int x = 0; x < w; ++x) {
            const int sx = std::min(m.width - 1, static_cast<int>(std::floor((x + 0.5) * m.width / w)));
            out.at(y, x) = m.at(sy, sx);
        }
    }
    return out;
}

}  // namespace rcdt
