#include "rcdt/kernels.hpp"

#include <algorithm>
#include <cstring>
#include <vector>

namespace rcdt::kernels {

namespace {

constexpr int kMR = 4;
constexpr int kNR = 16;

// Packs the logical m x k matrix into contiguous row-major storage.
void pack_a(const MatView& a, std::vector<double>& out) {
    const int m = a.rows, k = a.cols;
    out.resize(static_cast<std::size_t>(m) * k);
    if (!a.transposed) {
        std::copy_n(a.data.begin(), out.size(), out.begin());
        return;
    }
    for (int r = 0; r < m; ++r)
        for (int p = 0; p < k; ++p) out[static_cast<std::size_t>(r) * k + p] = a.at(r, p);
}

// Packs the logical k x n matrix into column panels of width kNR, each panel
// stored as k rows of kNR values, zero padded on the right edge.
void pack_b(const MatView& b, std::vector<double>& out) {
    const int k = b.rows, n = b.cols;
    const int panels = (n + kNR - 1) / kNR;
    out.assign(static_cast<std::size_t>(panels) * k * kNR, 0.0);
#pragma omp parallel for schedule(static) if (static_cast<long>(k) * n > 32768)
    for (int jp = 0; jp < panels; ++jp) {
        double* dst = out.data() + static_cast<std::size_t>(jp) * k * kNR;
        const int j0 = jp * kNR;
        const int width = std::min(kNR, n - j0);
        for (int p = 0; p < k; ++p) {
            double* row = dst + static_cast<std::size_t>(p) * kNR;
            if (!b.transposed) {
                const double* src = b.data.data() + static_cast<std::size_t>(p) * n + j0;
                for (int j = 0; j < width; ++j) row[j] = src[j];
            } else {
                for (int j = 0; j < width; ++j) row[j] = b.at(p, j0 + j);
            }
        }
    }
}

template <int Rows>
inline void micro_kernel(const double* a, int k, const double* panel, double* acc) {
    double sums[Rows][kNR] = {};
    for (int p = 0; p < k; ++p) {
        const double* brow = panel + static_cast<std::size_t>(p) * kNR;
        for (int r = 0; r < Rows; ++r) {
            const double av = a[static_cast<std::size_t>(r) * k + p];
#pragma omp simd
            for (int j = 0; j < kNR; ++j) sums[r][j] += av * brow[j];
        }
    }
    for (int r = 0; r < Rows; ++r)
        for (int j = 0; j < kNR; ++j) acc[r * kNR + j] = sums[r][j];
}

inline void store_block(const double* acc, int rows, int i0, int j0, int width, int n,
                        double beta, double* c) {
    for (int r = 0; r < rows; ++r) {
        double* crow = c + static_cast<std::size_t>(i0 + r) * n + j0;
        const double* arow = acc + r * kNR;
        if (beta == 0.0) {
            for (int j = 0; j < width; ++j) crow[j] = arow[j];
        } else {
            for (int j = 0; j < width; ++j) crow[j] = arow[j] + beta * crow[j];
        }
    }
}

}  // namespace

void gemm(const MatView& a, const MatView& b, std::span<double> c, double beta) {
    const int m = a.rows, k = a.cols, n = b.cols;
    if (m == 0 || n == 0) return;
    if (k == 0) {
        for (auto& v : c) v = beta == 0.0 ? 0.0 : beta * v;
        return;
    }
    thread_local std::vector<double> packed_a;
    thread_local std::vector<double> packed_b;
    pack_a(a, packed_a);
    pack_b(b, packed_b);
    const double* pa = packed_a.data();
    const double* pb = packed_b.data();
    double* pc = c.data();
    const int panels = (n + kNR - 1) / kNR;
    const long work = static_cast<long>(m) * n * k;

#pragma omp parallel for schedule(static) if (work > 200000)
    for (int jp = 0; jp < panels; ++jp) {
        alignas(64) double acc[kMR * kNR];
        const double* panel = pb + static_cast<std::size_t>(jp) * k * kNR;
        const int j0 = jp * kNR;
        const int width = std::min(kNR, n - j0);
        int i = 0;
        for (; i + kMR <= m; i += kMR) {
            micro_kernel<kMR>(pa + static_cast<std::size_t>(i) * k, k, panel, acc);
            store_block(acc, kMR, i, j0, width, n, beta, pc);
        }
        for (; i < m; ++i) {
            micro_kernel<1>(pa + static_cast<std::size_t>(i) * k, k, panel, acc);
            store_block(acc, 1, i, j0, width, n, beta, pc);
        }
    }
}

void im2col(std::span<const double> x, int channels, int h, int w, int kernel, int stride,
            int pad, std::span<double> col) {
    const int oh = conv_out_extent(h, kernel, stride, pad);
    const int ow = conv_out_extent(w, kernel, stride, pad);
    const int rows = channels * kernel * kernel;
    const std::size_t plane = static_cast<std::size_t>(oh) * ow;
#pragma omp parallel for schedule(static) if (rows * plane > 65536)
    for (int row = 0; row < rows; ++row) {
        const int ch = row / (kernel * kernel);
        const int ky = (row / kernel) % kernel;
        const int kx = row % kernel;
        double* dst = col.data() + row * plane;
        const double* src = x.data() + static_cast<std::size_t>(ch) * h * w;
        for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride - pad + ky;
            double* drow = dst + static_cast<std::size_t>(oy) * ow;
            if (iy < 0 || iy >= h) {
                std::fill_n(drow, ow, 0.0);
                continue;
            }
            const double* srow = src + static_cast<std::size_t>(iy) * w;
            for (int ox = 0; ox < ow; ++ox) {
                const int ix = ox * stride - pad + kx;
                drow[ox] = (ix >= 0 && ix < w) ? srow[ix] : 0.0;
            }
        }
    }
}

void col2im(std::span<const double> col, int channels, int h, int w, int kernel, int stride,
            int pad, std::span<double> x) {
    const int oh = conv_out_extent(h, kernel, stride, pad);
    const int ow = conv_out_extent(w, kernel, stride, pad);
    const std::size_t plane = static_cast<std::size_t>(oh) * ow;
    const int kk = kernel * kernel;
    // Each channel's image rows are only touched by that channel's column rows.
#pragma omp parallel for schedule(static) if (channels * kk * plane > 65536)
    for (int ch = 0; ch < channels; ++ch) {
        double* dst = x.data() + static_cast<std::size_t>(ch) * h * w;
        for (int off = 0; off < kk; ++off) {
            const int ky = off / kernel;
            const int kx = off % kernel;
            const double* src = col.data() + (static_cast<std::size_t>(ch) * kk + off) * plane;
            for (int oy = 0; oy < oh; ++oy) {
                const int iy = oy * stride - pad + ky;
                if (iy < 0 || iy >= h) continue;
                double* drow = dst + static_cast<std::size_t>(iy) * w;
                const double* srow = src + static_cast<std::size_t>(oy) * ow;
                for (int ox = 0; ox < ow; ++ox) {
                    const int ix = ox * stride - pad + kx;
                    if (ix >= 0 && ix < w) drow[ix] += srow[ox];
                }
            }
        }
    }
}

namespace serial {

void gemm(const MatView& a, const MatView& b, std::span<double> c, double beta) {
    const int m = a.rows, k = a.cols, n = b.cols;
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double sum = 0.0;
            for (int p = 0; p < k; ++p) sum += a.at(i, p) * b.at(p, j);
            double& out = c[static_cast<std::size_t>(i) * n + j];
            out = beta == 0.0 ? sum : sum + beta * out;
        }
    }
}

void im2col(std::span<const double> x, int channels, int h, int w, int kernel, int stride,
            int pad, std::span<double> col) {
    const int oh = conv_out_extent(h, kernel, stride, pad);
    const int ow = conv_out_extent(w, kernel, stride, pad);
    std::size_t idx = 0;
    for (int ch = 0; ch < channels; ++ch)
        for (int ky = 0; ky < kernel; ++ky)
            for (int kx = 0; kx < kernel; ++kx)
                for (int oy = 0; oy < oh; ++oy)
                    for (int ox = 0; ox < ow; ++ox) {
                        const int iy = oy * stride - pad + ky;
                        const int ix = ox * stride - pad + kx;
                        const bool inside = iy >= 0 && iy < h && ix >= 0 && ix < w;
                        col[idx++] = inside ? x[(static_cast<std::size_t>(ch) * h + iy) * w + ix] : 0.0;
                    }
}

void col2im(std::span<const double> col, int channels, int h, int w, int kernel, int stride,
            int pad, std::span<double> x) {
    const int oh = conv_out_extent(h, kernel, stride, pad);
    const int ow = conv_out_extent(w, kernel, stride, pad);
    std::size_t idx = 0;
    for (int ch = 0; ch < channels; ++ch)
        for (int ky = 0; ky < kernel; ++ky)
            for (int kx = 0; kx < kernel; ++kx)
                for (int oy = 0; oy < oh; ++oy)
                    for (int ox = 0; ox < ow; ++ox) {
                        const int iy = oy * stride - pad + ky;
                        const int ix = ox * stride - pad + kx;
                        if (iy >= 0 && iy < h && ix >= 0 && ix < w)
                            x[(static_cast<std::size_t>(ch) * h + iy) * w + ix] += col[idx];
                        ++idx;
                    }
}

}  // namespace serial

}  // namespace rcdt::kernels
