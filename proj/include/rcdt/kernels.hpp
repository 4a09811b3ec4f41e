#pragma once

// Dense numeric kernels behind the tensor ops: OpenMP versions plus serial
// references under `serial::`. Each output element is written by one thread
// in a fixed order; results do not depend on the thread count.

#include <cstddef>
#include <span>

namespace rcdt::kernels {

// Logical rows x cols matrix over row-major storage. When `transposed` is set
// the storage holds the cols x rows matrix and the view reads it transposed.
struct MatView {
    std::span<const double> data;
    int rows = 0;
    int cols = 0;
    bool transposed = false;

    double at(int r, int c) const {
        return transposed ? data[static_cast<std::size_t>(c) * rows + r]
                          : data[static_cast<std::size_t>(r) * cols + c];
    }
    MatView t() const { return {data, cols, rows, !transposed}; }
};

// c (a.rows x b.cols, row-major) = a * b + beta * c. With beta == 0 the prior
// contents of c are ignored.
void gemm(const MatView& a, const MatView& b, std::span<double> c, double beta = 0.0);

// Unfolds a channels x h x w image into (channels*kernel*kernel) x (oh*ow)
// columns for a zero-padded cross-correlation.
void im2col(std::span<const double> x, int channels, int h, int w, int kernel, int stride,
            int pad, std::span<double> col);

// Adjoint of im2col: accumulates columns back into x (x is not cleared).
void col2im(std::span<const double> col, int channels, int h, int w, int kernel, int stride,
            int pad, std::span<double> x);

inline int conv_out_extent(int extent, int kernel, int stride, int pad) {
    return (extent + 2 * pad - kernel) / stride + 1;
}

namespace serial {

void gemm(const MatView& a, const MatView& b, std::span<double> c, double beta = 0.0);
void im2col(std::span<const double> x, int channels, int h, int w, int kernel, int stride,
            int pad, std::span<double> col);
void col2im(std::span<const double> col, int channels, int h, int w, int kernel, int stride,
            int pad, std::span<double> x);

}  // namespace serial

}  // namespace rcdt::kernels
