#pragma once

// Numeric tensor kernels shared by graph evaluation and the backward pass.

#include "jdf/error.hpp"
#include "jdf/tensor.hpp"

#include <cstddef>
#include <vector>

namespace jdf::kernels {

enum class BinaryOp { Add, Sub, Mul, Div };

/// Numpy-style broadcast of two shapes (right-aligned, extent 1 stretches).
Shape broadcast_shapes(const Shape& a, const Shape& b);

/// Elementwise a (op) b with broadcasting; both operands must share a dtype.
Tensor binary(BinaryOp op, const Tensor& a, const Tensor& b);

Tensor broadcast_to(const Tensor& x, const Shape& shape);
/// Sums `x` over the axes that broadcasting introduced, returning `shape`.
Tensor reduce_to_shape(const Tensor& x, const Shape& shape);

Tensor scale(const Tensor& x, double s);
Tensor scale(const Tensor& x, cplx s);
Tensor conj(const Tensor& x);
/// a * conj(b), promoting to complex when either side is complex.
Tensor mul_conj(const Tensor& a, const Tensor& b);
/// In-place accumulation `acc += x` (same shape/dtype).
void accumulate(Tensor& acc, const Tensor& x);

Tensor sum_all(const Tensor& x);
Tensor sum_axis(const Tensor& x, std::size_t axis, bool keepdim);

Tensor slice(const Tensor& x, const std::vector<std::size_t>& begin, const std::vector<std::size_t>& end);
Tensor pad(const Tensor& x, const std::vector<std::size_t>& before, const std::vector<std::size_t>& after);

Tensor gather(const Tensor& x, const std::vector<std::size_t>& flat_indices);
Tensor scatter_add(const Shape& shape, const std::vector<std::size_t>& flat_indices, const Tensor& values);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);

/// Unnormalized forward DFT (kernel e^{-2 pi i jk/N}) along one axis; the
/// inverse carries the 1/N factor. Input must be complex.
Tensor dft(const Tensor& x, std::size_t axis, bool inverse);

/// Same-size zero-padded centered stencil application along `axis`:
/// y_i = sum_k w_k x_{i+k-c}, c = (K-1)/2. Kernel is rank 1 with odd length.
Tensor convolve(const Tensor& x, const Tensor& w, std::size_t axis);
/// Adjoint of `convolve` in x: xbar_j = sum_k conj(w_k) ybar_{j-k+c}.
Tensor convolve_adjoint(const Tensor& ybar, const Tensor& w, std::size_t axis);
/// Adjoint of `convolve` in w: wbar_k = sum_i conj(x_{i+k-c}) ybar_i.
Tensor convolve_kernel_adjoint(const Tensor& x, const Tensor& ybar, std::size_t axis, std::size_t kernel_size);

struct AxisLayout {
    std::size_t outer;
    std::size_t extent;
    std::size_t inner;
};
AxisLayout axis_layout(const Shape& shape, std::size_t axis);

template <class F>
Tensor map_real(const Tensor& x, F f) {
    Tensor out(x.shape(), DType::Real64);
    auto src = x.real_data();
    auto dst = out.real_data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
    return out;
}

template <class F>
Tensor map_complex(const Tensor& x, F f) {
    Tensor out(x.shape(), DType::Complex128);
    auto src = x.complex_data();
    auto dst = out.complex_data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
    return out;
}

} // namespace jdf::kernels
