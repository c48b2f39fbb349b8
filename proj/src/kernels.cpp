#include "jdf/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <type_traits>

namespace jdf::kernels {

namespace {

std::vector<std::size_t> strides_for(const Shape& shape) {
    std::vector<std::size_t> s(shape.size(), 1);
    for (std::size_t i = shape.size(); i-- > 1;) s[i - 1] = s[i] * shape[i];
    return s;
}

// Strides of `src` aligned to the right of `out`, zero where src broadcasts.
std::vector<std::size_t> broadcast_strides(const Shape& src, const Shape& out) {
    std::vector<std::size_t> result(out.size(), 0);
    auto s = strides_for(src);
    const std::size_t offset = out.size() - src.size();
    for (std::size_t i = 0; i < src.size(); ++i)
        result[offset + i] = src[i] == 1 ? 0 : s[i];
    return result;
}

// Calls f(out_flat, a_flat, b_flat) over every element of the output shape.
template <class F>
void for_each_broadcast(const Shape& out, const Shape& sa, const Shape& sb, F f) {
    const std::size_t n = shape_size(out);
    if (sa == out && sb == out) {
        for (std::size_t i = 0; i < n; ++i) f(i, i, i);
        return;
    }
    const auto stra = broadcast_strides(sa, out);
    const auto strb = broadcast_strides(sb, out);
    const std::size_t rank = out.size();
    std::vector<std::size_t> idx(rank, 0);
    std::size_t ia = 0, ib = 0;
    for (std::size_t flat = 0; flat < n; ++flat) {
        f(flat, ia, ib);
        for (std::size_t d = rank; d-- > 0;) {
            ++idx[d];
            ia += stra[d];
            ib += strb[d];
            if (idx[d] < out[d]) break;
            ia -= stra[d] * out[d];
            ib -= strb[d] * out[d];
            idx[d] = 0;
        }
    }
}

template <class T>
T apply(BinaryOp op, T a, T b) {
    switch (op) {
    case BinaryOp::Add: return a + b;
    case BinaryOp::Sub: return a - b;
    case BinaryOp::Mul: return a * b;
    case BinaryOp::Div: return a / b;
    }
    return a;
}

bool is_power_of_two(std::size_t n) { return n && !(n & (n - 1)); }

// One 1-D transform in place. `sign` is -1 for forward, +1 for inverse (unscaled).
class LineTransform {
public:
    LineTransform(std::size_t n, int sign) : n_(n), twiddle_(n) {
        for (std::size_t k = 0; k < n; ++k)
            twiddle_[k] = std::polar(1.0, sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
        if (!is_power_of_two(n)) scratch_.resize(n);
    }

    void operator()(std::vector<cplx>& a) {
        if (n_ <= 1) return;
        if (is_power_of_two(n_)) {
            radix2(a);
        } else {
            for (std::size_t k = 0; k < n_; ++k) {
                cplx acc = 0.0;
                for (std::size_t j = 0; j < n_; ++j) acc += a[j] * twiddle_[(j * k) % n_];
                scratch_[k] = acc;
            }
            a.swap(scratch_);
        }
    }

private:
    void radix2(std::vector<cplx>& a) const {
        for (std::size_t i = 1, j = 0; i < n_; ++i) {
            std::size_t bit = n_ >> 1;
            for (; j & bit; bit >>= 1) j ^= bit;
            j ^= bit;
            if (i < j) std::swap(a[i], a[j]);
        }
        for (std::size_t len = 2; len <= n_; len <<= 1) {
            const std::size_t step = n_ / len;
            for (std::size_t i = 0; i < n_; i += len) {
                for (std::size_t j = 0; j < len / 2; ++j) {
                    const cplx u = a[i + j];
                    const cplx v = a[i + j + len / 2] * twiddle_[j * step];
                    a[i + j] = u + v;
                    a[i + j + len / 2] = u - v;
                }
            }
        }
    }

    std::size_t n_;
    std::vector<cplx> twiddle_;
    std::vector<cplx> scratch_;
};

void check_axis(const Tensor& x, std::size_t axis) {
    if (axis >= x.rank())
        fail(ErrorCode::AxisOutOfRange, "axis " + std::to_string(axis) + " for shape " + to_string(x.shape()));
}

void check_same_dtype(const Tensor& a, const Tensor& b, const char* what) {
    if (a.dtype() != b.dtype())
        fail(ErrorCode::DTypeMismatch, std::string(what) + ": " + to_string(a.dtype()) + " vs " + to_string(b.dtype()));
}

} // namespace

AxisLayout axis_layout(const Shape& shape, std::size_t axis) {
    AxisLayout l{1, shape[axis], 1};
    for (std::size_t i = 0; i < axis; ++i) l.outer *= shape[i];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) l.inner *= shape[i];
    return l;
}

Shape broadcast_shapes(const Shape& a, const Shape& b) {
    const std::size_t rank = std::max(a.size(), b.size());
    Shape out(rank, 1);
    for (std::size_t i = 0; i < rank; ++i) {
        const std::size_t ea = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
        const std::size_t eb = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
        if (ea != eb && ea != 1 && eb != 1)
            fail(ErrorCode::ShapeMismatch, "cannot broadcast " + to_string(a) + " with " + to_string(b));
        out[i] = ea == 1 ? eb : ea;
    }
    return out;
}

Tensor binary(BinaryOp op, const Tensor& a, const Tensor& b) {
    check_same_dtype(a, b, "binary op");
    const Shape out_shape = broadcast_shapes(a.shape(), b.shape());
    Tensor out(out_shape, a.dtype());
    if (a.is_complex()) {
        auto pa = a.complex_data();
        auto pb = b.complex_data();
        auto po = out.complex_data();
        for_each_broadcast(out_shape, a.shape(), b.shape(),
                           [&](std::size_t o, std::size_t i, std::size_t j) { po[o] = apply(op, pa[i], pb[j]); });
    } else {
        auto pa = a.real_data();
        auto pb = b.real_data();
        auto po = out.real_data();
        for_each_broadcast(out_shape, a.shape(), b.shape(),
                           [&](std::size_t o, std::size_t i, std::size_t j) { po[o] = apply(op, pa[i], pb[j]); });
    }
    return out;
}

Tensor broadcast_to(const Tensor& x, const Shape& shape) {
    if (broadcast_shapes(x.shape(), shape) != shape)
        fail(ErrorCode::ShapeMismatch, "cannot broadcast " + to_string(x.shape()) + " to " + to_string(shape));
    if (x.shape() == shape) return x;
    Tensor out(shape, x.dtype());
    const std::size_t w = x.is_complex() ? 2 : 1;
    auto src = x.raw();
    auto dst = out.raw();
    for_each_broadcast(shape, x.shape(), shape, [&](std::size_t o, std::size_t i, std::size_t) {
        for (std::size_t c = 0; c < w; ++c) dst[w * o + c] = src[w * i + c];
    });
    return out;
}

Tensor reduce_to_shape(const Tensor& x, const Shape& shape) {
    if (x.shape() == shape) return x;
    if (broadcast_shapes(shape, x.shape()) != x.shape())
        fail(ErrorCode::ShapeMismatch, "cannot reduce " + to_string(x.shape()) + " to " + to_string(shape));
    Tensor out(shape, x.dtype());
    const std::size_t w = x.is_complex() ? 2 : 1;
    auto src = x.raw();
    auto dst = out.raw();
    for_each_broadcast(x.shape(), shape, x.shape(), [&](std::size_t o, std::size_t i, std::size_t) {
        for (std::size_t c = 0; c < w; ++c) dst[w * i + c] += src[w * o + c];
    });
    return out;
}

Tensor scale(const Tensor& x, double s) {
    Tensor out = x;
    for (double& v : out.raw()) v *= s;
    return out;
}

Tensor scale(const Tensor& x, cplx s) {
    if (s.imag() == 0.0 && !x.is_complex()) return scale(x, s.real());
    return map_complex(x.as_complex(), [s](cplx v) { return v * s; });
}

Tensor conj(const Tensor& x) {
    if (!x.is_complex()) return x;
    return map_complex(x, [](cplx v) { return std::conj(v); });
}

Tensor mul_conj(const Tensor& a, const Tensor& b) {
    if (!a.is_complex() && !b.is_complex()) return binary(BinaryOp::Mul, a, b);
    return binary(BinaryOp::Mul, a.as_complex(), conj(b.as_complex()));
}

void accumulate(Tensor& acc, const Tensor& x) {
    if (acc.shape() != x.shape() || acc.dtype() != x.dtype())
        fail(ErrorCode::ShapeMismatch, "accumulate " + to_string(x.shape()) + " into " + to_string(acc.shape()));
    auto dst = acc.raw();
    auto src = x.raw();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Tensor sum_all(const Tensor& x) {
    if (x.is_complex()) {
        cplx s = 0.0;
        for (cplx v : x.complex_data()) s += v;
        return Tensor::scalar(s);
    }
    double s = 0.0;
    for (double v : x.real_data()) s += v;
    return Tensor::scalar(s);
}

Tensor sum_axis(const Tensor& x, std::size_t axis, bool keepdim) {
    check_axis(x, axis);
    Shape shape = x.shape();
    const auto l = axis_layout(shape, axis);
    if (keepdim) shape[axis] = 1;
    else shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
    Tensor out(shape, x.dtype());
    const std::size_t w = x.is_complex() ? 2 : 1;
    auto src = x.raw();
    auto dst = out.raw();
    for (std::size_t o = 0; o < l.outer; ++o)
        for (std::size_t j = 0; j < l.extent; ++j)
            for (std::size_t i = 0; i < l.inner; ++i)
                for (std::size_t c = 0; c < w; ++c)
                    dst[w * (o * l.inner + i) + c] += src[w * ((o * l.extent + j) * l.inner + i) + c];
    return out;
}

namespace {

// Copies a box between two tensors: src[offset_src + idx] -> dst[offset_dst + idx] for idx in extent.
void copy_box(const Tensor& src, Tensor& dst, const std::vector<std::size_t>& src_off,
              const std::vector<std::size_t>& dst_off, const Shape& extent) {
    const std::size_t n = shape_size(extent);
    if (n == 0) return;
    const std::size_t rank = extent.size();
    const auto ss = strides_for(src.shape());
    const auto ds = strides_for(dst.shape());
    const std::size_t w = src.is_complex() ? 2 : 1;
    auto s = src.raw();
    auto d = dst.raw();
    std::vector<std::size_t> idx(rank, 0);
    for (std::size_t flat = 0; flat < n; ++flat) {
        std::size_t si = 0, di = 0;
        for (std::size_t k = 0; k < rank; ++k) {
            si += (src_off[k] + idx[k]) * ss[k];
            di += (dst_off[k] + idx[k]) * ds[k];
        }
        for (std::size_t c = 0; c < w; ++c) d[w * di + c] = s[w * si + c];
        for (std::size_t k = rank; k-- > 0;) {
            if (++idx[k] < extent[k]) break;
            idx[k] = 0;
        }
    }
}

} // namespace

Tensor slice(const Tensor& x, const std::vector<std::size_t>& begin, const std::vector<std::size_t>& end) {
    if (begin.size() != x.rank() || end.size() != x.rank())
        fail(ErrorCode::ShapeMismatch, "slice bounds rank mismatch for " + to_string(x.shape()));
    Shape extent(x.rank());
    for (std::size_t k = 0; k < x.rank(); ++k) {
        if (begin[k] > end[k] || end[k] > x.shape()[k])
            fail(ErrorCode::ShapeMismatch, "slice out of range for " + to_string(x.shape()));
        extent[k] = end[k] - begin[k];
    }
    Tensor out(extent, x.dtype());
    copy_box(x, out, begin, std::vector<std::size_t>(x.rank(), 0), extent);
    return out;
}

Tensor pad(const Tensor& x, const std::vector<std::size_t>& before, const std::vector<std::size_t>& after) {
    if (before.size() != x.rank() || after.size() != x.rank())
        fail(ErrorCode::ShapeMismatch, "pad widths rank mismatch for " + to_string(x.shape()));
    Shape shape(x.rank());
    for (std::size_t k = 0; k < x.rank(); ++k) shape[k] = before[k] + x.shape()[k] + after[k];
    Tensor out(shape, x.dtype());
    copy_box(x, out, std::vector<std::size_t>(x.rank(), 0), before, x.shape());
    return out;
}

Tensor gather(const Tensor& x, const std::vector<std::size_t>& flat_indices) {
    Tensor out({flat_indices.size()}, x.dtype());
    const std::size_t w = x.is_complex() ? 2 : 1;
    auto s = x.raw();
    auto d = out.raw();
    for (std::size_t p = 0; p < flat_indices.size(); ++p) {
        if (flat_indices[p] >= x.size()) fail(ErrorCode::ShapeMismatch, "gather index out of range");
        for (std::size_t c = 0; c < w; ++c) d[w * p + c] = s[w * flat_indices[p] + c];
    }
    return out;
}

Tensor scatter_add(const Shape& shape, const std::vector<std::size_t>& flat_indices, const Tensor& values) {
    Tensor out(shape, values.dtype());
    const std::size_t w = values.is_complex() ? 2 : 1;
    auto s = values.raw();
    auto d = out.raw();
    for (std::size_t p = 0; p < flat_indices.size(); ++p)
        for (std::size_t c = 0; c < w; ++c) d[w * flat_indices[p] + c] += s[w * p + c];
    return out;
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) fail(ErrorCode::InvalidArgument, "concat of zero tensors");
    check_axis(parts.front(), axis);
    Shape shape = parts.front().shape();
    shape[axis] = 0;
    for (const auto& p : parts) {
        check_same_dtype(parts.front(), p, "concat");
        for (std::size_t k = 0; k < shape.size(); ++k)
            if (k != axis && p.shape()[k] != shape[k])
                fail(ErrorCode::ShapeMismatch, "concat extents differ off-axis");
        shape[axis] += p.shape()[axis];
    }
    Tensor out(shape, parts.front().dtype());
    std::vector<std::size_t> zero(shape.size(), 0);
    std::vector<std::size_t> off(shape.size(), 0);
    for (const auto& p : parts) {
        copy_box(p, out, zero, off, p.shape());
        off[axis] += p.shape()[axis];
    }
    return out;
}

Tensor dft(const Tensor& x, std::size_t axis, bool inverse) {
    check_axis(x, axis);
    if (!x.is_complex()) fail(ErrorCode::DTypeMismatch, "dft requires a complex tensor");
    const auto l = axis_layout(x.shape(), axis);
    Tensor out(x.shape(), DType::Complex128);
    auto src = x.complex_data();
    auto dst = out.complex_data();
    LineTransform transform(l.extent, inverse ? +1 : -1);
    const double norm = inverse ? 1.0 / static_cast<double>(l.extent) : 1.0;
    std::vector<cplx> line(l.extent);
    for (std::size_t o = 0; o < l.outer; ++o) {
        for (std::size_t i = 0; i < l.inner; ++i) {
            for (std::size_t j = 0; j < l.extent; ++j) line[j] = src[(o * l.extent + j) * l.inner + i];
            transform(line);
            for (std::size_t j = 0; j < l.extent; ++j) dst[(o * l.extent + j) * l.inner + i] = line[j] * norm;
        }
    }
    return out;
}

namespace {

void check_kernel(const Tensor& w) {
    if (w.rank() != 1) fail(ErrorCode::ShapeMismatch, "convolution kernel must be rank 1");
    if (w.size() % 2 == 0) fail(ErrorCode::EvenKernel, "kernel length " + std::to_string(w.size()));
}

template <class T>
void stencil_lines(std::span<const T> x, std::span<const T> w, std::span<T> y, const AxisLayout& l, bool adjoint) {
    const auto K = static_cast<std::ptrdiff_t>(w.size());
    const std::ptrdiff_t c = (K - 1) / 2;
    const auto n = static_cast<std::ptrdiff_t>(l.extent);
    for (std::size_t o = 0; o < l.outer; ++o) {
        for (std::size_t i = 0; i < l.inner; ++i) {
            auto at = [&](std::ptrdiff_t j) { return (o * l.extent + static_cast<std::size_t>(j)) * l.inner + i; };
            for (std::ptrdiff_t j = 0; j < n; ++j) {
                T acc{};
                for (std::ptrdiff_t k = 0; k < K; ++k) {
                    const std::ptrdiff_t src = adjoint ? j - k + c : j + k - c;
                    if (src < 0 || src >= n) continue;
                    if constexpr (std::is_same_v<T, cplx>)
                        acc += (adjoint ? std::conj(w[k]) : w[k]) * x[at(src)];
                    else
                        acc += w[k] * x[at(src)];
                }
                y[at(j)] = acc;
            }
        }
    }
}

} // namespace

Tensor convolve(const Tensor& x, const Tensor& w, std::size_t axis) {
    check_axis(x, axis);
    check_kernel(w);
    check_same_dtype(x, w, "convolve");
    Tensor out(x.shape(), x.dtype());
    const auto l = axis_layout(x.shape(), axis);
    if (x.is_complex())
        stencil_lines<cplx>(x.complex_data(), w.complex_data(), out.complex_data(), l, false);
    else
        stencil_lines<double>(x.real_data(), w.real_data(), out.real_data(), l, false);
    return out;
}

Tensor convolve_adjoint(const Tensor& ybar, const Tensor& w, std::size_t axis) {
    check_axis(ybar, axis);
    check_kernel(w);
    check_same_dtype(ybar, w, "convolve_adjoint");
    Tensor out(ybar.shape(), ybar.dtype());
    const auto l = axis_layout(ybar.shape(), axis);
    if (ybar.is_complex())
        stencil_lines<cplx>(ybar.complex_data(), w.complex_data(), out.complex_data(), l, true);
    else
        stencil_lines<double>(ybar.real_data(), w.real_data(), out.real_data(), l, true);
    return out;
}

Tensor convolve_kernel_adjoint(const Tensor& x, const Tensor& ybar, std::size_t axis, std::size_t kernel_size) {
    check_axis(x, axis);
    check_same_dtype(x, ybar, "convolve_kernel_adjoint");
    Tensor out({kernel_size}, x.dtype());
    const auto l = axis_layout(x.shape(), axis);
    const auto K = static_cast<std::ptrdiff_t>(kernel_size);
    const std::ptrdiff_t c = (K - 1) / 2;
    const auto n = static_cast<std::ptrdiff_t>(l.extent);
    for (std::size_t o = 0; o < l.outer; ++o) {
        for (std::size_t i = 0; i < l.inner; ++i) {
            auto at = [&](std::ptrdiff_t j) { return (o * l.extent + static_cast<std::size_t>(j)) * l.inner + i; };
            for (std::ptrdiff_t k = 0; k < K; ++k) {
                for (std::ptrdiff_t j = 0; j < n; ++j) {
                    const std::ptrdiff_t src = j + k - c;
                    if (src < 0 || src >= n) continue;
                    if (x.is_complex())
                        out.complex_data()[static_cast<std::size_t>(k)] +=
                            std::conj(x.complex_data()[at(src)]) * ybar.complex_data()[at(j)];
                    else
                        out.real_data()[static_cast<std::size_t>(k)] += x.real_data()[at(src)] * ybar.real_data()[at(j)];
                }
            }
        }
    }
    return out;
}

} // namespace jdf::kernels
