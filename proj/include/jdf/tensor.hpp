#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace jdf {

using cplx = std::complex<double>;
using Shape = std::vector<std::size_t>;

enum class DType : std::uint8_t { Real64 = 0, Complex128 = 1 };

std::string to_string(DType dtype);
std::string to_string(const Shape& shape);

/// Number of elements described by a shape; the empty shape is a scalar.
std::size_t shape_size(const Shape& shape);

/// Dense row-major array of real64 or complex128 values.
///
/// Complex tensors store interleaved (re, im) pairs in a single buffer of
/// doubles; `complex_data()` exposes the same memory as `std::complex`.
class Tensor {
public:
    Tensor() : Tensor(Shape{}, DType::Real64) {}
    Tensor(Shape shape, DType dtype);

    static Tensor zeros(Shape shape, DType dtype = DType::Real64) { return {std::move(shape), dtype}; }
    static Tensor full(Shape shape, double value);
    static Tensor full(Shape shape, cplx value);
    static Tensor from_real(Shape shape, std::vector<double> values);
    static Tensor from_complex(Shape shape, const std::vector<cplx>& values);
    static Tensor scalar(double value) { return full({}, value); }
    static Tensor scalar(cplx value) { return full({}, value); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return size_; }
    DType dtype() const noexcept { return dtype_; }
    bool is_complex() const noexcept { return dtype_ == DType::Complex128; }

    std::span<double> real_data();
    std::span<const double> real_data() const;
    std::span<cplx> complex_data();
    std::span<const cplx> complex_data() const;

    /// Raw storage (interleaved for complex tensors).
    std::span<const double> raw() const noexcept { return data_; }
    std::span<double> raw() noexcept { return data_; }

    double real_at(std::size_t flat) const;
    cplx complex_at(std::size_t flat) const;
    /// Value of a single-element tensor, promoted to complex.
    cplx item() const;

    Tensor reshaped(Shape shape) const;
    Tensor as_complex() const;
    Tensor real_part() const;
    Tensor imag_part() const;
    /// Real view of a complex tensor: trailing extent 2 holding (re, im).
    Tensor real_view() const;

    bool operator==(const Tensor& other) const noexcept;

private:
    Shape shape_;
    DType dtype_;
    std::size_t size_;
    std::vector<double> data_;
};

/// Largest absolute elementwise difference; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);
/// Euclidean norm over all (complex) entries.
double l2_norm(const Tensor& a);
double max_abs(const Tensor& a);

} // namespace jdf
