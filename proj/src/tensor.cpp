#include "jdf/tensor.hpp"

#include "jdf/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace jdf {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::MissingBinding: return "MissingBinding";
    case ErrorCode::UnknownInput: return "UnknownInput";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DTypeMismatch: return "DTypeMismatch";
    case ErrorCode::NonScalarOutput: return "NonScalarOutput";
    case ErrorCode::NonRealOutput: return "NonRealOutput";
    case ErrorCode::AxisOutOfRange: return "AxisOutOfRange";
    case ErrorCode::EvenKernel: return "EvenKernel";
    case ErrorCode::NonDifferentiableGraph: return "NonDifferentiableGraph";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidDomain: return "InvalidDomain";
    case ErrorCode::PointDimensionMismatch: return "PointDimensionMismatch";
    case ErrorCode::NoGrid: return "NoGrid";
    case ErrorCode::UnknownFieldName: return "UnknownFieldName";
    case ErrorCode::IncompatibleFamilies: return "IncompatibleFamilies";
    case ErrorCode::UnsupportedNodeForFamily: return "UnsupportedNodeForFamily";
    case ErrorCode::ComponentMismatch: return "ComponentMismatch";
    case ErrorCode::NotFourier: return "NotFourier";
    case ErrorCode::AccuracyTooHighForGrid: return "AccuracyTooHighForGrid";
    case ErrorCode::FamilyMismatch: return "FamilyMismatch";
    case ErrorCode::ParamShapeConflict: return "ParamShapeConflict";
    case ErrorCode::NaNEncountered: return "NaNEncountered";
    case ErrorCode::AdjointUnavailable: return "AdjointUnavailable";
    case ErrorCode::NonEndomorphicOperator: return "NonEndomorphicOperator";
    case ErrorCode::RegionOutOfBounds: return "RegionOutOfBounds";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::IoFailure: return "IoFailure";
    }
    return "Unknown";
}

std::string to_string(DType dtype) { return dtype == DType::Real64 ? "real64" : "complex128"; }

std::string to_string(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ')';
    return os.str();
}

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (auto e : shape) n *= e;
    return n;
}

Tensor::Tensor(Shape shape, DType dtype)
    : shape_(std::move(shape)), dtype_(dtype), size_(shape_size(shape_)),
      data_(size_ * (dtype == DType::Complex128 ? 2 : 1), 0.0) {}

Tensor Tensor::full(Shape shape, double value) {
    Tensor t(std::move(shape), DType::Real64);
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
}

Tensor Tensor::full(Shape shape, cplx value) {
    Tensor t(std::move(shape), DType::Complex128);
    std::fill(t.complex_data().begin(), t.complex_data().end(), value);
    return t;
}

Tensor Tensor::from_real(Shape shape, std::vector<double> values) {
    if (shape_size(shape) != values.size())
        fail(ErrorCode::ShapeMismatch, "data length " + std::to_string(values.size()) + " vs shape " + to_string(shape));
    Tensor t;
    t.shape_ = std::move(shape);
    t.dtype_ = DType::Real64;
    t.size_ = values.size();
    t.data_ = std::move(values);
    return t;
}

Tensor Tensor::from_complex(Shape shape, const std::vector<cplx>& values) {
    if (shape_size(shape) != values.size())
        fail(ErrorCode::ShapeMismatch, "data length " + std::to_string(values.size()) + " vs shape " + to_string(shape));
    Tensor t(std::move(shape), DType::Complex128);
    std::copy(values.begin(), values.end(), t.complex_data().begin());
    return t;
}

std::span<double> Tensor::real_data() {
    if (is_complex()) fail(ErrorCode::DTypeMismatch, "real_data() on complex tensor");
    return data_;
}

std::span<const double> Tensor::real_data() const {
    if (is_complex()) fail(ErrorCode::DTypeMismatch, "real_data() on complex tensor");
    return data_;
}

std::span<cplx> Tensor::complex_data() {
    if (!is_complex()) fail(ErrorCode::DTypeMismatch, "complex_data() on real tensor");
    return {reinterpret_cast<cplx*>(data_.data()), size_};
}

std::span<const cplx> Tensor::complex_data() const {
    if (!is_complex()) fail(ErrorCode::DTypeMismatch, "complex_data() on real tensor");
    return {reinterpret_cast<const cplx*>(data_.data()), size_};
}

double Tensor::real_at(std::size_t flat) const {
    return is_complex() ? data_[2 * flat] : data_[flat];
}

cplx Tensor::complex_at(std::size_t flat) const {
    return is_complex() ? cplx{data_[2 * flat], data_[2 * flat + 1]} : cplx{data_[flat], 0.0};
}

cplx Tensor::item() const {
    if (size_ != 1) fail(ErrorCode::ShapeMismatch, "item() on tensor of shape " + to_string(shape_));
    return complex_at(0);
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_size(shape) != size_)
        fail(ErrorCode::ShapeMismatch, "cannot reshape " + to_string(shape_) + " to " + to_string(shape));
    Tensor t = *this;
    t.shape_ = std::move(shape);
    return t;
}

Tensor Tensor::as_complex() const {
    if (is_complex()) return *this;
    Tensor t(shape_, DType::Complex128);
    auto out = t.complex_data();
    for (std::size_t i = 0; i < size_; ++i) out[i] = data_[i];
    return t;
}

Tensor Tensor::real_part() const {
    if (!is_complex()) return *this;
    Tensor t(shape_, DType::Real64);
    for (std::size_t i = 0; i < size_; ++i) t.data_[i] = data_[2 * i];
    return t;
}

Tensor Tensor::imag_part() const {
    Tensor t(shape_, DType::Real64);
    if (is_complex())
        for (std::size_t i = 0; i < size_; ++i) t.data_[i] = data_[2 * i + 1];
    return t;
}

Tensor Tensor::real_view() const {
    if (!is_complex()) fail(ErrorCode::DTypeMismatch, "real_view() requires a complex tensor");
    Shape s = shape_;
    s.push_back(2);
    return Tensor::from_real(std::move(s), data_);
}

bool Tensor::operator==(const Tensor& other) const noexcept {
    return shape_ == other.shape_ && dtype_ == other.dtype_ && data_ == other.data_;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        fail(ErrorCode::ShapeMismatch, to_string(a.shape()) + " vs " + to_string(b.shape()));
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.complex_at(i) - b.complex_at(i)));
    return m;
}

double l2_norm(const Tensor& a) {
    double s = 0.0;
    for (double v : a.raw()) s += v * v;
    return std::sqrt(s);
}

double max_abs(const Tensor& a) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.complex_at(i)));
    return m;
}

} // namespace jdf
