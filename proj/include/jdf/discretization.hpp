#pragma once

#include "jdf/geometry.hpp"
#include "jdf/graph.hpp"
#include "jdf/tensor.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>

namespace jdf {

/// Periodic trigonometric interpolation through values on the collocation grid.
struct FourierSeries {
    DType dtype = DType::Complex128;
    bool operator==(const FourierSeries&) const = default;
};

/// Grid values; derivatives are centered stencils with zero padding.
struct FiniteDifferences {
    int accuracy = 2;
    DType dtype = DType::Real64;
    bool operator==(const FiniteDifferences&) const = default;
};

/// sum_i theta_i x^i on [0, 1).
struct Polynomial {
    std::size_t degree = 0;
    bool operator==(const Polynomial&) const = default;
};

/// Builds, inside a graph, f(theta, x) for x of shape [P, D], returning [P, M].
using InterpolationFn = std::function<Var(Var theta, Var x)>;

/// User-supplied interpolation function written with engine primitives.
struct Arbitrary {
    std::shared_ptr<const InterpolationFn> fn;
    Shape theta_shape;
    std::string label;
    bool operator==(const Arbitrary& o) const { return fn == o.fn && theta_shape == o.theta_shape; }
};

using FamilyKind = std::variant<FourierSeries, FiniteDifferences, Polynomial, Arbitrary>;

/// A discretization family: maps a parameter tensor to a continuous function.
class Family {
public:
    static Family fourier(Domain domain, DType dtype = DType::Complex128, std::size_t components = 1);
    static Family real_fourier(Domain domain, std::size_t components = 1) {
        return fourier(std::move(domain), DType::Real64, components);
    }
    static Family finite_differences(Domain domain, int accuracy = 2, DType dtype = DType::Real64,
                                     std::size_t components = 1);
    static Family polynomial(std::size_t degree);
    static Family arbitrary(Domain domain, Shape theta_shape, std::size_t components, InterpolationFn fn,
                            std::string label = "arbitrary");

    const FamilyKind& kind() const noexcept { return kind_; }
    template <class K>
    bool is() const noexcept { return std::holds_alternative<K>(kind_); }
    template <class K>
    const K& as() const { return std::get<K>(kind_); }

    const std::optional<Domain>& domain() const noexcept { return domain_; }
    const Domain& grid() const;
    std::size_t components() const noexcept { return components_; }
    DType dtype() const;
    bool has_grid() const noexcept { return !is<Polynomial>(); }

    /// Contractual parameter shape.
    Shape param_shape() const;

    Family with_components(std::size_t components) const;
    Family with_dtype(DType dtype) const;
    Family with_kind(FamilyKind kind) const;

    /// Same kind, domain and kind-specific settings; dtype and component count may differ.
    bool compatible_with(const Family& other) const;

    bool operator==(const Family& other) const = default;
    std::string describe() const;

private:
    Family(FamilyKind kind, std::optional<Domain> domain, std::size_t components)
        : kind_(std::move(kind)), domain_(std::move(domain)), components_(components) {}

    FamilyKind kind_;
    std::optional<Domain> domain_;
    std::size_t components_;
};

/// The couple (family, parameters) naming a continuous function.
struct Field {
    Field(Family family, Tensor params, std::string name);

    Family family;
    Tensor params;
    std::string name;
};

Field empty_field(const Family& family, const std::string& name);

/// Values of the field's function at `points` (shape [P, D]); returns [P, M].
Tensor interpolate(const Field& field, const Tensor& points);

/// Values at the family's collocation grid, shape n + [M].
Tensor sample_on_grid(const Field& field);

} // namespace jdf
