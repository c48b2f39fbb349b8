#include "jdf/geometry.hpp"

#include "jdf/error.hpp"

#include <algorithm>
#include <numbers>

namespace jdf {

Domain::Domain(std::vector<std::size_t> n, std::vector<double> dx) : n_(std::move(n)), dx_(std::move(dx)) {
    if (n_.empty() || n_.size() > 3 || n_.size() != dx_.size())
        fail(ErrorCode::InvalidDomain, "domain needs 1 to 3 dimensions with one spacing per axis");
    for (std::size_t a = 0; a < n_.size(); ++a) {
        if (n_[a] < 2) fail(ErrorCode::InvalidDomain, "extent " + std::to_string(n_[a]) + " < 2");
        if (!(dx_[a] > 0.0)) fail(ErrorCode::InvalidDomain, "spacing must be positive");
    }
}

std::size_t Domain::num_points() const { return shape_size(n_); }

double Domain::min_spacing() const { return *std::min_element(dx_.begin(), dx_.end()); }

Shape Domain::grid_shape(std::size_t components) const {
    Shape s(n_.begin(), n_.end());
    s.push_back(components);
    return s;
}

namespace {

// Writes value(axis, index along axis) into every point of an n + [D] tensor.
template <class F>
Tensor per_axis_grid(const Domain& domain, F value) {
    const std::size_t dims = domain.dims();
    Tensor out(domain.grid_shape(dims), DType::Real64);
    auto data = out.real_data();
    std::vector<std::size_t> idx(dims, 0);
    for (std::size_t p = 0; p < domain.num_points(); ++p) {
        for (std::size_t a = 0; a < dims; ++a) data[p * dims + a] = value(a, idx[a]);
        for (std::size_t a = dims; a-- > 0;) {
            if (++idx[a] < domain.n()[a]) break;
            idx[a] = 0;
        }
    }
    return out;
}

} // namespace

Tensor grid_coordinates(const Domain& domain) {
    return per_axis_grid(domain, [&](std::size_t a, std::size_t j) {
        return (static_cast<double>(j) - static_cast<double>(domain.n()[a] / 2)) * domain.dx()[a];
    });
}

std::vector<double> frequency_axis(const Domain& domain, std::size_t axis) {
    if (axis >= domain.dims()) fail(ErrorCode::AxisOutOfRange, "frequency axis " + std::to_string(axis));
    const std::size_t n = domain.n()[axis];
    const double scale = 2.0 * std::numbers::pi / domain.length(axis);
    const std::size_t positive = (n + 1) / 2;
    std::vector<double> k(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double f = j < positive ? static_cast<double>(j) : static_cast<double>(j) - static_cast<double>(n);
        k[j] = scale * f;
    }
    return k;
}

Tensor frequency_grid(const Domain& domain) {
    std::vector<std::vector<double>> axes;
    for (std::size_t a = 0; a < domain.dims(); ++a) axes.push_back(frequency_axis(domain, a));
    return per_axis_grid(domain, [&](std::size_t a, std::size_t j) { return axes[a][j]; });
}

} // namespace jdf
