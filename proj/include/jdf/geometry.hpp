#pragma once

#include "jdf/tensor.hpp"

#include <cstddef>
#include <vector>

namespace jdf {

/// Rectangular D-dimensional domain discretized into `n` cells of size `dx`.
class Domain {
public:
    Domain(std::vector<std::size_t> n, std::vector<double> dx);

    const std::vector<std::size_t>& n() const noexcept { return n_; }
    const std::vector<double>& dx() const noexcept { return dx_; }
    std::size_t dims() const noexcept { return n_.size(); }
    std::size_t num_points() const;
    /// Period of the domain along an axis, n * dx.
    double length(std::size_t axis) const { return static_cast<double>(n_[axis]) * dx_[axis]; }
    double min_spacing() const;

    /// Shape of a grid tensor with `components` trailing values per point.
    Shape grid_shape(std::size_t components) const;

    bool operator==(const Domain& other) const = default;

private:
    std::vector<std::size_t> n_;
    std::vector<double> dx_;
};

/// Cell-centred coordinates (j - n/2) * dx, shape n + [D].
Tensor grid_coordinates(const Domain& domain);

/// Angular wavenumbers of one axis in DFT order; the Nyquist bin of an even
/// extent sits on the negative branch.
std::vector<double> frequency_axis(const Domain& domain, std::size_t axis);

/// Wavenumber of every axis at every grid point, shape n + [D].
Tensor frequency_grid(const Domain& domain);

} // namespace jdf
