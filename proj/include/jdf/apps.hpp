#pragma once

#include "jdf/geometry.hpp"
#include "jdf/tensor.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

namespace jdf {

/// Settings shared by the command-line tools. Defaults reproduce the
/// reference lens experiment.
struct RunConfig {
    std::optional<std::size_t> grid; // per-command default when unset
    double spacing = 1.0;
    std::uint64_t seed = 42;
    std::string out = ".";

    double gmres_tol = 1e-3;
    std::size_t gmres_restart = 50;
    std::size_t gmres_maxiter = 1000;

    std::size_t steps = 100;
    double lr = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.9;
    double lambda_tv = 1e-4;

    std::optional<double> dt; // 0.1 min(dx)^2 when unset
    double t_end = 2.0;
    std::size_t snapshots = 5;
    std::string discr = "fourier";
    std::string init; // heat initial FieldFile; Gaussian when empty

    double tol = 1e-2; // swap-check threshold

    void validate() const;
};

/// Exit codes: 0 success, 1 a solver did not converge or a tolerance was
/// missed, 2 invalid input, I/O failure or numerical blow-up.
int cmd_lens_opt(const RunConfig& cfg, std::ostream& log);
int cmd_heat(const RunConfig& cfg, std::ostream& log);
int cmd_swap_check(const RunConfig& cfg, std::ostream& log);

/// Centred Gaussian exp(-r^2 / (2 sigma^2)) on the grid, shape n + [1].
Tensor gaussian_field(const Domain& domain, double sigma);

/// Laplacian of `u` traced under second-order finite differences and under
/// the real Fourier family, compared away from the one-cell boundary layer
/// where zero padding applies. Returns ||fd - fourier|| / ||fourier||, or the
/// absolute norm when the Fourier result is numerically zero.
double swap_discrepancy(const Domain& domain, const Tensor& u);

} // namespace jdf
