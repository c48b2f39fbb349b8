#pragma once

#include "jdf/autodiff.hpp"
#include "jdf/geometry.hpp"
#include "jdf/operators.hpp"
#include "jdf/solvers.hpp"

#include <array>
#include <cstdint>

namespace jdf {

/// Absorbing layer: a_j = ((|x_j| - onset) / width)^2 beyond the onset, else 0.
struct PmlConfig {
    double onset = 110.0;
    double width = 18.0;
};

/// gamma_j = 1 / (1 + i a_j(x_j)) for each coordinate component of `x`.
Var pml_gamma(Var x, const PmlConfig& pml);
Tensor pml_gamma(const Tensor& x, const PmlConfig& pml);

/// sum_j gamma_j d_j(gamma_j d_j u) + (omega / c)^2 u
Expr helmholtz(const Expr& u, const Expr& c, const Expr& x, double omega, const PmlConfig& pml);
/// The conjugate transpose of `helmholtz` in u, for real c.
Expr helmholtz_adjoint(const Expr& u, const Expr& c, const Expr& x, double omega, const PmlConfig& pml);

/// Anisotropic TV integrand sum_j |d_j c|.
Expr tv_integrand(const Expr& c);
/// Grid mean of the TV integrand.
double tv_value(const Field& c);

/// Half-open index box [r0, r1) x [c0, c1) on a 2-D grid.
struct IndexBox {
    std::size_t r0 = 0, r1 = 0, c0 = 0, c1 = 0;
    Shape shape() const { return {r1 - r0, c1 - c0}; }
};

/// c = 1 everywhere and 1 + sigmoid(rho) inside `lens`; shape n + [1].
Var sos_parametrization(Var rho, const Domain& domain, const IndexBox& lens);
Tensor sos_parametrization(const Tensor& rho, const Domain& domain, const IndexBox& lens);

struct HelmholtzProblem {
    Domain domain{{256, 256}, {1.0, 1.0}};
    double omega = 1.0;
    std::array<std::size_t, 2> source{128, 40};
    cplx source_value{1.0, 0.0}; // monopole amplitude
    std::array<std::size_t, 2> target{70, 210};
    IndexBox lens{44, 212, 108, 148};
    double lambda_tv = 1e-4;
    PmlConfig pml;
    GmresConfig gmres{1e-3, 50, 1000};
    std::uint64_t seed = 42;

    /// The reference 256 x 256 configuration with indices scaled by n / 256
    /// (rounded down) and the absorbing layer scaled with the half-width.
    static HelmholtzProblem scaled(std::size_t n, double dx = 1.0);
    /// Throws RegionOutOfBounds unless the lens, source and target lie inside
    /// the absorbing-layer-free interior.
    void validate() const;
    Tensor source_params() const;
};

/// Traced Helmholtz system for a problem: state "u", parameters "c", "x" and
/// the wavenumber vectors.
struct HelmholtzSystem {
    LinearSystem system;
    Bindings constants; // "x" and operator parameters
};

HelmholtzSystem build_helmholtz_system(const Domain& domain, double omega, const PmlConfig& pml);

/// Solves H(c) u = s without differentiation.
SolveReport solve_helmholtz(const HelmholtzProblem& problem, const Tensor& c, const Tensor& source);

/// The differentiable lens objective -|u(x_T)| + lambda TV(c(rho)) as graphs.
class LensObjective {
public:
    explicit LensObjective(const HelmholtzProblem& problem);

    struct Evaluation {
        double loss = 0.0;
        double target_amplitude = 0.0;
        double tv = 0.0;
        Tensor grad;
        Diagnostics diag;
    };
    Evaluation value_and_grad(const Tensor& rho) const;
    double loss(const Tensor& rho, Diagnostics* diag = nullptr) const;

    Tensor sound_speed(const Tensor& rho) const;
    Tensor wavefield(const Tensor& rho, Diagnostics* diag = nullptr) const;
    Tensor tv_field(const Tensor& rho) const;

    const HelmholtzProblem& problem() const { return problem_; }

private:
    HelmholtzProblem problem_;
    ExprGraph loss_;
    ExprGraph tv_;
    ExprGraph wavefield_;
    ExprGraph sos_;
    ExprGraph tv_field_;
};

struct AdamState {
    Tensor m, v;
    std::size_t t = 0;
    double alpha = 0.1, beta1 = 0.9, beta2 = 0.9, eps = 1e-8;
};

AdamState adam_init(const Tensor& params, double alpha = 0.1, double beta1 = 0.9, double beta2 = 0.9, double eps = 1e-8);
/// Bias-corrected Adam update applied in place, component by component.
void adam_step(AdamState& state, Tensor& params, const Tensor& grads);

/// Uniform [0, 1) samples from a 64-bit Mersenne Twister (53-bit mantissa
/// construction), shifted by -4.
Tensor init_lens_params(std::uint64_t seed, const Shape& shape);

} // namespace jdf
