#pragma once

#include "jdf/autodiff.hpp"
#include "jdf/operators.hpp"
#include "jdf/tensor.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace jdf {

/// A linear map on tensors of one shape/dtype.
struct LinearMap {
    std::function<Tensor(const Tensor&)> apply;
    std::function<Tensor(const Tensor&)> adjoint_apply; // may be empty
};

struct GmresConfig {
    double tol = 1e-3;
    std::size_t restart = 50;
    std::size_t maxiter = 1000; // total Arnoldi steps across all cycles
};

struct SolveReport {
    Tensor solution;
    double residual_norm = 0.0;     // ||b - A x||, recomputed
    double relative_residual = 0.0; // residual_norm / ||b||
    std::size_t iterations = 0;
    bool converged = false;
    bool breakdown = false;
    /// Recomputed residual norm at the start and end of every restart cycle.
    std::vector<double> residual_history;
};

/// Restarted GMRES with modified Gram-Schmidt and Givens rotations, no
/// preconditioning. Converged means ||b - A x|| <= tol ||b||.
SolveReport gmres_restarted(const LinearMap& A, const Tensor& b, const GmresConfig& cfg,
                            const std::optional<Tensor>& x0 = std::nullopt);

/// A parametrized linear operator A(p) written as engine graphs. Both graphs
/// take the state input plus parameter inputs; `adjoint` computes A(p)^H.
struct LinearSystem {
    ExprGraph forward;
    std::optional<ExprGraph> adjoint;
    std::string state = "u";
};

LinearMap bind_linear_map(const LinearSystem& sys, Bindings params);

/// Appends u = A(params)^-1 rhs to the builder. The backward pass solves one
/// adjoint system and runs one engine backward pass through A; nothing from
/// the forward Krylov iteration is kept.
Var solve_linear_implicit(const LinearSystem& sys, Var rhs, const std::map<std::string, Var>& params,
                          const GmresConfig& cfg);

/// One classical Runge-Kutta step u -> u + dt/6 (k1 + 2 k2 + 2 k3 + k4) for
/// du/dt = rhs(u), emitted into the builder. `rhs` must map the state family
/// to itself.
Var rk4_step(GraphBuilder& b, const TracedOperator& rhs, const std::string& state, Var u, double dt);

struct Trajectory {
    std::vector<double> times;
    std::vector<Tensor> states;
};

using Observer = std::function<void(std::size_t step, double time, const Tensor& u)>;

/// RK4 integration for `steps` steps. States at step 0, every `every` steps
/// and the final step are stored and passed to `observer`.
Trajectory integrate_explicit(const TracedOperator& rhs, const std::string& state, const Tensor& u0, double dt,
                              std::size_t steps, std::size_t every = 1, const Observer& observer = {});

/// 0.1 * min(dx)^2, the default step for diffusion problems.
double default_diffusion_dt(const Domain& domain);

} // namespace jdf
