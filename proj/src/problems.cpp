#include "jdf/problems.hpp"

#include "jdf/error.hpp"

#include <cmath>
#include <random>

namespace jdf {

Var pml_gamma(Var x, const PmlConfig& pml) {
    GraphBuilder& b = x.builder();
    Var excess = b.abs(x) - pml.onset;
    Var ramp = (excess + b.abs(excess)) * (0.5 / pml.width);
    Var a = ramp * ramp;
    return b.reciprocal(b.to_complex(a) * cplx{0.0, 1.0} + 1.0);
}

Tensor pml_gamma(const Tensor& x, const PmlConfig& pml) {
    GraphBuilder b;
    Var in = b.input("x", x.shape(), x.dtype());
    return evaluate(b.build(pml_gamma(in, pml)), {{"x", x}});
}

namespace {

Expr pml_expr(const Expr& x, const PmlConfig& pml) {
    return ops::elementwise([pml](Var v) { return pml_gamma(v, pml); }, x, "pml");
}

} // namespace

Expr helmholtz(const Expr& u, const Expr& c, const Expr& x, double omega, const PmlConfig& pml) {
    Expr gamma = pml_expr(x, pml);
    Expr mod_grad = ops::gradient(u) * gamma;
    Expr mod_diag = ops::diag_jacobian(mod_grad) * gamma;
    return ops::sum_over_dims(mod_diag) + ops::pow(omega / c, 2) * u;
}

Expr helmholtz_adjoint(const Expr& u, const Expr& c, const Expr& x, double omega, const PmlConfig& pml) {
    // First-derivative operators are anti-Hermitian, so the two sign flips cancel.
    Expr gamma_c = ops::conj(pml_expr(x, pml));
    Expr inner = ops::diag_jacobian(gamma_c * u) * gamma_c;
    return ops::sum_over_dims(ops::diag_jacobian(inner)) + ops::pow(omega / c, 2) * u;
}

Expr tv_integrand(const Expr& c) { return ops::sum_over_dims(ops::abs(ops::gradient(c))); }

double tv_value(const Field& c) {
    TracedOperator op = trace(tv_integrand(ops::field(c.name)), {c});
    GraphBuilder b;
    Var integrand = b.inline_graph(op.param_graph, {});
    return evaluate(b.build(b.mean(integrand)), op.bind({{c.name, c.params}})).real_at(0);
}

Var sos_parametrization(Var rho, const Domain& domain, const IndexBox& lens) {
    if (domain.dims() != 2) fail(ErrorCode::InvalidDomain, "sound-speed parametrization needs a 2-D domain");
    if (lens.r1 <= lens.r0 || lens.c1 <= lens.c0 || lens.r1 > domain.n()[0] || lens.c1 > domain.n()[1])
        fail(ErrorCode::RegionOutOfBounds, "lens box outside the grid");
    if (rho.shape() != lens.shape())
        fail(ErrorCode::ShapeMismatch, "lens parameters " + to_string(rho.shape()) + " for box " + to_string(lens.shape()));
    GraphBuilder& b = rho.builder();
    Var inside = b.pad(b.sigmoid(rho), {lens.r0, lens.c0}, {domain.n()[0] - lens.r1, domain.n()[1] - lens.c1});
    return b.reshape(inside, domain.grid_shape(1)) + 1.0;
}

Tensor sos_parametrization(const Tensor& rho, const Domain& domain, const IndexBox& lens) {
    GraphBuilder b;
    Var in = b.input("rho", rho.shape());
    return evaluate(b.build(sos_parametrization(in, domain, lens)), {{"rho", rho}});
}

HelmholtzProblem HelmholtzProblem::scaled(std::size_t n, double dx) {
    HelmholtzProblem p;
    p.domain = Domain({n, n}, {dx, dx});
    auto s = [n](std::size_t i) { return i * n / 256; };
    p.source = {s(128), s(40)};
    p.target = {s(70), s(210)};
    p.lens = {s(44), s(212), s(108), s(148)};
    const double half = static_cast<double>(n) * dx / 2.0;
    p.pml = {110.0 / 128.0 * half, 18.0 / 128.0 * half};
    return p;
}

void HelmholtzProblem::validate() const {
    if (domain.dims() != 2) fail(ErrorCode::InvalidDomain, "lens problem needs a 2-D domain");
    if (!(omega > 0.0) || !(lambda_tv >= 0.0) || !(pml.width > 0.0))
        fail(ErrorCode::InvalidArgument, "omega and the layer width must be positive, lambda_tv non-negative");
    auto coord = [&](std::size_t axis, std::size_t j) {
        return (static_cast<double>(j) - static_cast<double>(domain.n()[axis] / 2)) * domain.dx()[axis];
    };
    auto interior = [&](std::size_t axis, std::size_t j) {
        return j < domain.n()[axis] && std::abs(coord(axis, j)) <= pml.onset;
    };
    if (lens.r1 <= lens.r0 || lens.c1 <= lens.c0 || !interior(0, lens.r0) || !interior(0, lens.r1 - 1) ||
        !interior(1, lens.c0) || !interior(1, lens.c1 - 1))
        fail(ErrorCode::RegionOutOfBounds, "lens box must lie inside the absorbing-layer-free interior");
    if (!interior(0, source[0]) || !interior(1, source[1]))
        fail(ErrorCode::RegionOutOfBounds, "source outside the interior");
    if (!interior(0, target[0]) || !interior(1, target[1]))
        fail(ErrorCode::RegionOutOfBounds, "target outside the interior");
}

Tensor HelmholtzProblem::source_params() const {
    Tensor s = Tensor::zeros(domain.grid_shape(1), DType::Complex128);
    s.complex_data()[source[0] * domain.n()[1] + source[1]] = source_value;
    return s;
}

HelmholtzSystem build_helmholtz_system(const Domain& domain, double omega, const PmlConfig& pml) {
    std::vector<Field> fields{empty_field(Family::fourier(domain), "u"), empty_field(Family::real_fourier(domain), "c"),
                              empty_field(Family::real_fourier(domain, domain.dims()), "x")};
    const Expr u = ops::field("u"), c = ops::field("c"), x = ops::field("x");
    TracedOperator fwd = trace(helmholtz(u, c, x, omega, pml), fields);
    TracedOperator adj = trace(helmholtz_adjoint(u, c, x, omega, pml), fields);

    HelmholtzSystem hs;
    hs.system = {fwd.param_graph, adj.param_graph, "u"};
    hs.constants = fwd.global_params;
    for (const auto& [name, value] : adj.global_params) hs.constants.emplace(name, value);
    hs.constants.emplace("x", grid_coordinates(domain));
    return hs;
}

SolveReport solve_helmholtz(const HelmholtzProblem& problem, const Tensor& c, const Tensor& source) {
    HelmholtzSystem hs = build_helmholtz_system(problem.domain, problem.omega, problem.pml);
    Bindings params = hs.constants;
    params.emplace("c", c);
    return gmres_restarted(bind_linear_map(hs.system, std::move(params)), source, problem.gmres);
}

LensObjective::LensObjective(const HelmholtzProblem& problem) : problem_(problem) {
    problem_.validate();
    const Domain& d = problem_.domain;
    HelmholtzSystem hs = build_helmholtz_system(d, problem_.omega, problem_.pml);

    GraphBuilder b;
    Var rho = b.input("rho", problem_.lens.shape());
    Var c = sos_parametrization(rho, d, problem_.lens);
    std::map<std::string, Var> params{{"c", c}};
    for (const auto& [name, value] : hs.constants) params.emplace(name, b.constant(value));
    Var u = solve_linear_implicit(hs.system, b.constant(problem_.source_params()), params, problem_.gmres);
    Var amplitude = b.sum(b.abs(b.gather(u, {problem_.target[0] * d.n()[1] + problem_.target[1]})));

    TracedOperator tv = trace(tv_integrand(ops::field("c")), {empty_field(Family::real_fourier(d), "c")});
    std::map<std::string, Var> tv_bind{{"c", c}};
    for (const auto& [name, value] : tv.global_params) tv_bind.emplace(name, b.constant(value));
    Var integrand = b.inline_graph(tv.param_graph, tv_bind);
    Var tv_mean = b.mean(integrand);

    loss_ = b.build(tv_mean * problem_.lambda_tv - amplitude);
    tv_ = b.build(tv_mean);
    wavefield_ = b.build(u);
    sos_ = b.build(c);
    tv_field_ = b.build(integrand);
}

LensObjective::Evaluation LensObjective::value_and_grad(const Tensor& rho) const {
    Evaluation e;
    GradientResult g = gradient(loss_, {"rho"}, {{"rho", rho}}, &e.diag);
    e.loss = g.value;
    e.grad = std::move(g.grads.at("rho"));
    e.tv = evaluate(tv_, {{"rho", rho}}).real_at(0);
    e.target_amplitude = problem_.lambda_tv * e.tv - e.loss;
    return e;
}

double LensObjective::loss(const Tensor& rho, Diagnostics* diag) const {
    return evaluate(loss_, {{"rho", rho}}, diag).real_at(0);
}

Tensor LensObjective::sound_speed(const Tensor& rho) const { return evaluate(sos_, {{"rho", rho}}); }

Tensor LensObjective::wavefield(const Tensor& rho, Diagnostics* diag) const {
    return evaluate(wavefield_, {{"rho", rho}}, diag);
}

Tensor LensObjective::tv_field(const Tensor& rho) const { return evaluate(tv_field_, {{"rho", rho}}); }

AdamState adam_init(const Tensor& params, double alpha, double beta1, double beta2, double eps) {
    AdamState s;
    s.m = Tensor::zeros(params.shape(), params.dtype());
    s.v = Tensor::zeros(params.shape(), params.dtype());
    s.alpha = alpha;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.eps = eps;
    return s;
}

void adam_step(AdamState& s, Tensor& params, const Tensor& grads) {
    if (grads.shape() != params.shape() || grads.dtype() != params.dtype() || s.m.shape() != params.shape() ||
        s.m.dtype() != params.dtype())
        fail(ErrorCode::ShapeMismatch, "Adam state, parameters and gradients must agree");
    ++s.t;
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
    auto m = s.m.raw(), v = s.v.raw(), p = params.raw();
    auto g = grads.raw();
    for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
        v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
        p[i] -= s.alpha * (m[i] / c1) / (std::sqrt(v[i] / c2) + s.eps);
    }
}

Tensor init_lens_params(std::uint64_t seed, const Shape& shape) {
    std::mt19937_64 rng(seed);
    Tensor t = Tensor::zeros(shape);
    for (double& v : t.real_data()) v = static_cast<double>(rng() >> 11) * 0x1.0p-53 - 4.0;
    return t;
}

} // namespace jdf
