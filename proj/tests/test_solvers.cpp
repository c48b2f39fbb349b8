#include "jdf/geometry.hpp"
#include "jdf/solvers.hpp"

#include "oracles.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace jdf;
using jdf::testing::code_of;
using jdf::testing::finite_difference;
using jdf::testing::random_tensor;
using jdf::testing::relative_error;

namespace {

LinearMap diagonal(const Tensor& d) {
    return {[d](const Tensor& x) {
                Tensor y = x;
                if (y.is_complex()) {
                    for (std::size_t i = 0; i < y.size(); ++i) y.complex_data()[i] *= d.real_at(i);
                } else {
                    for (std::size_t i = 0; i < y.size(); ++i) y.real_data()[i] *= d.real_at(i);
                }
                return y;
            },
            {}};
}

// Dense complex matrix, used as an independent non-normal test map.
LinearMap dense(const std::vector<cplx>& a, std::size_t n) {
    return {[a, n](const Tensor& x) {
                Tensor y = Tensor::zeros({n}, DType::Complex128);
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < n; ++j) y.complex_data()[i] += a[i * n + j] * x.complex_at(j);
                return y;
            },
            {}};
}

// A(p) u = p * u + w (*) u with a fixed complex stencil; the adjoint uses the
// conjugated coefficients and the reversed stencil.
LinearSystem diag_plus_stencil(std::size_t n, const std::vector<cplx>& w) {
    Tensor kern = Tensor::zeros({w.size()}, DType::Complex128);
    Tensor kern_adj = Tensor::zeros({w.size()}, DType::Complex128);
    for (std::size_t k = 0; k < w.size(); ++k) {
        kern.complex_data()[k] = w[k];
        kern_adj.complex_data()[w.size() - 1 - k] = std::conj(w[k]);
    }
    LinearSystem sys;
    {
        GraphBuilder b;
        Var u = b.input("u", {n}, DType::Complex128);
        Var p = b.input("p", {n}, DType::Complex128);
        sys.forward = b.build(p * u + b.convolve(u, b.constant(kern), 0));
    }
    {
        GraphBuilder b;
        Var u = b.input("u", {n}, DType::Complex128);
        Var p = b.input("p", {n}, DType::Complex128);
        sys.adjoint = b.build(b.conj(p) * u + b.convolve(u, b.constant(kern_adj), 0));
    }
    return sys;
}

bool non_increasing(const std::vector<double>& h) {
    for (std::size_t i = 1; i < h.size(); ++i)
        if (h[i] > h[i - 1] * (1 + 1e-12)) return false;
    return true;
}

} // namespace

TEST_CASE("gmres: identity and diagonal maps") {
    std::mt19937_64 rng(1);
    Tensor b = random_tensor({10}, DType::Complex128, rng);
    LinearMap id{[](const Tensor& x) { return x; }, {}};
    SolveReport r = gmres_restarted(id, b, {1e-12, 5, 100});
    CHECK(r.converged);
    CHECK(r.iterations == 1);
    CHECK(max_abs_diff(r.solution, b) < 1e-14);

    Tensor d = Tensor::from_real({8}, {1, 2, 3, 4, 5, 6, 7, 8});
    SolveReport rd = gmres_restarted(diagonal(d), Tensor::full({8}, 1.0), {1e-13, 50, 100});
    CHECK(rd.converged);
    CHECK(rd.iterations <= 8);
    CHECK(!rd.solution.is_complex());
    for (std::size_t i = 0; i < 8; ++i) CHECK(std::abs(rd.solution.real_at(i) - 1.0 / (i + 1)) < 1e-10);
    CHECK(rd.residual_norm <= 1e-13 * std::sqrt(8.0) * (1 + 1e-9));

    // Hermitian positive definite diagonal, complex right-hand side.
    Tensor dh = random_tensor({20}, DType::Real64, rng, 0.5, 3.0);
    Tensor bc = random_tensor({20}, DType::Complex128, rng);
    SolveReport rh = gmres_restarted(diagonal(dh), bc, {1e-13, 50, 100});
    CHECK(rh.iterations <= 20);
    for (std::size_t i = 0; i < 20; ++i) CHECK(std::abs(rh.solution.complex_at(i) - bc.complex_at(i) / dh.real_at(i)) < 1e-10);

    CHECK(gmres_restarted(id, Tensor::zeros({4}), {1e-6, 5, 10}).converged);
}

TEST_CASE("gmres: restarted non-normal system") {
    std::mt19937_64 rng(5);
    const std::size_t n = 30;
    std::vector<cplx> a(n * n);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a[i * n + j] = cplx(nd(rng), nd(rng)) * (0.3 / std::sqrt(double(n))) + (i == j ? 2.0 : 0.0);
    Tensor b = random_tensor({n}, DType::Complex128, rng);
    SolveReport r = gmres_restarted(dense(a, n), b, {1e-10, 4, 2000});
    CHECK(r.converged);
    CHECK(r.residual_history.size() > 3);
    CHECK(non_increasing(r.residual_history));
    CHECK(r.relative_residual <= 1e-10);
    // The reported residual is recomputed independently here.
    Tensor ax = dense(a, n).apply(r.solution);
    double res = 0;
    for (std::size_t i = 0; i < n; ++i) res += std::norm(b.complex_at(i) - ax.complex_at(i));
    CHECK(std::sqrt(res) == doctest::Approx(r.residual_norm).epsilon(1e-6));

    SolveReport capped = gmres_restarted(dense(a, n), b, {1e-14, 2, 3});
    CHECK(!capped.converged);
    CHECK(capped.iterations == 3);
    CHECK(non_increasing(capped.residual_history));
}

TEST_CASE("gmres: non-finite values") {
    LinearMap bad{[](const Tensor& x) {
                      Tensor y = x;
                      y.real_data()[0] = std::nan("");
                      return y;
                  },
                  {}};
    CHECK(code_of([&] { gmres_restarted(bad, Tensor::full({3}, 1.0), {}); }) == ErrorCode::NaNEncountered);
    Tensor b = Tensor::full({3}, 1.0);
    b.real_data()[1] = INFINITY;
    LinearMap id{[](const Tensor& x) { return x; }, {}};
    CHECK(code_of([&] { gmres_restarted(id, b, {}); }) == ErrorCode::NaNEncountered);
}

TEST_CASE("linear maps from graphs: linearity and adjoint probes") {
    std::mt19937_64 rng(2);
    const std::size_t n = 12;
    LinearSystem sys = diag_plus_stencil(n, {{0.3, -0.2}, {-0.5, 0.1}, {0.0, 0.4}});
    Bindings params{{"p", random_tensor({n}, DType::Complex128, rng)}};
    LinearMap A = bind_linear_map(sys, params);
    Tensor x = random_tensor({n}, DType::Complex128, rng), y = random_tensor({n}, DType::Complex128, rng);

    Tensor mix = Tensor::zeros({n}, DType::Complex128);
    const cplx a{0.7, -0.2}, c{-1.1, 0.5};
    for (std::size_t i = 0; i < n; ++i) mix.complex_data()[i] = a * x.complex_at(i) + c * y.complex_at(i);
    Tensor lhs = A.apply(mix), ax = A.apply(x), ay = A.apply(y);
    double err = 0;
    for (std::size_t i = 0; i < n; ++i) err = std::max(err, std::abs(lhs.complex_at(i) - a * ax.complex_at(i) - c * ay.complex_at(i)));
    CHECK(err <= 1e-10 * (l2_norm(x) + l2_norm(y)));

    Tensor aty = A.adjoint_apply(y);
    cplx left{}, right{};
    for (std::size_t i = 0; i < n; ++i) {
        left += std::conj(ax.complex_at(i)) * y.complex_at(i);
        right += std::conj(x.complex_at(i)) * aty.complex_at(i);
    }
    CHECK(std::abs(left - right) < 1e-10);
}

TEST_CASE("implicit solve: scaled identity closed form") {
    LinearSystem sys;
    {
        GraphBuilder b;
        Var u = b.input("u", {4});
        Var alpha = b.input("alpha", {});
        sys.forward = b.build(u * b.broadcast_to(alpha, {4}));
    }
    {
        GraphBuilder b;
        Var u = b.input("u", {4});
        Var alpha = b.input("alpha", {});
        sys.adjoint = b.build(u * b.broadcast_to(alpha, {4}));
    }
    GraphBuilder b;
    Var alpha = b.input("alpha", {});
    Var rhs = b.input("b", {4});
    Var unused = b.input("unused", {4});
    Var u = solve_linear_implicit(sys, rhs, {{"alpha", alpha}}, {1e-12, 10, 50});
    ExprGraph loss = b.build(b.sum(u * u) + b.sum(unused) * 0.0);

    Bindings bind{{"alpha", Tensor::scalar(2.5)}, {"b", Tensor::from_real({4}, {1, -2, 0.5, 3})}, {"unused", Tensor::zeros({4})}};
    Diagnostics diag;
    auto g = gradient(loss, {"alpha", "b"}, bind, &diag);
    const double bb = 1 + 4 + 0.25 + 9;
    CHECK(g.value == doctest::Approx(bb / 6.25).epsilon(1e-12));
    auto f = [&](const Bindings& bd) { return evaluate(loss, bd).real_at(0); };
    CHECK(relative_error(g.grads.at("alpha"), finite_difference(f, bind, "alpha")) < 1e-6);
    CHECK(std::abs(g.grads.at("alpha").real_at(0) + 2 * bb / std::pow(2.5, 3)) < 1e-10);
    CHECK(relative_error(g.grads.at("b"), finite_difference(f, bind, "b")) < 1e-6);
    CHECK(diag.records.size() == 2);
    CHECK(diag.all_converged());
    CHECK(diag.records[1].phase == "backward");
}

TEST_CASE("implicit solve: complex parameters against finite differences") {
    std::mt19937_64 rng(4);
    const std::size_t n = 10;
    LinearSystem sys = diag_plus_stencil(n, {{0.2, 0.1}, {0.1, -0.3}, {-0.2, 0.05}});
    GraphBuilder b;
    Var p = b.input("p", {n}, DType::Complex128);
    Var rhs = b.input("b", {n}, DType::Complex128);
    Var u = solve_linear_implicit(sys, rhs, {{"p", p}}, {1e-13, 20, 200});
    ExprGraph loss = b.build(b.sum(b.abs(b.slice_axis(u, 0, 3, 7))));

    Tensor pd = random_tensor({n}, DType::Complex128, rng);
    for (std::size_t i = 0; i < n; ++i) pd.complex_data()[i] += 2.0;
    Bindings bind{{"p", pd}, {"b", random_tensor({n}, DType::Complex128, rng)}};
    auto g = gradient(loss, {"p", "b"}, bind);
    auto f = [&](const Bindings& bd) { return evaluate(loss, bd).real_at(0); };
    CHECK(relative_error(g.grads.at("p"), finite_difference(f, bind, "p")) < 1e-6);
    CHECK(relative_error(g.grads.at("b"), finite_difference(f, bind, "b")) < 1e-6);

    LinearSystem no_adj = sys;
    no_adj.adjoint.reset();
    GraphBuilder b2;
    Var p2 = b2.input("p", {n}, DType::Complex128);
    Var r2 = b2.input("b", {n}, DType::Complex128);
    ExprGraph l2 = b2.build(b2.sum(b2.abs(solve_linear_implicit(no_adj, r2, {{"p", p2}}, {}))));
    CHECK(code_of([&] { gradient(l2, {"p"}, bind); }) == ErrorCode::AdjointUnavailable);
    CHECK(code_of([&] { solve_linear_implicit(sys, r2, {}, {}); }) == ErrorCode::MissingBinding);
}

TEST_CASE("rk4: trivial and exponential decay") {
    Domain d({8}, {1.0});
    Field f(Family::real_fourier(d), Tensor::zeros({8, 1}), "u");
    std::mt19937_64 rng(6);
    Tensor u0 = random_tensor({8, 1}, DType::Real64, rng);

    TracedOperator zero = trace(ops::field("u") * 0.0, {f});
    Trajectory tz = integrate_explicit(zero, "u", u0, 0.1, 10, 5);
    CHECK(tz.states.size() == 3);
    for (const auto& s : tz.states) CHECK(s == u0);

    TracedOperator decay = trace(ops::field("u") * -1.0, {f});
    Tensor one = Tensor::full({8, 1}, 1.0);
    std::size_t calls = 0;
    Trajectory te = integrate_explicit(decay, "u", one, 0.01, 100, 25, [&](std::size_t, double, const Tensor&) { ++calls; });
    CHECK(calls == 5);
    CHECK(te.times.back() == doctest::Approx(1.0));
    CHECK(std::abs(te.states.back().real_at(0) - std::exp(-1.0)) < 1e-8);

    auto err = [&](double dt) {
        auto n = static_cast<std::size_t>(std::lround(1.0 / dt));
        return std::abs(integrate_explicit(decay, "u", one, dt, n, n).states.back().real_at(0) - std::exp(-1.0));
    };
    const double ratio = err(0.1) / err(0.05);
    CHECK(ratio >= 12.0);
    CHECK(ratio <= 20.0);

    TracedOperator grad = trace(ops::gradient(ops::field("u")), {Field(Family::real_fourier(Domain({8, 8}, {1, 1})), Tensor::zeros({8, 8, 1}), "u")});
    CHECK(code_of([&] { integrate_explicit(grad, "u", Tensor::zeros({8, 8, 1}), 0.1, 1); }) == ErrorCode::NonEndomorphicOperator);
}

TEST_CASE("rk4: heat kernel on a periodic grid") {
    Domain d({64, 64}, {1.0, 1.0});
    Field f = empty_field(Family::real_fourier(d), "u");
    TracedOperator lap = trace(ops::laplacian(ops::field("u")), {f});
    Tensor x = grid_coordinates(d);
    const double s0 = 4.0, t_end = 2.0;
    auto gaussian = [&](double s2, double amp) {
        Tensor g = Tensor::zeros({64, 64, 1});
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double r2 = std::pow(x.real_at(2 * i), 2) + std::pow(x.real_at(2 * i + 1), 2);
            g.real_data()[i] = amp * std::exp(-r2 / (2 * s2));
        }
        return g;
    };
    Tensor u0 = gaussian(s0 * s0, 1.0);
    const double dt = default_diffusion_dt(d);
    CHECK(dt == doctest::Approx(0.1));
    const auto steps = static_cast<std::size_t>(std::lround(t_end / dt));
    Trajectory tr = integrate_explicit(lap, "u", u0, dt, steps, steps);
    const double s2 = s0 * s0 + 2 * t_end;
    CHECK(max_abs_diff(tr.states.back(), gaussian(s2, s0 * s0 / s2)) < 1e-3);

    auto mean = [](const Tensor& t) {
        double m = 0;
        for (double v : t.real_data()) m += v;
        return m / static_cast<double>(t.size());
    };
    CHECK(std::abs(mean(tr.states.back()) - mean(u0)) < 1e-12 * t_end);

    CHECK(code_of([&] { integrate_explicit(lap, "u", u0, 50.0, 200); }) == ErrorCode::NaNEncountered);
}

TEST_CASE("rk4 steps are differentiable through unrolling") {
    Domain d({8}, {1.0});
    Field f = empty_field(Family::finite_differences(d, 2), "u");
    TracedOperator lap = trace(ops::laplacian(ops::field("u")), {f});
    GraphBuilder b;
    Var u = b.input("u", {8, 1});
    Var v = u;
    for (int s = 0; s < 3; ++s) v = rk4_step(b, lap, "u", v, 0.1);
    for (const auto& [name, value] : lap.global_params) (void)b.input(name, value.shape(), value.dtype());
    ExprGraph loss = b.build(b.sum(v * v * b.inline_graph(lap.param_graph, {{"u", u}})));
    std::mt19937_64 rng(3);
    Bindings bind = lap.bind({{"u", random_tensor({8, 1}, DType::Real64, rng)}});
    std::vector<std::string> wrt{"u"};
    for (const auto& [name, value] : lap.global_params) wrt.push_back(name);
    auto g = gradient(loss, wrt, bind);
    auto fn = [&](const Bindings& bd) { return evaluate(loss, bd).real_at(0); };
    for (const auto& name : wrt) CHECK(relative_error(g.grads.at(name), finite_difference(fn, bind, name)) < 1e-6);
}
