#include "jdf/problems.hpp"

#include "oracles.hpp"
#include "test_helpers.hpp"
#include "unrolled_gmres.hpp"

#include <doctest.h>

#include <cmath>

using namespace jdf;
using jdf::testing::code_of;
using jdf::testing::random_tensor;

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct HelmholtzFixture {
    Domain domain;
    PmlConfig pml;
    HelmholtzSystem hs;
    Bindings bind;

    HelmholtzFixture(Domain d, PmlConfig p, const Tensor& c)
        : domain(std::move(d)), pml(p), hs(build_helmholtz_system(domain, 1.0, pml)) {
        bind = hs.constants;
        bind["c"] = c;
    }

    Tensor apply(const Tensor& u) {
        bind["u"] = u;
        return evaluate(hs.system.forward, bind);
    }
    Tensor apply_adjoint(const Tensor& u) {
        bind["u"] = u;
        return evaluate(*hs.system.adjoint, bind);
    }
};

cplx inner(const Tensor& a, const Tensor& b) {
    cplx s{};
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a.complex_at(i)) * b.complex_at(i);
    return s;
}

} // namespace

TEST_CASE("pml coefficients") {
    PmlConfig pml{110.0, 18.0};
    Tensor x = Tensor::from_real({4, 1}, {0.0, -110.0, 119.0, -119.0});
    Tensor g = pml_gamma(x, pml);
    CHECK(g.complex_at(0) == cplx(1.0, 0.0));
    CHECK(g.complex_at(1) == cplx(1.0, 0.0));
    const cplx want = 1.0 / cplx(1.0, 0.25);
    CHECK(std::abs(g.complex_at(2) - want) < 1e-15);
    CHECK(std::abs(g.complex_at(3) - want) < 1e-15);

    Tensor all = pml_gamma(grid_coordinates(Domain({256, 256}, {1, 1})), pml);
    for (const cplx& z : all.complex_data()) {
        CHECK(std::abs(z) <= 1.0);
        CHECK(z.imag() <= 0.0);
    }
}

TEST_CASE("helmholtz: plane wave, zero field and linearity") {
    // L = 10 pi makes (1, 0) and (0.6, 0.8) grid wavenumbers; no absorption.
    const std::size_t n = 32;
    Domain d({n, n}, {10 * M_PI / n, 10 * M_PI / n});
    HelmholtzFixture fx(d, {1e6, 1.0}, Tensor::full({n, n, 1}, 1.0));
    Tensor x = grid_coordinates(d);
    for (auto [kx, ky] : {std::pair{1.0, 0.0}, std::pair{0.0, -1.0}, std::pair{0.6, 0.8}}) {
        Tensor u = Tensor::zeros({n, n, 1}, DType::Complex128);
        for (std::size_t i = 0; i < n * n; ++i)
            u.complex_data()[i] = std::polar(1.0, kx * x.real_at(2 * i) + ky * x.real_at(2 * i + 1));
        CHECK(max_abs(fx.apply(u)) < 1e-6 * max_abs(u));
    }

    HelmholtzProblem p = HelmholtzProblem::scaled(32);
    std::mt19937_64 rng(3);
    Tensor c = random_tensor({32, 32, 1}, DType::Real64, rng, 1.0, 2.0);
    HelmholtzFixture hf(p.domain, p.pml, c);
    CHECK(max_abs(hf.apply(Tensor::zeros({32, 32, 1}, DType::Complex128))) == 0.0);

    Tensor u1 = random_tensor({32, 32, 1}, DType::Complex128, rng);
    Tensor u2 = random_tensor({32, 32, 1}, DType::Complex128, rng);
    const cplx a{0.4, -1.2}, b{-0.7, 0.3};
    Tensor mix = Tensor::zeros({32, 32, 1}, DType::Complex128);
    for (std::size_t i = 0; i < mix.size(); ++i) mix.complex_data()[i] = a * u1.complex_at(i) + b * u2.complex_at(i);
    Tensor lhs = hf.apply(mix), h1 = hf.apply(u1), h2 = hf.apply(u2);
    double err = 0;
    for (std::size_t i = 0; i < mix.size(); ++i)
        err = std::max(err, std::abs(lhs.complex_at(i) - a * h1.complex_at(i) - b * h2.complex_at(i)));
    CHECK(err < 1e-10);
}

TEST_CASE("helmholtz adjoint matches inner-product probes and the engine transpose") {
    HelmholtzProblem p = HelmholtzProblem::scaled(32);
    std::mt19937_64 rng(8);
    Tensor c = random_tensor({32, 32, 1}, DType::Real64, rng, 1.0, 2.0);
    HelmholtzFixture hf(p.domain, p.pml, c);
    for (int probe = 0; probe < 3; ++probe) {
        Tensor x = random_tensor({32, 32, 1}, DType::Complex128, rng);
        Tensor y = random_tensor({32, 32, 1}, DType::Complex128, rng);
        Tensor hy = hf.apply_adjoint(y);
        const cplx lhs = inner(hf.apply(x), y), rhs = inner(x, hy);
        CHECK(std::abs(lhs - rhs) < 1e-10 * std::abs(lhs));

        hf.bind["u"] = x;
        VjpResult r = vjp(hf.hs.system.forward, {"u"}, hf.bind, y);
        CHECK(max_abs_diff(r.grads.at("u"), hy) < 1e-10 * max_abs(hy));
    }
}

TEST_CASE("total variation") {
    Domain d({16, 16}, {1, 1});
    Family fam = Family::real_fourier(d);
    CHECK(std::abs(tv_value(Field(fam, Tensor::full({16, 16, 1}, 2.0), "c"))) < 1e-12);
    std::mt19937_64 rng(1);
    Tensor c = random_tensor({16, 16, 1}, DType::Real64, rng);
    const double tv = tv_value(Field(fam, c, "c"));
    CHECK(tv >= 0.0);
    Tensor shifted = c, scaled = c;
    for (double& v : shifted.real_data()) v += 3.0;
    for (double& v : scaled.real_data()) v *= -2.5;
    CHECK(std::abs(tv_value(Field(fam, shifted, "c")) - tv) < 1e-12);
    CHECK(std::abs(tv_value(Field(fam, scaled, "c")) - 2.5 * tv) < 1e-12);
}

TEST_CASE("sound-speed parametrization") {
    Domain d({8, 8}, {1, 1});
    IndexBox box{2, 6, 3, 5};
    Tensor c0 = sos_parametrization(Tensor::zeros({4, 2}), d, box);
    Tensor c4 = sos_parametrization(Tensor::full({4, 2}, -4.0), d, box);
    CHECK(c0.shape() == Shape{8, 8, 1});
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 8; ++j) {
            const bool in = i >= 2 && i < 6 && j >= 3 && j < 5;
            CHECK(c0.real_at(i * 8 + j) == (in ? 1.5 : 1.0));
            CHECK(c4.real_at(i * 8 + j) == doctest::Approx(in ? 1.0 + sigmoid(-4.0) : 1.0).epsilon(1e-15));
        }
    CHECK(1.0 + sigmoid(-4.0) == doctest::Approx(1.0180).epsilon(1e-4));
    std::mt19937_64 rng(2);
    Tensor c = sos_parametrization(random_tensor({4, 2}, DType::Real64, rng, -30.0, 30.0), d, box);
    for (double v : c.real_data()) CHECK((v >= 1.0 && v < 2.0));
    CHECK(code_of([&] { sos_parametrization(Tensor::zeros({4, 2}), d, IndexBox{6, 10, 0, 2}); }) == ErrorCode::RegionOutOfBounds);
}

TEST_CASE("scaled problem configuration") {
    HelmholtzProblem full = HelmholtzProblem::scaled(256);
    CHECK(full.source == std::array<std::size_t, 2>{128, 40});
    CHECK(full.target == std::array<std::size_t, 2>{70, 210});
    CHECK(full.lens.shape() == Shape{168, 40});
    CHECK(full.pml.onset == 110.0);
    CHECK(full.pml.width == 18.0);
    CHECK(full.lambda_tv == 1e-4);
    CHECK(full.omega == 1.0);
    CHECK(full.gmres.tol == 1e-3);
    CHECK(full.gmres.restart == 50);
    CHECK(full.gmres.maxiter == 1000);
    full.validate();

    HelmholtzProblem p = HelmholtzProblem::scaled(64);
    CHECK(p.source == std::array<std::size_t, 2>{32, 10});
    CHECK(p.target == std::array<std::size_t, 2>{17, 52});
    CHECK(p.lens.r0 == 11);
    CHECK(p.lens.r1 == 53);
    CHECK(p.lens.c0 == 27);
    CHECK(p.lens.c1 == 37);
    CHECK(p.pml.onset == 27.5);
    CHECK(p.pml.width == 4.5);
    p.validate();
    p.target = {1, 1};
    CHECK(code_of([&] { p.validate(); }) == ErrorCode::RegionOutOfBounds);
}

TEST_CASE("adam") {
    Tensor p = Tensor::from_real({3}, {1.0, -2.0, 0.5});
    AdamState s = adam_init(p, 0.1, 0.9, 0.9);
    Tensor p0 = p;
    adam_step(s, p, Tensor::zeros({3}));
    CHECK(p == p0);

    AdamState s1 = adam_init(p0, 0.1, 0.9, 0.9);
    Tensor q = p0;
    Tensor g = Tensor::from_real({3}, {0.3, -7.0, 1e-3});
    adam_step(s1, q, g);
    for (std::size_t i = 0; i < 3; ++i) {
        const double gi = g.real_at(i);
        CHECK(q.real_at(i) - p0.real_at(i) == doctest::Approx(-0.1 * gi / (std::abs(gi) + 1e-8)).epsilon(1e-12));
    }
    Tensor before = q;
    adam_step(s1, q, g);
    for (std::size_t i = 0; i < 3; ++i) CHECK((q.real_at(i) - before.real_at(i)) * g.real_at(i) < 0.0);

    AdamState sa = adam_init(p0), sb = adam_init(p0);
    Tensor pa = p0, pb = p0;
    Tensor neg = g;
    for (double& v : neg.real_data()) v = -v;
    for (int k = 0; k < 3; ++k) {
        adam_step(sa, pa, g);
        adam_step(sb, pb, neg);
    }
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(std::abs((pa.real_at(i) - p0.real_at(i)) + (pb.real_at(i) - p0.real_at(i))) < 1e-9);
    CHECK(code_of([&] { adam_step(sa, pa, Tensor::zeros({4})); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("lens initialization") {
    Tensor a = init_lens_params(42, {168, 40});
    CHECK(a == init_lens_params(42, {168, 40}));
    CHECK(!(a == init_lens_params(43, {168, 40})));
    double mean = 0;
    for (double v : a.real_data()) {
        CHECK(v >= -4.0);
        CHECK(v < -3.0);
        mean += v;
    }
    mean /= static_cast<double>(a.size());
    CHECK(mean == doctest::Approx(-3.5).epsilon(0.01));
    Tensor c = sos_parametrization(a, Domain({256, 256}, {1, 1}), IndexBox{44, 212, 108, 148});
    for (std::size_t i = 44; i < 212; ++i)
        for (std::size_t j = 108; j < 148; ++j) {
            const double v = c.real_at(i * 256 + j);
            CHECK((v >= 1.0 + sigmoid(-4.0) && v < 1.0 + sigmoid(-3.0)));
            CHECK((v > 1.0179 && v < 1.048));
        }
}

TEST_CASE("lens loss: zero source and source-sign invariance") {
    HelmholtzProblem p = HelmholtzProblem::scaled(32);
    p.gmres.tol = 1e-8;
    Tensor rho = init_lens_params(p.seed, p.lens.shape());

    HelmholtzProblem silent = p;
    silent.source_value = 0.0;
    silent.lambda_tv = 0.0;
    LensObjective zero(silent);
    auto ez = zero.value_and_grad(rho);
    CHECK(ez.loss == 0.0);
    CHECK(max_abs(ez.grad) == 0.0);

    HelmholtzProblem flipped = p;
    flipped.source_value = -1.0;
    LensObjective pos(p), neg(flipped);
    auto ep = pos.value_and_grad(rho), en = neg.value_and_grad(rho);
    CHECK(ep.loss == doctest::Approx(en.loss).epsilon(1e-10));
    CHECK(max_abs_diff(ep.grad, en.grad) < 1e-10 * max_abs(ep.grad));
    Tensor up = pos.wavefield(rho), un = neg.wavefield(rho);
    for (std::size_t i = 0; i < up.size(); ++i) CHECK(std::abs(up.complex_at(i) + un.complex_at(i)) < 1e-12);
    CHECK(ep.diag.all_converged());
    CHECK(ep.target_amplitude > 0.0);
}

TEST_CASE("lens loss gradient against finite differences") {
    HelmholtzProblem p = HelmholtzProblem::scaled(32);
    p.gmres.tol = 1e-8;
    LensObjective obj(p);
    std::mt19937_64 rng(21);
    Tensor rho = init_lens_params(p.seed, p.lens.shape());
    auto e = obj.value_and_grad(rho);

    std::uniform_int_distribution<std::size_t> pick(0, rho.size() - 1);
    const double h = 1e-4;
    for (int k = 0; k < 5; ++k) {
        const std::size_t i = pick(rng);
        Tensor plus = rho, minus = rho;
        plus.real_data()[i] += h;
        minus.real_data()[i] -= h;
        const double fd = (obj.loss(plus) - obj.loss(minus)) / (2 * h);
        INFO("entry " << i << " analytic " << e.grad.real_at(i) << " fd " << fd);
        CHECK(std::abs(e.grad.real_at(i) - fd) < 1e-4 * std::abs(fd));
    }
}

TEST_CASE("implicit gradient equals the unrolled solver derivative") {
    HelmholtzProblem p = HelmholtzProblem::scaled(16);
    p.gmres = {1e-10, 50, 2000};
    HelmholtzSystem hs = build_helmholtz_system(p.domain, p.omega, p.pml);
    const std::size_t T = p.target[0] * 16 + p.target[1];

    GraphBuilder b;
    Var c = b.input("c", {16, 16, 1});
    std::map<std::string, Var> params{{"c", c}};
    for (const auto& [name, value] : hs.constants) params.emplace(name, b.constant(value));
    Var u = solve_linear_implicit(hs.system, b.constant(p.source_params()), params, p.gmres);
    ExprGraph loss = b.build(-b.sum(b.abs(b.gather(u, {T}))));

    std::mt19937_64 rng(12);
    Tensor cval = random_tensor({16, 16, 1}, DType::Real64, rng, 1.0, 1.5);
    Diagnostics diag;
    auto g = gradient(loss, {"c"}, {{"c", cval}}, &diag);
    CHECK(diag.all_converged());
    for (const auto& r : diag.records) CHECK(r.workspace_vectors == p.gmres.restart + 1);

    double num = 0, den = 0;
    for (int k = 0; k < 6; ++k) {
        Tensor dc = random_tensor({16, 16, 1}, DType::Real64, rng);
        auto [val, der] = jdf::testing::helmholtz_unrolled(hs, cval, dc, p.source_params(), 1e-10, 256);
        const double unrolled = -(std::conj(val[T]) * der[T]).real() / std::abs(val[T]);
        double implicit = 0;
        for (std::size_t i = 0; i < dc.size(); ++i) implicit += g.grads.at("c").real_at(i) * dc.real_at(i);
        num += std::pow(implicit - unrolled, 2);
        den += unrolled * unrolled;
    }
    CHECK(std::sqrt(num / den) < 1e-3);
}
