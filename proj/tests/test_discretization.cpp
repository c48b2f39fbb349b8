#include "jdf/discretization.hpp"
#include "jdf/geometry.hpp"

#include "oracles.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace jdf;
using jdf::testing::code_of;
using jdf::testing::random_tensor;

namespace {

Tensor points_1d(const std::vector<double>& xs) { return Tensor::from_real({xs.size(), 1}, xs); }

} // namespace

TEST_CASE("empty fields have the family parameter contract") {
    Field f = empty_field(Family::fourier(Domain({8, 8}, {1, 1})), "u");
    CHECK(f.params.shape() == Shape{8, 8, 1});
    CHECK(f.params.is_complex());
    CHECK(max_abs(f.params) == 0.0);

    Field p = empty_field(Family::polynomial(3), "p");
    CHECK(p.params.shape() == Shape{4});
    CHECK(!p.params.is_complex());

    Field d = empty_field(Family::finite_differences(Domain({16}, {1}), 2, DType::Real64, 2), "v");
    CHECK(d.params.shape() == Shape{16, 2});
    CHECK(!d.params.is_complex());

    CHECK(code_of([] { Field(Family::polynomial(2), Tensor::zeros({4}), "p"); }) == ErrorCode::ShapeMismatch);
    CHECK(code_of([] { (void)Family::finite_differences(Domain({8}, {1}), 3); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("polynomial interpolation") {
    Field p(Family::polynomial(2), Tensor::from_real({3}, {1, 2, 3}), "p");
    CHECK(interpolate(p, points_1d({0.5})).real_at(0) == doctest::Approx(2.75).epsilon(1e-15));
    CHECK(code_of([&] { interpolate(p, Tensor::zeros({1, 2})); }) == ErrorCode::PointDimensionMismatch);
    CHECK(code_of([&] { sample_on_grid(p); }) == ErrorCode::NoGrid);
}

TEST_CASE("fourier interpolation: collocation, analytic sine, periodicity") {
    for (std::size_t n : {8u, 9u}) {
        Domain d({n}, {0.5});
        const double L = d.length(0);
        Tensor x = grid_coordinates(d);
        Tensor theta = Tensor::zeros({n, 1});
        for (std::size_t j = 0; j < n; ++j) theta.real_data()[j] = std::sin(2 * M_PI * x.real_data()[j] / L);
        Field f(Family::real_fourier(d), theta, "u");

        Tensor at_nodes = interpolate(f, x.reshaped({n, 1}));
        CHECK(max_abs_diff(at_nodes, theta) < 1e-12);

        std::vector<double> mids, shifted;
        for (std::size_t j = 0; j < n; ++j) {
            mids.push_back(x.real_data()[j] + 0.25);
            shifted.push_back(x.real_data()[j] + 0.25 + L);
        }
        Tensor vm = interpolate(f, points_1d(mids));
        for (std::size_t j = 0; j < n; ++j) CHECK(std::abs(vm.real_at(j) - std::sin(2 * M_PI * mids[j] / L)) < 1e-10);
        CHECK(max_abs_diff(vm, interpolate(f, points_1d(shifted))) < 1e-10);
    }
}

TEST_CASE("fourier interpolation of a complex 2-D field") {
    std::mt19937_64 rng(3);
    Domain d({6, 8}, {1.0, 0.5});
    Field f(Family::fourier(d, DType::Complex128, 2), random_tensor({6, 8, 2}, DType::Complex128, rng), "u");
    Tensor pts = grid_coordinates(d).reshaped({48, 2});
    CHECK(max_abs_diff(interpolate(f, pts), f.params.reshaped({48, 2})) < 1e-12);

    // A single mode e^{i(k0 x0 + k1 x1)} is reproduced off grid.
    const double k0 = 2 * M_PI * 1 / d.length(0), k1 = 2 * M_PI * -2 / d.length(1);
    Tensor x = grid_coordinates(d);
    Tensor mode = Tensor::zeros({6, 8, 1}, DType::Complex128);
    for (std::size_t i = 0; i < 48; ++i)
        mode.complex_data()[i] = std::polar(1.0, k0 * x.real_data()[2 * i] + k1 * x.real_data()[2 * i + 1]);
    Field m(Family::fourier(d), mode, "m");
    Tensor q = Tensor::from_real({2, 2}, {0.37, -1.1, 2.2, 0.9});
    Tensor v = interpolate(m, q);
    for (std::size_t p = 0; p < 2; ++p) {
        cplx want = std::polar(1.0, k0 * q.real_at(2 * p) + k1 * q.real_at(2 * p + 1));
        CHECK(std::abs(v.complex_at(p) - want) < 1e-10);
    }
}

TEST_CASE("finite-difference interpolation is multilinear and exact on grid") {
    Domain d({5, 4}, {1.0, 2.0});
    Tensor x = grid_coordinates(d);
    Tensor theta = Tensor::zeros({5, 4, 1});
    // Bilinear function a + b x + c y + e x y is reproduced exactly.
    auto fn = [](double a, double b) { return 0.5 + 2 * a - b + 0.25 * a * b; };
    for (std::size_t i = 0; i < 20; ++i) theta.real_data()[i] = fn(x.real_data()[2 * i], x.real_data()[2 * i + 1]);
    Field f(Family::finite_differences(d), theta, "u");
    CHECK(max_abs_diff(interpolate(f, x.reshaped({20, 2})), theta.reshaped({20, 1})) < 1e-12);
    Tensor q = Tensor::from_real({2, 2}, {-0.5, 1.3, 0.2, -2.7});
    Tensor v = interpolate(f, q);
    CHECK(v.real_at(0) == doctest::Approx(fn(-0.5, 1.3)));
    CHECK(v.real_at(1) == doctest::Approx(fn(0.2, -2.7)));
    CHECK(sample_on_grid(f) == theta);
}

TEST_CASE("interpolation is linear in the parameters") {
    std::mt19937_64 rng(11);
    Domain d({8}, {0.5});
    Tensor pts = random_tensor({10, 1}, DType::Real64, rng, -2.0, 2.0);
    const double a = 0.7, b = -1.3;
    std::vector<Family> families{Family::fourier(d), Family::real_fourier(d), Family::finite_differences(d),
                                 Family::polynomial(4)};
    for (const auto& fam : families) {
        Tensor t1 = random_tensor(fam.param_shape(), fam.dtype(), rng);
        Tensor t2 = random_tensor(fam.param_shape(), fam.dtype(), rng);
        Tensor mix(fam.param_shape(), fam.dtype());
        for (std::size_t i = 0; i < mix.raw().size(); ++i) mix.raw()[i] = a * t1.raw()[i] + b * t2.raw()[i];
        Tensor lhs = interpolate(Field(fam, mix, "u"), pts);
        Tensor r1 = interpolate(Field(fam, t1, "u"), pts), r2 = interpolate(Field(fam, t2, "u"), pts);
        double err = 0;
        for (std::size_t i = 0; i < lhs.raw().size(); ++i)
            err = std::max(err, std::abs(lhs.raw()[i] - a * r1.raw()[i] - b * r2.raw()[i]));
        CHECK(err < 1e-12);
    }
}

TEST_CASE("arbitrary family evaluates its interpolation function") {
    Domain d({4}, {1.0});
    Family fam = Family::arbitrary(d, {1}, 1, [](Var theta, Var x) { return x * theta; }, "scaled-x");
    Field f(fam, Tensor::from_real({1}, {1.0}), "u");
    CHECK(sample_on_grid(f) == Tensor::from_real({4, 1}, {-2, -1, 0, 1}));
    CHECK(interpolate(f, points_1d({0.5})).real_at(0) == 0.5);
    CHECK(!(fam == Family::arbitrary(d, {1}, 1, [](Var theta, Var x) { return x * theta; })));
}
