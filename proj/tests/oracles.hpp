#pragma once

// Independent reference computations used by the test suites.

#include "jdf/autodiff.hpp"
#include "jdf/tensor.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace jdf::testing {

inline Tensor random_tensor(Shape shape, DType dtype, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape), dtype);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : t.raw()) v = dist(rng);
    return t;
}

/// Central differences of a scalar function with respect to every stored
/// real component of one bound input; complex gradients come out as
/// dL/dRe + i dL/dIm.
inline Tensor finite_difference(const std::function<double(const Bindings&)>& f, Bindings bindings,
                                const std::string& name, double h = 1e-5) {
    Tensor grad(bindings.at(name).shape(), bindings.at(name).dtype());
    auto raw = bindings.at(name).raw();
    for (std::size_t k = 0; k < raw.size(); ++k) {
        const double saved = raw[k];
        bindings.at(name).raw()[k] = saved + h;
        const double fp = f(bindings);
        bindings.at(name).raw()[k] = saved - h;
        const double fm = f(bindings);
        bindings.at(name).raw()[k] = saved;
        grad.raw()[k] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

inline double relative_error(const Tensor& got, const Tensor& want) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < got.raw().size(); ++i) {
        const double d = got.raw()[i] - want.raw()[i];
        num += d * d;
        den += want.raw()[i] * want.raw()[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

/// O(N^2) reference DFT of a 1-D complex sequence.
inline std::vector<cplx> naive_dft(const std::vector<cplx>& x, int sign = -1) {
    const std::size_t n = x.size();
    std::vector<cplx> out(n);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t j = 0; j < n; ++j)
            out[k] += x[j] * std::polar(1.0, sign * 2.0 * M_PI * static_cast<double>((j * k) % n) / static_cast<double>(n));
    return out;
}

/// Fornberg's recursion for finite-difference weights of derivative order m
/// at the offsets xs, evaluated at 0.
inline std::vector<double> fornberg_weights(int m, const std::vector<double>& xs) {
    const int n = static_cast<int>(xs.size()) - 1;
    std::vector<std::vector<std::vector<double>>> c(
        m + 1, std::vector<std::vector<double>>(n + 1, std::vector<double>(n + 1, 0.0)));
    c[0][0][0] = 1.0;
    double c1 = 1.0;
    for (int i = 1; i <= n; ++i) {
        double c2 = 1.0;
        for (int j = 0; j < i; ++j) {
            const double c3 = xs[i] - xs[j];
            c2 *= c3;
            for (int k = 0; k <= std::min(i, m); ++k) {
                c[k][i][j] = (xs[i] * c[k][i - 1][j] - (k > 0 ? k * c[k - 1][i - 1][j] : 0.0)) / c3;
            }
        }
        for (int k = 0; k <= std::min(i, m); ++k) {
            c[k][i][i] = c1 / c2 * ((k > 0 ? k * c[k - 1][i - 1][i - 1] : 0.0) - xs[i - 1] * c[k][i - 1][i - 1]);
        }
        c1 = c2;
    }
    return c[m][n];
}

} // namespace jdf::testing
