#pragma once

// Forward-mode differentiation of a full (unrestarted) GMRES iteration. Every
// scalar carries a tangent, so the derivative follows the Arnoldi process,
// the Givens rotations and the back substitution step by step.

#include "jdf/problems.hpp"
#include "jdf/tensor.hpp"

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

namespace jdf::testing {

struct Dual {
    cplx v{}, d{};
};

inline Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.d + b.d}; }
inline Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.d - b.d}; }
inline Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
inline Dual operator/(Dual a, Dual b) { return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)}; }
inline Dual conj(Dual a) { return {std::conj(a.v), std::conj(a.d)}; }
inline Dual dual_sqrt_real(Dual a) {
    const double s = std::sqrt(a.v.real());
    return {s, a.d.real() / (2.0 * s)};
}
inline Dual dual_abs(Dual a) {
    const double m = std::abs(a.v);
    return {m, (std::conj(a.v) * a.d).real() / m};
}

using DualVec = std::vector<Dual>;
/// (v, dv) -> (A v, A dv + dA v)
using DualMatvec = std::function<DualVec(const DualVec&)>;

inline Dual dual_dot(const DualVec& a, const DualVec& b) {
    Dual s;
    for (std::size_t i = 0; i < a.size(); ++i) s = s + conj(a[i]) * b[i];
    return s;
}

inline Dual dual_norm(const DualVec& a) { return dual_sqrt_real(dual_dot(a, a)); }

/// Solves A x = b from a zero guess; stops when the residual estimate drops
/// below tol * ||b|| or after `maxiter` steps.
inline DualVec unrolled_gmres(const DualMatvec& A, const DualVec& b, double tol, std::size_t maxiter) {
    const std::size_t n = b.size();
    Dual beta = dual_norm(b);
    std::vector<DualVec> V{b};
    for (Dual& x : V[0]) x = x / beta;
    std::vector<DualVec> H;
    DualVec cs, sn, g{beta};
    std::size_t k = 0;
    while (k < maxiter) {
        DualVec w = A(V[k]);
        DualVec col(k + 2);
        for (std::size_t i = 0; i <= k; ++i) {
            col[i] = dual_dot(V[i], w);
            for (std::size_t t = 0; t < n; ++t) w[t] = w[t] - col[i] * V[i][t];
        }
        Dual h = dual_norm(w);
        col[k + 1] = h;
        for (std::size_t i = 0; i < k; ++i) {
            Dual a = col[i], c = col[i + 1];
            col[i] = cs[i] * a + sn[i] * c;
            col[i + 1] = Dual{-1.0, 0.0} * conj(sn[i]) * a + cs[i] * c;
        }
        Dual a = col[k], c = col[k + 1];
        Dual ma = dual_abs(a);
        Dual denom = dual_sqrt_real(ma * ma + c * conj(c));
        cs.push_back(ma / denom);
        sn.push_back(a / ma * conj(c) / denom);
        col[k] = cs[k] * a + sn[k] * c;
        col[k + 1] = {};
        H.push_back(col);
        g.push_back(Dual{-1.0, 0.0} * conj(sn[k]) * g[k]);
        g[k] = cs[k] * g[k];
        ++k;
        if (std::abs(g[k].v) <= tol * beta.v.real() || h.v.real() == 0.0) break;
        for (Dual& x : w) x = x / h;
        V.push_back(std::move(w));
    }
    DualVec y(k);
    for (std::size_t i = k; i-- > 0;) {
        Dual s = g[i];
        for (std::size_t j = i + 1; j < k; ++j) s = s - H[j][i] * y[j];
        y[i] = s / H[i][i];
    }
    DualVec x(n);
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t t = 0; t < n; ++t) x[t] = x[t] + y[j] * V[j][t];
    return x;
}

/// Derivative of the Helmholtz solution u(c) along dc, obtained by running
/// the unrolled dual GMRES. Returns (u, du) flattened.
inline std::pair<std::vector<cplx>, std::vector<cplx>> helmholtz_unrolled(const HelmholtzSystem& hs, const Tensor& c,
                                                                          const Tensor& dc, const Tensor& source,
                                                                          double tol, std::size_t maxiter) {
    const Shape shape = source.shape();
    GraphBuilder b;
    Var u = b.input("u", shape, DType::Complex128);
    Var cv = b.input("c", c.shape());
    Var dcv = b.input("dc", c.shape());
    Var out = b.inline_graph(hs.system.forward, {{"u", u}, {"c", cv}});
    ExprGraph tangent = b.build(jvp(out, cv, dcv));

    Bindings bind = hs.constants;
    bind["c"] = c;
    bind["dc"] = dc;
    auto to_tensor = [&](const DualVec& v, bool deriv) {
        Tensor t = Tensor::zeros(shape, DType::Complex128);
        for (std::size_t i = 0; i < v.size(); ++i) t.complex_data()[i] = deriv ? v[i].d : v[i].v;
        return t;
    };
    DualMatvec A = [&](const DualVec& v) {
        bind["u"] = to_tensor(v, false);
        Tensor av = evaluate(hs.system.forward, bind);
        Tensor dav = evaluate(tangent, bind);
        bind["u"] = to_tensor(v, true);
        Tensor adv = evaluate(hs.system.forward, bind);
        DualVec r(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) r[i] = {av.complex_at(i), adv.complex_at(i) + dav.complex_at(i)};
        return r;
    };
    DualVec rhs(source.size());
    for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = {source.complex_at(i), 0.0};
    DualVec x = unrolled_gmres(A, rhs, tol, maxiter);
    std::vector<cplx> val(x.size()), der(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        val[i] = x[i].v;
        der[i] = x[i].d;
    }
    return {val, der};
}

} // namespace jdf::testing
