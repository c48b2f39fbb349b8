#include "jdf/solvers.hpp"

#include "jdf/error.hpp"

#include <cmath>
#include <complex>

namespace jdf {

namespace {

using Vec = std::vector<cplx>;

cplx dot(const Vec& a, const Vec& b) {
    cplx s{};
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

double norm(const Vec& a) {
    double s = 0.0;
    for (const cplx& v : a) s += std::norm(v);
    return std::sqrt(s);
}

Vec to_vec(const Tensor& t) {
    if (t.is_complex()) {
        auto d = t.complex_data();
        return Vec(d.begin(), d.end());
    }
    auto d = t.real_data();
    Vec v(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) v[i] = d[i];
    return v;
}

Tensor to_tensor(const Vec& v, const Shape& shape, DType dtype) {
    Tensor t = Tensor::zeros(shape, dtype);
    if (dtype == DType::Complex128) {
        std::copy(v.begin(), v.end(), t.complex_data().begin());
    } else {
        for (std::size_t i = 0; i < v.size(); ++i) t.real_data()[i] = v[i].real();
    }
    return t;
}

bool finite(const Vec& v) {
    for (const cplx& z : v)
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    return true;
}

} // namespace

SolveReport gmres_restarted(const LinearMap& A, const Tensor& b, const GmresConfig& cfg, const std::optional<Tensor>& x0) {
    if (!(cfg.tol > 0.0) || cfg.restart < 1) fail(ErrorCode::InvalidArgument, "GMRES needs tol > 0 and restart >= 1");
    if (x0 && (x0->shape() != b.shape() || x0->dtype() != b.dtype()))
        fail(ErrorCode::ShapeMismatch, "initial guess does not match the right-hand side");

    const Shape shape = b.shape();
    const DType dtype = b.dtype();
    const Vec bv = to_vec(b);
    if (!finite(bv)) fail(ErrorCode::NaNEncountered, "non-finite right-hand side");
    const std::size_t n = bv.size();

    auto matvec = [&](const Vec& v) {
        Tensor out = A.apply(to_tensor(v, shape, dtype));
        if (out.shape() != shape) fail(ErrorCode::ShapeMismatch, "linear map changed the vector shape");
        Vec r = to_vec(out);
        if (!finite(r)) fail(ErrorCode::NaNEncountered, "linear map produced a non-finite value");
        return r;
    };
    auto residual = [&](const Vec& x) {
        Vec r = bv;
        if (norm(x) > 0.0) {
            Vec ax = matvec(x);
            for (std::size_t i = 0; i < n; ++i) r[i] -= ax[i];
        }
        return r;
    };

    SolveReport rep;
    Vec x = x0 ? to_vec(*x0) : Vec(n);
    const double bnorm = norm(bv);
    Vec r = residual(x);
    double beta = norm(r);
    rep.residual_history.push_back(beta);
    const double target = cfg.tol * bnorm;
    const std::size_t m = cfg.restart;

    while (beta > target && rep.iterations < cfg.maxiter && !rep.breakdown) {
        std::vector<Vec> V;
        V.reserve(m + 1);
        V.push_back(r);
        for (cplx& v : V[0]) v /= beta;
        std::vector<Vec> H(m + 1, Vec(m));
        Vec cs(m), sn(m), g(m + 1);
        g[0] = beta;

        std::size_t k = 0;
        while (k < m && rep.iterations < cfg.maxiter) {
            Vec w = matvec(V[k]);
            ++rep.iterations;
            const double wnorm0 = norm(w);
            for (std::size_t i = 0; i <= k; ++i) {
                H[i][k] = dot(V[i], w);
                for (std::size_t t = 0; t < n; ++t) w[t] -= H[i][k] * V[i][t];
            }
            const double h = norm(w);
            H[k + 1][k] = h;

            for (std::size_t i = 0; i < k; ++i) {
                const cplx a = H[i][k], c = H[i + 1][k];
                H[i][k] = cs[i] * a + sn[i] * c;
                H[i + 1][k] = -std::conj(sn[i]) * a + cs[i] * c;
            }
            const cplx a = H[k][k], c = H[k + 1][k];
            const double denom = std::sqrt(std::norm(a) + std::norm(c));
            if (std::abs(a) == 0.0) {
                cs[k] = 0.0;
                sn[k] = 1.0;
            } else {
                cs[k] = std::abs(a) / denom;
                sn[k] = (a / std::abs(a)) * std::conj(c) / denom;
            }
            H[k][k] = cs[k] * a + sn[k] * c;
            H[k + 1][k] = 0.0;
            g[k + 1] = -std::conj(sn[k]) * g[k];
            g[k] = cs[k] * g[k];
            ++k;

            if (h <= 1e-14 * std::max(wnorm0, 1e-300)) {
                rep.breakdown = true;
                break;
            }
            if (std::abs(g[k]) <= target) break;
            V.push_back(std::move(w));
            for (cplx& v : V.back()) v /= h;
        }

        // Back substitution on the k x k triangular system.
        Vec y(k);
        for (std::size_t i = k; i-- > 0;) {
            cplx s = g[i];
            for (std::size_t j = i + 1; j < k; ++j) s -= H[i][j] * y[j];
            y[i] = s / H[i][i];
        }
        for (std::size_t j = 0; j < k; ++j)
            for (std::size_t t = 0; t < n; ++t) x[t] += y[j] * V[j][t];
        r = residual(x);
        beta = norm(r);
        rep.residual_history.push_back(beta);
    }

    rep.solution = to_tensor(x, shape, dtype);
    rep.residual_norm = beta;
    rep.relative_residual = bnorm > 0.0 ? beta / bnorm : beta;
    rep.converged = beta <= target;
    return rep;
}

LinearMap bind_linear_map(const LinearSystem& sys, Bindings params) {
    LinearMap map;
    auto shared = std::make_shared<Bindings>(std::move(params));
    auto s = std::make_shared<const LinearSystem>(sys);
    map.apply = [s, shared](const Tensor& v) {
        Bindings& b = *shared;
        b.insert_or_assign(s->state, v);
        return evaluate(s->forward, b);
    };
    if (sys.adjoint) {
        map.adjoint_apply = [s, shared](const Tensor& v) {
            Bindings& b = *shared;
            b.insert_or_assign(s->state, v);
            return evaluate(*s->adjoint, b);
        };
    }
    return map;
}

namespace {

class ImplicitSolve final : public CustomOp {
public:
    ImplicitSolve(LinearSystem sys, std::vector<std::string> params, GmresConfig cfg)
        : sys_(std::move(sys)), params_(std::move(params)), cfg_(cfg) {}

    std::string_view name() const override { return "gmres_solve"; }

    Tensor forward(std::span<const Tensor> inputs, Diagnostics* diag) const override {
        SolveReport rep = gmres_restarted(bind_linear_map(sys_, bindings(inputs)), inputs[0], cfg_);
        record(diag, "forward", rep);
        return std::move(rep.solution);
    }

    std::vector<std::optional<Tensor>> backward(std::span<const Tensor> inputs, const Tensor& output,
                                                const Tensor& cotangent, std::span<const bool> needs,
                                                Diagnostics* diag) const override {
        if (!sys_.adjoint) fail(ErrorCode::AdjointUnavailable, "implicit solve without an adjoint operator");
        Bindings bind = bindings(inputs);
        LinearMap map = bind_linear_map(sys_, bind);
        LinearMap adj{map.adjoint_apply, map.apply};
        SolveReport rep = gmres_restarted(adj, cotangent, cfg_);
        record(diag, "backward", rep);
        const Tensor& lambda = rep.solution;

        std::vector<std::optional<Tensor>> out(inputs.size());
        if (needs[0]) out[0] = lambda;
        std::vector<std::string> wrt;
        for (std::size_t i = 0; i < params_.size(); ++i)
            if (needs[i + 1]) wrt.push_back(params_[i]);
        if (wrt.empty()) return out;

        bind.insert_or_assign(sys_.state, output);
        Tensor neg = lambda;
        for (double& v : neg.raw()) v = -v;
        VjpResult r = vjp(sys_.forward, wrt, bind, neg);
        for (std::size_t i = 0; i < params_.size(); ++i)
            if (needs[i + 1]) out[i + 1] = std::move(r.grads.at(params_[i]));
        return out;
    }

private:
    Bindings bindings(std::span<const Tensor> inputs) const {
        Bindings b;
        for (std::size_t i = 0; i < params_.size(); ++i) b.emplace(params_[i], inputs[i + 1]);
        return b;
    }

    void record(Diagnostics* diag, const char* phase, const SolveReport& rep) const {
        if (!diag) return;
        diag->records.push_back({"gmres_solve", phase, rep.converged, rep.relative_residual, rep.iterations,
                                 cfg_.restart + 1});
    }

    LinearSystem sys_;
    std::vector<std::string> params_;
    GmresConfig cfg_;
};

} // namespace

Var solve_linear_implicit(const LinearSystem& sys, Var rhs, const std::map<std::string, Var>& params,
                          const GmresConfig& cfg) {
    const InputSlot* state = sys.forward.find_input(sys.state);
    if (!state) fail(ErrorCode::UnknownInput, "operator has no state input '" + sys.state + "'");
    if (rhs.shape() != state->shape || rhs.dtype() != state->dtype)
        fail(ErrorCode::ShapeMismatch, "right-hand side " + to_string(rhs.shape()) + "/" + to_string(rhs.dtype()) +
                                           " vs state " + to_string(state->shape) + "/" + to_string(state->dtype));
    if (sys.forward.output_shape() != state->shape || sys.forward.output_dtype() != state->dtype)
        fail(ErrorCode::NonEndomorphicOperator, "linear operator must map the state space to itself");

    std::vector<std::string> names;
    std::vector<Var> inputs{rhs};
    for (const auto& slot : sys.forward.inputs()) {
        if (slot.name == sys.state) continue;
        auto it = params.find(slot.name);
        if (it == params.end()) fail(ErrorCode::MissingBinding, "operator parameter '" + slot.name + "'");
        if (it->second.shape() != slot.shape || it->second.dtype() != slot.dtype)
            fail(ErrorCode::ShapeMismatch, "operator parameter '" + slot.name + "'");
        names.push_back(slot.name);
        inputs.push_back(it->second);
    }
    auto op = std::make_shared<ImplicitSolve>(sys, names, cfg);
    return rhs.builder().custom(op, inputs, state->shape, state->dtype);
}

Var rk4_step(GraphBuilder& b, const TracedOperator& rhs, const std::string& state, Var u, double dt) {
    auto it = rhs.input_families.find(state);
    if (it == rhs.input_families.end()) fail(ErrorCode::UnknownFieldName, state);
    if (!(it->second == rhs.output_family))
        fail(ErrorCode::NonEndomorphicOperator,
             "right-hand side maps " + it->second.describe() + " to " + rhs.output_family.describe());
    auto f = [&](Var v) { return b.inline_graph(rhs.param_graph, {{state, v}}); };
    Var k1 = f(u);
    Var k2 = f(u + k1 * (dt / 2));
    Var k3 = f(u + k2 * (dt / 2));
    Var k4 = f(u + k3 * dt);
    return u + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6);
}

Trajectory integrate_explicit(const TracedOperator& rhs, const std::string& state, const Tensor& u0, double dt,
                              std::size_t steps, std::size_t every, const Observer& observer) {
    if (!(dt > 0.0)) fail(ErrorCode::InvalidArgument, "time step must be positive");
    if (every == 0) every = 1;
    GraphBuilder b;
    Var u = b.input(state, u0.shape(), u0.dtype());
    ExprGraph step = b.build(rk4_step(b, rhs, state, u, dt));

    Trajectory traj;
    Bindings bind = rhs.bind({});
    Tensor cur = u0;
    auto emit = [&](std::size_t s) {
        const double t = static_cast<double>(s) * dt;
        traj.times.push_back(t);
        traj.states.push_back(cur);
        if (observer) observer(s, t, cur);
    };
    emit(0);
    for (std::size_t s = 1; s <= steps; ++s) {
        bind.insert_or_assign(state, cur);
        cur = evaluate(step, bind);
        for (double v : cur.raw())
            if (!std::isfinite(v)) fail(ErrorCode::NaNEncountered, "non-finite state at step " + std::to_string(s));
        if (s % every == 0 || s == steps) emit(s);
    }
    return traj;
}

double default_diffusion_dt(const Domain& domain) { return 0.1 * domain.min_spacing() * domain.min_spacing(); }

} // namespace jdf
