#include "jdf/operators.hpp"

#include "jdf/error.hpp"
#include "jdf/geometry.hpp"

#include <cmath>
#include <set>
#include <unordered_map>

namespace jdf {

namespace ops {

namespace {

Expr make(ExprKind kind, std::vector<Expr> children = {}) {
    auto n = std::make_shared<ExprNode>();
    n->kind = kind;
    n->children = std::move(children);
    return Expr(std::move(n));
}

} // namespace

Expr field(const std::string& name) {
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprKind::Field;
    n->name = name;
    return Expr(std::move(n));
}

Expr scalar(double value) { return scalar(cplx{value, 0.0}); }

Expr scalar(cplx value) {
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprKind::Scalar;
    n->value = value;
    n->name = value.imag() != 0.0 ? "complex" : "real";
    return Expr(std::move(n));
}

Expr gradient(const Expr& u) { return make(ExprKind::Gradient, {u}); }
Expr diag_jacobian(const Expr& v) { return make(ExprKind::DiagJacobian, {v}); }
Expr sum_over_dims(const Expr& v) { return make(ExprKind::SumOverDims, {v}); }
Expr laplacian(const Expr& u) { return make(ExprKind::Laplacian, {u}); }

Expr elementwise(ElementwiseFn fn, const Expr& u, std::string label) {
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprKind::Elementwise;
    n->children = {u};
    n->fn = std::move(fn);
    n->name = std::move(label);
    return Expr(std::move(n));
}

Expr abs(const Expr& u) {
    return elementwise([](Var v) { return v.builder().abs(v); }, u, "abs");
}

Expr conj(const Expr& u) {
    return elementwise([](Var v) { return v.builder().conj(v); }, u, "conj");
}

Expr pow(const Expr& u, double exponent) {
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprKind::Pow;
    n->children = {u};
    n->exponent = exponent;
    return Expr(std::move(n));
}

Expr reciprocal(const Expr& u) { return make(ExprKind::Reciprocal, {u}); }

} // namespace ops

Expr operator+(const Expr& a, const Expr& b) { return ops::make(ExprKind::Add, {a, b}); }
Expr operator-(const Expr& a, const Expr& b) { return ops::make(ExprKind::Sub, {a, b}); }
Expr operator*(const Expr& a, const Expr& b) { return ops::make(ExprKind::Mul, {a, b}); }
Expr operator/(const Expr& a, const Expr& b) { return ops::make(ExprKind::Div, {a, b}); }
Expr operator+(const Expr& a, double b) { return a + ops::scalar(b); }
Expr operator*(double a, const Expr& b) { return ops::scalar(a) * b; }
Expr operator*(const Expr& a, double b) { return a * ops::scalar(b); }
Expr operator*(cplx a, const Expr& b) { return ops::scalar(a) * b; }
Expr operator/(double a, const Expr& b) { return ops::scalar(a) / b; }
Expr operator/(const Expr& a, double b) { return a / ops::scalar(b); }

namespace {

struct Traced {
    std::optional<Family> family; // empty for scalar literals
    Var param;
    cplx literal{};

    bool is_scalar() const { return !family.has_value(); }
};

std::string kind_name(ExprKind k) {
    switch (k) {
    case ExprKind::Field: return "field";
    case ExprKind::Gradient: return "gradient";
    case ExprKind::DiagJacobian: return "diag_jacobian";
    case ExprKind::SumOverDims: return "sum_over_dims";
    case ExprKind::Laplacian: return "laplacian";
    case ExprKind::Elementwise: return "elementwise";
    case ExprKind::Add: return "add";
    case ExprKind::Sub: return "sub";
    case ExprKind::Mul: return "mul";
    case ExprKind::Div: return "div";
    case ExprKind::Pow: return "pow";
    case ExprKind::Reciprocal: return "reciprocal";
    case ExprKind::Scalar: return "scalar";
    }
    return "?";
}

[[noreturn]] void unsupported(ExprKind k, const Family& f) {
    fail(ErrorCode::UnsupportedNodeForFamily, kind_name(k) + " on " + f.describe());
}

Var apply_binary(ExprKind k, Var a, Var b) {
    switch (k) {
    case ExprKind::Add: return a + b;
    case ExprKind::Sub: return a - b;
    case ExprKind::Mul: return a * b;
    case ExprKind::Div: return a / b;
    default: fail(ErrorCode::InvalidArgument, "not a binary node");
    }
}

// Post-composes an arbitrary family's interpolation function. The new function
// is instantiated once on a single point so errors surface at trace time.
Family map_arbitrary(const Family& f, std::size_t components, const std::string& label,
                     std::function<Var(Var y, Var x)> post) {
    const auto& arb = f.as<Arbitrary>();
    auto base = arb.fn;
    InterpolationFn fn = [base, post](Var theta, Var x) { return post((*base)(theta, x), x); };
    Family out = Family::arbitrary(f.grid(), arb.theta_shape, components, fn, label);
    GraphBuilder probe;
    Var theta = probe.input("theta", arb.theta_shape);
    Var x = probe.input("x", {1, f.grid().dims()});
    Var y = fn(theta, x);
    if (y.shape() != Shape{1, components})
        fail(ErrorCode::ShapeMismatch, label + " produced " + to_string(y.shape()));
    return out;
}

// d/dx_axis of every output component of an arbitrary interpolation function.
Var arbitrary_partial(Var y, Var x, std::size_t axis) {
    Tensor e = Tensor::zeros(x.shape());
    const std::size_t P = x.shape()[0], D = x.shape()[1];
    for (std::size_t p = 0; p < P; ++p) e.real_data()[p * D + axis] = 1.0;
    return jvp(y, x, x.builder().constant(std::move(e)));
}

class Tracer {
public:
    GraphBuilder b;
    std::map<std::string, Tensor> globals;

    Var global(const std::string& name, Tensor value) {
        if (auto it = globals.find(name); it != globals.end()) {
            if (it->second.shape() != value.shape())
                fail(ErrorCode::ParamShapeConflict, "operator parameter '" + name + "'");
        } else {
            globals.emplace(name, value);
        }
        return b.input(name, value.shape(), value.dtype());
    }

    Traced field_input(const Field& f) { return {f.family, b.input(f.name, f.params.shape(), f.params.dtype()), {}}; }

    // Derivative of every component along one axis.
    Traced partial(const Traced& v, std::size_t axis, int order = 1) {
        const Family& fam = *v.family;
        if (fam.is<Polynomial>()) {
            if (axis != 0) fail(ErrorCode::AxisOutOfRange, "polynomial family is one-dimensional");
            Traced r = v;
            for (int o = 0; o < order; ++o) r = polynomial_partial(r);
            return r;
        }
        if (axis >= fam.grid().dims()) fail(ErrorCode::AxisOutOfRange, "derivative axis " + std::to_string(axis));
        if (fam.is<FourierSeries>()) {
            Traced r = v;
            for (int o = 0; o < order; ++o) r.param = fourier_partial(r.param, fam, axis);
            return r;
        }
        if (fam.is<FiniteDifferences>()) return {fam, fd_partial(v.param, fam, axis, order), {}};
        Family f = fam;
        for (int o = 0; o < order; ++o)
            f = map_arbitrary(f, f.components(), "d" + std::to_string(axis) + "(" + f.as<Arbitrary>().label + ")",
                              [axis](Var y, Var x) { return arbitrary_partial(y, x, axis); });
        return {f, v.param, {}};
    }

    Var fourier_partial(Var p, const Family& fam, std::size_t axis) {
        const Domain& d = fam.grid();
        const bool real = fam.dtype() == DType::Real64;
        auto k = frequency_axis(d, axis);
        const std::size_t n = d.n()[axis];
        if (real && n % 2 == 0) k[n / 2] = 0.0;
        Shape ks(d.dims() + 1, 1);
        ks[axis] = n;
        Var kv = global("fourier_k" + std::to_string(axis) + (real ? "_real" : ""), Tensor::from_real(ks, k));
        Var spectral = b.to_complex(kv) * cplx{0.0, 1.0} * b.dft(p, axis);
        Var out = b.idft(spectral, axis);
        return real ? b.real(out) : out;
    }

    Var fd_partial(Var p, const Family& fam, std::size_t axis, int order) {
        const int acc = fam.as<FiniteDifferences>().accuracy;
        const Domain& d = fam.grid();
        auto w = fd_stencil(order, acc, d.dx()[axis]);
        if (w.size() > d.n()[axis])
            fail(ErrorCode::AccuracyTooHighForGrid, std::to_string(w.size()) + "-point stencil on " +
                                                        std::to_string(d.n()[axis]) + " cells");
        const std::size_t K = w.size();
        Var kernel = global("fd_d" + std::to_string(order) + "_acc" + std::to_string(acc) + "_axis" + std::to_string(axis),
                            Tensor::from_real({K}, std::move(w)));
        return b.convolve(p, kernel, axis);
    }

    Traced polynomial_partial(const Traced& v) {
        const std::size_t N = v.family->as<Polynomial>().degree;
        if (N == 0) return {Family::polynomial(0), v.param * 0.0, {}};
        std::vector<double> scale(N);
        for (std::size_t i = 0; i < N; ++i) scale[i] = static_cast<double>(i + 1);
        Var shifted = b.slice_axis(v.param, 0, 1, N + 1);
        return {Family::polynomial(N - 1), shifted * b.constant(Tensor::from_real({N}, scale)), {}};
    }

    Traced gradient(const Traced& u) {
        const Family& fam = *u.family;
        if (fam.components() != 1)
            fail(ErrorCode::ComponentMismatch, "gradient needs a scalar field, got M=" + std::to_string(fam.components()));
        if (fam.is<Polynomial>()) return partial(u, 0);
        const std::size_t D = fam.grid().dims();
        if (fam.is<Arbitrary>()) {
            Family f = map_arbitrary(fam, D, "grad(" + fam.as<Arbitrary>().label + ")", [D](Var y, Var x) {
                std::vector<Var> parts;
                for (std::size_t a = 0; a < D; ++a) parts.push_back(arbitrary_partial(y, x, a));
                return y.builder().concat(parts, 1);
            });
            return {f, u.param, {}};
        }
        std::vector<Var> parts;
        for (std::size_t a = 0; a < D; ++a) parts.push_back(partial(u, a).param);
        Var out = b.concat(parts, D);
        return {fam.with_components(D).with_dtype(out.dtype()), out, {}};
    }

    Traced diag_jacobian(const Traced& v) {
        const Family& fam = *v.family;
        if (fam.is<Polynomial>()) return partial(v, 0);
        const std::size_t D = fam.grid().dims();
        if (fam.components() != D)
            fail(ErrorCode::ComponentMismatch,
                 "diag_jacobian needs M=D=" + std::to_string(D) + ", got M=" + std::to_string(fam.components()));
        if (fam.is<Arbitrary>()) {
            Family f = map_arbitrary(fam, D, "diagjac(" + fam.as<Arbitrary>().label + ")", [D](Var y, Var x) {
                std::vector<Var> parts;
                for (std::size_t a = 0; a < D; ++a)
                    parts.push_back(y.builder().slice_axis(arbitrary_partial(y, x, a), 1, a, a + 1));
                return y.builder().concat(parts, 1);
            });
            return {f, v.param, {}};
        }
        std::vector<Var> parts;
        for (std::size_t a = 0; a < D; ++a) {
            Traced comp{fam.with_components(1), b.slice_axis(v.param, D, a, a + 1), {}};
            parts.push_back(partial(comp, a).param);
        }
        return {fam, b.concat(parts, D), {}};
    }

    Traced sum_over_dims(const Traced& v) {
        const Family& fam = *v.family;
        if (fam.is<Polynomial>()) return v;
        if (fam.is<Arbitrary>()) {
            Family f = map_arbitrary(fam, 1, "sum(" + fam.as<Arbitrary>().label + ")",
                                     [](Var y, Var) { return y.builder().sum_axis(y, 1); });
            return {f, v.param, {}};
        }
        return {fam.with_components(1), b.sum_axis(v.param, fam.grid().dims()), {}};
    }

    Traced laplacian(const Traced& u) {
        const Family& fam = *u.family;
        if (fam.is<FiniteDifferences>()) {
            const std::size_t D = fam.grid().dims();
            Var acc = fd_partial(u.param, fam, 0, 2);
            for (std::size_t a = 1; a < D; ++a) acc = acc + fd_partial(u.param, fam, a, 2);
            return {fam, acc, {}};
        }
        return sum_over_dims(diag_jacobian(gradient(u)));
    }

    Traced elementwise(const ExprNode& n, const Traced& u) {
        const Family& fam = *u.family;
        if (fam.is<Polynomial>()) unsupported(ExprKind::Elementwise, fam);
        if (fam.is<Arbitrary>()) {
            auto fn = n.fn;
            Family f = map_arbitrary(fam, fam.components(), n.name + "(" + fam.as<Arbitrary>().label + ")",
                                     [fn](Var y, Var) { return fn(y); });
            return {f, u.param, {}};
        }
        Var out = n.fn(u.param);
        if (out.shape().size() != u.param.shape().size() ||
            !std::equal(out.shape().begin(), out.shape().end() - 1, u.param.shape().begin()))
            fail(ErrorCode::ShapeMismatch, "elementwise '" + n.name + "' changed the grid shape");
        return {fam.with_dtype(out.dtype()).with_components(out.shape().back()), out, {}};
    }

    Traced unary_power(ExprKind k, double exponent, const Traced& u) {
        const Family& fam = *u.family;
        auto op = [k, exponent](Var v) {
            return k == ExprKind::Pow ? v.builder().pow(v, exponent) : v.builder().reciprocal(v);
        };
        if (fam.is<Polynomial>()) {
            if (k == ExprKind::Pow && exponent == 1.0) return u;
            unsupported(k, fam);
        }
        if (fam.is<Arbitrary>()) {
            Family f = map_arbitrary(fam, fam.components(), kind_name(k) + "(" + fam.as<Arbitrary>().label + ")",
                                     [op](Var y, Var) { return op(y); });
            return {f, u.param, {}};
        }
        return {fam, op(u.param), {}};
    }

    Traced binary(ExprKind k, const Traced& a, const Traced& c) {
        if (a.is_scalar() && c.is_scalar()) {
            Traced r;
            r.literal = k == ExprKind::Add   ? a.literal + c.literal
                        : k == ExprKind::Sub ? a.literal - c.literal
                        : k == ExprKind::Mul ? a.literal * c.literal
                                             : a.literal / c.literal;
            return r;
        }
        if (a.is_scalar() || c.is_scalar()) return binary_scalar(k, a, c);

        const Family& fa = *a.family;
        const Family& fc = *c.family;
        if (!fa.compatible_with(fc))
            fail(ErrorCode::IncompatibleFamilies, fa.describe() + " vs " + fc.describe());
        if (fa.is<Arbitrary>()) unsupported(k, fa);
        if (fa.is<Polynomial>() && (k == ExprKind::Mul || k == ExprKind::Div)) unsupported(k, fa);
        const std::size_t ma = fa.components(), mc = fc.components();
        if (ma != mc && ma != 1 && mc != 1)
            fail(ErrorCode::ComponentMismatch, "M=" + std::to_string(ma) + " vs M=" + std::to_string(mc));
        Var out = apply_binary(k, a.param, c.param);
        if (fa.is<Polynomial>()) return {fa, out, {}};
        return {fa.with_dtype(out.dtype()).with_components(std::max(ma, mc)), out, {}};
    }

    Traced binary_scalar(ExprKind k, const Traced& a, const Traced& c) {
        const bool scalar_left = a.is_scalar();
        const Traced& f = scalar_left ? c : a;
        const cplx s = scalar_left ? a.literal : c.literal;
        const Family& fam = *f.family;
        auto literal = [s](GraphBuilder& gb) { return s.imag() != 0.0 ? gb.scalar(s) : gb.scalar(s.real()); };

        if (fam.is<Arbitrary>()) {
            Family out = map_arbitrary(fam, fam.components(), kind_name(k) + "(" + fam.as<Arbitrary>().label + ")",
                                       [k, literal, scalar_left](Var y, Var) {
                                           Var sv = literal(y.builder());
                                           return scalar_left ? apply_binary(k, sv, y) : apply_binary(k, y, sv);
                                       });
            return {out, f.param, {}};
        }
        if (fam.is<Polynomial>()) {
            if (s.imag() != 0.0) unsupported(k, fam);
            if (k == ExprKind::Add || k == ExprKind::Sub) {
                Tensor shift = Tensor::zeros(fam.param_shape());
                shift.real_data()[0] = s.real();
                Var sv = b.constant(std::move(shift));
                return {fam, scalar_left ? apply_binary(k, sv, f.param) : apply_binary(k, f.param, sv), {}};
            }
            if (k == ExprKind::Div && scalar_left) unsupported(k, fam);
            return {fam, apply_binary(k, f.param, literal(b)), {}};
        }
        Var sv = literal(b);
        Var out = scalar_left ? apply_binary(k, sv, f.param) : apply_binary(k, f.param, sv);
        return {fam.with_dtype(out.dtype()), out, {}};
    }

    Traced resolve(const Expr& e, const std::map<std::string, Field>& fields) {
        if (auto it = memo_.find(e.id()); it != memo_.end()) return it->second;
        const ExprNode& n = e.node();
        Traced r;
        auto child = [&](std::size_t i) { return resolve(n.children[i], fields); };
        auto need_field = [&](const Traced& t) {
            if (t.is_scalar())
                fail(ErrorCode::UnsupportedNodeForFamily, kind_name(n.kind) + " applied to a scalar constant");
            return t;
        };
        switch (n.kind) {
        case ExprKind::Field: {
            auto it = fields.find(n.name);
            if (it == fields.end()) fail(ErrorCode::UnknownFieldName, n.name);
            r = field_input(it->second);
            break;
        }
        case ExprKind::Scalar: r.literal = n.value; break;
        case ExprKind::Gradient: r = gradient(need_field(child(0))); break;
        case ExprKind::DiagJacobian: r = diag_jacobian(need_field(child(0))); break;
        case ExprKind::SumOverDims: r = sum_over_dims(need_field(child(0))); break;
        case ExprKind::Laplacian: r = laplacian(need_field(child(0))); break;
        case ExprKind::Elementwise: r = elementwise(n, need_field(child(0))); break;
        case ExprKind::Pow:
        case ExprKind::Reciprocal: {
            Traced c = child(0);
            if (c.is_scalar()) {
                r.literal = n.kind == ExprKind::Pow ? std::pow(c.literal, n.exponent) : 1.0 / c.literal;
                break;
            }
            r = unary_power(n.kind, n.exponent, c);
            break;
        }
        case ExprKind::Add:
        case ExprKind::Sub:
        case ExprKind::Mul:
        case ExprKind::Div: r = binary(n.kind, child(0), child(1)); break;
        }
        memo_.emplace(e.id(), r);
        return r;
    }

private:
    std::unordered_map<const ExprNode*, Traced> memo_;
};

TracedOperator finish(Tracer& t, const Traced& out, const std::vector<Field>& inputs) {
    if (out.is_scalar()) fail(ErrorCode::UnsupportedNodeForFamily, "expression does not depend on any field");
    TracedOperator op{*out.family, t.b.build(out.param), t.globals, {}, {}};
    for (const auto& f : inputs) {
        op.input_names.push_back(f.name);
        op.input_families.emplace(f.name, f.family);
    }
    return op;
}

} // namespace

Bindings TracedOperator::bind(const Bindings& bindings) const {
    Bindings all = global_params;
    for (const auto& [name, value] : bindings) all.insert_or_assign(name, value);
    return all;
}

Tensor TracedOperator::apply(const Bindings& bindings, Diagnostics* diag) const {
    return evaluate(param_graph, bind(bindings), diag);
}

Field TracedOperator::apply_field(const Bindings& bindings, const std::string& name) const {
    return Field(output_family, apply(bindings), name);
}

TracedOperator trace(const Expr& expr, const std::vector<Field>& inputs) {
    std::map<std::string, Field> fields;
    std::optional<Domain> domain;
    for (const auto& f : inputs) {
        if (!fields.emplace(f.name, f).second)
            fail(ErrorCode::InvalidArgument, "duplicate field name '" + f.name + "'");
        if (f.family.domain()) {
            if (domain && *domain != *f.family.domain())
                fail(ErrorCode::IncompatibleFamilies, "fields '" + f.name + "' and others live on different domains");
            domain = f.family.domain();
        }
    }
    Tracer t;
    // Declare every field so the parameter program accepts all of them.
    for (const auto& f : inputs) t.field_input(f);
    Traced out = t.resolve(expr, fields);
    return finish(t, out, inputs);
}

TracedOperator compose(const TracedOperator& outer, const TracedOperator& inner, const std::optional<std::string>& input) {
    std::string name;
    if (input) {
        name = *input;
    } else {
        if (outer.input_names.size() != 1)
            fail(ErrorCode::InvalidArgument, "outer operator has several field inputs; name the one to replace");
        name = outer.input_names.front();
    }
    auto fam = outer.input_families.find(name);
    if (fam == outer.input_families.end()) fail(ErrorCode::UnknownFieldName, name);
    if (!(fam->second == inner.output_family))
        fail(ErrorCode::FamilyMismatch, "inner produces " + inner.output_family.describe() + ", outer expects " +
                                            fam->second.describe());

    for (const auto& slot : outer.param_graph.inputs()) {
        if (slot.name == name) continue;
        if (const InputSlot* other = inner.param_graph.find_input(slot.name))
            if (other->shape != slot.shape || other->dtype != slot.dtype)
                fail(ErrorCode::ParamShapeConflict, "'" + slot.name + "' is " + to_string(other->shape) + " in inner, " +
                                                        to_string(slot.shape) + " in outer");
    }

    GraphBuilder b;
    Var mid = b.inline_graph(inner.param_graph, {});
    Var out = b.inline_graph(outer.param_graph, {{name, mid}});

    TracedOperator op{outer.output_family, b.build(out), inner.global_params, inner.input_names, inner.input_families};
    for (const auto& [k, v] : outer.global_params) op.global_params.emplace(k, v);
    for (const auto& n : outer.input_names) {
        if (n == name || op.input_families.count(n)) continue;
        op.input_names.push_back(n);
        op.input_families.emplace(n, outer.input_families.at(n));
    }
    return op;
}

namespace {

Tensor run_rule(const Field& field, const std::function<Var(Tracer&, const Traced&)>& rule) {
    Tracer t;
    Traced in = t.field_input(field);
    Var out = rule(t, in);
    return evaluate(t.b.build(out), [&] {
        Bindings bind = t.globals;
        bind.emplace(field.name, field.params);
        return bind;
    }());
}

} // namespace

Tensor fourier_derivative_params(const Field& field, std::size_t axis) {
    if (!field.family.is<FourierSeries>()) fail(ErrorCode::NotFourier, field.family.describe());
    return run_rule(field, [axis](Tracer& t, const Traced& in) { return t.partial(in, axis).param; });
}

Tensor polynomial_derivative_params(const Tensor& theta) {
    if (theta.rank() != 1 || theta.size() == 0 || theta.is_complex())
        fail(ErrorCode::ShapeMismatch, "polynomial coefficients must be a real vector");
    Field f(Family::polynomial(theta.size() - 1), theta, "p");
    return run_rule(f, [](Tracer& t, const Traced& in) { return t.partial(in, 0).param; });
}

Tensor fd_derivative_params(const Field& field, std::size_t axis, int order) {
    if (!field.family.is<FiniteDifferences>())
        fail(ErrorCode::UnsupportedNodeForFamily, "fd_derivative_params on " + field.family.describe());
    if (order != 1 && order != 2) fail(ErrorCode::InvalidArgument, "derivative order must be 1 or 2");
    return run_rule(field, [axis, order](Tracer& t, const Traced& in) { return t.partial(in, axis, order).param; });
}

std::vector<double> fd_stencil(int order, int accuracy, double dx) {
    if (order < 1 || accuracy < 2 || accuracy % 2 != 0 || !(dx > 0.0))
        fail(ErrorCode::InvalidArgument, "stencil needs order >= 1, even accuracy >= 2 and dx > 0");
    const int half = (order + 1) / 2 - 1 + accuracy / 2;
    const auto K = static_cast<std::size_t>(2 * half + 1);
    // Rows m = 0..K-1: sum_k w_k s_k^m = m! delta(m, order).
    std::vector<std::vector<double>> a(K, std::vector<double>(K + 1, 0.0));
    for (std::size_t m = 0; m < K; ++m) {
        for (std::size_t k = 0; k < K; ++k)
            a[m][k] = std::pow(static_cast<double>(static_cast<int>(k) - half), static_cast<double>(m));
        a[m][K] = m == static_cast<std::size_t>(order) ? std::tgamma(order + 1.0) : 0.0;
    }
    for (std::size_t col = 0; col < K; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < K; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        std::swap(a[col], a[pivot]);
        for (std::size_t r = 0; r < K; ++r) {
            if (r == col) continue;
            const double factor = a[r][col] / a[col][col];
            for (std::size_t c = col; c <= K; ++c) a[r][c] -= factor * a[col][c];
        }
    }
    std::vector<double> w(K);
    const double scale = std::pow(dx, -order);
    for (std::size_t k = 0; k < K; ++k) w[k] = a[k][K] / a[k][k] * scale;
    return w;
}

Family arbitrary_derivative(const Family& family, std::size_t axis) {
    if (!family.is<Arbitrary>()) fail(ErrorCode::UnsupportedNodeForFamily, "arbitrary_derivative on " + family.describe());
    if (axis >= family.grid().dims()) fail(ErrorCode::AxisOutOfRange, "derivative axis " + std::to_string(axis));
    Tracer t;
    Traced in{family, t.b.input("theta", family.param_shape()), {}};
    return *t.partial(in, axis).family;
}

Tensor binary_combine(CombineOp op, const Field& f, const Field& g) {
    static const ExprKind kinds[] = {ExprKind::Add, ExprKind::Sub, ExprKind::Mul, ExprKind::Div};
    Tracer t;
    Traced a = t.field_input(f);
    Traced c = t.field_input(g);
    Traced out = t.binary(kinds[static_cast<int>(op)], a, c);
    return evaluate(t.b.build(out.param), {{f.name, f.params}, {g.name, g.params}});
}

} // namespace jdf
