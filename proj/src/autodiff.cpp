#include "jdf/autodiff.hpp"

#include "jdf/error.hpp"
#include "jdf/kernels.hpp"

#include <cmath>
#include <memory>
#include <optional>
#include <unordered_map>

namespace jdf {

namespace {

using kernels::BinaryOp;

bool is_integral(double p) { return std::floor(p) == p && std::abs(p) < 1e9; }

template <class T>
T int_pow(T x, long long p) {
    if (p < 0) return T(1) / int_pow(x, -p);
    T result(1);
    while (p) {
        if (p & 1) result *= x;
        x *= x;
        p >>= 1;
    }
    return result;
}

Tensor pow_tensor(const Tensor& x, double p) {
    if (x.is_complex()) {
        if (is_integral(p)) return kernels::map_complex(x, [p](cplx v) { return int_pow(v, static_cast<long long>(p)); });
        return kernels::map_complex(x, [p](cplx v) { return std::pow(v, p); });
    }
    if (is_integral(p)) return kernels::map_real(x, [p](double v) { return int_pow(v, static_cast<long long>(p)); });
    return kernels::map_real(x, [p](double v) { return std::pow(v, p); });
}

Tensor sign_tensor(const Tensor& x) {
    if (x.is_complex())
        return kernels::map_complex(x, [](cplx v) { return std::abs(v) == 0.0 ? cplx{} : v / std::abs(v); });
    return kernels::map_real(x, [](double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); });
}

double sigmoid(double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

Tensor make_complex(const Tensor& re, const Tensor& im) {
    return kernels::binary(BinaryOp::Add, re.as_complex(), kernels::scale(im.as_complex(), cplx{0.0, 1.0}));
}

Tensor eval_node(const Node& n, const std::vector<const Tensor*>& in, Diagnostics* diag) {
    auto arg = [&](std::size_t i) -> const Tensor& { return *in[i]; };
    switch (n.kind) {
    case OpKind::Input:
    case OpKind::Constant: break;
    case OpKind::Add: return kernels::binary(BinaryOp::Add, arg(0), arg(1));
    case OpKind::Sub: return kernels::binary(BinaryOp::Sub, arg(0), arg(1));
    case OpKind::Mul: return kernels::binary(BinaryOp::Mul, arg(0), arg(1));
    case OpKind::Div: return kernels::binary(BinaryOp::Div, arg(0), arg(1));
    case OpKind::Neg: return kernels::scale(arg(0), -1.0);
    case OpKind::Pow: return pow_tensor(arg(0), n.exponent);
    case OpKind::Abs:
        if (arg(0).is_complex()) {
            Tensor out(arg(0).shape(), DType::Real64);
            auto src = arg(0).complex_data();
            auto dst = out.real_data();
            for (std::size_t i = 0; i < src.size(); ++i) dst[i] = std::abs(src[i]);
            return out;
        }
        return kernels::map_real(arg(0), [](double v) { return std::abs(v); });
    case OpKind::Sign: return sign_tensor(arg(0));
    case OpKind::Sigmoid: return kernels::map_real(arg(0), sigmoid);
    case OpKind::Exp:
        if (arg(0).is_complex()) return kernels::map_complex(arg(0), [](cplx v) { return std::exp(v); });
        return kernels::map_real(arg(0), [](double v) { return std::exp(v); });
    case OpKind::Reciprocal:
        if (arg(0).is_complex()) return kernels::map_complex(arg(0), [](cplx v) { return 1.0 / v; });
        return kernels::map_real(arg(0), [](double v) { return 1.0 / v; });
    case OpKind::Conj: return kernels::conj(arg(0));
    case OpKind::Real: return arg(0).real_part();
    case OpKind::Imag: return arg(0).imag_part();
    case OpKind::MakeComplex: return make_complex(arg(0), arg(1));
    case OpKind::ToComplex: return arg(0).as_complex();
    case OpKind::Sum: return kernels::sum_all(arg(0));
    case OpKind::Mean: return kernels::scale(kernels::sum_all(arg(0)), 1.0 / static_cast<double>(arg(0).size()));
    case OpKind::SumAxis: return kernels::sum_axis(arg(0), n.axis, true);
    case OpKind::BroadcastTo: return kernels::broadcast_to(arg(0), n.shape);
    case OpKind::Reshape: return arg(0).reshaped(n.shape);
    case OpKind::Slice: return kernels::slice(arg(0), n.lo, n.hi);
    case OpKind::Pad: return kernels::pad(arg(0), n.lo, n.hi);
    case OpKind::Gather: return kernels::gather(arg(0), n.indices);
    case OpKind::Concat: {
        std::vector<Tensor> parts;
        for (const Tensor* t : in) parts.push_back(*t);
        return kernels::concat(parts, n.axis);
    }
    case OpKind::Dft: return kernels::dft(arg(0), n.axis, false);
    case OpKind::Idft: return kernels::dft(arg(0), n.axis, true);
    case OpKind::Convolve: return kernels::convolve(arg(0), arg(1), n.axis);
    case OpKind::Custom: {
        std::vector<Tensor> args;
        for (const Tensor* t : in) args.push_back(*t);
        Tensor out = n.custom->forward(args, diag);
        if (out.shape() != n.shape || out.dtype() != n.dtype)
            fail(ErrorCode::ShapeMismatch, std::string("custom op '") + std::string(n.custom->name()) + "' returned " +
                                               to_string(out.shape()) + ", declared " + to_string(n.shape));
        return out;
    }
    }
    fail(ErrorCode::InvalidArgument, "unhandled node kind " + std::string(to_string(n.kind)));
}

// Runs the forward pass. When `keep_all` is false, intermediate values are
// released as soon as their last consumer has run.
std::vector<std::optional<Tensor>> forward_pass(const ExprGraph& graph, const Bindings& bindings, Diagnostics* diag,
                                                bool keep_all) {
    const auto& nodes = graph.nodes();
    std::vector<std::size_t> last_use(nodes.size(), 0);
    for (NodeId id = 0; id < nodes.size(); ++id)
        for (NodeId in : nodes[id].inputs) last_use[in] = id;
    last_use[graph.output()] = nodes.size();

    std::vector<std::optional<Tensor>> values(nodes.size());
    std::vector<const Tensor*> args;
    for (NodeId id = 0; id < nodes.size(); ++id) {
        const Node& n = nodes[id];
        if (n.kind == OpKind::Input) {
            auto it = bindings.find(n.name);
            if (it == bindings.end()) fail(ErrorCode::MissingBinding, n.name);
            if (it->second.shape() != n.shape || it->second.dtype() != n.dtype)
                fail(ErrorCode::ShapeMismatch, "node " + std::to_string(id) + " ('" + n.name + "'): expected " +
                                                   to_string(n.shape) + "/" + to_string(n.dtype) + ", got " +
                                                   to_string(it->second.shape()) + "/" +
                                                   to_string(it->second.dtype()));
            values[id] = it->second;
            continue;
        }
        if (n.kind == OpKind::Constant) {
            values[id] = *n.value;
            continue;
        }
        args.clear();
        for (NodeId in : n.inputs) args.push_back(&*values[in]);
        values[id] = eval_node(n, args, diag);
        if (!keep_all)
            for (NodeId in : n.inputs)
                if (last_use[in] == id) values[in].reset();
    }
    return values;
}

Tensor real_to_complex_imag(const Tensor& x) { return kernels::scale(x.as_complex(), cplx{0.0, 1.0}); }

// Accumulates adjoints for the inputs of node `n`.
void backprop_node(const Node& n, const ExprGraph& graph, const std::vector<std::optional<Tensor>>& values,
                   const Tensor& out_value, const Tensor& ybar, std::vector<std::optional<Tensor>>& adj,
                   const std::vector<bool>& needs, Diagnostics* diag) {
    auto x = [&](std::size_t i) -> const Tensor& { return *values[n.inputs[i]]; };
    auto add_to = [&](std::size_t i, Tensor g) {
        const NodeId target = n.inputs[i];
        if (!needs[target]) return;
        const Node& tn = graph.node(target);
        if (g.shape() != tn.shape) g = kernels::reduce_to_shape(g, tn.shape);
        if (tn.dtype == DType::Real64 && g.is_complex()) g = g.real_part();
        if (adj[target]) kernels::accumulate(*adj[target], g);
        else adj[target] = std::move(g);
    };
    auto wants = [&](std::size_t i) { return needs[n.inputs[i]]; };

    switch (n.kind) {
    case OpKind::Input:
    case OpKind::Constant:
    case OpKind::Sign: return;
    case OpKind::Add:
        add_to(0, ybar);
        add_to(1, ybar);
        return;
    case OpKind::Sub:
        add_to(0, ybar);
        if (wants(1)) add_to(1, kernels::scale(ybar, -1.0));
        return;
    case OpKind::Mul:
        if (wants(0)) add_to(0, kernels::mul_conj(ybar, x(1)));
        if (wants(1)) add_to(1, kernels::mul_conj(ybar, x(0)));
        return;
    case OpKind::Div:
        if (wants(0)) add_to(0, kernels::binary(BinaryOp::Div, ybar, kernels::conj(x(1))));
        if (wants(1)) {
            Tensor q = kernels::binary(BinaryOp::Div, out_value, x(1));
            add_to(1, kernels::scale(kernels::mul_conj(ybar, q), -1.0));
        }
        return;
    case OpKind::Neg: add_to(0, kernels::scale(ybar, -1.0)); return;
    case OpKind::Pow: {
        if (n.exponent == 0.0) return;
        Tensor d = kernels::scale(pow_tensor(x(0), n.exponent - 1.0), n.exponent);
        add_to(0, kernels::mul_conj(ybar, d));
        return;
    }
    case OpKind::Abs: add_to(0, kernels::binary(BinaryOp::Mul, x(0).is_complex() ? ybar.as_complex() : ybar, sign_tensor(x(0)))); return;
    case OpKind::Sigmoid: {
        Tensor d = kernels::map_real(out_value, [](double s) { return s * (1.0 - s); });
        add_to(0, kernels::binary(BinaryOp::Mul, ybar, d));
        return;
    }
    case OpKind::Exp: add_to(0, kernels::mul_conj(ybar, out_value)); return;
    case OpKind::Reciprocal: {
        Tensor d = kernels::scale(kernels::binary(BinaryOp::Mul, out_value, out_value), -1.0);
        add_to(0, kernels::mul_conj(ybar, d));
        return;
    }
    case OpKind::Conj: add_to(0, kernels::conj(ybar)); return;
    case OpKind::Real: add_to(0, ybar.as_complex()); return;
    case OpKind::Imag: add_to(0, real_to_complex_imag(ybar)); return;
    case OpKind::MakeComplex:
        if (wants(0)) add_to(0, ybar.real_part());
        if (wants(1)) add_to(1, ybar.imag_part());
        return;
    case OpKind::ToComplex: add_to(0, ybar.real_part()); return;
    case OpKind::Sum: add_to(0, kernels::broadcast_to(ybar, x(0).shape())); return;
    case OpKind::Mean:
        add_to(0, kernels::broadcast_to(kernels::scale(ybar, 1.0 / static_cast<double>(x(0).size())), x(0).shape()));
        return;
    case OpKind::SumAxis:
    case OpKind::Reshape:
        if (n.kind == OpKind::Reshape) add_to(0, ybar.reshaped(x(0).shape()));
        else add_to(0, kernels::broadcast_to(ybar, x(0).shape()));
        return;
    case OpKind::BroadcastTo: add_to(0, kernels::reduce_to_shape(ybar, x(0).shape())); return;
    case OpKind::Slice: {
        std::vector<std::size_t> after(n.lo.size());
        for (std::size_t k = 0; k < after.size(); ++k) after[k] = x(0).shape()[k] - n.hi[k];
        add_to(0, kernels::pad(ybar, n.lo, after));
        return;
    }
    case OpKind::Pad: {
        std::vector<std::size_t> end(n.lo.size());
        for (std::size_t k = 0; k < end.size(); ++k) end[k] = n.lo[k] + x(0).shape()[k];
        add_to(0, kernels::slice(ybar, n.lo, end));
        return;
    }
    case OpKind::Gather: add_to(0, kernels::scatter_add(x(0).shape(), n.indices, ybar)); return;
    case OpKind::Concat: {
        std::size_t offset = 0;
        for (std::size_t i = 0; i < n.inputs.size(); ++i) {
            const std::size_t extent = x(i).shape()[n.axis];
            if (wants(i)) {
                std::vector<std::size_t> lo(n.shape.size(), 0);
                std::vector<std::size_t> hi(n.shape.begin(), n.shape.end());
                lo[n.axis] = offset;
                hi[n.axis] = offset + extent;
                add_to(i, kernels::slice(ybar, lo, hi));
            }
            offset += extent;
        }
        return;
    }
    case OpKind::Dft: {
        const double len = static_cast<double>(n.shape[n.axis]);
        add_to(0, kernels::scale(kernels::dft(ybar, n.axis, true), len));
        return;
    }
    case OpKind::Idft: {
        const double len = static_cast<double>(n.shape[n.axis]);
        add_to(0, kernels::scale(kernels::dft(ybar, n.axis, false), 1.0 / len));
        return;
    }
    case OpKind::Convolve:
        if (wants(0)) add_to(0, kernels::convolve_adjoint(ybar, x(1), n.axis));
        if (wants(1)) add_to(1, kernels::convolve_kernel_adjoint(x(0), ybar, n.axis, x(1).size()));
        return;
    case OpKind::Custom: {
        std::vector<Tensor> args;
        const std::size_t count = n.inputs.size();
        std::unique_ptr<bool[]> flags(new bool[count]);
        for (std::size_t i = 0; i < count; ++i) {
            args.push_back(*values[n.inputs[i]]);
            flags[i] = needs[n.inputs[i]];
        }
        auto grads = n.custom->backward(args, out_value, ybar, std::span<const bool>(flags.get(), count), diag);
        for (std::size_t i = 0; i < grads.size() && i < n.inputs.size(); ++i)
            if (grads[i] && wants(i)) add_to(i, std::move(*grads[i]));
        return;
    }
    }
}

VjpResult run_vjp(const ExprGraph& graph, const std::vector<std::string>& wrt, const Bindings& bindings,
                  const Tensor& seed, Diagnostics* diag) {
    const auto& nodes = graph.nodes();
    std::vector<bool> needs(nodes.size(), false);
    for (const auto& name : wrt) {
        const InputSlot* slot = graph.find_input(name);
        if (!slot) fail(ErrorCode::UnknownInput, "gradient requested for undeclared input '" + name + "'");
        needs[slot->node] = true;
    }
    for (NodeId id = 0; id < nodes.size(); ++id)
        for (NodeId in : nodes[id].inputs)
            if (needs[in]) needs[id] = true;

    auto values = forward_pass(graph, bindings, diag, true);
    VjpResult result;
    result.value = *values[graph.output()];

    std::vector<std::optional<Tensor>> adj(nodes.size());
    if (needs[graph.output()]) adj[graph.output()] = seed;
    for (NodeId id = graph.output() + 1; id-- > 0;) {
        if (!adj[id] || !needs[id]) continue;
        const Node& n = nodes[id];
        if (n.kind == OpKind::Input) continue;
        backprop_node(n, graph, values, *values[id], *adj[id], adj, needs, diag);
        adj[id].reset();
    }
    for (const auto& name : wrt) {
        const InputSlot* slot = graph.find_input(name);
        result.grads[name] = adj[slot->node] ? *adj[slot->node] : Tensor::zeros(slot->shape, slot->dtype);
    }
    return result;
}

} // namespace

Tensor evaluate(const ExprGraph& graph, const Bindings& bindings, Diagnostics* diag) {
    auto values = forward_pass(graph, bindings, diag, false);
    return std::move(*values[graph.output()]);
}

GradientResult gradient(const ExprGraph& graph, const std::vector<std::string>& wrt, const Bindings& bindings,
                        Diagnostics* diag) {
    const Shape& out = graph.output_shape();
    if (shape_size(out) != 1 || out.size() > 1)
        fail(ErrorCode::NonScalarOutput, "gradient needs a scalar output, got " + to_string(out));
    if (graph.output_dtype() != DType::Real64) fail(ErrorCode::NonRealOutput, "gradient needs a real output");
    auto r = run_vjp(graph, wrt, bindings, Tensor::full(out, 1.0), diag);
    return {r.value.real_at(0), std::move(r.grads)};
}

VjpResult vjp(const ExprGraph& graph, const std::vector<std::string>& wrt, const Bindings& bindings,
              const Tensor& cotangent, Diagnostics* diag) {
    if (cotangent.shape() != graph.output_shape() || cotangent.dtype() != graph.output_dtype())
        fail(ErrorCode::ShapeMismatch, "cotangent " + to_string(cotangent.shape()) + "/" +
                                           to_string(cotangent.dtype()) + " for output " +
                                           to_string(graph.output_shape()) + "/" + to_string(graph.output_dtype()));
    return run_vjp(graph, wrt, bindings, cotangent, diag);
}

Var jvp(Var output, Var wrt, Var tangent) {
    GraphBuilder& b = output.builder();
    if (&wrt.builder() != &b || &tangent.builder() != &b)
        fail(ErrorCode::InvalidArgument, "jvp operands from different builders");
    if (tangent.shape() != wrt.shape() || tangent.dtype() != wrt.dtype())
        fail(ErrorCode::ShapeMismatch, "tangent " + to_string(tangent.shape()) + " for " + to_string(wrt.shape()));

    std::unordered_map<NodeId, Var> tan;
    tan[wrt.id()] = tangent;
    auto t = [&](NodeId id) -> std::optional<Var> {
        auto it = tan.find(id);
        if (it == tan.end()) return std::nullopt;
        return it->second;
    };
    auto zeros_like = [&](NodeId id) { return b.zeros(b.node(id).shape, b.node(id).dtype); };
    auto t_or_zero = [&](NodeId id) { return t(id) ? *t(id) : zeros_like(id); };

    const NodeId last = output.id();
    for (NodeId id = wrt.id() + 1; id <= last; ++id) {
        const Node n = b.node(id); // copy: emitting nodes may reallocate storage
        bool any = false;
        for (NodeId in : n.inputs) any |= t(in).has_value();
        if (!any) continue;
        Var self(&b, id);
        auto in = [&](std::size_t i) { return Var(&b, n.inputs[i]); };
        std::optional<Var> r;
        switch (n.kind) {
        case OpKind::Input:
        case OpKind::Constant:
        case OpKind::Sign: break;
        case OpKind::Add: r = b.broadcast_to(t_or_zero(n.inputs[0]) + t_or_zero(n.inputs[1]), n.shape); break;
        case OpKind::Sub: r = b.broadcast_to(t_or_zero(n.inputs[0]) - t_or_zero(n.inputs[1]), n.shape); break;
        case OpKind::Mul: {
            std::optional<Var> acc;
            if (auto ta = t(n.inputs[0])) acc = *ta * in(1);
            if (auto tb = t(n.inputs[1])) acc = acc ? *acc + in(0) * *tb : in(0) * *tb;
            r = b.broadcast_to(*acc, n.shape);
            break;
        }
        case OpKind::Div: {
            std::optional<Var> acc;
            if (auto ta = t(n.inputs[0])) acc = *ta / in(1);
            if (auto tb = t(n.inputs[1])) {
                Var term = self * *tb / in(1);
                acc = acc ? *acc - term : -term;
            }
            r = b.broadcast_to(*acc, n.shape);
            break;
        }
        case OpKind::Neg: r = -*t(n.inputs[0]); break;
        case OpKind::Pow:
            if (n.exponent == 0.0) break;
            r = n.exponent * b.pow(in(0), n.exponent - 1.0) * *t(n.inputs[0]);
            break;
        case OpKind::Abs:
            if (in(0).dtype() == DType::Complex128) r = b.real(b.conj(b.sign(in(0))) * *t(n.inputs[0]));
            else r = b.sign(in(0)) * *t(n.inputs[0]);
            break;
        case OpKind::Sigmoid: r = self * (1.0 - self) * *t(n.inputs[0]); break;
        case OpKind::Exp: r = self * *t(n.inputs[0]); break;
        case OpKind::Reciprocal: r = -(self * self * *t(n.inputs[0])); break;
        case OpKind::Conj: r = b.conj(*t(n.inputs[0])); break;
        case OpKind::Real: r = b.real(*t(n.inputs[0])); break;
        case OpKind::Imag: r = b.imag(*t(n.inputs[0])); break;
        case OpKind::MakeComplex:
            r = b.broadcast_to(b.make_complex(t_or_zero(n.inputs[0]), t_or_zero(n.inputs[1])), n.shape);
            break;
        case OpKind::ToComplex: r = b.to_complex(*t(n.inputs[0])); break;
        case OpKind::Sum: r = b.sum(*t(n.inputs[0])); break;
        case OpKind::Mean: r = b.mean(*t(n.inputs[0])); break;
        case OpKind::SumAxis: r = b.sum_axis(*t(n.inputs[0]), n.axis); break;
        case OpKind::BroadcastTo: r = b.broadcast_to(*t(n.inputs[0]), n.shape); break;
        case OpKind::Reshape: r = b.reshape(*t(n.inputs[0]), n.shape); break;
        case OpKind::Slice: r = b.slice(*t(n.inputs[0]), n.lo, n.hi); break;
        case OpKind::Pad: r = b.pad(*t(n.inputs[0]), n.lo, n.hi); break;
        case OpKind::Gather: r = b.gather(*t(n.inputs[0]), n.indices); break;
        case OpKind::Concat: {
            std::vector<Var> parts;
            for (NodeId p : n.inputs) parts.push_back(t_or_zero(p));
            r = b.concat(parts, n.axis);
            break;
        }
        case OpKind::Dft: r = b.dft(*t(n.inputs[0]), n.axis); break;
        case OpKind::Idft: r = b.idft(*t(n.inputs[0]), n.axis); break;
        case OpKind::Convolve: {
            std::optional<Var> acc;
            if (auto tx = t(n.inputs[0])) acc = b.convolve(*tx, in(1), n.axis);
            if (auto tw = t(n.inputs[1])) {
                Var term = b.convolve(in(0), *tw, n.axis);
                acc = acc ? *acc + term : term;
            }
            r = acc;
            break;
        }
        case OpKind::Custom:
            fail(ErrorCode::NonDifferentiableGraph,
                 std::string("no forward-mode rule for custom op '") + std::string(n.custom->name()) + "'");
        }
        if (r) tan[id] = *r;
    }
    if (auto r = t(output.id())) return *r;
    return b.zeros(output.shape(), output.dtype());
}

} // namespace jdf
