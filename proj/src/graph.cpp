#include "jdf/graph.hpp"

#include "jdf/error.hpp"
#include "jdf/kernels.hpp"

#include <algorithm>

namespace jdf {

std::string_view to_string(OpKind kind) noexcept {
    switch (kind) {
    case OpKind::Input: return "input";
    case OpKind::Constant: return "constant";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Div: return "div";
    case OpKind::Neg: return "neg";
    case OpKind::Pow: return "pow";
    case OpKind::Abs: return "abs";
    case OpKind::Sign: return "sign";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Exp: return "exp";
    case OpKind::Reciprocal: return "reciprocal";
    case OpKind::Conj: return "conj";
    case OpKind::Real: return "real";
    case OpKind::Imag: return "imag";
    case OpKind::MakeComplex: return "complex";
    case OpKind::ToComplex: return "to_complex";
    case OpKind::Sum: return "sum";
    case OpKind::Mean: return "mean";
    case OpKind::SumAxis: return "sum_axis";
    case OpKind::BroadcastTo: return "broadcast_to";
    case OpKind::Reshape: return "reshape";
    case OpKind::Slice: return "slice";
    case OpKind::Pad: return "pad";
    case OpKind::Gather: return "gather";
    case OpKind::Concat: return "concat";
    case OpKind::Dft: return "dft";
    case OpKind::Idft: return "idft";
    case OpKind::Convolve: return "convolve";
    case OpKind::Custom: return "custom";
    }
    return "?";
}

bool Diagnostics::all_converged() const {
    return std::all_of(records.begin(), records.end(), [](const OpRecord& r) { return r.converged; });
}

const InputSlot* ExprGraph::find_input(std::string_view name) const {
    for (const auto& slot : inputs_)
        if (slot.name == name) return &slot;
    return nullptr;
}

bool ExprGraph::same_structure(const ExprGraph& other) const {
    if (nodes_.size() != other.nodes_.size() || output_ != other.output_) return false;
    if (inputs_.size() != other.inputs_.size()) return false;
    for (std::size_t i = 0; i < inputs_.size(); ++i)
        if (inputs_[i].name != other.inputs_[i].name || inputs_[i].node != other.inputs_[i].node) return false;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const Node& a = nodes_[i];
        const Node& b = other.nodes_[i];
        if (a.kind != b.kind || a.inputs != b.inputs || a.shape != b.shape || a.dtype != b.dtype) return false;
        if (a.name != b.name || a.exponent != b.exponent || a.axis != b.axis) return false;
        if (a.lo != b.lo || a.hi != b.hi || a.indices != b.indices || a.custom != b.custom) return false;
        if ((a.value == nullptr) != (b.value == nullptr)) return false;
        if (a.value && !(*a.value == *b.value)) return false;
    }
    return true;
}

const Shape& Var::shape() const { return builder_->node(id_).shape; }
DType Var::dtype() const { return builder_->node(id_).dtype; }

Var GraphBuilder::push(Node node) {
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

Var GraphBuilder::own(Var v) const {
    if (!v.valid() || &v.builder() != this || v.id() >= nodes_.size())
        fail(ErrorCode::InvalidArgument, "variable does not belong to this graph builder");
    return v;
}

std::optional<Var> GraphBuilder::find_input(const std::string& name) {
    auto it = inputs_.find(name);
    if (it == inputs_.end()) return std::nullopt;
    return Var(this, it->second);
}

Var GraphBuilder::input(const std::string& name, Shape shape, DType dtype) {
    if (auto it = inputs_.find(name); it != inputs_.end()) {
        const Node& n = nodes_[it->second];
        if (n.shape != shape || n.dtype != dtype)
            fail(ErrorCode::ShapeMismatch, "input '" + name + "' redeclared as " + to_string(shape) + "/" +
                                               to_string(dtype) + ", was " + to_string(n.shape) + "/" +
                                               to_string(n.dtype));
        return Var(this, it->second);
    }
    Node n;
    n.kind = OpKind::Input;
    n.name = name;
    n.shape = std::move(shape);
    n.dtype = dtype;
    Var v = push(std::move(n));
    inputs_[name] = v.id();
    return v;
}

Var GraphBuilder::constant(Tensor value) {
    Node n;
    n.kind = OpKind::Constant;
    n.shape = value.shape();
    n.dtype = value.dtype();
    n.value = std::make_shared<const Tensor>(std::move(value));
    return push(std::move(n));
}

std::pair<Var, Var> GraphBuilder::promote(Var a, Var b) {
    own(a);
    own(b);
    if (a.dtype() == b.dtype()) return {a, b};
    if (a.dtype() == DType::Real64) return {to_complex(a), b};
    return {a, to_complex(b)};
}

Var GraphBuilder::binary(OpKind kind, Var a, Var b) {
    auto [pa, pb] = promote(a, b);
    Node n;
    n.kind = kind;
    n.inputs = {pa.id(), pb.id()};
    n.shape = kernels::broadcast_shapes(pa.shape(), pb.shape());
    n.dtype = pa.dtype();
    return push(std::move(n));
}

Var GraphBuilder::unary(OpKind kind, Var x, DType out) {
    own(x);
    Node n;
    n.kind = kind;
    n.inputs = {x.id()};
    n.shape = x.shape();
    n.dtype = out;
    return push(std::move(n));
}

Var GraphBuilder::add(Var a, Var b) { return binary(OpKind::Add, a, b); }
Var GraphBuilder::sub(Var a, Var b) { return binary(OpKind::Sub, a, b); }
Var GraphBuilder::mul(Var a, Var b) { return binary(OpKind::Mul, a, b); }
Var GraphBuilder::div(Var a, Var b) { return binary(OpKind::Div, a, b); }
Var GraphBuilder::neg(Var x) { return unary(OpKind::Neg, x, own(x).dtype()); }

Var GraphBuilder::pow(Var x, double exponent) {
    Var v = unary(OpKind::Pow, x, own(x).dtype());
    nodes_[v.id()].exponent = exponent;
    return v;
}

Var GraphBuilder::abs(Var x) { return unary(OpKind::Abs, x, DType::Real64); }
Var GraphBuilder::sign(Var x) { return unary(OpKind::Sign, x, own(x).dtype()); }

Var GraphBuilder::sigmoid(Var x) {
    if (own(x).dtype() != DType::Real64) fail(ErrorCode::DTypeMismatch, "sigmoid requires a real input");
    return unary(OpKind::Sigmoid, x, DType::Real64);
}

Var GraphBuilder::exp(Var x) { return unary(OpKind::Exp, x, own(x).dtype()); }
Var GraphBuilder::reciprocal(Var x) { return unary(OpKind::Reciprocal, x, own(x).dtype()); }

Var GraphBuilder::conj(Var x) {
    if (own(x).dtype() == DType::Real64) return x;
    return unary(OpKind::Conj, x, DType::Complex128);
}

Var GraphBuilder::real(Var x) {
    if (own(x).dtype() == DType::Real64) return x;
    return unary(OpKind::Real, x, DType::Real64);
}

Var GraphBuilder::imag(Var x) {
    if (own(x).dtype() == DType::Real64) return zeros(x.shape(), DType::Real64);
    return unary(OpKind::Imag, x, DType::Real64);
}

Var GraphBuilder::make_complex(Var re, Var im) {
    own(re);
    own(im);
    if (re.dtype() != DType::Real64 || im.dtype() != DType::Real64)
        fail(ErrorCode::DTypeMismatch, "complex(re, im) requires real parts");
    Node n;
    n.kind = OpKind::MakeComplex;
    n.inputs = {re.id(), im.id()};
    n.shape = kernels::broadcast_shapes(re.shape(), im.shape());
    n.dtype = DType::Complex128;
    return push(std::move(n));
}

Var GraphBuilder::to_complex(Var x) {
    if (own(x).dtype() == DType::Complex128) return x;
    return unary(OpKind::ToComplex, x, DType::Complex128);
}

Var GraphBuilder::sum(Var x) {
    Var v = unary(OpKind::Sum, x, own(x).dtype());
    nodes_[v.id()].shape = {};
    return v;
}

Var GraphBuilder::mean(Var x) {
    Var v = unary(OpKind::Mean, x, own(x).dtype());
    nodes_[v.id()].shape = {};
    return v;
}

Var GraphBuilder::sum_axis(Var x, std::size_t axis) {
    if (axis >= own(x).shape().size())
        fail(ErrorCode::AxisOutOfRange, "sum_axis " + std::to_string(axis) + " on " + to_string(x.shape()));
    Var v = unary(OpKind::SumAxis, x, x.dtype());
    nodes_[v.id()].axis = axis;
    nodes_[v.id()].shape[axis] = 1;
    return v;
}

Var GraphBuilder::broadcast_to(Var x, Shape shape) {
    if (kernels::broadcast_shapes(own(x).shape(), shape) != shape)
        fail(ErrorCode::ShapeMismatch, "cannot broadcast " + to_string(x.shape()) + " to " + to_string(shape));
    if (x.shape() == shape) return x;
    Var v = unary(OpKind::BroadcastTo, x, x.dtype());
    nodes_[v.id()].shape = std::move(shape);
    return v;
}

Var GraphBuilder::reshape(Var x, Shape shape) {
    if (shape_size(shape) != shape_size(own(x).shape()))
        fail(ErrorCode::ShapeMismatch, "cannot reshape " + to_string(x.shape()) + " to " + to_string(shape));
    if (x.shape() == shape) return x;
    Var v = unary(OpKind::Reshape, x, x.dtype());
    nodes_[v.id()].shape = std::move(shape);
    return v;
}

Var GraphBuilder::slice(Var x, std::vector<std::size_t> begin, std::vector<std::size_t> end) {
    const Shape& s = own(x).shape();
    if (begin.size() != s.size() || end.size() != s.size())
        fail(ErrorCode::ShapeMismatch, "slice bounds rank mismatch for " + to_string(s));
    Shape out(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
        if (begin[k] >= end[k] || end[k] > s[k])
            fail(ErrorCode::ShapeMismatch, "slice [" + std::to_string(begin[k]) + "," + std::to_string(end[k]) +
                                               ") out of range on axis " + std::to_string(k) + " of " + to_string(s));
        out[k] = end[k] - begin[k];
    }
    Var v = unary(OpKind::Slice, x, x.dtype());
    Node& n = nodes_[v.id()];
    n.shape = std::move(out);
    n.lo = std::move(begin);
    n.hi = std::move(end);
    return v;
}

Var GraphBuilder::slice_axis(Var x, std::size_t axis, std::size_t begin, std::size_t end) {
    const Shape& s = own(x).shape();
    if (axis >= s.size()) fail(ErrorCode::AxisOutOfRange, "slice axis " + std::to_string(axis));
    std::vector<std::size_t> lo(s.size(), 0);
    std::vector<std::size_t> hi(s.begin(), s.end());
    lo[axis] = begin;
    hi[axis] = end;
    return slice(x, std::move(lo), std::move(hi));
}

Var GraphBuilder::pad(Var x, std::vector<std::size_t> before, std::vector<std::size_t> after) {
    const Shape& s = own(x).shape();
    if (before.size() != s.size() || after.size() != s.size())
        fail(ErrorCode::ShapeMismatch, "pad widths rank mismatch for " + to_string(s));
    Shape out(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) out[k] = before[k] + s[k] + after[k];
    Var v = unary(OpKind::Pad, x, x.dtype());
    Node& n = nodes_[v.id()];
    n.shape = std::move(out);
    n.lo = std::move(before);
    n.hi = std::move(after);
    return v;
}

Var GraphBuilder::gather(Var x, std::vector<std::size_t> flat_indices) {
    const std::size_t size = shape_size(own(x).shape());
    for (auto i : flat_indices)
        if (i >= size) fail(ErrorCode::ShapeMismatch, "gather index " + std::to_string(i) + " out of range");
    Var v = unary(OpKind::Gather, x, x.dtype());
    Node& n = nodes_[v.id()];
    n.shape = {flat_indices.size()};
    n.indices = std::move(flat_indices);
    return v;
}

Var GraphBuilder::concat(const std::vector<Var>& parts, std::size_t axis) {
    if (parts.empty()) fail(ErrorCode::InvalidArgument, "concat of zero parts");
    bool any_complex = false;
    for (Var p : parts) any_complex |= own(p).dtype() == DType::Complex128;
    std::vector<Var> ps;
    for (Var p : parts) ps.push_back(any_complex ? to_complex(p) : p);
    if (parts.size() == 1) return ps.front();
    Shape shape = ps.front().shape();
    if (axis >= shape.size()) fail(ErrorCode::AxisOutOfRange, "concat axis " + std::to_string(axis));
    shape[axis] = 0;
    Node n;
    n.kind = OpKind::Concat;
    n.axis = axis;
    for (Var p : ps) {
        if (p.shape().size() != shape.size()) fail(ErrorCode::ShapeMismatch, "concat rank mismatch");
        for (std::size_t k = 0; k < shape.size(); ++k)
            if (k != axis && p.shape()[k] != shape[k])
                fail(ErrorCode::ShapeMismatch, "concat extents differ: " + to_string(p.shape()));
        shape[axis] += p.shape()[axis];
        n.inputs.push_back(p.id());
    }
    n.shape = std::move(shape);
    n.dtype = ps.front().dtype();
    return push(std::move(n));
}

Var GraphBuilder::dft(Var x, std::size_t axis) {
    Var c = to_complex(x);
    if (axis >= c.shape().size()) fail(ErrorCode::AxisOutOfRange, "dft axis " + std::to_string(axis));
    Var v = unary(OpKind::Dft, c, DType::Complex128);
    nodes_[v.id()].axis = axis;
    return v;
}

Var GraphBuilder::idft(Var x, std::size_t axis) {
    Var c = to_complex(x);
    if (axis >= c.shape().size()) fail(ErrorCode::AxisOutOfRange, "idft axis " + std::to_string(axis));
    Var v = unary(OpKind::Idft, c, DType::Complex128);
    nodes_[v.id()].axis = axis;
    return v;
}

Var GraphBuilder::convolve(Var x, Var kernel, std::size_t axis) {
    own(x);
    own(kernel);
    if (axis >= x.shape().size()) fail(ErrorCode::AxisOutOfRange, "convolve axis " + std::to_string(axis));
    if (kernel.shape().size() != 1) fail(ErrorCode::ShapeMismatch, "convolution kernel must be rank 1");
    if (kernel.shape()[0] % 2 == 0)
        fail(ErrorCode::EvenKernel, "kernel length " + std::to_string(kernel.shape()[0]));
    auto [px, pk] = promote(x, kernel);
    Node n;
    n.kind = OpKind::Convolve;
    n.inputs = {px.id(), pk.id()};
    n.shape = px.shape();
    n.dtype = px.dtype();
    n.axis = axis;
    return push(std::move(n));
}

Var GraphBuilder::custom(std::shared_ptr<const CustomOp> op, const std::vector<Var>& inputs, Shape shape, DType dtype) {
    if (!op) fail(ErrorCode::InvalidArgument, "null custom op");
    Node n;
    n.kind = OpKind::Custom;
    for (Var v : inputs) n.inputs.push_back(own(v).id());
    n.shape = std::move(shape);
    n.dtype = dtype;
    n.custom = std::move(op);
    return push(std::move(n));
}

Var GraphBuilder::inline_graph(const ExprGraph& graph, const std::map<std::string, Var>& bindings) {
    std::vector<NodeId> remap(graph.nodes().size());
    for (NodeId id = 0; id < graph.nodes().size(); ++id) {
        const Node& src = graph.node(id);
        if (src.kind == OpKind::Input) {
            if (auto it = bindings.find(src.name); it != bindings.end()) {
                Var bound = own(it->second);
                if (bound.shape() != src.shape || bound.dtype() != src.dtype)
                    fail(ErrorCode::ShapeMismatch, "inlined input '" + src.name + "' expects " + to_string(src.shape) +
                                                       "/" + to_string(src.dtype) + ", bound " +
                                                       to_string(bound.shape()) + "/" + to_string(bound.dtype()));
                remap[id] = bound.id();
            } else {
                remap[id] = input(src.name, src.shape, src.dtype).id();
            }
            continue;
        }
        Node copy = src;
        for (auto& in : copy.inputs) in = remap[in];
        remap[id] = push(std::move(copy)).id();
    }
    return Var(this, remap[graph.output()]);
}

ExprGraph GraphBuilder::build(Var output) const {
    own(output);
    std::vector<bool> keep(nodes_.size(), false);
    std::vector<NodeId> stack{output.id()};
    while (!stack.empty()) {
        NodeId id = stack.back();
        stack.pop_back();
        if (keep[id]) continue;
        keep[id] = true;
        for (NodeId in : nodes_[id].inputs) stack.push_back(in);
    }
    for (const auto& [name, id] : inputs_) keep[id] = true;

    ExprGraph g;
    std::vector<NodeId> remap(nodes_.size());
    for (NodeId id = 0; id < nodes_.size(); ++id) {
        if (!keep[id]) continue;
        Node copy = nodes_[id];
        for (auto& in : copy.inputs) in = remap[in];
        remap[id] = g.nodes_.size();
        if (copy.kind == OpKind::Input) g.inputs_.push_back({copy.name, copy.shape, copy.dtype, remap[id]});
        g.nodes_.push_back(std::move(copy));
    }
    g.output_ = remap[output.id()];
    return g;
}

Var operator+(Var a, Var b) { return a.builder().add(a, b); }
Var operator-(Var a, Var b) { return a.builder().sub(a, b); }
Var operator*(Var a, Var b) { return a.builder().mul(a, b); }
Var operator/(Var a, Var b) { return a.builder().div(a, b); }
Var operator-(Var a) { return a.builder().neg(a); }
Var operator+(Var a, double b) { return a + a.builder().scalar(b); }
Var operator+(double a, Var b) { return b.builder().scalar(a) + b; }
Var operator-(Var a, double b) { return a - a.builder().scalar(b); }
Var operator-(double a, Var b) { return b.builder().scalar(a) - b; }
Var operator*(Var a, double b) { return a * a.builder().scalar(b); }
Var operator*(double a, Var b) { return b.builder().scalar(a) * b; }
Var operator*(Var a, cplx b) { return a * a.builder().scalar(b); }
Var operator*(cplx a, Var b) { return b.builder().scalar(a) * b; }
Var operator/(Var a, double b) { return a / a.builder().scalar(b); }
Var operator/(double a, Var b) { return b.builder().scalar(a) / b; }

} // namespace jdf
