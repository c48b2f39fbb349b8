#pragma once

#include "jdf/tensor.hpp"

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace jdf {

using NodeId = std::size_t;

enum class OpKind {
    Input,
    Constant,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Pow,
    Abs,
    Sign,
    Sigmoid,
    Exp,
    Reciprocal,
    Conj,
    Real,
    Imag,
    MakeComplex,
    ToComplex,
    Sum,
    Mean,
    SumAxis,
    BroadcastTo,
    Reshape,
    Slice,
    Pad,
    Gather,
    Concat,
    Dft,
    Idft,
    Convolve,
    Custom,
};

std::string_view to_string(OpKind kind) noexcept;

/// Records emitted by custom nodes (e.g. iterative solves) while a graph runs.
struct OpRecord {
    std::string op;
    std::string phase; // "forward" or "backward"
    bool converged = true;
    double residual = 0.0;
    std::size_t iterations = 0;
    /// Number of full-size vectors the op held at peak.
    std::size_t workspace_vectors = 0;
};

struct Diagnostics {
    std::vector<OpRecord> records;
    bool all_converged() const;
};

/// A node whose value and vector-Jacobian product are supplied by user code.
///
/// `backward` receives the forward inputs, the forward output and the output
/// cotangent only; it returns one entry per input (empty where `needs[i]` is
/// false or the input is not differentiable).
class CustomOp {
public:
    virtual ~CustomOp() = default;
    virtual std::string_view name() const = 0;
    virtual Tensor forward(std::span<const Tensor> inputs, Diagnostics* diag) const = 0;
    virtual std::vector<std::optional<Tensor>> backward(std::span<const Tensor> inputs, const Tensor& output,
                                                        const Tensor& cotangent, std::span<const bool> needs,
                                                        Diagnostics* diag) const = 0;
};

struct Node {
    OpKind kind = OpKind::Constant;
    std::vector<NodeId> inputs;
    Shape shape;
    DType dtype = DType::Real64;

    std::string name;                      // Input
    std::shared_ptr<const Tensor> value;   // Constant
    double exponent = 0.0;                 // Pow
    std::size_t axis = 0;                  // SumAxis, Concat, Dft, Idft, Convolve
    std::vector<std::size_t> lo, hi;       // Slice begin/end, Pad before/after
    std::vector<std::size_t> indices;      // Gather (flat)
    std::shared_ptr<const CustomOp> custom;
};

struct InputSlot {
    std::string name;
    Shape shape;
    DType dtype;
    NodeId node;
};

/// Immutable, topologically ordered computation graph with named leaves.
class ExprGraph {
public:
    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    const Node& node(NodeId id) const { return nodes_.at(id); }
    NodeId output() const noexcept { return output_; }
    const Shape& output_shape() const { return nodes_.at(output_).shape; }
    DType output_dtype() const { return nodes_.at(output_).dtype; }

    const std::vector<InputSlot>& inputs() const noexcept { return inputs_; }
    const InputSlot* find_input(std::string_view name) const;

    /// Structural equality: same node kinds, payloads, wiring and inputs.
    bool same_structure(const ExprGraph& other) const;

private:
    friend class GraphBuilder;
    std::vector<Node> nodes_;
    std::vector<InputSlot> inputs_;
    NodeId output_ = 0;
};

class GraphBuilder;

/// Handle to a node under construction; arithmetic operators append nodes.
class Var {
public:
    Var() = default;
    Var(GraphBuilder* builder, NodeId id) : builder_(builder), id_(id) {}

    NodeId id() const noexcept { return id_; }
    GraphBuilder& builder() const { return *builder_; }
    const Shape& shape() const;
    DType dtype() const;
    bool valid() const noexcept { return builder_ != nullptr; }

private:
    GraphBuilder* builder_ = nullptr;
    NodeId id_ = 0;
};

/// Appends nodes with eager shape/dtype resolution. Binary operators promote a
/// real operand to complex with an explicit ToComplex node.
class GraphBuilder {
public:
    Var input(const std::string& name, Shape shape, DType dtype = DType::Real64);
    Var constant(Tensor value);
    Var scalar(double value) { return constant(Tensor::scalar(value)); }
    Var scalar(cplx value) { return constant(Tensor::scalar(value)); }
    Var zeros(Shape shape, DType dtype) { return constant(Tensor::zeros(std::move(shape), dtype)); }

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var div(Var a, Var b);
    Var neg(Var x);
    Var pow(Var x, double exponent);
    Var abs(Var x);
    Var sign(Var x);
    Var sigmoid(Var x);
    Var exp(Var x);
    Var reciprocal(Var x);
    Var conj(Var x);
    Var real(Var x);
    Var imag(Var x);
    Var make_complex(Var re, Var im);
    Var to_complex(Var x);

    Var sum(Var x);
    Var mean(Var x);
    Var sum_axis(Var x, std::size_t axis);  // keeps the reduced axis with extent 1
    Var broadcast_to(Var x, Shape shape);
    Var reshape(Var x, Shape shape);
    Var slice(Var x, std::vector<std::size_t> begin, std::vector<std::size_t> end);
    Var slice_axis(Var x, std::size_t axis, std::size_t begin, std::size_t end);
    Var pad(Var x, std::vector<std::size_t> before, std::vector<std::size_t> after);
    Var gather(Var x, std::vector<std::size_t> flat_indices);
    Var concat(const std::vector<Var>& parts, std::size_t axis);

    Var dft(Var x, std::size_t axis);
    Var idft(Var x, std::size_t axis);
    Var convolve(Var x, Var kernel, std::size_t axis);

    Var custom(std::shared_ptr<const CustomOp> op, const std::vector<Var>& inputs, Shape shape, DType dtype);

    /// Copies `graph` into this builder, wiring its inputs to `bindings`;
    /// inputs missing from `bindings` become inputs of this builder.
    Var inline_graph(const ExprGraph& graph, const std::map<std::string, Var>& bindings);

    ExprGraph build(Var output) const;

    const Node& node(NodeId id) const { return nodes_.at(id); }
    const Node& node(Var v) const { return nodes_.at(v.id()); }
    std::size_t size() const noexcept { return nodes_.size(); }
    std::optional<Var> find_input(const std::string& name);

private:
    Var push(Node node);
    Var own(Var v) const;
    std::pair<Var, Var> promote(Var a, Var b);
    Var binary(OpKind kind, Var a, Var b);
    Var unary(OpKind kind, Var x, DType out);

    std::vector<Node> nodes_;
    std::map<std::string, NodeId> inputs_;
};

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator-(Var a);
Var operator+(Var a, double b);
Var operator+(double a, Var b);
Var operator-(Var a, double b);
Var operator-(double a, Var b);
Var operator*(Var a, double b);
Var operator*(double a, Var b);
Var operator*(Var a, cplx b);
Var operator*(cplx a, Var b);
Var operator/(Var a, double b);
Var operator/(double a, Var b);

} // namespace jdf
