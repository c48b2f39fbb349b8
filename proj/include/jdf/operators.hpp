#pragma once

#include "jdf/autodiff.hpp"
#include "jdf/discretization.hpp"
#include "jdf/graph.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace jdf {

using ElementwiseFn = std::function<Var(Var)>;

enum class ExprKind {
    Field,
    Gradient,
    DiagJacobian,
    SumOverDims,
    Laplacian,
    Elementwise,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Reciprocal,
    Scalar,
};

struct ExprNode;

/// An abstract operator expression over named fields. Expressions are
/// discretization-agnostic until traced against concrete fields.
class Expr {
public:
    explicit Expr(std::shared_ptr<const ExprNode> node) : node_(std::move(node)) {}
    const ExprNode& node() const { return *node_; }
    const ExprNode* id() const { return node_.get(); }

private:
    std::shared_ptr<const ExprNode> node_;
};

struct ExprNode {
    ExprKind kind;
    std::vector<Expr> children;
    std::string name;  // Field name or elementwise label
    cplx value{};      // Scalar literal
    double exponent = 0.0;
    ElementwiseFn fn;
};

namespace ops {

Expr field(const std::string& name);
Expr scalar(double value);
Expr scalar(cplx value);
Expr gradient(const Expr& u);
Expr diag_jacobian(const Expr& v);
Expr sum_over_dims(const Expr& v);
/// Defaults to sum_over_dims(diag_jacobian(gradient(u))); finite differences
/// use second-derivative stencils instead.
Expr laplacian(const Expr& u);
Expr elementwise(ElementwiseFn fn, const Expr& u, std::string label = "fn");
Expr abs(const Expr& u);
Expr conj(const Expr& u);
Expr pow(const Expr& u, double exponent);
Expr reciprocal(const Expr& u);

} // namespace ops

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator+(const Expr& a, double b);
Expr operator*(double a, const Expr& b);
Expr operator*(const Expr& a, double b);
Expr operator*(cplx a, const Expr& b);
Expr operator/(double a, const Expr& b);
Expr operator/(const Expr& a, double b);

/// The discretized operator: output family plus the parameter program and
/// its operator parameters (stencils, wavenumbers), which are graph inputs.
struct TracedOperator {
    Family output_family;
    ExprGraph param_graph;
    std::map<std::string, Tensor> global_params;
    std::vector<std::string> input_names;
    std::map<std::string, Family> input_families;

    /// Output parameters. Bindings must cover every input field; entries
    /// whose names match global parameters override them.
    Tensor apply(const Bindings& bindings, Diagnostics* diag = nullptr) const;
    Field apply_field(const Bindings& bindings, const std::string& name = "out") const;
    /// Global parameters merged under `bindings` (bindings win).
    Bindings bind(const Bindings& bindings) const;
};

TracedOperator trace(const Expr& expr, const std::vector<Field>& inputs);

/// outer after inner. `input` names the outer field replaced by inner's
/// output; it defaults to outer's only field input.
TracedOperator compose(const TracedOperator& outer, const TracedOperator& inner,
                       const std::optional<std::string>& input = std::nullopt);

// Per-family rules, exposed for direct use.

/// idft(i k ⊙ dft(theta)) along `axis`; Nyquist bin zeroed for real fields.
Tensor fourier_derivative_params(const Field& field, std::size_t axis);
/// theta'_i = (i + 1) theta_{i+1}; a degree-0 input yields [0].
Tensor polynomial_derivative_params(const Tensor& theta);
/// Centered stencil of the given order/accuracy applied with zero padding.
Tensor fd_derivative_params(const Field& field, std::size_t axis, int order);
/// Stencil weights from the Taylor (Vandermonde) conditions, scaled by dx^-order.
std::vector<double> fd_stencil(int order, int accuracy, double dx);
/// Arbitrary family whose interpolation function is d/dx_axis of the input's.
Family arbitrary_derivative(const Family& family, std::size_t axis);

enum class CombineOp { Add, Sub, Mul, Div };
Tensor binary_combine(CombineOp op, const Field& f, const Field& g);

} // namespace jdf
