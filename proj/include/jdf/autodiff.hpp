#pragma once

#include "jdf/graph.hpp"
#include "jdf/tensor.hpp"

#include <map>
#include <string>
#include <vector>

namespace jdf {

using Bindings = std::map<std::string, Tensor>;

/// Evaluates `graph` on the given leaf bindings. Extra bindings are ignored.
Tensor evaluate(const ExprGraph& graph, const Bindings& bindings, Diagnostics* diag = nullptr);

/// Value and input gradients of a real scalar graph.
///
/// For a complex input z = a + ib the stored gradient is dL/da + i dL/db
/// (twice the conjugate Wirtinger derivative), so z - alpha * grad descends L.
struct GradientResult {
    double value = 0.0;
    std::map<std::string, Tensor> grads;
};

GradientResult gradient(const ExprGraph& graph, const std::vector<std::string>& wrt, const Bindings& bindings,
                        Diagnostics* diag = nullptr);

struct VjpResult {
    Tensor value;
    std::map<std::string, Tensor> grads;
};

/// Vector-Jacobian product of a graph with arbitrary output against `cotangent`
/// (same shape/dtype as the output), using the same complex convention.
VjpResult vjp(const ExprGraph& graph, const std::vector<std::string>& wrt, const Bindings& bindings,
              const Tensor& cotangent, Diagnostics* diag = nullptr);

/// Forward-mode transform: appends to the builder the nodes computing the
/// directional derivative of `output` along `tangent` applied at `wrt`.
/// The emitted nodes are ordinary primitives, so the result can be
/// differentiated again.
Var jvp(Var output, Var wrt, Var tangent);

} // namespace jdf
