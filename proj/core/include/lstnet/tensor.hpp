// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace lstnet {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense n-dimensional array of doubles with reverse-mode automatic
/// differentiation. A Tensor is a cheap shared handle to its storage node;
/// applying an operation while any input has requires_grad (and grad mode is
/// on) records the operation so that backward() can later propagate
/// d(loss)/d(leaf) into every reachable requires_grad leaf.
///
/// Values are stored in row-major logical order. Rank 0 (shape {}) denotes a
/// scalar with one element. Tensors detached from any graph are immutable
/// values and safe to share read-only across threads; a graph and the tensors
/// recorded in it are confined to one thread for the duration of a
/// forward/backward pass.
class Tensor {
public:
    struct Node; // storage + graph record; defined in tensor.cpp

    Tensor() = default; // empty handle; defined() is false

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor from_values(Shape shape, std::vector<double> values,
                              bool requires_grad = false);
    /// Elements drawn i.i.d. uniform on [lo, hi).
    static Tensor uniform(Shape shape, double lo, double hi,
                          std::mt19937_64& rng, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t ndim() const;
    std::size_t numel() const;
    bool requires_grad() const;
    bool is_leaf() const;

    std::span<const double> values() const;
    /// Mutable access to a leaf tensor's storage (parameter updates).
    /// Throws ShapeError when called on a non-leaf.
    std::span<double> values_mut();

    double value() const;              // numel()==1 only
    double at(std::size_t flat) const; // flat row-major index
    double at(std::size_t i, std::size_t j) const; // rank-2 only

    /// True when every stored value is finite. Cached; recomputed after
    /// values_mut() is taken.
    bool all_finite() const;

    bool has_grad() const;
    std::span<const double> grad() const;
    /// Mutable gradient view (optimizer adjustments such as clipping).
    std::span<double> grad_mut();
    void zero_grad();

    /// Deep copy with no graph attachment.
    Tensor detached_copy(bool requires_grad = false) const;

private:
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
    std::shared_ptr<Node> node_;

    friend struct TensorOps;
};

/// While alive, suppresses graph recording on the current thread: operations
/// compute values only. Used for inference.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_mode_enabled();

// ---------------------------------------------------------------------------
// Primitive operations.
//
// Shape rules (violations throw ShapeError; any non-finite input value throws
// NumericError):
//   matmul: (m,k)x(k,n)->(m,n); (k)x(k,n)->(n); (m,k)x(k)->(m).
//   add/sub: equal shapes; or either side scalar (numel 1); or rank-2 (r,c)
//            with rank-1 (c) broadcast across rows.
//   mul (elementwise): equal shapes or either side scalar.
//   divide: equal shapes or scalar divisor; division by zero is non-finite
//           and therefore rejected on output.
//   concat: along one axis; all other extents equal.
//   slice: contiguous [begin,end) along one axis.
//   sum/mean: full reduction to a rank-0 scalar.
//   softmax: along the given axis (rank 1 or 2), max-subtracted.
//   reshape: numel-preserving relabeling.
//   transpose: rank-2 only.
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor divide(const Tensor& a, const Tensor& b);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor square(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);
Tensor softmax(const Tensor& x, std::size_t axis);
Tensor reshape(const Tensor& x, Shape new_shape);
Tensor transpose(const Tensor& x);
/// Elementwise mul_coeff*x + add_coeff (no tensor operand needed for 1-x etc).
Tensor scale_shift(const Tensor& x, double mul_coeff, double add_coeff);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

/// The closed set of primitives expressible through one dispatch point.
enum class PrimitiveOp {
    matmul,
    add,
    mul_elementwise,
    sigmoid,
    tanh,
    relu,
    concat,
    slice,
    sum,
    mean,
    abs,
    square,
    softmax_over_axis,
};

struct PrimitiveAttrs {
    std::size_t axis = 0;
    std::size_t begin = 0;
    std::size_t end = 0;
};

Tensor primitive_forward(PrimitiveOp op, std::span<const Tensor> inputs,
                         const PrimitiveAttrs& attrs = {});

/// Propagates gradients of a scalar loss into every requires_grad leaf
/// reachable through the recorded graph, then consumes the graph (a second
/// backward through the same nodes throws). Gradients accumulate, so calling
/// backward on several losses built from the same leaves sums their
/// gradients until zero_grad().
void backward(const Tensor& loss);

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double analytic_at_worst = 0.0;
    double numeric_at_worst = 0.0;

    bool passed(double tolerance) const { return max_rel_error < tolerance; }
};

/// Compares backward() gradients of the scalar-valued f against central
/// finite differences at `point`. Relative error per coordinate is
/// |analytic - numeric| / max(|analytic|, |numeric|, kGradCheckEpsFloor);
/// the floor makes exact-zero gradients compare absolutely. f is run twice
/// up front and must produce bit-identical values, otherwise NumericError.
GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f,
                           const Tensor& point, double step);

/// Floor used in grad_check's relative error denominator. Coordinates whose
/// analytic and numeric derivatives are both below this magnitude are
/// compared absolutely, which keeps finite-difference noise on near-zero
/// gradients from dominating the report.
inline constexpr double kGradCheckEpsFloor = 1e-6;

} // namespace lstnet
