// SPDX-License-Identifier: Apache-2.0
#include "lstnet/tensor.hpp"

#include "lstnet/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <unordered_set>
#include <utility>

namespace lstnet {

namespace {

thread_local bool g_grad_mode = true;

enum class FiniteState : std::uint8_t { unknown, yes, no };

} // namespace

struct Tensor::Node {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad; // allocated lazily during backward
    bool requires_grad = false;
    bool consumed = false;

    // Graph edges, present only while this node is part of a live graph.
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;

    mutable FiniteState finite = FiniteState::unknown;

    bool is_leaf() const { return parents.empty() && !backprop; }
};

namespace {

using Node = Tensor::Node;

bool scan_finite(std::span<const double> v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

} // namespace

struct TensorOps {
    static std::shared_ptr<Node> node(const Tensor& t) { return t.node_; }

    static Tensor make_leaf(Shape shape, std::vector<double> values,
                            bool requires_grad) {
        auto n = std::make_shared<Node>();
        n->shape = std::move(shape);
        n->values = std::move(values);
        n->requires_grad = requires_grad;
        return Tensor(std::move(n));
    }

    /// Builds the result node of a primitive. Edges and the backward rule are
    /// recorded only when some input requires grad and grad mode is on.
    static Tensor make_result(Shape shape, std::vector<double> values,
                              std::vector<std::shared_ptr<Node>> parents,
                              std::function<void(Node&)> backprop) {
        auto n = std::make_shared<Node>();
        n->shape = std::move(shape);
        n->values = std::move(values);
        bool track = false;
        if (g_grad_mode) {
            for (const auto& p : parents) {
                if (p->requires_grad) {
                    track = true;
                    break;
                }
            }
        }
        if (track) {
            n->requires_grad = true;
            n->parents = std::move(parents);
            n->backprop = std::move(backprop);
        }
        return Tensor(std::move(n));
    }

    static bool node_finite(const Node& n) {
        if (n.finite == FiniteState::unknown) {
            n.finite = scan_finite(n.values) ? FiniteState::yes : FiniteState::no;
        }
        return n.finite == FiniteState::yes;
    }

    static void require_defined(const Tensor& t, const char* op) {
        if (!t.defined()) {
            throw ShapeError(std::string(op) + ": undefined tensor operand");
        }
    }

    static void require_finite(const Tensor& t, const char* op) {
        if (!node_finite(*t.node_)) {
            throw NumericError(std::string(op) + ": non-finite input value");
        }
    }

    static const Node& cnode(const Tensor& t) { return *t.node_; }
};

namespace {

void check_input(const Tensor& t, const char* op) {
    TensorOps::require_defined(t, op);
    TensorOps::require_finite(t, op);
}

std::shared_ptr<Node> P(const Tensor& t) { return TensorOps::node(t); }

// Ensures a parent's grad buffer exists before accumulating into it.
std::vector<double>& grad_buf(Node& n) {
    if (n.grad.size() != n.values.size()) {
        n.grad.assign(n.values.size(), 0.0);
    }
    return n.grad;
}

Shape matmul_result_shape(const Shape& a, const Shape& b, std::size_t& m,
                          std::size_t& k, std::size_t& n, bool& a_vec,
                          bool& b_vec) {
    a_vec = a.size() == 1;
    b_vec = b.size() == 1;
    if (a.size() == 2 && b.size() == 2) {
        m = a[0];
        k = a[1];
        n = b[1];
        if (b[0] != k) {
            throw ShapeError("matmul: inner dimensions differ: " + shape_str(a) +
                             " x " + shape_str(b));
        }
        return {m, n};
    }
    if (a_vec && b.size() == 2) {
        m = 1;
        k = a[0];
        n = b[1];
        if (b[0] != k) {
            throw ShapeError("matmul: inner dimensions differ: " + shape_str(a) +
                             " x " + shape_str(b));
        }
        return {n};
    }
    if (a.size() == 2 && b_vec) {
        m = a[0];
        k = a[1];
        n = 1;
        if (b[0] != k) {
            throw ShapeError("matmul: inner dimensions differ: " + shape_str(a) +
                             " x " + shape_str(b));
        }
        return {m};
    }
    throw ShapeError("matmul: unsupported ranks " + shape_str(a) + " x " +
                     shape_str(b));
}

// c[m,n] += a[m,k] * b[k,n]
void gemm_acc(const double* a, const double* b, double* c, std::size_t m,
              std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t l = 0; l < k; ++l) {
            const double ail = arow[l];
            if (ail == 0.0) continue;
            const double* brow = b + l * n;
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] += ail * brow[j];
            }
        }
    }
}

// da[m,k] += dc[m,n] * b^T : da[i,l] += dot(dc row i, b row l)
void gemm_acc_bt(const double* dc, const double* b, double* da, std::size_t m,
                 std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* dcrow = dc + i * n;
        double* darow = da + i * k;
        for (std::size_t l = 0; l < k; ++l) {
            const double* brow = b + l * n;
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                acc += dcrow[j] * brow[j];
            }
            darow[l] += acc;
        }
    }
}

// db[k,n] += a^T * dc : db[l,j] += sum_i a[i,l] * dc[i,j]
void gemm_acc_at(const double* a, const double* dc, double* db, std::size_t m,
                 std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        const double* dcrow = dc + i * n;
        for (std::size_t l = 0; l < k; ++l) {
            const double ail = arow[l];
            if (ail == 0.0) continue;
            double* dbrow = db + l * n;
            for (std::size_t j = 0; j < n; ++j) {
                dbrow[j] += ail * dcrow[j];
            }
        }
    }
}

enum class Broadcast { none, left_scalar, right_scalar, right_rowvec };

Broadcast binary_broadcast(const Shape& a, const Shape& b, bool allow_rowvec,
                           const char* op) {
    if (a == b) return Broadcast::none;
    if (shape_numel(b) == 1 && b.size() <= 1) return Broadcast::right_scalar;
    if (shape_numel(a) == 1 && a.size() <= 1) return Broadcast::left_scalar;
    if (allow_rowvec && a.size() == 2 && b.size() == 1 && a[1] == b[0]) {
        return Broadcast::right_rowvec;
    }
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) +
                     " and " + shape_str(b));
}

Tensor unary_op(const Tensor& x, const char* name,
                const std::function<double(double)>& fwd,
                const std::function<double(double, double)>& dfn) {
    check_input(x, name);
    const Node& xn = TensorOps::cnode(x);
    std::vector<double> out(xn.values.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xn.values[i]);
    auto xp = P(x);
    return TensorOps::make_result(
        xn.shape, std::move(out), {xp},
        [xp = xp.get(), dfn](Node& self) {
            if (!xp->requires_grad) return;
            auto& g = grad_buf(*xp);
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += self.grad[i] * dfn(xp->values[i], self.values[i]);
            }
        });
}

} // namespace

// ---------------------------------------------------------------------------
// Shape helpers
// ---------------------------------------------------------------------------

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ')';
    return os.str();
}

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    std::size_t n = shape_numel(shape);
    return TensorOps::make_leaf(std::move(shape), std::vector<double>(n, 0.0),
                                requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    std::size_t n = shape_numel(shape);
    return TensorOps::make_leaf(std::move(shape), std::vector<double>(n, value),
                                requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return TensorOps::make_leaf({}, {value}, requires_grad);
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values,
                           bool requires_grad) {
    if (shape_numel(shape) != values.size()) {
        throw ShapeError("from_values: " + std::to_string(values.size()) +
                         " values for shape " + shape_str(shape));
    }
    return TensorOps::make_leaf(std::move(shape), std::move(values),
                                requires_grad);
}

Tensor Tensor::uniform(Shape shape, double lo, double hi, std::mt19937_64& rng,
                       bool requires_grad) {
    std::size_t n = shape_numel(shape);
    std::vector<double> v(n);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (auto& x : v) x = dist(rng);
    return TensorOps::make_leaf(std::move(shape), std::move(v), requires_grad);
}

const Shape& Tensor::shape() const {
    if (!node_) throw ShapeError("shape(): undefined tensor");
    return node_->shape;
}

std::size_t Tensor::ndim() const { return shape().size(); }

std::size_t Tensor::numel() const {
    if (!node_) throw ShapeError("numel(): undefined tensor");
    return node_->values.size();
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

bool Tensor::is_leaf() const { return node_ && node_->is_leaf(); }

std::span<const double> Tensor::values() const {
    if (!node_) throw ShapeError("values(): undefined tensor");
    return node_->values;
}

std::span<double> Tensor::values_mut() {
    if (!node_) throw ShapeError("values_mut(): undefined tensor");
    if (!node_->is_leaf()) {
        throw ShapeError("values_mut(): only leaf tensors are mutable");
    }
    node_->finite = FiniteState::unknown;
    return node_->values;
}

double Tensor::value() const {
    if (numel() != 1) {
        throw ShapeError("value(): tensor of shape " + shape_str(shape()) +
                         " is not a scalar");
    }
    return node_->values[0];
}

double Tensor::at(std::size_t flat) const {
    if (flat >= numel()) throw ShapeError("at(): index out of range");
    return node_->values[flat];
}

double Tensor::at(std::size_t i, std::size_t j) const {
    const Shape& s = shape();
    if (s.size() != 2) throw ShapeError("at(i,j): tensor is not rank-2");
    if (i >= s[0] || j >= s[1]) throw ShapeError("at(i,j): index out of range");
    return node_->values[i * s[1] + j];
}

bool Tensor::all_finite() const {
    if (!node_) throw ShapeError("all_finite(): undefined tensor");
    return TensorOps::node_finite(*node_);
}

bool Tensor::has_grad() const {
    return node_ && node_->requires_grad &&
           node_->grad.size() == node_->values.size();
}

std::span<const double> Tensor::grad() const {
    if (!has_grad()) {
        throw ShapeError("grad(): no gradient present (run backward first)");
    }
    return node_->grad;
}

std::span<double> Tensor::grad_mut() {
    if (!has_grad()) {
        throw ShapeError("grad_mut(): no gradient present (run backward first)");
    }
    return node_->grad;
}

void Tensor::zero_grad() {
    if (node_) node_->grad.clear();
}

Tensor Tensor::detached_copy(bool requires_grad) const {
    if (!node_) throw ShapeError("detached_copy(): undefined tensor");
    return TensorOps::make_leaf(node_->shape, node_->values, requires_grad);
}

// ---------------------------------------------------------------------------
// Grad mode
// ---------------------------------------------------------------------------

NoGradGuard::NoGradGuard() : previous_(g_grad_mode) { g_grad_mode = false; }
NoGradGuard::~NoGradGuard() { g_grad_mode = previous_; }

bool grad_mode_enabled() { return g_grad_mode; }

// ---------------------------------------------------------------------------
// Primitives
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_input(a, "matmul");
    check_input(b, "matmul");
    const Node& an = TensorOps::cnode(a);
    const Node& bn = TensorOps::cnode(b);
    std::size_t m, k, n;
    bool a_vec, b_vec;
    Shape out_shape =
        matmul_result_shape(an.shape, bn.shape, m, k, n, a_vec, b_vec);
    std::vector<double> out(m * n, 0.0);
    gemm_acc(an.values.data(), bn.values.data(), out.data(), m, k, n);
    auto ap = P(a);
    auto bp = P(b);
    return TensorOps::make_result(
        std::move(out_shape), std::move(out), {ap, bp},
        [ap = ap.get(), bp = bp.get(), m, k, n](Node& self) {
            if (ap->requires_grad) {
                gemm_acc_bt(self.grad.data(), bp->values.data(),
                            grad_buf(*ap).data(), m, k, n);
            }
            if (bp->requires_grad) {
                gemm_acc_at(ap->values.data(), self.grad.data(),
                            grad_buf(*bp).data(), m, k, n);
            }
        });
}

namespace {

Tensor add_like(const Tensor& a, const Tensor& b, double sign, const char* op) {
    check_input(a, op);
    check_input(b, op);
    const Node& an = TensorOps::cnode(a);
    const Node& bn = TensorOps::cnode(b);
    Broadcast bc = binary_broadcast(an.shape, bn.shape, /*allow_rowvec=*/true, op);
    if (bc == Broadcast::left_scalar) {
        // Normalize so broadcasting is always on the right operand:
        // a + b = b + a, and a - b = -(b - a).
        Tensor flipped = add_like(b, a, sign, op);
        return sign > 0 ? flipped : scale_shift(flipped, -1.0, 0.0);
    }
    std::vector<double> out(an.values);
    const std::size_t total = out.size();
    switch (bc) {
    case Broadcast::none:
        for (std::size_t i = 0; i < total; ++i) out[i] += sign * bn.values[i];
        break;
    case Broadcast::right_scalar: {
        const double c = sign * bn.values[0];
        for (auto& x : out) x += c;
        break;
    }
    case Broadcast::right_rowvec: {
        const std::size_t cols = an.shape[1];
        for (std::size_t i = 0; i < total; ++i) {
            out[i] += sign * bn.values[i % cols];
        }
        break;
    }
    case Broadcast::left_scalar:
        break; // handled above
    }
    auto ap = P(a);
    auto bp = P(b);
    return TensorOps::make_result(
        an.shape, std::move(out), {ap, bp},
        [ap = ap.get(), bp = bp.get(), bc, sign](Node& self) {
            if (ap->requires_grad) {
                auto& g = grad_buf(*ap);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
            }
            if (bp->requires_grad) {
                auto& g = grad_buf(*bp);
                switch (bc) {
                case Broadcast::none:
                    for (std::size_t i = 0; i < g.size(); ++i) {
                        g[i] += sign * self.grad[i];
                    }
                    break;
                case Broadcast::right_scalar: {
                    double acc = 0.0;
                    for (double d : self.grad) acc += d;
                    g[0] += sign * acc;
                    break;
                }
                case Broadcast::right_rowvec: {
                    const std::size_t cols = g.size();
                    for (std::size_t i = 0; i < self.grad.size(); ++i) {
                        g[i % cols] += sign * self.grad[i];
                    }
                    break;
                }
                case Broadcast::left_scalar:
                    break;
                }
            }
        });
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) { return add_like(a, b, 1.0, "add"); }

Tensor sub(const Tensor& a, const Tensor& b) { return add_like(a, b, -1.0, "sub"); }

Tensor mul(const Tensor& a, const Tensor& b) {
    check_input(a, "mul");
    check_input(b, "mul");
    const Node& an = TensorOps::cnode(a);
    const Node& bn = TensorOps::cnode(b);
    Broadcast bc = binary_broadcast(an.shape, bn.shape, /*allow_rowvec=*/false,
                                    "mul");
    if (bc == Broadcast::left_scalar) return mul(b, a);
    std::vector<double> out(an.values);
    if (bc == Broadcast::none) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bn.values[i];
    } else {
        const double c = bn.values[0];
        for (auto& x : out) x *= c;
    }
    auto ap = P(a);
    auto bp = P(b);
    return TensorOps::make_result(
        an.shape, std::move(out), {ap, bp},
        [ap = ap.get(), bp = bp.get(), bc](Node& self) {
            if (ap->requires_grad) {
                auto& g = grad_buf(*ap);
                if (bc == Broadcast::none) {
                    for (std::size_t i = 0; i < g.size(); ++i) {
                        g[i] += self.grad[i] * bp->values[i];
                    }
                } else {
                    const double c = bp->values[0];
                    for (std::size_t i = 0; i < g.size(); ++i) {
                        g[i] += self.grad[i] * c;
                    }
                }
            }
            if (bp->requires_grad) {
                auto& g = grad_buf(*bp);
                if (bc == Broadcast::none) {
                    for (std::size_t i = 0; i < g.size(); ++i) {
                        g[i] += self.grad[i] * ap->values[i];
                    }
                } else {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < self.grad.size(); ++i) {
                        acc += self.grad[i] * ap->values[i];
                    }
                    g[0] += acc;
                }
            }
        });
}

Tensor divide(const Tensor& a, const Tensor& b) {
    check_input(a, "divide");
    check_input(b, "divide");
    const Node& an = TensorOps::cnode(a);
    const Node& bn = TensorOps::cnode(b);
    Broadcast bc = binary_broadcast(an.shape, bn.shape, /*allow_rowvec=*/false,
                                    "divide");
    if (bc == Broadcast::left_scalar) {
        throw ShapeError("divide: scalar numerator with tensor denominator is "
                         "not supported");
    }
    std::vector<double> out(an.values);
    if (bc == Broadcast::none) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] /= bn.values[i];
    } else {
        const double c = bn.values[0];
        for (auto& x : out) x /= c;
    }
    if (!scan_finite(out)) throw NumericError("divide: non-finite result");
    auto ap = P(a);
    auto bp = P(b);
    return TensorOps::make_result(
        an.shape, std::move(out), {ap, bp},
        [ap = ap.get(), bp = bp.get(), bc](Node& self) {
            if (ap->requires_grad) {
                auto& g = grad_buf(*ap);
                if (bc == Broadcast::none) {
                    for (std::size_t i = 0; i < g.size(); ++i) {
                        g[i] += self.grad[i] / bp->values[i];
                    }
                } else {
                    const double inv = 1.0 / bp->values[0];
                    for (std::size_t i = 0; i < g.size(); ++i) {
                        g[i] += self.grad[i] * inv;
                    }
                }
            }
            if (bp->requires_grad) {
                auto& g = grad_buf(*bp);
                if (bc == Broadcast::none) {
                    for (std::size_t i = 0; i < g.size(); ++i) {
                        const double d = bp->values[i];
                        g[i] -= self.grad[i] * ap->values[i] / (d * d);
                    }
                } else {
                    const double d = bp->values[0];
                    double acc = 0.0;
                    for (std::size_t i = 0; i < self.grad.size(); ++i) {
                        acc += self.grad[i] * ap->values[i];
                    }
                    g[0] -= acc / (d * d);
                }
            }
        });
}

Tensor sigmoid(const Tensor& x) {
    return unary_op(
        x, "sigmoid",
        [](double v) {
            if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
            const double e = std::exp(v);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
    return unary_op(
        x, "tanh", [](double v) { return std::tanh(v); },
        [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& x) {
    // Subgradient 0 at the kink.
    return unary_op(
        x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
        [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor abs(const Tensor& x) {
    // Subgradient 0 at zero.
    return unary_op(
        x, "abs", [](double v) { return std::fabs(v); },
        [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& x) {
    return unary_op(
        x, "square", [](double v) { return v * v; },
        [](double v, double) { return 2.0 * v; });
}

Tensor sqrt(const Tensor& x) {
    check_input(x, "sqrt");
    for (double v : x.values()) {
        if (v < 0.0) throw NumericError("sqrt: negative input");
    }
    return unary_op(
        x, "sqrt", [](double v) { return std::sqrt(v); },
        [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Tensor scale_shift(const Tensor& x, double mul_coeff, double add_coeff) {
    check_input(x, "scale_shift");
    const Node& xn = TensorOps::cnode(x);
    std::vector<double> out(xn.values.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = mul_coeff * xn.values[i] + add_coeff;
    }
    auto xp = P(x);
    return TensorOps::make_result(xn.shape, std::move(out), {xp},
                                  [xp = xp.get(), mul_coeff](Node& self) {
                                      if (!xp->requires_grad) return;
                                      auto& g = grad_buf(*xp);
                                      for (std::size_t i = 0; i < g.size(); ++i) {
                                          g[i] += self.grad[i] * mul_coeff;
                                      }
                                  });
}

Tensor sum(const Tensor& x) {
    check_input(x, "sum");
    const Node& xn = TensorOps::cnode(x);
    double acc = 0.0;
    for (double v : xn.values) acc += v;
    auto xp = P(x);
    return TensorOps::make_result({}, {acc}, {xp}, [xp = xp.get()](Node& self) {
        if (!xp->requires_grad) return;
        const double d = self.grad[0];
        auto& g = grad_buf(*xp);
        for (auto& v : g) v += d;
    });
}

Tensor mean(const Tensor& x) {
    check_input(x, "mean");
    const Node& xn = TensorOps::cnode(x);
    if (xn.values.empty()) throw ShapeError("mean: empty tensor");
    double acc = 0.0;
    for (double v : xn.values) acc += v;
    const double inv = 1.0 / static_cast<double>(xn.values.size());
    auto xp = P(x);
    return TensorOps::make_result({}, {acc * inv}, {xp},
                                  [xp = xp.get(), inv](Node& self) {
                                      if (!xp->requires_grad) return;
                                      const double d = self.grad[0] * inv;
                                      auto& g = grad_buf(*xp);
                                      for (auto& v : g) v += d;
                                  });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    for (const Tensor& t : parts) check_input(t, "concat");
    const Shape& first = parts[0].shape();
    if (axis >= first.size()) {
        throw ShapeError("concat: axis " + std::to_string(axis) +
                         " out of range for " + shape_str(first));
    }
    Shape out_shape = first;
    std::size_t axis_total = 0;
    for (const Tensor& t : parts) {
        const Shape& s = t.shape();
        if (s.size() != first.size()) {
            throw ShapeError("concat: rank mismatch " + shape_str(s) + " vs " +
                             shape_str(first));
        }
        for (std::size_t d = 0; d < s.size(); ++d) {
            if (d != axis && s[d] != first[d]) {
                throw ShapeError("concat: extent mismatch on axis " +
                                 std::to_string(d) + ": " + shape_str(s) +
                                 " vs " + shape_str(first));
            }
        }
        axis_total += s[axis];
    }
    out_shape[axis] = axis_total;

    // outer = product of extents before axis, inner = product after.
    std::size_t outer = 1, inner = 1;
    for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
    for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];

    std::vector<double> out(shape_numel(out_shape));
    std::vector<std::size_t> offsets(parts.size());
    {
        std::size_t off = 0;
        for (std::size_t pi = 0; pi < parts.size(); ++pi) {
            offsets[pi] = off;
            const Node& pn = TensorOps::cnode(parts[pi]);
            const std::size_t pa = pn.shape[axis];
            for (std::size_t o = 0; o < outer; ++o) {
                const double* src = pn.values.data() + o * pa * inner;
                double* dst = out.data() + (o * axis_total + off) * inner;
                std::copy(src, src + pa * inner, dst);
            }
            off += pa;
        }
    }

    std::vector<std::shared_ptr<Node>> parents;
    parents.reserve(parts.size());
    for (const Tensor& t : parts) parents.push_back(P(t));
    std::vector<Node*> raw;
    raw.reserve(parents.size());
    std::vector<std::size_t> part_axis(parts.size());
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
        raw.push_back(parents[pi].get());
        part_axis[pi] = parts[pi].shape()[axis];
    }
    return TensorOps::make_result(
        std::move(out_shape), std::move(out), std::move(parents),
        [raw = std::move(raw), offsets = std::move(offsets),
         part_axis = std::move(part_axis), outer, inner,
         axis_total](Node& self) {
            for (std::size_t pi = 0; pi < raw.size(); ++pi) {
                Node* p = raw[pi];
                if (!p->requires_grad) continue;
                auto& g = grad_buf(*p);
                const std::size_t pa = part_axis[pi];
                for (std::size_t o = 0; o < outer; ++o) {
                    const double* src =
                        self.grad.data() + (o * axis_total + offsets[pi]) * inner;
                    double* dst = g.data() + o * pa * inner;
                    for (std::size_t i = 0; i < pa * inner; ++i) dst[i] += src[i];
                }
            }
        });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin,
             std::size_t end) {
    check_input(x, "slice");
    const Node& xn = TensorOps::cnode(x);
    if (axis >= xn.shape.size()) {
        throw ShapeError("slice: axis " + std::to_string(axis) +
                         " out of range for " + shape_str(xn.shape));
    }
    if (begin >= end || end > xn.shape[axis]) {
        throw ShapeError("slice: range [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") invalid for axis extent " +
                         std::to_string(xn.shape[axis]));
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t d = 0; d < axis; ++d) outer *= xn.shape[d];
    for (std::size_t d = axis + 1; d < xn.shape.size(); ++d) {
        inner *= xn.shape[d];
    }
    const std::size_t src_axis = xn.shape[axis];
    const std::size_t len = end - begin;
    Shape out_shape = xn.shape;
    out_shape[axis] = len;
    std::vector<double> out(outer * len * inner);
    for (std::size_t o = 0; o < outer; ++o) {
        const double* src = xn.values.data() + (o * src_axis + begin) * inner;
        std::copy(src, src + len * inner, out.data() + o * len * inner);
    }
    auto xp = P(x);
    return TensorOps::make_result(
        std::move(out_shape), std::move(out), {xp},
        [xp = xp.get(), outer, inner, src_axis, begin, len](Node& self) {
            if (!xp->requires_grad) return;
            auto& g = grad_buf(*xp);
            for (std::size_t o = 0; o < outer; ++o) {
                double* dst = g.data() + (o * src_axis + begin) * inner;
                const double* src = self.grad.data() + o * len * inner;
                for (std::size_t i = 0; i < len * inner; ++i) dst[i] += src[i];
            }
        });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
    check_input(x, "softmax");
    const Node& xn = TensorOps::cnode(x);
    const Shape& s = xn.shape;
    if (s.empty() || s.size() > 2) {
        throw ShapeError("softmax: rank must be 1 or 2, got " + shape_str(s));
    }
    if (axis >= s.size()) {
        throw ShapeError("softmax: axis " + std::to_string(axis) +
                         " out of range for " + shape_str(s));
    }
    // lanes x lane_len with stride: axis-major decomposition.
    std::size_t lanes, lane_len, lane_stride, elem_stride;
    if (s.size() == 1) {
        lanes = 1;
        lane_len = s[0];
        lane_stride = 0;
        elem_stride = 1;
    } else if (axis == 1) {
        lanes = s[0];
        lane_len = s[1];
        lane_stride = s[1];
        elem_stride = 1;
    } else {
        lanes = s[1];
        lane_len = s[0];
        lane_stride = 1;
        elem_stride = s[1];
    }
    std::vector<double> out(xn.values.size());
    for (std::size_t l = 0; l < lanes; ++l) {
        const double* src = xn.values.data() + l * lane_stride;
        double* dst = out.data() + l * lane_stride;
        double mx = src[0];
        for (std::size_t i = 1; i < lane_len; ++i) {
            mx = std::max(mx, src[i * elem_stride]);
        }
        double denom = 0.0;
        for (std::size_t i = 0; i < lane_len; ++i) {
            const double e = std::exp(src[i * elem_stride] - mx);
            dst[i * elem_stride] = e;
            denom += e;
        }
        const double inv = 1.0 / denom;
        for (std::size_t i = 0; i < lane_len; ++i) dst[i * elem_stride] *= inv;
    }
    auto xp = P(x);
    return TensorOps::make_result(
        s, std::move(out), {xp},
        [xp = xp.get(), lanes, lane_len, lane_stride, elem_stride](Node& self) {
            if (!xp->requires_grad) return;
            auto& g = grad_buf(*xp);
            for (std::size_t l = 0; l < lanes; ++l) {
                const double* sv = self.values.data() + l * lane_stride;
                const double* sg = self.grad.data() + l * lane_stride;
                double* dst = g.data() + l * lane_stride;
                double dot = 0.0;
                for (std::size_t i = 0; i < lane_len; ++i) {
                    dot += sv[i * elem_stride] * sg[i * elem_stride];
                }
                for (std::size_t i = 0; i < lane_len; ++i) {
                    const std::size_t idx = i * elem_stride;
                    dst[idx] += sv[idx] * (sg[idx] - dot);
                }
            }
        });
}

Tensor reshape(const Tensor& x, Shape new_shape) {
    check_input(x, "reshape");
    const Node& xn = TensorOps::cnode(x);
    if (shape_numel(new_shape) != xn.values.size()) {
        throw ShapeError("reshape: cannot view " + shape_str(xn.shape) + " as " +
                         shape_str(new_shape));
    }
    auto xp = P(x);
    return TensorOps::make_result(std::move(new_shape),
                                  std::vector<double>(xn.values), {xp},
                                  [xp = xp.get()](Node& self) {
                                      if (!xp->requires_grad) return;
                                      auto& g = grad_buf(*xp);
                                      for (std::size_t i = 0; i < g.size(); ++i) {
                                          g[i] += self.grad[i];
                                      }
                                  });
}

Tensor transpose(const Tensor& x) {
    check_input(x, "transpose");
    const Node& xn = TensorOps::cnode(x);
    if (xn.shape.size() != 2) {
        throw ShapeError("transpose: rank-2 required, got " +
                         shape_str(xn.shape));
    }
    const std::size_t r = xn.shape[0], c = xn.shape[1];
    std::vector<double> out(xn.values.size());
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            out[j * r + i] = xn.values[i * c + j];
        }
    }
    auto xp = P(x);
    return TensorOps::make_result({c, r}, std::move(out), {xp},
                                  [xp = xp.get(), r, c](Node& self) {
                                      if (!xp->requires_grad) return;
                                      auto& g = grad_buf(*xp);
                                      for (std::size_t i = 0; i < r; ++i) {
                                          for (std::size_t j = 0; j < c; ++j) {
                                              g[i * c + j] +=
                                                  self.grad[j * r + i];
                                          }
                                      }
                                  });
}

Tensor primitive_forward(PrimitiveOp op, std::span<const Tensor> inputs,
                         const PrimitiveAttrs& attrs) {
    auto need = [&](std::size_t n) {
        if (inputs.size() != n) {
            throw ShapeError("primitive_forward: expected " + std::to_string(n) +
                             " inputs, got " + std::to_string(inputs.size()));
        }
    };
    switch (op) {
    case PrimitiveOp::matmul:
        need(2);
        return matmul(inputs[0], inputs[1]);
    case PrimitiveOp::add:
        need(2);
        return add(inputs[0], inputs[1]);
    case PrimitiveOp::mul_elementwise:
        need(2);
        return mul(inputs[0], inputs[1]);
    case PrimitiveOp::sigmoid:
        need(1);
        return sigmoid(inputs[0]);
    case PrimitiveOp::tanh:
        need(1);
        return tanh(inputs[0]);
    case PrimitiveOp::relu:
        need(1);
        return relu(inputs[0]);
    case PrimitiveOp::concat:
        return concat(inputs, attrs.axis);
    case PrimitiveOp::slice:
        need(1);
        return slice(inputs[0], attrs.axis, attrs.begin, attrs.end);
    case PrimitiveOp::sum:
        need(1);
        return sum(inputs[0]);
    case PrimitiveOp::mean:
        need(1);
        return mean(inputs[0]);
    case PrimitiveOp::abs:
        need(1);
        return abs(inputs[0]);
    case PrimitiveOp::square:
        need(1);
        return square(inputs[0]);
    case PrimitiveOp::softmax_over_axis:
        need(1);
        return softmax(inputs[0], attrs.axis);
    }
    throw ShapeError("primitive_forward: unknown op");
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

void backward(const Tensor& loss) {
    TensorOps::require_defined(loss, "backward");
    auto root = TensorOps::node(loss);
    if (root->values.size() != 1) {
        throw ShapeError("backward: loss must be scalar, got " +
                         shape_str(root->shape));
    }
    if (root->consumed) {
        throw ShapeError("backward: graph already consumed");
    }
    if (!root->requires_grad) {
        // Constant loss: nothing reachable requires grad.
        return;
    }

    // Iterative post-order over requires_grad nodes: children (inputs) first.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        bool descended = false;
        while (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
                descended = true;
                break;
            }
        }
        if (!descended && (stack.back().second >= stack.back().first->parents.size())) {
            order.push_back(stack.back().first);
            stack.pop_back();
        }
    }

    root->grad.assign(1, 1.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backprop) {
            if (n->grad.size() != n->values.size()) {
                n->grad.assign(n->values.size(), 0.0);
            }
            n->backprop(*n);
        }
    }

    // Consume the graph: drop edges and rules; leaves keep their gradients.
    for (Node* n : order) {
        n->consumed = !n->is_leaf();
        n->parents.clear();
        n->backprop = nullptr;
    }
}

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f,
                           const Tensor& point, double step) {
    if (step <= 0.0) throw NumericError("grad_check: step must be positive");

    auto eval_at = [&](const Tensor& x) {
        NoGradGuard guard;
        Tensor y = f(x);
        if (y.numel() != 1) {
            throw ShapeError("grad_check: f must be scalar-valued");
        }
        return y.value();
    };

    // Determinism probe: two value-only passes must agree bitwise.
    {
        Tensor probe = point.detached_copy(false);
        const double y1 = eval_at(probe);
        const double y2 = eval_at(probe);
        if (std::memcmp(&y1, &y2, sizeof(double)) != 0) {
            throw NumericError("grad_check: f is not deterministic");
        }
    }

    Tensor x = point.detached_copy(true);
    Tensor y = f(x);
    if (y.numel() != 1) throw ShapeError("grad_check: f must be scalar-valued");
    backward(y);
    std::vector<double> analytic;
    if (x.has_grad()) {
        analytic.assign(x.grad().begin(), x.grad().end());
    } else {
        analytic.assign(x.numel(), 0.0); // f ignored its input
    }

    Tensor probe = point.detached_copy(false);
    GradCheckReport report;
    auto vals = probe.values_mut();
    for (std::size_t i = 0; i < vals.size(); ++i) {
        const double saved = vals[i];
        vals[i] = saved + step;
        const double up = eval_at(probe);
        vals[i] = saved - step;
        const double down = eval_at(probe);
        vals[i] = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double denom = std::max({std::fabs(analytic[i]),
                                       std::fabs(numeric), kGradCheckEpsFloor});
        const double rel = std::fabs(analytic[i] - numeric) / denom;
        if (rel > report.max_rel_error) {
            report.max_rel_error = rel;
            report.worst_index = i;
            report.analytic_at_worst = analytic[i];
            report.numeric_at_worst = numeric;
        }
    }
    return report;
}

} // namespace lstnet
