#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "survwalk/error.hpp"
#include "survwalk/numeric.hpp"
#include "survwalk/tensor.hpp"

namespace survwalk {

enum class Op {
    leaf,
    matmul,
    add,       // same shape, or right operand broadcast over the leading batch axis
    sub,
    mul,       // elementwise
    scale,     // x * constant
    shift,     // x + constant
    neg,
    exp,       // input clamped to <= kExpClamp
    log,       // input clamped to >= kLogFloor
    relu,
    sigmoid,
    softplus,
    sum_all,
    sum_axis,
    lse_all,   // logsumexp over all entries
    lse_axis,
    slice,     // along the last axis
    concat,    // along the last axis
    gather,    // along the leading axis, duplicate indices allowed
    cumlse,    // running logsumexp of a vector
    reshape,
};

inline const char* op_name(Op op) {
    switch (op) {
        case Op::leaf: return "leaf";
        case Op::matmul: return "matmul";
        case Op::add: return "add";
        case Op::sub: return "sub";
        case Op::mul: return "mul";
        case Op::scale: return "scale";
        case Op::shift: return "shift";
        case Op::neg: return "neg";
        case Op::exp: return "exp";
        case Op::log: return "log";
        case Op::relu: return "relu";
        case Op::sigmoid: return "sigmoid";
        case Op::softplus: return "softplus";
        case Op::sum_all: return "sum";
        case Op::sum_axis: return "sum_axis";
        case Op::lse_all: return "logsumexp";
        case Op::lse_axis: return "logsumexp_axis";
        case Op::slice: return "slice";
        case Op::concat: return "concat";
        case Op::gather: return "gather";
        case Op::cumlse: return "cumlogsumexp";
        case Op::reshape: return "reshape";
    }
    return "?";
}

// Reverse-mode tape over dense tensors. Nodes are appended in creation order,
// which is the topological order, and values are computed eagerly. A node's
// index doubles as its id.
template <typename T>
class Graph {
public:
    using NodeId = int;

    NodeId constant(Tensor<T> v) { return add_leaf(std::move(v), false); }
    NodeId param(Tensor<T> v) { return add_leaf(std::move(v), true); }

    NodeId matmul(NodeId a, NodeId b) {
        const Tensor<T>& A = value(a);
        const Tensor<T>& B = value(b);
        if (A.rank() != 2 || B.rank() != 2 || A.shape[1] != B.shape[0]) {
            shape_error(Op::matmul, A, B);
        }
        Tensor<T> out = Tensor<T>::zeros({A.shape[0], B.shape[1]});
        matmul_into(A, B, out, false, false);
        return add_node(Op::matmul, a, b, std::move(out));
    }

    NodeId add(NodeId a, NodeId b) {
        const Tensor<T>& A = value(a);
        const Tensor<T>& B = value(b);
        Tensor<T> out;
        if (A.same_shape(B)) {
            out = A;
            for (size_t i = 0; i < out.numel(); ++i) out.data[i] += B.data[i];
        } else if (broadcastable(A, B)) {
            out = A;
            const size_t n = B.numel();
            for (size_t r = 0; r < A.shape[0]; ++r)
                for (size_t i = 0; i < n; ++i) out.data[r * n + i] += B.data[i];
        } else {
            shape_error(Op::add, A, B);
        }
        return add_node(Op::add, a, b, std::move(out));
    }

    NodeId sub(NodeId a, NodeId b) {
        const Tensor<T>& A = value(a);
        const Tensor<T>& B = value(b);
        if (!A.same_shape(B)) shape_error(Op::sub, A, B);
        Tensor<T> out = A;
        for (size_t i = 0; i < out.numel(); ++i) out.data[i] -= B.data[i];
        return add_node(Op::sub, a, b, std::move(out));
    }

    NodeId mul(NodeId a, NodeId b) {
        const Tensor<T>& A = value(a);
        const Tensor<T>& B = value(b);
        if (!A.same_shape(B)) shape_error(Op::mul, A, B);
        Tensor<T> out = A;
        for (size_t i = 0; i < out.numel(); ++i) out.data[i] *= B.data[i];
        return add_node(Op::mul, a, b, std::move(out));
    }

    NodeId scale(NodeId a, T c) {
        Tensor<T> out = value(a);
        for (T& x : out.data) x *= c;
        NodeId id = add_node(Op::scale, a, -1, std::move(out));
        nodes_[id].c = c;
        return id;
    }

    NodeId shift(NodeId a, T c) {
        Tensor<T> out = value(a);
        for (T& x : out.data) x += c;
        NodeId id = add_node(Op::shift, a, -1, std::move(out));
        nodes_[id].c = c;
        return id;
    }

    NodeId neg(NodeId a) {
        Tensor<T> out = value(a);
        for (T& x : out.data) x = -x;
        return add_node(Op::neg, a, -1, std::move(out));
    }

    NodeId exp(NodeId a) {
        Tensor<T> out = value(a);
        for (T& x : out.data) x = guarded_exp(x);
        return add_node(Op::exp, a, -1, std::move(out));
    }

    NodeId log(NodeId a) {
        Tensor<T> out = value(a);
        for (T& x : out.data) x = guarded_log(x);
        return add_node(Op::log, a, -1, std::move(out));
    }

    NodeId relu(NodeId a) {
        Tensor<T> out = value(a);
        for (T& x : out.data) x = std::max(x, T(0));
        return add_node(Op::relu, a, -1, std::move(out));
    }

    NodeId sigmoid(NodeId a) {
        Tensor<T> out = value(a);
        for (T& x : out.data) x = stable_sigmoid(x);
        return add_node(Op::sigmoid, a, -1, std::move(out));
    }

    NodeId softplus(NodeId a) {
        Tensor<T> out = value(a);
        for (T& x : out.data) x = x > T(kExpClamp) ? x : std::log1p(std::exp(x));
        return add_node(Op::softplus, a, -1, std::move(out));
    }

    NodeId sum(NodeId a) {
        const Tensor<T>& A = value(a);
        T s = 0;
        for (const T& x : A.data) s += x;
        return add_node(Op::sum_all, a, -1, Tensor<T>::scalar(s));
    }

    NodeId sum(NodeId a, size_t axis) {
        const Tensor<T>& A = value(a);
        auto [outer, mid, inner] = reduce_extents(Op::sum_axis, A, axis);
        Tensor<T> out = Tensor<T>::zeros(reduced_shape(A, axis));
        for (size_t o = 0; o < outer; ++o)
            for (size_t m = 0; m < mid; ++m)
                for (size_t i = 0; i < inner; ++i)
                    out.data[o * inner + i] += A.data[(o * mid + m) * inner + i];
        NodeId id = add_node(Op::sum_axis, a, -1, std::move(out));
        nodes_[id].axis = axis;
        return id;
    }

    NodeId logsumexp(NodeId a) {
        const Tensor<T>& A = value(a);
        return add_node(Op::lse_all, a, -1, Tensor<T>::scalar(survwalk::logsumexp(A.data)));
    }

    NodeId logsumexp(NodeId a, size_t axis) {
        const Tensor<T>& A = value(a);
        auto [outer, mid, inner] = reduce_extents(Op::lse_axis, A, axis);
        Tensor<T> out = Tensor<T>::zeros(reduced_shape(A, axis));
        std::vector<T> lane(mid);
        for (size_t o = 0; o < outer; ++o)
            for (size_t i = 0; i < inner; ++i) {
                for (size_t m = 0; m < mid; ++m) lane[m] = A.data[(o * mid + m) * inner + i];
                out.data[o * inner + i] = survwalk::logsumexp(lane);
            }
        NodeId id = add_node(Op::lse_axis, a, -1, std::move(out));
        nodes_[id].axis = axis;
        return id;
    }

    NodeId slice(NodeId a, size_t start, size_t len) {
        const Tensor<T>& A = value(a);
        const size_t last = A.shape.back();
        if (len == 0 || start + len > last) {
            fail_invalid(std::string("slice: range [") + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") exceeds last axis of " +
                         Tensor<T>::shape_string(A.shape));
        }
        std::vector<size_t> shape = A.shape;
        shape.back() = len;
        Tensor<T> out = Tensor<T>::zeros(shape);
        const size_t lanes = A.numel() / last;
        for (size_t l = 0; l < lanes; ++l)
            for (size_t j = 0; j < len; ++j) out.data[l * len + j] = A.data[l * last + start + j];
        NodeId id = add_node(Op::slice, a, -1, std::move(out));
        nodes_[id].start = start;
        nodes_[id].len = len;
        return id;
    }

    NodeId concat(NodeId a, NodeId b) {
        const Tensor<T>& A = value(a);
        const Tensor<T>& B = value(b);
        bool ok = A.rank() == B.rank() && A.rank() >= 1;
        for (size_t d = 0; ok && d + 1 < A.rank(); ++d) ok = A.shape[d] == B.shape[d];
        if (!ok) shape_error(Op::concat, A, B);
        const size_t ca = A.shape.back(), cb = B.shape.back();
        std::vector<size_t> shape = A.shape;
        shape.back() = ca + cb;
        Tensor<T> out = Tensor<T>::zeros(shape);
        const size_t lanes = A.numel() / ca;
        for (size_t l = 0; l < lanes; ++l) {
            for (size_t j = 0; j < ca; ++j) out.data[l * (ca + cb) + j] = A.data[l * ca + j];
            for (size_t j = 0; j < cb; ++j) out.data[l * (ca + cb) + ca + j] = B.data[l * cb + j];
        }
        return add_node(Op::concat, a, b, std::move(out));
    }

    NodeId gather(NodeId a, std::vector<size_t> indices) {
        const Tensor<T>& A = value(a);
        const size_t n = A.shape[0];
        const size_t lane = A.numel() / n;
        for (size_t idx : indices) {
            if (idx >= n) {
                fail_invalid("gather: index " + std::to_string(idx) + " out of range for " +
                             Tensor<T>::shape_string(A.shape));
            }
        }
        std::vector<size_t> shape = A.shape;
        shape[0] = indices.size();
        Tensor<T> out = Tensor<T>::zeros(shape);
        for (size_t k = 0; k < indices.size(); ++k)
            for (size_t j = 0; j < lane; ++j) out.data[k * lane + j] = A.data[indices[k] * lane + j];
        NodeId id = add_node(Op::gather, a, -1, std::move(out));
        nodes_[id].indices = std::move(indices);
        return id;
    }

    NodeId cumlogsumexp(NodeId a) {
        const Tensor<T>& A = value(a);
        if (A.rank() != 1) {
            fail_invalid(std::string("cumlogsumexp: expected a vector, got ") +
                         Tensor<T>::shape_string(A.shape));
        }
        Tensor<T> out = A;
        out.data = cumulative_logsumexp(A.data);
        return add_node(Op::cumlse, a, -1, std::move(out));
    }

    NodeId reshape(NodeId a, std::vector<size_t> shape) {
        const Tensor<T>& A = value(a);
        if (Tensor<T>::numel_of(shape) != A.numel()) {
            fail_invalid("reshape: " + Tensor<T>::shape_string(A.shape) + " has " +
                         std::to_string(A.numel()) + " entries, target " +
                         Tensor<T>::shape_string(shape) + " disagrees");
        }
        Tensor<T> out(std::move(shape), A.data);
        return add_node(Op::reshape, a, -1, std::move(out));
    }

    const Tensor<T>& value(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }

    // Zero until backward() runs; parameters unreachable from the root keep zeros.
    const Tensor<T>& grad(NodeId id) const {
        const Node& n = nodes_[static_cast<size_t>(id)];
        if (!n.requires_grad) fail_invalid("grad: node does not track gradients");
        return n.grad;
    }

    size_t size() const { return nodes_.size(); }

    // Single reverse sweep from a scalar root; fills every reachable gradient
    // slot exactly once, accumulating where nodes fan out.
    void backward(NodeId root) {
        Node& r = nodes_[static_cast<size_t>(root)];
        if (r.value.numel() != 1) {
            fail_invalid("backward: root must be scalar, got " +
                         Tensor<T>::shape_string(r.value.shape));
        }
        std::vector<char> needed(nodes_.size(), 0);
        needed[static_cast<size_t>(root)] = r.requires_grad ? 1 : 0;
        for (int i = root; i >= 0; --i) {
            if (!needed[static_cast<size_t>(i)]) continue;
            const Node& n = nodes_[static_cast<size_t>(i)];
            if (n.a >= 0 && nodes_[static_cast<size_t>(n.a)].requires_grad) needed[static_cast<size_t>(n.a)] = 1;
            if (n.b >= 0 && nodes_[static_cast<size_t>(n.b)].requires_grad) needed[static_cast<size_t>(n.b)] = 1;
        }
        for (size_t i = 0; i < nodes_.size(); ++i) {
            Node& n = nodes_[i];
            if (n.requires_grad) n.grad = Tensor<T>::zeros(n.value.shape);
        }
        if (!needed[static_cast<size_t>(root)]) return;
        r.grad.data[0] = 1;
        for (int i = root; i >= 0; --i) {
            if (needed[static_cast<size_t>(i)] && nodes_[static_cast<size_t>(i)].op != Op::leaf) {
                backward_node(static_cast<size_t>(i));
            }
        }
    }

private:
    struct Node {
        Op op = Op::leaf;
        int a = -1, b = -1;
        Tensor<T> value;
        Tensor<T> grad;
        bool requires_grad = false;
        size_t axis = 0, start = 0, len = 0;
        T c = 0;
        std::vector<size_t> indices;
    };

    NodeId add_leaf(Tensor<T> v, bool requires_grad) {
        Node n;
        n.op = Op::leaf;
        n.value = std::move(v);
        n.requires_grad = requires_grad;
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    NodeId add_node(Op op, NodeId a, NodeId b, Tensor<T> v) {
        Node n;
        n.op = op;
        n.a = a;
        n.b = b;
        n.value = std::move(v);
        n.requires_grad = (a >= 0 && nodes_[static_cast<size_t>(a)].requires_grad) ||
                          (b >= 0 && nodes_[static_cast<size_t>(b)].requires_grad);
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    static bool broadcastable(const Tensor<T>& a, const Tensor<T>& b) {
        if (a.rank() != b.rank() + 1 || a.rank() < 2) return false;
        for (size_t d = 0; d < b.rank(); ++d)
            if (a.shape[d + 1] != b.shape[d]) return false;
        return true;
    }

    [[noreturn]] static void shape_error(Op op, const Tensor<T>& a, const Tensor<T>& b) {
        fail_invalid(std::string(op_name(op)) + ": incompatible shapes " +
                     Tensor<T>::shape_string(a.shape) + " and " + Tensor<T>::shape_string(b.shape));
    }

    static std::vector<size_t> reduced_shape(const Tensor<T>& a, size_t axis) {
        std::vector<size_t> shape;
        for (size_t d = 0; d < a.rank(); ++d)
            if (d != axis) shape.push_back(a.shape[d]);
        if (shape.empty()) shape.push_back(1);
        return shape;
    }

    static std::tuple<size_t, size_t, size_t> reduce_extents(Op op, const Tensor<T>& a, size_t axis) {
        if (axis >= a.rank()) {
            fail_invalid(std::string(op_name(op)) + ": axis " + std::to_string(axis) +
                         " out of range for " + Tensor<T>::shape_string(a.shape));
        }
        size_t outer = 1, inner = 1;
        for (size_t d = 0; d < axis; ++d) outer *= a.shape[d];
        for (size_t d = axis + 1; d < a.rank(); ++d) inner *= a.shape[d];
        return {outer, a.shape[axis], inner};
    }

    // dA += dC * B^T / dB += A^T * dC are folded into one routine via flags.
    static void matmul_into(const Tensor<T>& A, const Tensor<T>& B, Tensor<T>& C, bool ta, bool tb) {
        const size_t m = ta ? A.shape[1] : A.shape[0];
        const size_t k = ta ? A.shape[0] : A.shape[1];
        const size_t n = tb ? B.shape[0] : B.shape[1];
        for (size_t i = 0; i < m; ++i) {
            for (size_t p = 0; p < k; ++p) {
                const T aip = ta ? A.data[p * m + i] : A.data[i * k + p];
                if (aip == T(0)) continue;
                const T* brow = tb ? nullptr : &B.data[p * n];
                T* crow = &C.data[i * n];
                if (tb) {
                    for (size_t j = 0; j < n; ++j) crow[j] += aip * B.data[j * k + p];
                } else {
                    for (size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
                }
            }
        }
    }

    void backward_node(size_t i) {
        Node& n = nodes_[i];
        const Tensor<T>& dv = n.grad;
        Node* na = n.a >= 0 ? &nodes_[static_cast<size_t>(n.a)] : nullptr;
        Node* nb = n.b >= 0 ? &nodes_[static_cast<size_t>(n.b)] : nullptr;
        const bool ga = na && na->requires_grad;
        const bool gb = nb && nb->requires_grad;
        switch (n.op) {
            case Op::leaf:
                break;
            case Op::matmul:
                if (ga) matmul_into(dv, nb->value, na->grad, false, true);
                if (gb) matmul_into(na->value, dv, nb->grad, true, false);
                break;
            case Op::add:
                if (ga)
                    for (size_t j = 0; j < dv.numel(); ++j) na->grad.data[j] += dv.data[j];
                if (gb) {
                    if (nb->value.same_shape(n.value)) {
                        for (size_t j = 0; j < dv.numel(); ++j) nb->grad.data[j] += dv.data[j];
                    } else {
                        const size_t lane = nb->value.numel();
                        for (size_t r = 0; r < n.value.shape[0]; ++r)
                            for (size_t j = 0; j < lane; ++j) nb->grad.data[j] += dv.data[r * lane + j];
                    }
                }
                break;
            case Op::sub:
                if (ga)
                    for (size_t j = 0; j < dv.numel(); ++j) na->grad.data[j] += dv.data[j];
                if (gb)
                    for (size_t j = 0; j < dv.numel(); ++j) nb->grad.data[j] -= dv.data[j];
                break;
            case Op::mul:
                if (ga)
                    for (size_t j = 0; j < dv.numel(); ++j) na->grad.data[j] += dv.data[j] * nb->value.data[j];
                if (gb)
                    for (size_t j = 0; j < dv.numel(); ++j) nb->grad.data[j] += dv.data[j] * na->value.data[j];
                break;
            case Op::scale:
                if (ga)
                    for (size_t j = 0; j < dv.numel(); ++j) na->grad.data[j] += dv.data[j] * n.c;
                break;
            case Op::shift:
                if (ga)
                    for (size_t j = 0; j < dv.numel(); ++j) na->grad.data[j] += dv.data[j];
                break;
            case Op::neg:
                if (ga)
                    for (size_t j = 0; j < dv.numel(); ++j) na->grad.data[j] -= dv.data[j];
                break;
            case Op::exp:
                if (ga)
                    for (size_t j = 0; j < dv.numel(); ++j)
                        if (na->value.data[j] < T(kExpClamp))
                            na->grad.data[j] += dv.data[j] * n.value.data[j];
                break;
            case Op::log:
                if (ga)
                    for (size_t j = 0; j < dv.numel(); ++j)
                        if (na->value.data[j] >= T(kLogFloor))
                            na->grad.data[j] += dv.data[j] / na->value.data[j];
                break;
            case Op::relu:
                if (ga)
                    for (size_t j = 0; j < dv.numel(); ++j)
                        if (na->value.data[j] > T(0)) na->grad.data[j] += dv.data[j];
                break;
            case Op::sigmoid:
                if (ga)
                    for (size_t j = 0; j < dv.numel(); ++j) {
                        const T y = n.value.data[j];
                        na->grad.data[j] += dv.data[j] * y * (T(1) - y);
                    }
                break;
            case Op::softplus:
                if (ga)
                    for (size_t j = 0; j < dv.numel(); ++j)
                        na->grad.data[j] += dv.data[j] * stable_sigmoid(na->value.data[j]);
                break;
            case Op::sum_all:
                if (ga)
                    for (size_t j = 0; j < na->grad.numel(); ++j) na->grad.data[j] += dv.data[0];
                break;
            case Op::sum_axis:
                if (ga) {
                    auto [outer, mid, inner] = reduce_extents(n.op, na->value, n.axis);
                    for (size_t o = 0; o < outer; ++o)
                        for (size_t m = 0; m < mid; ++m)
                            for (size_t j = 0; j < inner; ++j)
                                na->grad.data[(o * mid + m) * inner + j] += dv.data[o * inner + j];
                }
                break;
            case Op::lse_all:
                if (ga) {
                    const T y = n.value.data[0];
                    for (size_t j = 0; j < na->grad.numel(); ++j)
                        na->grad.data[j] += dv.data[0] * std::exp(na->value.data[j] - y);
                }
                break;
            case Op::lse_axis:
                if (ga) {
                    auto [outer, mid, inner] = reduce_extents(n.op, na->value, n.axis);
                    for (size_t o = 0; o < outer; ++o)
                        for (size_t m = 0; m < mid; ++m)
                            for (size_t j = 0; j < inner; ++j) {
                                const size_t src = (o * mid + m) * inner + j;
                                const size_t dst = o * inner + j;
                                na->grad.data[src] +=
                                    dv.data[dst] * std::exp(na->value.data[src] - n.value.data[dst]);
                            }
                }
                break;
            case Op::slice:
                if (ga) {
                    const size_t last = na->value.shape.back();
                    const size_t lanes = na->value.numel() / last;
                    for (size_t l = 0; l < lanes; ++l)
                        for (size_t j = 0; j < n.len; ++j)
                            na->grad.data[l * last + n.start + j] += dv.data[l * n.len + j];
                }
                break;
            case Op::concat: {
                const size_t ca = na->value.shape.back();
                const size_t cb = nb->value.shape.back();
                const size_t lanes = na->value.numel() / ca;
                if (ga)
                    for (size_t l = 0; l < lanes; ++l)
                        for (size_t j = 0; j < ca; ++j)
                            na->grad.data[l * ca + j] += dv.data[l * (ca + cb) + j];
                if (gb)
                    for (size_t l = 0; l < lanes; ++l)
                        for (size_t j = 0; j < cb; ++j)
                            nb->grad.data[l * cb + j] += dv.data[l * (ca + cb) + ca + j];
                break;
            }
            case Op::gather:
                if (ga) {
                    const size_t lane = na->value.numel() / na->value.shape[0];
                    for (size_t k = 0; k < n.indices.size(); ++k)
                        for (size_t j = 0; j < lane; ++j)
                            na->grad.data[n.indices[k] * lane + j] += dv.data[k * lane + j];
                }
                break;
            case Op::cumlse:
                if (ga) {
                    // x_j feeds every prefix k >= j; exp(x_j - y_k) <= 1 always
                    const size_t len = n.value.numel();
                    for (size_t j = 0; j < len; ++j) {
                        T acc = 0;
                        for (size_t k = j; k < len; ++k)
                            acc += dv.data[k] * std::exp(na->value.data[j] - n.value.data[k]);
                        na->grad.data[j] += acc;
                    }
                }
                break;
            case Op::reshape:
                if (ga)
                    for (size_t j = 0; j < dv.numel(); ++j) na->grad.data[j] += dv.data[j];
                break;
        }
    }

    std::vector<Node> nodes_;
};

using GraphD = Graph<double>;
using GraphF = Graph<float>;

}  // namespace survwalk
