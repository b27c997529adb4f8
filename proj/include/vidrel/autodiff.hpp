#pragma once

#include <cassert>
#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "vidrel/common.hpp"

namespace vidrel::nn {

// Row-major dense matrix of doubles. All model state and activations use
// this one shape; vectors are 1 x n or n x 1 as convenient.
struct Tensor2 {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Tensor2() = default;
    Tensor2(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

    static Tensor2 zeros(int r, int c) { return Tensor2(r, c); }

    static Tensor2 from_rows(int r, int c, std::vector<double> values) {
        Tensor2 t;
        t.rows = r;
        t.cols = c;
        assert(values.size() == static_cast<size_t>(r) * c);
        t.data = std::move(values);
        return t;
    }

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
    size_t size() const { return data.size(); }

    bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }
};

// One vertex of the reverse-mode tape. Nodes are created in topological
// order by construction; backward() replays them in reverse.
struct Node {
    Tensor2 value;
    Tensor2 grad;  // allocated on demand, same shape as value
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    void ensure_grad() {
        if (grad.rows != value.rows || grad.cols != value.cols)
            grad = Tensor2::zeros(value.rows, value.cols);
    }
};

using Var = std::shared_ptr<Node>;

inline Var leaf(Tensor2 value, bool requires_grad = false) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return n;
}

inline Var constant(Tensor2 value) { return leaf(std::move(value), false); }

namespace detail {

inline Var make_node(Tensor2 value, std::vector<Var> parents,
                     std::function<void(Node&)> backward) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    for (const auto& p : parents)
        if (p->requires_grad) n->requires_grad = true;
    if (n->requires_grad) {
        n->parents = std::move(parents);
        n->backward_fn = std::move(backward);
    }
    return n;
}

}  // namespace detail

inline Var matmul(const Var& a, const Var& b) {
    const Tensor2& A = a->value;
    const Tensor2& B = b->value;
    if (A.cols != B.rows) throw ValidationError("matmul: shape mismatch");
    Tensor2 out(A.rows, B.cols);
    for (int i = 0; i < A.rows; ++i)
        for (int k = 0; k < A.cols; ++k) {
            double aik = A.at(i, k);
            if (aik == 0.0) continue;
            const double* brow = &B.data[static_cast<size_t>(k) * B.cols];
            double* orow = &out.data[static_cast<size_t>(i) * out.cols];
            for (int j = 0; j < B.cols; ++j) orow[j] += aik * brow[j];
        }
    return detail::make_node(std::move(out), {a, b}, [a, b](Node& self) {
        const Tensor2& G = self.grad;
        const Tensor2& A2 = a->value;
        const Tensor2& B2 = b->value;
        if (a->requires_grad) {
            a->ensure_grad();
            // dA = G * B^T
            for (int i = 0; i < A2.rows; ++i)
                for (int k = 0; k < A2.cols; ++k) {
                    double s = 0.0;
                    for (int j = 0; j < B2.cols; ++j) s += G.at(i, j) * B2.at(k, j);
                    a->grad.at(i, k) += s;
                }
        }
        if (b->requires_grad) {
            b->ensure_grad();
            // dB = A^T * G
            for (int k = 0; k < B2.rows; ++k)
                for (int i = 0; i < A2.rows; ++i) {
                    double aik = A2.at(i, k);
                    if (aik == 0.0) continue;
                    for (int j = 0; j < B2.cols; ++j) b->grad.at(k, j) += aik * G.at(i, j);
                }
        }
    });
}

inline Var add(const Var& a, const Var& b) {
    if (!a->value.same_shape(b->value)) throw ValidationError("add: shape mismatch");
    Tensor2 out = a->value;
    for (size_t i = 0; i < out.size(); ++i) out.data[i] += b->value.data[i];
    return detail::make_node(std::move(out), {a, b}, [a, b](Node& self) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) a->grad.data[i] += self.grad.data[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) b->grad.data[i] += self.grad.data[i];
        }
    });
}

// Adds a 1 x C bias row to every row of a.
inline Var add_rowvec(const Var& a, const Var& bias) {
    if (bias->value.rows != 1 || bias->value.cols != a->value.cols)
        throw ValidationError("add_rowvec: shape mismatch");
    Tensor2 out = a->value;
    for (int i = 0; i < out.rows; ++i)
        for (int j = 0; j < out.cols; ++j) out.at(i, j) += bias->value.at(0, j);
    return detail::make_node(std::move(out), {a, bias}, [a, bias](Node& self) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) a->grad.data[i] += self.grad.data[i];
        }
        if (bias->requires_grad) {
            bias->ensure_grad();
            for (int i = 0; i < self.grad.rows; ++i)
                for (int j = 0; j < self.grad.cols; ++j) bias->grad.at(0, j) += self.grad.at(i, j);
        }
    });
}

inline Var relu(const Var& a) {
    Tensor2 out = a->value;
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    return detail::make_node(std::move(out), {a}, [a](Node& self) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i)
            if (a->value.data[i] > 0.0) a->grad.data[i] += self.grad.data[i];
    });
}

inline Var sigmoid(const Var& a) {
    Tensor2 out = a->value;
    for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
    return detail::make_node(std::move(out), {a}, [a](Node& self) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) {
            double s = self.value.data[i];
            a->grad.data[i] += self.grad.data[i] * s * (1.0 - s);
        }
    });
}

inline Var hadamard(const Var& a, const Var& b) {
    if (!a->value.same_shape(b->value)) throw ValidationError("hadamard: shape mismatch");
    Tensor2 out = a->value;
    for (size_t i = 0; i < out.size(); ++i) out.data[i] *= b->value.data[i];
    return detail::make_node(std::move(out), {a, b}, [a, b](Node& self) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i)
                a->grad.data[i] += self.grad.data[i] * b->value.data[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i)
                b->grad.data[i] += self.grad.data[i] * a->value.data[i];
        }
    });
}

inline Var scale(const Var& a, double s) {
    Tensor2 out = a->value;
    for (double& v : out.data) v *= s;
    return detail::make_node(std::move(out), {a}, [a, s](Node& self) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) a->grad.data[i] += s * self.grad.data[i];
    });
}

inline Var concat_cols(const Var& a, const Var& b) {
    if (a->value.rows != b->value.rows) throw ValidationError("concat_cols: row mismatch");
    const int ca = a->value.cols, cb = b->value.cols;
    Tensor2 out(a->value.rows, ca + cb);
    for (int i = 0; i < out.rows; ++i) {
        for (int j = 0; j < ca; ++j) out.at(i, j) = a->value.at(i, j);
        for (int j = 0; j < cb; ++j) out.at(i, ca + j) = b->value.at(i, j);
    }
    return detail::make_node(std::move(out), {a, b}, [a, b, ca, cb](Node& self) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (int i = 0; i < self.grad.rows; ++i)
                for (int j = 0; j < ca; ++j) a->grad.at(i, j) += self.grad.at(i, j);
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (int i = 0; i < self.grad.rows; ++i)
                for (int j = 0; j < cb; ++j) b->grad.at(i, j) += self.grad.at(i, ca + j);
        }
    });
}

inline Var gather_rows(const Var& a, std::vector<int> rows) {
    Tensor2 out(static_cast<int>(rows.size()), a->value.cols);
    for (size_t i = 0; i < rows.size(); ++i) {
        assert(rows[i] >= 0 && rows[i] < a->value.rows);
        for (int j = 0; j < a->value.cols; ++j)
            out.at(static_cast<int>(i), j) = a->value.at(rows[i], j);
    }
    return detail::make_node(std::move(out), {a}, [a, rows = std::move(rows)](Node& self) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (size_t i = 0; i < rows.size(); ++i)
            for (int j = 0; j < self.grad.cols; ++j)
                a->grad.at(rows[i], j) += self.grad.at(static_cast<int>(i), j);
    });
}

struct GraphEdge {
    int src = 0;
    int dst = 0;
    double weight = 0.0;
};

// Weighted mean aggregation over in-edges:
//   out[v] = sum_{(u->v)} w * x[u] / sum_{(u->v)} w,   0 when v has no in-edges.
// The normalization keeps activations scale-stable across varying degree.
inline Var aggregate_mean(const Var& a, const std::vector<GraphEdge>& edges) {
    const int n = a->value.rows;
    const int c = a->value.cols;
    auto weight_sum = std::make_shared<std::vector<double>>(static_cast<size_t>(n), 0.0);
    for (const auto& e : edges) {
        if (e.src < 0 || e.src >= n || e.dst < 0 || e.dst >= n)
            throw ValidationError("aggregate_mean: edge endpoint out of range");
        if (e.weight <= 0.0) throw ValidationError("aggregate_mean: non-positive edge weight");
        (*weight_sum)[static_cast<size_t>(e.dst)] += e.weight;
    }
    Tensor2 out(n, c);
    for (const auto& e : edges) {
        double coeff = e.weight / (*weight_sum)[static_cast<size_t>(e.dst)];
        for (int j = 0; j < c; ++j) out.at(e.dst, j) += coeff * a->value.at(e.src, j);
    }
    return detail::make_node(std::move(out), {a}, [a, edges, weight_sum](Node& self) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (const auto& e : edges) {
            double coeff = e.weight / (*weight_sum)[static_cast<size_t>(e.dst)];
            for (int j = 0; j < self.grad.cols; ++j)
                a->grad.at(e.src, j) += coeff * self.grad.at(e.dst, j);
        }
    });
}

// Binary focal loss, mean over all entries:
//   -balance * (1-p_t)^gamma * log(p_t)       for positives
//   -(1-balance) * (1-p_t)^gamma * log(p_t)   for negatives, p_t = 1 - p.
// Probabilities are clamped to [1e-7, 1-1e-7]; gamma=0, balance=0.5 gives
// exactly half the binary cross-entropy.
inline Var focal_loss(const Var& scores, const Tensor2& targets, double gamma, double balance) {
    constexpr double kEps = 1e-7;
    const Tensor2& p = scores->value;
    if (!p.same_shape(targets)) throw ValidationError("focal_loss: shape mismatch");
    const double inv_count = 1.0 / static_cast<double>(p.size());
    double total = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        double q = std::min(std::max(p.data[i], kEps), 1.0 - kEps);
        bool positive = targets.data[i] > 0.5;
        double pt = positive ? q : 1.0 - q;
        double w = positive ? balance : 1.0 - balance;
        total += -w * std::pow(1.0 - pt, gamma) * std::log(pt);
    }
    Tensor2 out(1, 1);
    out.at(0, 0) = total * inv_count;
    return detail::make_node(
        std::move(out), {scores}, [scores, targets, gamma, balance, inv_count](Node& self) {
            if (!scores->requires_grad) return;
            constexpr double kEps = 1e-7;
            scores->ensure_grad();
            const double g0 = self.grad.at(0, 0);
            const Tensor2& p = scores->value;
            for (size_t i = 0; i < p.size(); ++i) {
                double q = std::min(std::max(p.data[i], kEps), 1.0 - kEps);
                if (p.data[i] <= kEps || p.data[i] >= 1.0 - kEps) continue;  // clamped: no grad
                bool positive = targets.data[i] > 0.5;
                double w = positive ? balance : 1.0 - balance;
                double pt = positive ? q : 1.0 - q;
                double one_minus = 1.0 - pt;
                double focal_term = gamma == 0.0 ? 0.0 : gamma * std::pow(one_minus, gamma - 1.0);
                // d/d(pt) of -w (1-pt)^gamma log(pt)
                double dpt = w * (focal_term * std::log(pt) - std::pow(one_minus, gamma) / pt);
                double dq = positive ? dpt : -dpt;
                scores->grad.data[i] += g0 * inv_count * dq;
            }
        });
}

// Reverse-mode sweep from a scalar loss. Deterministic: the traversal order
// is fixed by the graph structure, not by pointer values.
inline void backward(const Var& loss) {
    if (loss->value.rows != 1 || loss->value.cols != 1)
        throw ValidationError("backward: loss must be scalar");
    // iterative post-order DFS to get a topological order
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.push_back({loss.get(), 0});
    visited.insert(loss.get());
    while (!stack.empty()) {
        auto& [node, next_child] = stack.back();
        if (next_child < node->parents.size()) {
            Node* child = node->parents[next_child++].get();
            if (child->requires_grad && !visited.count(child)) {
                visited.insert(child);
                stack.push_back({child, 0});
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    loss->ensure_grad();
    loss->grad.at(0, 0) = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward_fn) (*it)->backward_fn(**it);
}

// Compares reverse-mode gradients against central finite differences.
// `build` constructs the scalar loss from the current contents of `storage`
// (leaves must be wrapped in the same order). Returns the max over all
// coordinates of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
inline double grad_check(const std::function<std::pair<Var, std::vector<Var>>()>& build,
                         const std::vector<Tensor2*>& storage, double h = 1e-5) {
    auto [loss, leaves] = build();
    if (leaves.size() != storage.size())
        throw ValidationError("grad_check: leaf/storage count mismatch");
    backward(loss);
    std::vector<Tensor2> analytic;
    analytic.reserve(leaves.size());
    for (auto& l : leaves) {
        l->ensure_grad();
        analytic.push_back(l->grad);
    }

    double max_err = 0.0;
    for (size_t t = 0; t < storage.size(); ++t) {
        Tensor2& param = *storage[t];
        for (size_t i = 0; i < param.size(); ++i) {
            const double saved = param.data[i];
            param.data[i] = saved + h;
            double up = build().first->value.at(0, 0);
            param.data[i] = saved - h;
            double down = build().first->value.at(0, 0);
            param.data[i] = saved;
            double numeric = (up - down) / (2.0 * h);
            double a = analytic[t].data[i];
            double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
            if (err > max_err) max_err = err;
        }
    }
    return max_err;
}

}  // namespace vidrel::nn
