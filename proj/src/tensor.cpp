#include "scsm/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

namespace scsm {

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

std::int64_t Tensor::shape_size(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int e : shape) {
        if (e <= 0) throw DimensionError("non-positive extent in shape " + shape_str(shape));
        n *= e;
    }
    return n;
}

Tensor::Tensor(std::vector<int> shape, double fill)
    : shape_(std::move(shape)), data_(static_cast<std::size_t>(shape_size(shape_)), fill) {}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<std::int64_t>(data_.size()) != shape_size(shape_)) {
        throw DimensionError("data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str(shape_));
    }
}

double& Tensor::at(int i, int j) {
    return data_[static_cast<std::size_t>(i) * shape_[1] + j];
}
double Tensor::at(int i, int j) const {
    return data_[static_cast<std::size_t>(i) * shape_[1] + j];
}
double& Tensor::at(int c, int i, int j) {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + i) * shape_[2] + j];
}
double Tensor::at(int c, int i, int j) const {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + i) * shape_[2] + j];
}

std::string Tensor::shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

std::string Tensor::shape_str() const { return shape_str(shape_); }

// ---------------------------------------------------------------------------
// Graph plumbing
// ---------------------------------------------------------------------------

Tensor& Node::ensure_grad() {
    if (grad.size() != value.size()) grad = Tensor(value.shape());
    return grad;
}

Var make_param(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = true;
    return n;
}

Var make_const(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = false;
    return n;
}

namespace {

std::atomic<std::int64_t> g_mac_count{0};

Var make_op(Tensor value, const char* op, std::vector<Var> parents,
            std::function<void(Node&)> backward_fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->op = op;
    bool needs = false;
    for (const auto& p : parents) needs = needs || p->requires_grad;
    n->requires_grad = needs;
    if (needs) {
        n->parents = std::move(parents);
        n->backward_fn = std::move(backward_fn);
    }
    return n;
}

void topo_sort(const Var& root, std::vector<Node*>& order) {
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (a->value.shape() != b->value.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + a->value.shape_str() +
                             " vs " + b->value.shape_str());
    }
}

}  // namespace

void backward(const Var& root) {
    if (root->value.size() != 1) throw DimensionError("backward: root must be scalar");
    std::vector<Node*> order;
    topo_sort(root, order);
    root->ensure_grad()[0] = 1.0;
    // order is parents-first; walk it in reverse.
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && n->grad.size() == n->value.size()) n->backward_fn(*n);
    }
}

void zero_grad(const Var& root) {
    std::vector<Node*> order;
    topo_sort(root, order);
    for (Node* n : order) n->grad = Tensor();
}

std::int64_t mac_count() { return g_mac_count.load(); }
void reset_mac_count() { g_mac_count.store(0); }

// ---------------------------------------------------------------------------
// Elementwise and reduction ops
// ---------------------------------------------------------------------------

namespace {

Var unary_op(const Var& a, const char* name, std::function<double(double)> fwd,
             std::function<double(double, double)> dgrad /* (x, y) -> dy/dx */) {
    Tensor out(a->value.shape());
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = fwd(a->value[i]);
    Tensor saved = out;
    return make_op(std::move(out), name, {a}, [a, dgrad, saved](Node& n) {
        if (!a->requires_grad) return;
        Tensor& g = a->ensure_grad();
        for (std::int64_t i = 0; i < g.size(); ++i)
            g[i] += n.grad[i] * dgrad(a->value[i], saved[i]);
    });
}

}  // namespace

Var add(const Var& a, const Var& b) {
    check_same_shape(a, b, "add");
    Tensor out(a->value.shape());
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a->value[i] + b->value[i];
    return make_op(std::move(out), "add", {a, b}, [a, b](Node& n) {
        for (const Var& p : {a, b}) {
            if (!p->requires_grad) continue;
            Tensor& g = p->ensure_grad();
            for (std::int64_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
        }
    });
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a, b, "sub");
    Tensor out(a->value.shape());
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a->value[i] - b->value[i];
    return make_op(std::move(out), "sub", {a, b}, [a, b](Node& n) {
        if (a->requires_grad) {
            Tensor& g = a->ensure_grad();
            for (std::int64_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
        }
        if (b->requires_grad) {
            Tensor& g = b->ensure_grad();
            for (std::int64_t i = 0; i < g.size(); ++i) g[i] -= n.grad[i];
        }
    });
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a, b, "mul");
    Tensor out(a->value.shape());
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a->value[i] * b->value[i];
    return make_op(std::move(out), "mul", {a, b}, [a, b](Node& n) {
        if (a->requires_grad) {
            Tensor& g = a->ensure_grad();
            for (std::int64_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * b->value[i];
        }
        if (b->requires_grad) {
            Tensor& g = b->ensure_grad();
            for (std::int64_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * a->value[i];
        }
    });
}

Var scale(const Var& a, double s) {
    return unary_op(a, "scale", [s](double x) { return x * s; },
                    [s](double, double) { return s; });
}

Var add_scalar(const Var& a, double s) {
    return unary_op(a, "add_scalar", [s](double x) { return x + s; },
                    [](double, double) { return 1.0; });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var sum(const Var& a) {
    Tensor out({1});
    out[0] = std::accumulate(a->value.values().begin(), a->value.values().end(), 0.0);
    return make_op(std::move(out), "sum", {a}, [a](Node& n) {
        if (!a->requires_grad) return;
        Tensor& g = a->ensure_grad();
        for (std::int64_t i = 0; i < g.size(); ++i) g[i] += n.grad[0];
    });
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a->value.size())); }

Var log_op(const Var& a) {
    return unary_op(a, "log", [](double x) { return std::log(x); },
                    [](double x, double) { return 1.0 / x; });
}

Var exp_op(const Var& a) {
    return unary_op(a, "exp", [](double x) { return std::exp(x); },
                    [](double, double y) { return y; });
}

Var sigmoid(const Var& a) {
    return unary_op(a, "sigmoid",
                    [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                    [](double, double y) { return y * (1.0 - y); });
}

Var silu(const Var& a) {
    return unary_op(a, "silu",
                    [](double x) { return x / (1.0 + std::exp(-x)); },
                    [](double x, double) {
                        double s = 1.0 / (1.0 + std::exp(-x));
                        return s * (1.0 + x * (1.0 - s));
                    });
}

Var tanh_op(const Var& a) {
    return unary_op(a, "tanh", [](double x) { return std::tanh(x); },
                    [](double, double y) { return 1.0 - y * y; });
}

Var reshape(const Var& a, std::vector<int> shape) {
    if (Tensor::shape_size(shape) != a->value.size()) {
        throw DimensionError("reshape: size mismatch " + a->value.shape_str() + " -> " +
                             Tensor::shape_str(shape));
    }
    Tensor out(std::move(shape), a->value.values());
    return make_op(std::move(out), "reshape", {a}, [a](Node& n) {
        if (!a->requires_grad) return;
        Tensor& g = a->ensure_grad();
        for (std::int64_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    });
}

// ---------------------------------------------------------------------------
// softmax — max-subtracted, along an arbitrary axis
// ---------------------------------------------------------------------------

Var softmax(const Var& a, int axis) {
    const auto& shape = a->value.shape();
    if (axis < 0 || axis >= a->value.rank())
        throw DimensionError("softmax: axis " + std::to_string(axis) + " out of range for " +
                             a->value.shape_str());
    std::int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= shape[i];
    for (int i = axis + 1; i < a->value.rank(); ++i) inner *= shape[i];
    const std::int64_t n = shape[axis];

    Tensor out(shape);
    for (std::int64_t o = 0; o < outer; ++o) {
        for (std::int64_t in = 0; in < inner; ++in) {
            const std::int64_t base = o * n * inner + in;
            double mx = a->value[base];
            for (std::int64_t k = 1; k < n; ++k)
                mx = std::max(mx, a->value[base + k * inner]);
            double denom = 0.0;
            for (std::int64_t k = 0; k < n; ++k) {
                double e = std::exp(a->value[base + k * inner] - mx);
                out[base + k * inner] = e;
                denom += e;
            }
            for (std::int64_t k = 0; k < n; ++k) out[base + k * inner] /= denom;
        }
    }
    Tensor saved = out;
    return make_op(std::move(out), "softmax", {a},
                   [a, saved, outer, inner, n](Node& nd) {
                       if (!a->requires_grad) return;
                       Tensor& g = a->ensure_grad();
                       for (std::int64_t o = 0; o < outer; ++o) {
                           for (std::int64_t in = 0; in < inner; ++in) {
                               const std::int64_t base = o * n * inner + in;
                               double dot = 0.0;
                               for (std::int64_t k = 0; k < n; ++k)
                                   dot += nd.grad[base + k * inner] * saved[base + k * inner];
                               for (std::int64_t k = 0; k < n; ++k) {
                                   const std::int64_t idx = base + k * inner;
                                   g[idx] += saved[idx] * (nd.grad[idx] - dot);
                               }
                           }
                       }
                   });
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
    if (a->value.rank() != 2 || b->value.rank() != 2)
        throw DimensionError("matmul: expected rank-2 operands, got " + a->value.shape_str() +
                             " and " + b->value.shape_str());
    const int p = a->value.shape()[0], q = a->value.shape()[1];
    const int q2 = b->value.shape()[0], r = b->value.shape()[1];
    if (q != q2)
        throw DimensionError("matmul: inner extents differ, " + a->value.shape_str() + " vs " +
                             b->value.shape_str());
    g_mac_count += static_cast<std::int64_t>(p) * q * r;

    Tensor out({p, r});
    for (int i = 0; i < p; ++i)
        for (int k = 0; k < q; ++k) {
            const double av = a->value.at(i, k);
            for (int j = 0; j < r; ++j) out.at(i, j) += av * b->value.at(k, j);
        }
    return make_op(std::move(out), "matmul", {a, b}, [a, b, p, q, r](Node& n) {
        if (a->requires_grad) {
            Tensor& g = a->ensure_grad();
            for (int i = 0; i < p; ++i)
                for (int j = 0; j < r; ++j) {
                    const double gv = n.grad.at(i, j);
                    for (int k = 0; k < q; ++k) g.at(i, k) += gv * b->value.at(k, j);
                }
        }
        if (b->requires_grad) {
            Tensor& g = b->ensure_grad();
            for (int i = 0; i < p; ++i)
                for (int k = 0; k < q; ++k) {
                    const double av = a->value.at(i, k);
                    for (int j = 0; j < r; ++j) g.at(k, j) += av * n.grad.at(i, j);
                }
        }
    });
}

Var transpose(const Var& a) {
    if (a->value.rank() != 2) throw DimensionError("transpose: expected rank-2");
    const int m = a->value.shape()[0], n = a->value.shape()[1];
    Tensor out({n, m});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.at(j, i) = a->value.at(i, j);
    return make_op(std::move(out), "transpose", {a}, [a, m, n](Node& nd) {
        if (!a->requires_grad) return;
        Tensor& g = a->ensure_grad();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) g.at(i, j) += nd.grad.at(j, i);
    });
}

Var add_rowvec(const Var& a, const Var& v) {
    if (a->value.rank() != 2) throw DimensionError("add_rowvec: expected rank-2 lhs");
    const int m = a->value.shape()[0], n = a->value.shape()[1];
    if (v->value.size() != n)
        throw DimensionError("add_rowvec: vector length " + std::to_string(v->value.size()) +
                             " vs columns " + std::to_string(n));
    Tensor out({m, n});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.at(i, j) = a->value.at(i, j) + v->value[j];
    return make_op(std::move(out), "add_rowvec", {a, v}, [a, v, m, n](Node& nd) {
        if (a->requires_grad) {
            Tensor& g = a->ensure_grad();
            for (std::int64_t i = 0; i < g.size(); ++i) g[i] += nd.grad[i];
        }
        if (v->requires_grad) {
            Tensor& g = v->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) g[j] += nd.grad.at(i, j);
        }
    });
}

Var mul_rowwise(const Var& a, const Var& g) {
    const int m = a->value.shape()[0], n = a->value.shape()[1];
    if (g->value.size() != m)
        throw DimensionError("mul_rowwise: gate length " + std::to_string(g->value.size()) +
                             " vs rows " + std::to_string(m));
    Tensor out({m, n});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.at(i, j) = a->value.at(i, j) * g->value[i];
    return make_op(std::move(out), "mul_rowwise", {a, g}, [a, g, m, n](Node& nd) {
        if (a->requires_grad) {
            Tensor& ga = a->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) ga.at(i, j) += nd.grad.at(i, j) * g->value[i];
        }
        if (g->requires_grad) {
            Tensor& gg = g->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) gg[i] += nd.grad.at(i, j) * a->value.at(i, j);
        }
    });
}

Var mul_colwise(const Var& a, const Var& g) {
    const int m = a->value.shape()[0], n = a->value.shape()[1];
    if (g->value.size() != n)
        throw DimensionError("mul_colwise: gate length " + std::to_string(g->value.size()) +
                             " vs columns " + std::to_string(n));
    Tensor out({m, n});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.at(i, j) = a->value.at(i, j) * g->value[j];
    return make_op(std::move(out), "mul_colwise", {a, g}, [a, g, m, n](Node& nd) {
        if (a->requires_grad) {
            Tensor& ga = a->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) ga.at(i, j) += nd.grad.at(i, j) * g->value[j];
        }
        if (g->requires_grad) {
            Tensor& gg = g->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) gg[j] += nd.grad.at(i, j) * a->value.at(i, j);
        }
    });
}

// ---------------------------------------------------------------------------
// conv2d
// ---------------------------------------------------------------------------

Var conv2d(const Var& x, const Var& kernel, const Var& bias, int stride, int padding) {
    if (x->value.rank() != 3 || kernel->value.rank() != 4)
        throw DimensionError("conv2d: expected {C,H,W} input and {O,C,kh,kw} kernel");
    const int C = x->value.shape()[0], H = x->value.shape()[1], W = x->value.shape()[2];
    const int O = kernel->value.shape()[0], Ck = kernel->value.shape()[1];
    const int kh = kernel->value.shape()[2], kw = kernel->value.shape()[3];
    if (C != Ck)
        throw DimensionError("conv2d: input channels " + std::to_string(C) +
                             " vs kernel channels " + std::to_string(Ck));
    if (bias->value.size() != O) throw DimensionError("conv2d: bias length vs out channels");
    if (kh > H + 2 * padding || kw > W + 2 * padding)
        throw DimensionError("conv2d: kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                             " larger than padded input");
    const int OH = (H + 2 * padding - kh) / stride + 1;
    const int OW = (W + 2 * padding - kw) / stride + 1;
    g_mac_count += static_cast<std::int64_t>(O) * C * kh * kw * OH * OW;

    auto kidx = [C, kh, kw](int o, int c, int i, int j) {
        return ((static_cast<std::int64_t>(o) * C + c) * kh + i) * kw + j;
    };

    Tensor out({O, OH, OW});
    for (int o = 0; o < O; ++o)
        for (int oi = 0; oi < OH; ++oi)
            for (int oj = 0; oj < OW; ++oj) {
                double acc = bias->value[o];
                for (int c = 0; c < C; ++c)
                    for (int i = 0; i < kh; ++i) {
                        const int ri = oi * stride - padding + i;
                        if (ri < 0 || ri >= H) continue;
                        for (int j = 0; j < kw; ++j) {
                            const int rj = oj * stride - padding + j;
                            if (rj < 0 || rj >= W) continue;
                            acc += x->value.at(c, ri, rj) * kernel->value[kidx(o, c, i, j)];
                        }
                    }
                out.at(o, oi, oj) = acc;
            }

    return make_op(std::move(out), "conv2d", {x, kernel, bias},
                   [=](Node& n) {
                       for (int o = 0; o < O; ++o)
                           for (int oi = 0; oi < OH; ++oi)
                               for (int oj = 0; oj < OW; ++oj) {
                                   const double gv = n.grad.at(o, oi, oj);
                                   if (bias->requires_grad) bias->ensure_grad()[o] += gv;
                                   for (int c = 0; c < C; ++c)
                                       for (int i = 0; i < kh; ++i) {
                                           const int ri = oi * stride - padding + i;
                                           if (ri < 0 || ri >= H) continue;
                                           for (int j = 0; j < kw; ++j) {
                                               const int rj = oj * stride - padding + j;
                                               if (rj < 0 || rj >= W) continue;
                                               if (kernel->requires_grad)
                                                   kernel->ensure_grad()[kidx(o, c, i, j)] +=
                                                       gv * x->value.at(c, ri, rj);
                                               if (x->requires_grad)
                                                   x->ensure_grad().at(c, ri, rj) +=
                                                       gv * kernel->value[kidx(o, c, i, j)];
                                           }
                                       }
                               }
                   });
}

// ---------------------------------------------------------------------------
// bilinear_upsample, adaptive_avg_pool
// ---------------------------------------------------------------------------

Var bilinear_upsample(const Var& x, int factor) {
    if (x->value.rank() != 3) throw DimensionError("bilinear_upsample: expected {C,H,W}");
    if (factor < 1) throw ConfigError("bilinear_upsample: factor must be >= 1");
    if (factor == 1) return x;
    const int C = x->value.shape()[0], H = x->value.shape()[1], W = x->value.shape()[2];
    const int OH = H * factor, OW = W * factor;

    // Precompute the 1D source taps (align_corners = false).
    struct Tap { int lo, hi; double wlo, whi; };
    auto taps = [](int out, int in, int f) {
        std::vector<Tap> t(out);
        for (int i = 0; i < out; ++i) {
            double src = (i + 0.5) / f - 0.5;
            src = std::clamp(src, 0.0, static_cast<double>(in - 1));
            int lo = static_cast<int>(std::floor(src));
            int hi = std::min(lo + 1, in - 1);
            double frac = src - lo;
            t[i] = {lo, hi, 1.0 - frac, frac};
        }
        return t;
    };
    const auto ty = taps(OH, H, factor), tx = taps(OW, W, factor);

    Tensor out({C, OH, OW});
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < OH; ++i)
            for (int j = 0; j < OW; ++j)
                out.at(c, i, j) =
                    ty[i].wlo * (tx[j].wlo * x->value.at(c, ty[i].lo, tx[j].lo) +
                                 tx[j].whi * x->value.at(c, ty[i].lo, tx[j].hi)) +
                    ty[i].whi * (tx[j].wlo * x->value.at(c, ty[i].hi, tx[j].lo) +
                                 tx[j].whi * x->value.at(c, ty[i].hi, tx[j].hi));

    return make_op(std::move(out), "bilinear_upsample", {x},
                   [x, ty, tx, C, OH, OW](Node& n) {
                       if (!x->requires_grad) return;
                       Tensor& g = x->ensure_grad();
                       for (int c = 0; c < C; ++c)
                           for (int i = 0; i < OH; ++i)
                               for (int j = 0; j < OW; ++j) {
                                   const double gv = n.grad.at(c, i, j);
                                   g.at(c, ty[i].lo, tx[j].lo) += gv * ty[i].wlo * tx[j].wlo;
                                   g.at(c, ty[i].lo, tx[j].hi) += gv * ty[i].wlo * tx[j].whi;
                                   g.at(c, ty[i].hi, tx[j].lo) += gv * ty[i].whi * tx[j].wlo;
                                   g.at(c, ty[i].hi, tx[j].hi) += gv * ty[i].whi * tx[j].whi;
                               }
                   });
}

Var adaptive_avg_pool(const Var& x, int out_h, int out_w) {
    if (x->value.rank() != 3) throw DimensionError("adaptive_avg_pool: expected {C,H,W}");
    const int C = x->value.shape()[0], H = x->value.shape()[1], W = x->value.shape()[2];
    auto start = [](int i, int in, int out) { return (i * in) / out; };
    auto end = [](int i, int in, int out) { return ((i + 1) * in + out - 1) / out; };

    Tensor out({C, out_h, out_w});
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < out_h; ++i)
            for (int j = 0; j < out_w; ++j) {
                const int r0 = start(i, H, out_h), r1 = end(i, H, out_h);
                const int c0 = start(j, W, out_w), c1 = end(j, W, out_w);
                double acc = 0.0;
                for (int r = r0; r < r1; ++r)
                    for (int cc = c0; cc < c1; ++cc) acc += x->value.at(c, r, cc);
                out.at(c, i, j) = acc / ((r1 - r0) * (c1 - c0));
            }

    return make_op(std::move(out), "adaptive_avg_pool", {x},
                   [x, C, H, W, out_h, out_w, start, end](Node& n) {
                       if (!x->requires_grad) return;
                       Tensor& g = x->ensure_grad();
                       for (int c = 0; c < C; ++c)
                           for (int i = 0; i < out_h; ++i)
                               for (int j = 0; j < out_w; ++j) {
                                   const int r0 = start(i, H, out_h), r1 = end(i, H, out_h);
                                   const int c0 = start(j, W, out_w), c1 = end(j, W, out_w);
                                   const double gv =
                                       n.grad.at(c, i, j) / ((r1 - r0) * (c1 - c0));
                                   for (int r = r0; r < r1; ++r)
                                       for (int cc = c0; cc < c1; ++cc) g.at(c, r, cc) += gv;
                               }
                   });
}

// ---------------------------------------------------------------------------
// concat_channels, slice_spatial
// ---------------------------------------------------------------------------

Var concat_channels(const Var& a, const Var& b) {
    if (a->value.rank() != 3 || b->value.rank() != 3)
        throw DimensionError("concat_channels: expected {C,H,W} maps");
    const int Ca = a->value.shape()[0], H = a->value.shape()[1], W = a->value.shape()[2];
    const int Cb = b->value.shape()[0];
    if (b->value.shape()[1] != H || b->value.shape()[2] != W)
        throw DimensionError("concat_channels: spatial mismatch " + a->value.shape_str() +
                             " vs " + b->value.shape_str());
    Tensor out({Ca + Cb, H, W});
    std::copy(a->value.values().begin(), a->value.values().end(), out.values().begin());
    std::copy(b->value.values().begin(), b->value.values().end(),
              out.values().begin() + a->value.size());
    return make_op(std::move(out), "concat_channels", {a, b}, [a, b](Node& n) {
        const std::int64_t na = a->value.size();
        if (a->requires_grad) {
            Tensor& g = a->ensure_grad();
            for (std::int64_t i = 0; i < na; ++i) g[i] += n.grad[i];
        }
        if (b->requires_grad) {
            Tensor& g = b->ensure_grad();
            for (std::int64_t i = 0; i < g.size(); ++i) g[i] += n.grad[na + i];
        }
    });
}

Var slice_spatial(const Var& x, int r0, int c0, int h, int w) {
    if (x->value.rank() != 3) throw DimensionError("slice_spatial: expected {C,H,W}");
    const int C = x->value.shape()[0], H = x->value.shape()[1], W = x->value.shape()[2];
    if (r0 < 0 || c0 < 0 || r0 + h > H || c0 + w > W)
        throw DimensionError("slice_spatial: window out of range for " + x->value.shape_str());
    Tensor out({C, h, w});
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) out.at(c, i, j) = x->value.at(c, r0 + i, c0 + j);
    return make_op(std::move(out), "slice_spatial", {x}, [x, r0, c0, h, w, C](Node& n) {
        if (!x->requires_grad) return;
        Tensor& g = x->ensure_grad();
        for (int c = 0; c < C; ++c)
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j) g.at(c, r0 + i, c0 + j) += n.grad.at(c, i, j);
    });
}

// ---------------------------------------------------------------------------
// grad_check
// ---------------------------------------------------------------------------

namespace {

double grad_check_impl(const GradFn& f, std::vector<Tensor>& inputs, double eps,
                       const std::function<std::vector<std::int64_t>(std::int64_t)>& pick) {
    std::vector<Var> leaves;
    leaves.reserve(inputs.size());
    for (auto& t : inputs) leaves.push_back(make_param(t));

    Var root = f(leaves);
    if (root->value.size() != 1) throw DimensionError("grad_check: f must return a scalar");
    if (!std::isfinite(root->value[0])) throw NumericError("grad_check: non-finite value");
    backward(root);

    auto eval = [&](const std::vector<Var>& ls) {
        Var r = f(ls);
        double v = r->value[0];
        if (!std::isfinite(v)) throw NumericError("grad_check: non-finite value");
        return v;
    };

    double worst = 0.0;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        const Tensor analytic = leaves[li]->grad.size() == leaves[li]->value.size()
                                    ? leaves[li]->grad
                                    : Tensor(leaves[li]->value.shape());
        for (std::int64_t i : pick(leaves[li]->value.size())) {
            const double orig = leaves[li]->value[i];
            leaves[li]->value[i] = orig + eps;
            const double fp = eval(leaves);
            leaves[li]->value[i] = orig - eps;
            const double fm = eval(leaves);
            leaves[li]->value[i] = orig;
            const double numeric = (fp - fm) / (2.0 * eps);
            const double a = analytic[i];
            const double err =
                std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace

double grad_check(const GradFn& f, std::vector<Tensor> inputs, double eps) {
    return grad_check_impl(f, inputs, eps, [](std::int64_t n) {
        std::vector<std::int64_t> all(static_cast<std::size_t>(n));
        std::iota(all.begin(), all.end(), 0);
        return all;
    });
}

double grad_check_sampled(const GradFn& f, std::vector<Tensor> inputs, double eps,
                          int per_leaf, std::uint64_t seed) {
    auto rng = std::make_shared<std::mt19937_64>(seed);
    return grad_check_impl(f, inputs, eps, [rng, per_leaf](std::int64_t n) {
        std::vector<std::int64_t> all(static_cast<std::size_t>(n));
        std::iota(all.begin(), all.end(), 0);
        if (n <= per_leaf) return all;
        std::shuffle(all.begin(), all.end(), *rng);
        all.resize(static_cast<std::size_t>(per_leaf));
        return all;
    });
}

}  // namespace scsm
