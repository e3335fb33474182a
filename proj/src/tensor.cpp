#include "drag/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <unordered_set>

#include "drag/error.hpp"

namespace drag {

std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

namespace {

using Node = Tensor::Node;
using NodePtr = std::shared_ptr<Node>;

void check(bool ok, const char* op, const std::string& detail) {
    if (!ok) fail("ShapeMismatch", std::string(op) + ": " + detail);
}

NodePtr make_node(Shape shape, const char* op) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->val.resize(static_cast<std::size_t>(shape_numel(n->shape)));
    n->op = op;
    return n;
}

thread_local bool g_grad_enabled = true;

// Attach parents and backward only when a parent actually needs gradients;
// otherwise the result is a plain constant and the graph stays pruned.
Tensor finish(NodePtr n, std::vector<NodePtr> parents, std::function<void(Node&)> bwd) {
    bool rg = false;
    if (g_grad_enabled)
        for (const auto& p : parents) rg = rg || p->requires_grad;
    if (rg) {
        n->requires_grad = true;
        n->parents = std::move(parents);
        n->backward_fn = std::move(bwd);
    }
    return Tensor(std::move(n));
}

// (outer, n, inner) decomposition for single-axis operations
struct AxisDims {
    std::int64_t outer = 1, n = 1, inner = 1;
};

AxisDims axis_dims(const Shape& s, int axis, const char* op) {
    check(axis >= 0 && axis < static_cast<int>(s.size()), op,
          "axis " + std::to_string(axis) + " out of range for " + shape_str(s));
    AxisDims d;
    for (int i = 0; i < axis; ++i) d.outer *= s[static_cast<std::size_t>(i)];
    d.n = s[static_cast<std::size_t>(axis)];
    for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < s.size(); ++i) d.inner *= s[i];
    return d;
}

Shape reduced_shape(const Shape& s, int axis, bool keepdim) {
    Shape out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (static_cast<int>(i) == axis) {
            if (keepdim) out.push_back(1);
        } else {
            out.push_back(s[i]);
        }
    }
    if (out.empty()) out.push_back(1);
    return out;
}

Tensor elementwise_binary(const Tensor& a, const Tensor& b, const char* op,
                          double (*fwd)(double, double),
                          void (*bwd)(double ga, double av, double bv, double& da, double& db)) {
    check(a.shape() == b.shape(), op, shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    auto n = make_node(a.shape(), op);
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) n->val[i] = fwd(av[i], bv[i]);
    return finish(std::move(n), {a.node(), b.node()}, [bwd](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.requires_grad) pa.ensure_grad();
        if (pb.requires_grad) pb.ensure_grad();
        for (std::size_t i = 0; i < self.val.size(); ++i) {
            double da = 0, db = 0;
            bwd(self.grad[i], pa.val[i], pb.val[i], da, db);
            if (pa.requires_grad) pa.grad[i] += da;
            if (pb.requires_grad) pb.grad[i] += db;
        }
    });
}

Tensor elementwise_unary(const Tensor& a, const char* op, double (*fwd)(double),
                         double (*dfn)(double x, double y)) {
    auto n = make_node(a.shape(), op);
    const auto av = a.values();
    for (std::size_t i = 0; i < av.size(); ++i) n->val[i] = fwd(av[i]);
    return finish(std::move(n), {a.node()}, [dfn](Node& self) {
        Node& p = *self.parents[0];
        p.ensure_grad();
        for (std::size_t i = 0; i < self.val.size(); ++i)
            p.grad[i] += self.grad[i] * dfn(p.val[i], self.val[i]);
    });
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto n = make_node(std::move(shape), "leaf");
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    auto n = make_node(std::move(shape), "leaf");
    std::fill(n->val.begin(), n->val.end(), value);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    if (shape_numel(shape) != static_cast<std::int64_t>(values.size()))
        fail("ShapeMismatch", "from: " + shape_str(shape) + " holds " +
                                  std::to_string(shape_numel(shape)) + " values, got " +
                                  std::to_string(values.size()));
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->val = std::move(values);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from({1}, {value}, requires_grad);
}

std::span<const double> Tensor::grad() const {
    node_->ensure_grad();
    return node_->grad;
}

double Tensor::scalar_value() const {
    if (numel() != 1) fail("NotScalar", "tensor has shape " + shape_str(shape()));
    return node_->val[0];
}

bool Tensor::all_finite() const {
    for (double v : node_->val)
        if (!std::isfinite(v)) return false;
    return true;
}

// ---- arithmetic -------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    return elementwise_binary(
        a, b, "add", [](double x, double y) { return x + y; },
        [](double g, double, double, double& da, double& db) {
            da = g;
            db = g;
        });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return elementwise_binary(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](double g, double, double, double& da, double& db) {
            da = g;
            db = -g;
        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return elementwise_binary(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](double g, double av, double bv, double& da, double& db) {
            da = g * bv;
            db = g * av;
        });
}

Tensor divide(const Tensor& a, const Tensor& b) {
    return elementwise_binary(
        a, b, "div", [](double x, double y) { return x / y; },
        [](double g, double av, double bv, double& da, double& db) {
            da = g / bv;
            db = -g * av / (bv * bv);
        });
}

Tensor scalar_mul(const Tensor& a, double s) {
    auto n = make_node(a.shape(), "scalar_mul");
    const auto av = a.values();
    for (std::size_t i = 0; i < av.size(); ++i) n->val[i] = av[i] * s;
    return finish(std::move(n), {a.node()}, [s](Node& self) {
        Node& p = *self.parents[0];
        p.ensure_grad();
        for (std::size_t i = 0; i < self.val.size(); ++i) p.grad[i] += self.grad[i] * s;
    });
}

Tensor scalar_add(const Tensor& a, double s) {
    auto n = make_node(a.shape(), "scalar_add");
    const auto av = a.values();
    for (std::size_t i = 0; i < av.size(); ++i) n->val[i] = av[i] + s;
    return finish(std::move(n), {a.node()}, [](Node& self) {
        Node& p = *self.parents[0];
        p.ensure_grad();
        for (std::size_t i = 0; i < self.val.size(); ++i) p.grad[i] += self.grad[i];
    });
}

// ---- linear algebra ----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    check(a.rank() == 2 && b.rank() == 2, "matmul",
          shape_str(a.shape()) + " x " + shape_str(b.shape()) + " (want rank 2)");
    const std::int64_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n2 = b.dim(1);
    check(k == k2, "matmul", shape_str(a.shape()) + " x " + shape_str(b.shape()));

    auto n = make_node({m, n2}, "matmul");
    const double* A = a.values().data();
    const double* B = b.values().data();
    double* C = n->val.data();
    for (std::int64_t i = 0; i < m; ++i) {
        double* crow = C + i * n2;
        for (std::int64_t kk = 0; kk < k; ++kk) {
            const double av = A[i * k + kk];
            const double* brow = B + kk * n2;
            for (std::int64_t j = 0; j < n2; ++j) crow[j] += av * brow[j];
        }
    }
    return finish(std::move(n), {a.node(), b.node()}, [m, k, n2](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        const double* G = self.grad.data();
        if (pa.requires_grad) {
            pa.ensure_grad();  // dA = G * B^T
            const double* B = pb.val.data();
            for (std::int64_t i = 0; i < m; ++i)
                for (std::int64_t kk = 0; kk < k; ++kk) {
                    double acc = 0;
                    const double* grow = G + i * n2;
                    const double* brow = B + kk * n2;
                    for (std::int64_t j = 0; j < n2; ++j) acc += grow[j] * brow[j];
                    pa.grad[static_cast<std::size_t>(i * k + kk)] += acc;
                }
        }
        if (pb.requires_grad) {
            pb.ensure_grad();  // dB = A^T * G
            const double* A = pa.val.data();
            for (std::int64_t kk = 0; kk < k; ++kk)
                for (std::int64_t i = 0; i < m; ++i) {
                    const double av = A[i * k + kk];
                    const double* grow = G + i * n2;
                    double* brow = pb.grad.data() + kk * n2;
                    for (std::int64_t j = 0; j < n2; ++j) brow[j] += av * grow[j];
                }
        }
    });
}

Tensor batched_matmul(const Tensor& a, const Tensor& b) {
    check(a.rank() == 3 && b.rank() == 3, "batched_matmul",
          shape_str(a.shape()) + " x " + shape_str(b.shape()) + " (want rank 3)");
    const std::int64_t bt = a.dim(0), m = a.dim(1), k = a.dim(2);
    check(b.dim(0) == bt && b.dim(1) == k, "batched_matmul",
          shape_str(a.shape()) + " x " + shape_str(b.shape()));
    const std::int64_t n2 = b.dim(2);

    auto n = make_node({bt, m, n2}, "batched_matmul");
    for (std::int64_t t = 0; t < bt; ++t) {
        const double* A = a.values().data() + t * m * k;
        const double* B = b.values().data() + t * k * n2;
        double* C = n->val.data() + t * m * n2;
        for (std::int64_t i = 0; i < m; ++i)
            for (std::int64_t kk = 0; kk < k; ++kk) {
                const double av = A[i * k + kk];
                for (std::int64_t j = 0; j < n2; ++j) C[i * n2 + j] += av * B[kk * n2 + j];
            }
    }
    return finish(std::move(n), {a.node(), b.node()}, [bt, m, k, n2](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.requires_grad) pa.ensure_grad();
        if (pb.requires_grad) pb.ensure_grad();
        for (std::int64_t t = 0; t < bt; ++t) {
            const double* G = self.grad.data() + t * m * n2;
            const double* A = pa.val.data() + t * m * k;
            const double* B = pb.val.data() + t * k * n2;
            if (pa.requires_grad) {
                double* dA = pa.grad.data() + t * m * k;
                for (std::int64_t i = 0; i < m; ++i)
                    for (std::int64_t kk = 0; kk < k; ++kk) {
                        double acc = 0;
                        for (std::int64_t j = 0; j < n2; ++j)
                            acc += G[i * n2 + j] * B[kk * n2 + j];
                        dA[i * k + kk] += acc;
                    }
            }
            if (pb.requires_grad) {
                double* dB = pb.grad.data() + t * k * n2;
                for (std::int64_t kk = 0; kk < k; ++kk)
                    for (std::int64_t i = 0; i < m; ++i) {
                        const double av = A[i * k + kk];
                        for (std::int64_t j = 0; j < n2; ++j)
                            dB[kk * n2 + j] += av * G[i * n2 + j];
                    }
            }
        }
    });
}

Tensor transpose(const Tensor& a) {
    check(a.rank() == 2, "transpose", shape_str(a.shape()) + " (want rank 2)");
    const std::int64_t m = a.dim(0), k = a.dim(1);
    auto n = make_node({k, m}, "transpose");
    const auto av = a.values();
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < k; ++j) n->val[static_cast<std::size_t>(j * m + i)] = av[static_cast<std::size_t>(i * k + j)];
    return finish(std::move(n), {a.node()}, [m, k](Node& self) {
        Node& p = *self.parents[0];
        p.ensure_grad();
        for (std::int64_t i = 0; i < m; ++i)
            for (std::int64_t j = 0; j < k; ++j)
                p.grad[static_cast<std::size_t>(i * k + j)] += self.grad[static_cast<std::size_t>(j * m + i)];
    });
}

Tensor reshape(const Tensor& a, Shape shape) {
    check(shape_numel(shape) == a.numel(), "reshape",
          shape_str(a.shape()) + " -> " + shape_str(shape));
    auto n = make_node(std::move(shape), "reshape");
    const auto av = a.values();
    std::copy(av.begin(), av.end(), n->val.begin());
    return finish(std::move(n), {a.node()}, [](Node& self) {
        Node& p = *self.parents[0];
        p.ensure_grad();
        for (std::size_t i = 0; i < self.val.size(); ++i) p.grad[i] += self.grad[i];
    });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    check(!parts.empty(), "concat", "no inputs");
    const Shape& s0 = parts[0].shape();
    Shape out_shape = s0;
    std::int64_t total_axis = 0;
    for (const Tensor& p : parts) {
        check(p.rank() == static_cast<int>(s0.size()), "concat", "rank mismatch");
        for (std::size_t i = 0; i < s0.size(); ++i)
            if (static_cast<int>(i) != axis)
                check(p.shape()[i] == s0[i], "concat",
                      shape_str(p.shape()) + " vs " + shape_str(s0));
        total_axis += p.dim(axis);
    }
    out_shape[static_cast<std::size_t>(axis)] = total_axis;

    auto dims0 = axis_dims(out_shape, axis, "concat");
    auto n = make_node(out_shape, "concat");
    std::vector<std::int64_t> offsets;  // start of each part along the axis
    std::int64_t off = 0;
    std::vector<NodePtr> parents;
    for (const Tensor& p : parts) {
        offsets.push_back(off);
        const auto pv = p.values();
        const std::int64_t pn = p.dim(axis);
        for (std::int64_t o = 0; o < dims0.outer; ++o)
            for (std::int64_t i = 0; i < pn; ++i)
                std::copy(pv.begin() + (o * pn + i) * dims0.inner,
                          pv.begin() + (o * pn + i + 1) * dims0.inner,
                          n->val.begin() + ((o * total_axis + off + i) * dims0.inner));
        off += pn;
        parents.push_back(p.node());
    }
    std::vector<std::int64_t> part_lens;
    for (const Tensor& p : parts) part_lens.push_back(p.dim(axis));
    const std::int64_t outer = dims0.outer, inner = dims0.inner;
    return finish(std::move(n), std::move(parents),
                  [offsets, part_lens, outer, inner, total_axis](Node& self) {
                      for (std::size_t pi = 0; pi < self.parents.size(); ++pi) {
                          Node& p = *self.parents[pi];
                          if (!p.requires_grad) continue;
                          p.ensure_grad();
                          const std::int64_t axis_len = part_lens[pi];
                          const std::int64_t start = offsets[pi];
                          for (std::int64_t o = 0; o < outer; ++o)
                              for (std::int64_t i = 0; i < axis_len; ++i) {
                                  const double* g =
                                      self.grad.data() + (o * total_axis + start + i) * inner;
                                  double* pg = p.grad.data() + (o * axis_len + i) * inner;
                                  for (std::int64_t j = 0; j < inner; ++j) pg[j] += g[j];
                              }
                      }
                  });
}

Tensor gather(const Tensor& a, std::vector<std::int64_t> indices, int axis) {
    auto dims = axis_dims(a.shape(), axis, "gather");
    for (std::int64_t idx : indices)
        check(idx >= 0 && idx < dims.n, "gather",
              "index " + std::to_string(idx) + " out of range [0," + std::to_string(dims.n) + ")");
    Shape out_shape = a.shape();
    out_shape[static_cast<std::size_t>(axis)] = static_cast<std::int64_t>(indices.size());

    auto n = make_node(out_shape, "gather");
    const auto av = a.values();
    const std::int64_t m = static_cast<std::int64_t>(indices.size());
    for (std::int64_t o = 0; o < dims.outer; ++o)
        for (std::int64_t i = 0; i < m; ++i)
            std::copy(av.begin() + (o * dims.n + indices[static_cast<std::size_t>(i)]) * dims.inner,
                      av.begin() + (o * dims.n + indices[static_cast<std::size_t>(i)] + 1) * dims.inner,
                      n->val.begin() + (o * m + i) * dims.inner);
    return finish(std::move(n), {a.node()}, [indices = std::move(indices), dims, m](Node& self) {
        Node& p = *self.parents[0];
        p.ensure_grad();
        for (std::int64_t o = 0; o < dims.outer; ++o)
            for (std::int64_t i = 0; i < m; ++i) {
                const double* g = self.grad.data() + (o * m + i) * dims.inner;
                double* pg =
                    p.grad.data() + (o * dims.n + indices[static_cast<std::size_t>(i)]) * dims.inner;
                for (std::int64_t j = 0; j < dims.inner; ++j) pg[j] += g[j];
            }
    });
}

Tensor broadcast_to(const Tensor& a, const Shape& target) {
    check(a.rank() == static_cast<int>(target.size()), "broadcast",
          shape_str(a.shape()) + " -> " + shape_str(target) + " (rank must match)");
    for (std::size_t i = 0; i < target.size(); ++i)
        check(a.shape()[i] == target[i] || a.shape()[i] == 1, "broadcast",
              shape_str(a.shape()) + " -> " + shape_str(target));

    const int r = a.rank();
    // strides of the source, with 0 stride on broadcast dims
    std::vector<std::int64_t> src_stride(static_cast<std::size_t>(r), 0);
    std::int64_t acc = 1;
    for (int i = r - 1; i >= 0; --i) {
        if (a.shape()[static_cast<std::size_t>(i)] != 1) src_stride[static_cast<std::size_t>(i)] = acc;
        acc *= a.shape()[static_cast<std::size_t>(i)];
    }
    auto n = make_node(target, "broadcast");
    const auto av = a.values();
    const std::int64_t total = shape_numel(target);
    std::vector<std::int64_t> idx(static_cast<std::size_t>(r), 0);
    for (std::int64_t flat = 0; flat < total; ++flat) {
        std::int64_t src = 0;
        for (int i = 0; i < r; ++i) src += idx[static_cast<std::size_t>(i)] * src_stride[static_cast<std::size_t>(i)];
        n->val[static_cast<std::size_t>(flat)] = av[static_cast<std::size_t>(src)];
        for (int i = r - 1; i >= 0; --i) {
            if (++idx[static_cast<std::size_t>(i)] < target[static_cast<std::size_t>(i)]) break;
            idx[static_cast<std::size_t>(i)] = 0;
        }
    }
    return finish(std::move(n), {a.node()}, [src_stride, target, r](Node& self) {
        Node& p = *self.parents[0];
        p.ensure_grad();
        const std::int64_t total = shape_numel(target);
        std::vector<std::int64_t> idx(static_cast<std::size_t>(r), 0);
        for (std::int64_t flat = 0; flat < total; ++flat) {
            std::int64_t src = 0;
            for (int i = 0; i < r; ++i) src += idx[static_cast<std::size_t>(i)] * src_stride[static_cast<std::size_t>(i)];
            p.grad[static_cast<std::size_t>(src)] += self.grad[static_cast<std::size_t>(flat)];
            for (int i = r - 1; i >= 0; --i) {
                if (++idx[static_cast<std::size_t>(i)] < target[static_cast<std::size_t>(i)]) break;
                idx[static_cast<std::size_t>(i)] = 0;
            }
        }
    });
}

// ---- nonlinearities -----------------------------------------------------------

Tensor sigmoid(const Tensor& a) {
    return elementwise_unary(
        a, "sigmoid",
        [](double x) {
            // split form avoids overflow in exp for large |x|
            return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
        },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& a) {
    return elementwise_unary(
        a, "relu", [](double x) { return x > 0 ? x : 0.0; },
        [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
    auto n = make_node(a.shape(), "leaky_relu");
    const auto av = a.values();
    for (std::size_t i = 0; i < av.size(); ++i)
        n->val[i] = av[i] > 0 ? av[i] : slope * av[i];
    return finish(std::move(n), {a.node()}, [slope](Node& self) {
        Node& p = *self.parents[0];
        p.ensure_grad();
        for (std::size_t i = 0; i < self.val.size(); ++i)
            p.grad[i] += self.grad[i] * (p.val[i] > 0 ? 1.0 : slope);
    });
}

Tensor exp(const Tensor& a) {
    return elementwise_unary(
        a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor sqrt(const Tensor& a) {
    return elementwise_unary(
        a, "sqrt", [](double x) { return std::sqrt(x); },
        [](double, double y) { return 0.5 / y; });
}

Tensor softmax(const Tensor& a, int axis) {
    auto dims = axis_dims(a.shape(), axis, "softmax");
    auto n = make_node(a.shape(), "softmax");
    const auto av = a.values();
    for (std::int64_t o = 0; o < dims.outer; ++o)
        for (std::int64_t j = 0; j < dims.inner; ++j) {
            const std::int64_t base = o * dims.n * dims.inner + j;
            double m = -HUGE_VAL;
            for (std::int64_t i = 0; i < dims.n; ++i)
                m = std::max(m, av[static_cast<std::size_t>(base + i * dims.inner)]);
            double sum = 0;
            for (std::int64_t i = 0; i < dims.n; ++i) {
                double e = std::exp(av[static_cast<std::size_t>(base + i * dims.inner)] - m);
                n->val[static_cast<std::size_t>(base + i * dims.inner)] = e;
                sum += e;
            }
            for (std::int64_t i = 0; i < dims.n; ++i)
                n->val[static_cast<std::size_t>(base + i * dims.inner)] /= sum;
        }
    return finish(std::move(n), {a.node()}, [dims](Node& self) {
        Node& p = *self.parents[0];
        p.ensure_grad();
        for (std::int64_t o = 0; o < dims.outer; ++o)
            for (std::int64_t j = 0; j < dims.inner; ++j) {
                const std::int64_t base = o * dims.n * dims.inner + j;
                double dot = 0;
                for (std::int64_t i = 0; i < dims.n; ++i) {
                    auto k = static_cast<std::size_t>(base + i * dims.inner);
                    dot += self.grad[k] * self.val[k];
                }
                for (std::int64_t i = 0; i < dims.n; ++i) {
                    auto k = static_cast<std::size_t>(base + i * dims.inner);
                    p.grad[k] += self.val[k] * (self.grad[k] - dot);
                }
            }
    });
}

// ---- reductions ----------------------------------------------------------------

Tensor max_reduce(const Tensor& a, int axis, bool keepdim) {
    auto dims = axis_dims(a.shape(), axis, "max_reduce");
    auto n = make_node(reduced_shape(a.shape(), axis, keepdim), "max_reduce");
    const auto av = a.values();
    // argmax recorded for the backward routing; ties keep the lowest index
    auto argmax = std::make_shared<std::vector<std::int64_t>>(
        static_cast<std::size_t>(dims.outer * dims.inner));
    for (std::int64_t o = 0; o < dims.outer; ++o)
        for (std::int64_t j = 0; j < dims.inner; ++j) {
            const std::int64_t base = o * dims.n * dims.inner + j;
            double best = av[static_cast<std::size_t>(base)];
            std::int64_t best_i = 0;
            for (std::int64_t i = 1; i < dims.n; ++i) {
                double v = av[static_cast<std::size_t>(base + i * dims.inner)];
                if (v > best) {
                    best = v;
                    best_i = i;
                }
            }
            n->val[static_cast<std::size_t>(o * dims.inner + j)] = best;
            (*argmax)[static_cast<std::size_t>(o * dims.inner + j)] = best_i;
        }
    return finish(std::move(n), {a.node()}, [dims, argmax](Node& self) {
        Node& p = *self.parents[0];
        p.ensure_grad();
        for (std::int64_t o = 0; o < dims.outer; ++o)
            for (std::int64_t j = 0; j < dims.inner; ++j) {
                const std::int64_t flat = o * dims.inner + j;
                const std::int64_t i = (*argmax)[static_cast<std::size_t>(flat)];
                p.grad[static_cast<std::size_t>((o * dims.n + i) * dims.inner + j)] +=
                    self.grad[static_cast<std::size_t>(flat)];
            }
    });
}

Tensor sum_reduce(const Tensor& a, int axis, bool keepdim) {
    auto dims = axis_dims(a.shape(), axis, "sum_reduce");
    auto n = make_node(reduced_shape(a.shape(), axis, keepdim), "sum_reduce");
    const auto av = a.values();
    for (std::int64_t o = 0; o < dims.outer; ++o)
        for (std::int64_t i = 0; i < dims.n; ++i)
            for (std::int64_t j = 0; j < dims.inner; ++j)
                n->val[static_cast<std::size_t>(o * dims.inner + j)] +=
                    av[static_cast<std::size_t>((o * dims.n + i) * dims.inner + j)];
    return finish(std::move(n), {a.node()}, [dims](Node& self) {
        Node& p = *self.parents[0];
        p.ensure_grad();
        for (std::int64_t o = 0; o < dims.outer; ++o)
            for (std::int64_t i = 0; i < dims.n; ++i)
                for (std::int64_t j = 0; j < dims.inner; ++j)
                    p.grad[static_cast<std::size_t>((o * dims.n + i) * dims.inner + j)] +=
                        self.grad[static_cast<std::size_t>(o * dims.inner + j)];
    });
}

Tensor mean_reduce(const Tensor& a, int axis, bool keepdim) {
    auto dims = axis_dims(a.shape(), axis, "mean_reduce");
    Tensor s = sum_reduce(a, axis, keepdim);
    return scalar_mul(s, 1.0 / static_cast<double>(dims.n));
}

Tensor dropout(const Tensor& a, double p, std::uint64_t seed, bool train) {
    if (!train || p <= 0.0) return a;
    check(p < 1.0, "dropout", "p must be < 1");
    auto n = make_node(a.shape(), "dropout");
    const auto av = a.values();
    auto mask = std::make_shared<std::vector<double>>(av.size());
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double keep_scale = 1.0 / (1.0 - p);
    for (std::size_t i = 0; i < av.size(); ++i) {
        (*mask)[i] = u(rng) >= p ? keep_scale : 0.0;
        n->val[i] = av[i] * (*mask)[i];
    }
    return finish(std::move(n), {a.node()}, [mask](Node& self) {
        Node& p2 = *self.parents[0];
        p2.ensure_grad();
        for (std::size_t i = 0; i < self.val.size(); ++i)
            p2.grad[i] += self.grad[i] * (*mask)[i];
    });
}

Tensor aconc(const Tensor& x, const Tensor& p1, const Tensor& p2, const Tensor& beta) {
    check(x.rank() == 2, "aconc", "x must be (C,P), got " + shape_str(x.shape()));
    const std::int64_t c = x.dim(0), p = x.dim(1);
    auto expand = [&](const Tensor& t, const char* name) {
        check(t.numel() == c || t.numel() == 1, "aconc",
              std::string(name) + " must hold C=" + std::to_string(c) + " or 1 entries, got " +
                  std::to_string(t.numel()));
        Tensor col = reshape(t, {t.numel(), 1});
        return broadcast_to(col, {c, p});
    };
    Tensor p1b = expand(p1, "p1");
    Tensor p2b = expand(p2, "p2");
    Tensor bb = expand(beta, "beta");
    Tensor d = mul(sub(p1b, p2b), x);
    return add(mul(d, sigmoid(mul(bb, d))), mul(p2b, x));
}

void backward(const Tensor& loss) {
    if (loss.numel() != 1)
        fail("NotScalar", "backward needs a scalar loss, got " + shape_str(loss.shape()));
    if (!loss.requires_grad()) return;

    // Iterative post-order DFS: children are emitted after all parents,
    // so the reversed list is a valid backward schedule.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
    visited.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (parent->requires_grad && !visited.count(parent)) {
                visited.insert(parent);
                stack.push_back({parent, 0});
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss.node()->ensure_grad();
    loss.node()->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backward_fn) {
            node->ensure_grad();
            node->backward_fn(*node);
        }
    }
}

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

bool grad_mode_enabled() { return g_grad_enabled; }

Tensor uniform_init(Shape shape, double bound, std::uint64_t seed, bool requires_grad) {
    auto n = make_node(std::move(shape), "leaf");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-bound, bound);
    for (double& v : n->val) v = u(rng);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

}  // namespace drag
