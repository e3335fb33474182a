#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace drag {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

/// Dense f64 tensor participating in reverse-mode autodiff. A Tensor is a
/// cheap handle to a node of the recorded computation graph; ops append
/// nodes whose backward closures accumulate gradients into their parents.
/// Graph construction order is topological by construction, and
/// backward() sweeps it in reverse.
class Tensor {
public:
    struct Node {
        Shape shape;
        std::vector<double> val;
        std::vector<double> grad;  // allocated on first touch
        bool requires_grad = false;
        const char* op = "leaf";
        std::vector<std::shared_ptr<Node>> parents;
        std::function<void(Node&)> backward_fn;  // null for leaves

        void ensure_grad() {
            if (grad.empty()) grad.assign(val.size(), 0.0);
        }
    };

    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    std::int64_t dim(int i) const { return node_->shape[static_cast<std::size_t>(i)]; }
    std::int64_t numel() const { return static_cast<std::int64_t>(node_->val.size()); }
    bool requires_grad() const { return node_->requires_grad; }

    std::span<const double> values() const { return node_->val; }
    /// Direct mutation; meant for leaves (optimizer updates, buffers).
    std::span<double> values_mut() { return node_->val; }
    std::span<const double> grad() const;
    std::span<double> grad_mut() {
        node_->ensure_grad();
        return node_->grad;
    }
    void zero_grad() { node_->grad.clear(); }

    double scalar_value() const;
    bool all_finite() const;

    std::shared_ptr<Node>& node() { return node_; }
    const std::shared_ptr<Node>& node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

// ---- core operator set ----------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor divide(const Tensor& a, const Tensor& b);
Tensor scalar_mul(const Tensor& a, double s);
Tensor scalar_add(const Tensor& a, double s);

Tensor matmul(const Tensor& a, const Tensor& b);          // (m,k)x(k,n)
Tensor batched_matmul(const Tensor& a, const Tensor& b);  // (B,m,k)x(B,k,n)
Tensor transpose(const Tensor& a);                        // 2-D
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor gather(const Tensor& a, std::vector<std::int64_t> indices, int axis);
Tensor broadcast_to(const Tensor& a, const Shape& target);

Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor exp(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor softmax(const Tensor& a, int axis);

Tensor max_reduce(const Tensor& a, int axis, bool keepdim = false);
Tensor mean_reduce(const Tensor& a, int axis, bool keepdim = false);
Tensor sum_reduce(const Tensor& a, int axis, bool keepdim = false);

/// Inverted-dropout; identity when train is false or p == 0.
Tensor dropout(const Tensor& a, double p, std::uint64_t seed, bool train);

/// ACON-C activation. x is (C,P); p1/p2/beta have C entries (or 1, which
/// broadcasts): d = (p1-p2)*x, out = d*sigmoid(beta*d) + p2*x.
Tensor aconc(const Tensor& x, const Tensor& p1, const Tensor& p2, const Tensor& beta);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

/// Reverse sweep from a scalar loss. Gradients accumulate additively into
/// every requires_grad node reachable from it.
void backward(const Tensor& loss);

/// While alive, ops produce plain constants: no parents are recorded and
/// no backward closures built. Used for inference and evaluation.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

bool grad_mode_enabled();

/// Uniform values in [-bound, bound] from a private PRNG; used for
/// parameter init so identically named parameters match across models.
Tensor uniform_init(Shape shape, double bound, std::uint64_t seed, bool requires_grad = true);

}  // namespace drag
