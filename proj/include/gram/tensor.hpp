#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gram/common.hpp"
#include "gram/rng.hpp"

namespace gram {

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& s);
int64_t shape_numel(const Shape& s);

// Allocation accounting for every tensor buffer. Deterministic and portable,
// unlike OS RSS; also enforces an optional budget so out-of-memory becomes a
// catchable, reproducible event.
namespace memtrack {
int64_t current_bytes();
int64_t peak_bytes();
void reset_peak();
void set_limit(int64_t bytes);  // 0 disables the budget
int64_t limit();
}  // namespace memtrack

// Thread-local autograd switch. With grads disabled, ops record no graph and
// intermediates free as soon as they go out of scope.
bool grad_enabled();
struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// Training-time dropout is scoped: forwards run deterministically from the
// guard's RNG stream while it is alive and are dropout-free otherwise
// (evaluation, generation, finite-difference audits).
struct DropoutGuard {
    DropoutGuard(double rate, Rng* rng);
    ~DropoutGuard();
    DropoutGuard(const DropoutGuard&) = delete;
    DropoutGuard& operator=(const DropoutGuard&) = delete;
};
bool dropout_active();

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // allocated on first use
    bool requires_grad = false;
    uint64_t id = 0;
    std::vector<NodePtr> parents;
    std::function<void(Node&)> backward_fn;

    explicit Node(Shape s);
    Node(Shape s, std::vector<double> d);
    ~Node();
    Node(const Node&) = delete;
    Node& operator=(const Node&) = delete;

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    void ensure_grad();
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(NodePtr n) : node_(std::move(n)) {}

    static Tensor zeros(const Shape& s);
    static Tensor full(const Shape& s, double v);
    static Tensor from_data(const Shape& s, std::vector<double> d);
    static Tensor randn(const Shape& s, Rng& rng, double mean, double stddev);
    static Tensor uniform(const Shape& s, Rng& rng, double lo, double hi);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    int64_t size() const { return node_->numel(); }
    int64_t dim(int i) const;  // negative indices count from the back

    std::vector<double>& data() { return node_->data; }
    const std::vector<double>& data() const { return node_->data; }
    double value() const;                       // scalar tensors only
    double at(std::span<const int64_t> i) const;
    double at(std::initializer_list<int64_t> i) const;

    bool requires_grad() const { return node_->requires_grad; }
    Tensor& set_requires_grad(bool v);  // leaves only
    bool has_grad() const { return node_ && !node_->grad.empty(); }
    const std::vector<double>& grad() const;
    void zero_grad();

    // Reverse-mode sweep from a scalar. Deterministic topological order with
    // fixed parent-visit order; each reachable node is visited exactly once.
    // Repeated calls without zero_grad accumulate.
    void backward() const;

    uint64_t node_id() const { return node_->id; }
    const NodePtr& node() const { return node_; }

private:
    NodePtr node_;
};

// ---- operations (all differentiable unless noted) ----

// Elementwise with right-aligned broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double s);

// Batched matrix product over the last two axes; leading axes broadcast.
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor relu(const Tensor& x);
Tensor softmax(const Tensor& x, int axis);
// x * rsqrt(mean(x^2, last) + 1e-6) * w, w spans the last axis.
Tensor rmsnorm(const Tensor& x, const Tensor& w);

Tensor reshape(const Tensor& x, const Shape& s);
Tensor permute(const Tensor& x, const std::vector<int>& axes);
Tensor concat(std::span<const Tensor> parts, int axis);
Tensor slice(const Tensor& x, int axis, int64_t start, int64_t end);

// Row gather from an embedding table [V, d]; backward scatter-adds.
Tensor embedding(const Tensor& table, const std::vector<int>& ids);

// out[h,i,j] = params[h, buckets[i*k_len+j]] for params [H, B].
Tensor bias_from_buckets(const Tensor& params, const std::vector<int>& buckets,
                         int64_t q_len, int64_t k_len);

// Mean over rows of (logsumexp(row) - row[target]); logits [..., V] flattened
// to rows. Stable; returns a scalar.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets);

Tensor sum(const Tensor& x);

// Identity when no dropout guard is alive; otherwise drops elements with the
// guard's rate and rescales survivors by 1/(1-rate).
Tensor maybe_dropout(const Tensor& x);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }

}  // namespace gram
