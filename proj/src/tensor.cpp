#include "gram/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <unordered_set>

#include "gram/kernels.hpp"

namespace gram {

// ---- shape helpers ----

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

namespace {

std::vector<int64_t> row_major_strides(const Shape& s) {
    std::vector<int64_t> st(s.size());
    int64_t acc = 1;
    for (int i = static_cast<int>(s.size()) - 1; i >= 0; --i) {
        st[i] = acc;
        acc *= s[i];
    }
    return st;
}

struct BcastPlan {
    Shape out;
    std::vector<int64_t> sa, sb;  // strides into a and b, 0 on broadcast axes
};

BcastPlan bcast_plan(const Shape& a, const Shape& b, const char* op) {
    const int ra = static_cast<int>(a.size()), rb = static_cast<int>(b.size());
    const int r = std::max(ra, rb);
    BcastPlan p;
    p.out.resize(r);
    for (int i = 0; i < r; ++i) {
        const int64_t da = i < r - ra ? 1 : a[i - (r - ra)];
        const int64_t db = i < r - rb ? 1 : b[i - (r - rb)];
        if (da != db && da != 1 && db != 1)
            throw ShapeError(std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b) +
                             " are not broadcastable");
        p.out[i] = std::max(da, db);
    }
    auto sta = row_major_strides(a), stb = row_major_strides(b);
    p.sa.assign(r, 0);
    p.sb.assign(r, 0);
    for (int i = 0; i < r; ++i) {
        if (i >= r - ra && a[i - (r - ra)] != 1) p.sa[i] = sta[i - (r - ra)];
        if (i >= r - rb && b[i - (r - rb)] != 1) p.sb[i] = stb[i - (r - rb)];
    }
    return p;
}

// Walks the output space once; f(out_linear, a_offset, b_offset).
template <typename F>
void bcast_iter(const Shape& out, const std::vector<int64_t>& sa, const std::vector<int64_t>& sb, F&& f) {
    const int r = static_cast<int>(out.size());
    const int64_t total = shape_numel(out);
    std::vector<int64_t> idx(r, 0);
    int64_t oa = 0, ob = 0;
    for (int64_t lin = 0; lin < total; ++lin) {
        f(lin, oa, ob);
        for (int d = r - 1; d >= 0; --d) {
            ++idx[d];
            oa += sa[d];
            ob += sb[d];
            if (idx[d] < out[d]) break;
            oa -= sa[d] * out[d];
            ob -= sb[d] * out[d];
            idx[d] = 0;
        }
    }
}

uint64_t g_next_node_id = 1;

}  // namespace

// ---- memory accounting ----

namespace memtrack {
namespace {
int64_t g_current = 0;
int64_t g_peak = 0;
int64_t g_limit = 0;
}  // namespace

int64_t current_bytes() { return g_current; }
int64_t peak_bytes() { return g_peak; }
void reset_peak() { g_peak = g_current; }
void set_limit(int64_t bytes) { g_limit = bytes; }
int64_t limit() { return g_limit; }

namespace detail {
void charge(int64_t bytes) {
    if (g_limit > 0 && g_current + bytes > g_limit)
        throw MemoryLimitError("tensor allocation of " + std::to_string(bytes) +
                               " bytes exceeds memory budget of " + std::to_string(g_limit) +
                               " bytes (in use: " + std::to_string(g_current) + ")");
    g_current += bytes;
    g_peak = std::max(g_peak, g_current);
}
void release(int64_t bytes) { g_current -= bytes; }
}  // namespace detail
}  // namespace memtrack

// ---- autograd switch ----

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }
NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

namespace {
thread_local double g_dropout_rate = 0.0;
thread_local Rng* g_dropout_rng = nullptr;
}  // namespace

DropoutGuard::DropoutGuard(double rate, Rng* rng) {
    if (rate < 0.0 || rate >= 1.0) throw ContractError("dropout rate must be in [0, 1)");
    g_dropout_rate = rate;
    g_dropout_rng = rng;
}

DropoutGuard::~DropoutGuard() {
    g_dropout_rate = 0.0;
    g_dropout_rng = nullptr;
}

bool dropout_active() { return g_dropout_rng != nullptr && g_dropout_rate > 0.0; }

// ---- Node ----

Node::Node(Shape s) : shape(std::move(s)) {
    const int64_t n = shape_numel(shape);
    memtrack::detail::charge(n * 8);
    data.assign(static_cast<size_t>(n), 0.0);
    id = g_next_node_id++;
}

Node::Node(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (shape_numel(shape) != static_cast<int64_t>(data.size()))
        throw ShapeError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
    memtrack::detail::charge(static_cast<int64_t>(data.size()) * 8);
    id = g_next_node_id++;
}

Node::~Node() {
    memtrack::detail::release(static_cast<int64_t>(data.size()) * 8 +
                              static_cast<int64_t>(grad.size()) * 8);
}

void Node::ensure_grad() {
    if (grad.empty() && !data.empty()) {
        memtrack::detail::charge(static_cast<int64_t>(data.size()) * 8);
        grad.assign(data.size(), 0.0);
    }
}

namespace {

NodePtr make_op_node(Shape shape, std::vector<NodePtr> parents, std::function<void(Node&)> fn) {
    auto n = std::make_shared<Node>(std::move(shape));
    if (g_grad_enabled) {
        bool req = false;
        for (const auto& p : parents) req = req || p->requires_grad;
        if (req) {
            n->requires_grad = true;
            n->parents = std::move(parents);
            n->backward_fn = std::move(fn);
        }
    }
    return n;
}

void accum_into(Node& p, const double* g, int64_t n) {
    p.ensure_grad();
    kernels::axpy(static_cast<size_t>(n), 1.0, g, p.grad.data());
}

}  // namespace

// ---- Tensor basics ----

Tensor Tensor::zeros(const Shape& s) { return Tensor(std::make_shared<Node>(s)); }

Tensor Tensor::full(const Shape& s, double v) {
    auto n = std::make_shared<Node>(s);
    std::fill(n->data.begin(), n->data.end(), v);
    return Tensor(std::move(n));
}

Tensor Tensor::from_data(const Shape& s, std::vector<double> d) {
    return Tensor(std::make_shared<Node>(s, std::move(d)));
}

Tensor Tensor::randn(const Shape& s, Rng& rng, double mean, double stddev) {
    auto n = std::make_shared<Node>(s);
    for (auto& v : n->data) v = rng.normal(mean, stddev);
    return Tensor(std::move(n));
}

Tensor Tensor::uniform(const Shape& s, Rng& rng, double lo, double hi) {
    auto n = std::make_shared<Node>(s);
    for (auto& v : n->data) v = rng.uniform(lo, hi);
    return Tensor(std::move(n));
}

int64_t Tensor::dim(int i) const {
    const int r = rank();
    if (i < 0) i += r;
    if (i < 0 || i >= r) throw ShapeError("dim index out of range for shape " + shape_str(shape()));
    return node_->shape[i];
}

double Tensor::value() const {
    if (size() != 1) throw ContractError("value(): tensor is not scalar, shape " + shape_str(shape()));
    return node_->data[0];
}

double Tensor::at(std::span<const int64_t> i) const {
    if (static_cast<int>(i.size()) != rank())
        throw ShapeError("at(): index rank does not match shape " + shape_str(shape()));
    auto st = row_major_strides(node_->shape);
    int64_t off = 0;
    for (size_t d = 0; d < i.size(); ++d) {
        if (i[d] < 0 || i[d] >= node_->shape[d])
            throw ShapeError("at(): index out of bounds for shape " + shape_str(shape()));
        off += i[d] * st[d];
    }
    return node_->data[static_cast<size_t>(off)];
}

double Tensor::at(std::initializer_list<int64_t> i) const {
    return at(std::span<const int64_t>(i.begin(), i.size()));
}

Tensor& Tensor::set_requires_grad(bool v) {
    if (!node_->parents.empty())
        throw ContractError("set_requires_grad: only leaf tensors may be marked trainable");
    node_->requires_grad = v;
    return *this;
}

const std::vector<double>& Tensor::grad() const { return node_->grad; }

void Tensor::zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::backward() const {
    if (!node_) throw ContractError("backward: undefined tensor");
    if (node_->numel() != 1)
        throw ContractError("backward: loss must be scalar, got shape " + shape_str(node_->shape));
    if (!node_->requires_grad) return;  // nothing reachable

    // Iterative post-order DFS; parents visited in stored order so the
    // traversal (and therefore float accumulation order) is reproducible.
    std::vector<Node*> order;
    std::unordered_set<const Node*> visited;
    struct Frame {
        Node* n;
        size_t next;
    };
    std::vector<Frame> stack;
    stack.push_back({node_.get(), 0});
    visited.insert(node_.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next < f.n->parents.size()) {
            Node* p = f.n->parents[f.next++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(f.n);
            stack.pop_back();
        }
    }
    // Interior grads are scratch for this sweep; leaf (parameter) grads keep
    // accumulating across sweeps until zero_grad.
    for (Node* n : order) {
        if (!n->parents.empty()) {
            n->ensure_grad();
            std::fill(n->grad.begin(), n->grad.end(), 0.0);
        }
    }
    node_->ensure_grad();
    node_->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn) n->backward_fn(*n);
    }
}

// ---- elementwise ops ----

namespace {

enum class BinKind { Add, Sub, Mul };

Tensor binary_op(const Tensor& a, const Tensor& b, BinKind kind, const char* name) {
    const auto& an = a.node();
    const auto& bn = b.node();
    if (an->shape == bn->shape) {
        const int64_t n = an->numel();
        auto combine = [&](Node& out) {
            const double* pa = an->data.data();
            const double* pb = bn->data.data();
            double* po = out.data.data();
            switch (kind) {
                case BinKind::Add:
                    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
                    break;
                case BinKind::Sub:
                    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] - pb[i];
                    break;
                case BinKind::Mul:
                    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
                    break;
            }
        };
        auto node = make_op_node(an->shape, {an, bn}, [kind, n](Node& self) {
            Node& pa = *self.parents[0];
            Node& pb = *self.parents[1];
            const double* g = self.grad.data();
            if (pa.requires_grad) {
                pa.ensure_grad();
                double* ga = pa.grad.data();
                if (kind == BinKind::Mul) {
                    const double* vb = pb.data.data();
                    for (int64_t i = 0; i < n; ++i) ga[i] += g[i] * vb[i];
                } else {
                    for (int64_t i = 0; i < n; ++i) ga[i] += g[i];
                }
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                double* gb = pb.grad.data();
                switch (kind) {
                    case BinKind::Add:
                        for (int64_t i = 0; i < n; ++i) gb[i] += g[i];
                        break;
                    case BinKind::Sub:
                        for (int64_t i = 0; i < n; ++i) gb[i] -= g[i];
                        break;
                    case BinKind::Mul: {
                        const double* va = pa.data.data();
                        for (int64_t i = 0; i < n; ++i) gb[i] += g[i] * va[i];
                        break;
                    }
                }
            }
        });
        combine(*node);
        return Tensor(std::move(node));
    }

    BcastPlan plan = bcast_plan(an->shape, bn->shape, name);
    auto node = make_op_node(plan.out, {an, bn}, [plan, kind](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        const double* g = self.grad.data();
        const double* va = pa.data.data();
        const double* vb = pb.data.data();
        if (pa.requires_grad) pa.ensure_grad();
        if (pb.requires_grad) pb.ensure_grad();
        double* ga = pa.requires_grad ? pa.grad.data() : nullptr;
        double* gb = pb.requires_grad ? pb.grad.data() : nullptr;
        bcast_iter(plan.out, plan.sa, plan.sb, [&](int64_t lin, int64_t oa, int64_t ob) {
            switch (kind) {
                case BinKind::Add:
                    if (ga) ga[oa] += g[lin];
                    if (gb) gb[ob] += g[lin];
                    break;
                case BinKind::Sub:
                    if (ga) ga[oa] += g[lin];
                    if (gb) gb[ob] -= g[lin];
                    break;
                case BinKind::Mul:
                    if (ga) ga[oa] += g[lin] * vb[ob];
                    if (gb) gb[ob] += g[lin] * va[oa];
                    break;
            }
        });
    });
    {
        const double* pa = an->data.data();
        const double* pb = bn->data.data();
        double* po = node->data.data();
        bcast_iter(plan.out, plan.sa, plan.sb, [&](int64_t lin, int64_t oa, int64_t ob) {
            switch (kind) {
                case BinKind::Add:
                    po[lin] = pa[oa] + pb[ob];
                    break;
                case BinKind::Sub:
                    po[lin] = pa[oa] - pb[ob];
                    break;
                case BinKind::Mul:
                    po[lin] = pa[oa] * pb[ob];
                    break;
            }
        });
    }
    return Tensor(std::move(node));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Mul, "mul"); }

Tensor scale(const Tensor& x, double s) {
    const auto& xn = x.node();
    const int64_t n = xn->numel();
    auto node = make_op_node(xn->shape, {xn}, [s, n](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        kernels::axpy(static_cast<size_t>(n), s, self.grad.data(), p.grad.data());
    });
    const double* px = xn->data.data();
    double* po = node->data.data();
    for (int64_t i = 0; i < n; ++i) po[i] = px[i] * s;
    return Tensor(std::move(node));
}

// ---- matmul ----

Tensor matmul(const Tensor& a, const Tensor& b) {
    const auto& an = a.node();
    const auto& bn = b.node();
    if (an->shape.size() < 2 || bn->shape.size() < 2)
        throw ShapeError("matmul: both operands must have rank >= 2, got " + shape_str(an->shape) +
                         " and " + shape_str(bn->shape));
    const int64_t m = an->shape[an->shape.size() - 2];
    const int64_t k = an->shape.back();
    const int64_t kb = bn->shape[bn->shape.size() - 2];
    const int64_t n = bn->shape.back();
    if (k != kb)
        throw ShapeError("matmul: inner dimensions disagree, " + shape_str(an->shape) + " x " +
                         shape_str(bn->shape));

    Shape abatch(an->shape.begin(), an->shape.end() - 2);
    Shape bbatch(bn->shape.begin(), bn->shape.end() - 2);
    BcastPlan plan = bcast_plan(abatch, bbatch, "matmul");
    // Batch strides measured in matrices, converted to element offsets below.
    for (auto& s : plan.sa) s *= m * k;
    for (auto& s : plan.sb) s *= k * n;

    Shape out_shape = plan.out;
    out_shape.push_back(m);
    out_shape.push_back(n);

    const int mi = static_cast<int>(m), ki = static_cast<int>(k), ni = static_cast<int>(n);
    auto node = make_op_node(out_shape, {an, bn}, [plan, mi, ki, ni, m, k, n](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        const double* g = self.grad.data();
        if (pa.requires_grad) pa.ensure_grad();
        if (pb.requires_grad) pb.ensure_grad();
        std::vector<double> tmpa(pa.requires_grad ? static_cast<size_t>(m * k) : 0);
        std::vector<double> tmpb(pb.requires_grad ? static_cast<size_t>(k * n) : 0);
        bcast_iter(plan.out, plan.sa, plan.sb, [&](int64_t lin, int64_t oa, int64_t ob) {
            const double* gout = g + lin * m * n;
            if (pa.requires_grad) {
                // dA = dC * B^T
                kernels::gemm_nt(mi, ni, ki, gout, pb.data.data() + ob, tmpa.data());
                kernels::axpy(static_cast<size_t>(m * k), 1.0, tmpa.data(), pa.grad.data() + oa);
            }
            if (pb.requires_grad) {
                // dB = A^T * dC
                kernels::gemm_tn(ki, mi, ni, pa.data.data() + oa, gout, tmpb.data());
                kernels::axpy(static_cast<size_t>(k * n), 1.0, tmpb.data(), pb.grad.data() + ob);
            }
        });
    });
    {
        double* po = node->data.data();
        const double* pa = an->data.data();
        const double* pb = bn->data.data();
        bcast_iter(plan.out, plan.sa, plan.sb, [&](int64_t lin, int64_t oa, int64_t ob) {
            kernels::gemm_nn(mi, ki, ni, pa + oa, pb + ob, po + lin * m * n);
        });
    }
    return Tensor(std::move(node));
}

// ---- activations / normalization ----

Tensor relu(const Tensor& x) {
    const auto& xn = x.node();
    const int64_t n = xn->numel();
    auto node = make_op_node(xn->shape, {xn}, [n](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        const double* g = self.grad.data();
        const double* v = p.data.data();
        double* gp = p.grad.data();
        for (int64_t i = 0; i < n; ++i)
            if (v[i] > 0.0) gp[i] += g[i];
    });
    kernels::relu(static_cast<size_t>(n), xn->data.data(), node->data.data());
    return Tensor(std::move(node));
}

Tensor softmax(const Tensor& x, int axis) {
    const auto& xn = x.node();
    const int r = static_cast<int>(xn->shape.size());
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r)
        throw ShapeError("softmax: axis out of range for shape " + shape_str(xn->shape));
    const int64_t len = xn->shape[axis];
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= xn->shape[i];
    for (int i = axis + 1; i < r; ++i) inner *= xn->shape[i];

    auto node = make_op_node(xn->shape, {xn}, [outer, inner, len](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        const double* y = self.data.data();
        const double* g = self.grad.data();
        double* gp = p.grad.data();
        for (int64_t o = 0; o < outer; ++o) {
            for (int64_t in = 0; in < inner; ++in) {
                const int64_t base = o * len * inner + in;
                double dot = 0.0;
                for (int64_t j = 0; j < len; ++j) {
                    const int64_t off = base + j * inner;
                    dot += g[off] * y[off];
                }
                for (int64_t j = 0; j < len; ++j) {
                    const int64_t off = base + j * inner;
                    gp[off] += y[off] * (g[off] - dot);
                }
            }
        }
    });
    const double* px = xn->data.data();
    double* po = node->data.data();
    if (inner == 1) {
        kernels::softmax_rows(static_cast<int>(outer), static_cast<int>(len), px, po);
    } else {
        for (int64_t o = 0; o < outer; ++o) {
            for (int64_t in = 0; in < inner; ++in) {
                const int64_t base = o * len * inner + in;
                double mx = px[base];
                for (int64_t j = 1; j < len; ++j) mx = std::max(mx, px[base + j * inner]);
                double sum = 0.0;
                for (int64_t j = 0; j < len; ++j) {
                    const int64_t off = base + j * inner;
                    po[off] = std::exp(px[off] - mx);
                    sum += po[off];
                }
                const double inv = 1.0 / sum;
                for (int64_t j = 0; j < len; ++j) po[base + j * inner] *= inv;
            }
        }
    }
    return Tensor(std::move(node));
}

Tensor rmsnorm(const Tensor& x, const Tensor& w) {
    constexpr double kEps = 1e-6;
    const auto& xn = x.node();
    const auto& wn = w.node();
    const int64_t cols = xn->shape.back();
    if (wn->shape.size() != 1 || wn->shape[0] != cols)
        throw ShapeError("rmsnorm: weight shape " + shape_str(wn->shape) +
                         " must span the last axis of " + shape_str(xn->shape));
    const int64_t rows = xn->numel() / cols;

    auto node = make_op_node(xn->shape, {xn, wn}, [rows, cols](Node& self) {
        Node& px = *self.parents[0];
        Node& pw = *self.parents[1];
        const double* g = self.grad.data();
        const double* xv = px.data.data();
        const double* wv = pw.data.data();
        if (px.requires_grad) px.ensure_grad();
        if (pw.requires_grad) pw.ensure_grad();
        for (int64_t r = 0; r < rows; ++r) {
            const double* xr = xv + r * cols;
            const double* gr = g + r * cols;
            double ms = 0.0;
            for (int64_t j = 0; j < cols; ++j) ms += xr[j] * xr[j];
            ms /= static_cast<double>(cols);
            const double inv = 1.0 / std::sqrt(ms + kEps);
            if (px.requires_grad) {
                double dot = 0.0;  // sum_i g_i * w_i * x_i
                for (int64_t j = 0; j < cols; ++j) dot += gr[j] * wv[j] * xr[j];
                const double c = inv * inv * inv * dot / static_cast<double>(cols);
                double* gx = px.grad.data() + r * cols;
                for (int64_t j = 0; j < cols; ++j) gx[j] += inv * wv[j] * gr[j] - c * xr[j];
            }
            if (pw.requires_grad) {
                double* gw = pw.grad.data();
                for (int64_t j = 0; j < cols; ++j) gw[j] += gr[j] * xr[j] * inv;
            }
        }
    });
    kernels::rmsnorm_rows(static_cast<int>(rows), static_cast<int>(cols), xn->data.data(),
                          wn->data.data(), node->data.data(), kEps);
    return Tensor(std::move(node));
}

// ---- layout ops ----

Tensor reshape(const Tensor& x, const Shape& s) {
    const auto& xn = x.node();
    if (shape_numel(s) != xn->numel())
        throw ShapeError("reshape: cannot view " + shape_str(xn->shape) + " as " + shape_str(s));
    const int64_t n = xn->numel();
    auto node = make_op_node(s, {xn}, [n](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        accum_into(p, self.grad.data(), n);
    });
    node->data = xn->data;
    return Tensor(std::move(node));
}

Tensor permute(const Tensor& x, const std::vector<int>& axes) {
    const auto& xn = x.node();
    const int r = static_cast<int>(xn->shape.size());
    if (static_cast<int>(axes.size()) != r)
        throw ShapeError("permute: axes list must have rank " + std::to_string(r));
    std::vector<bool> seen(r, false);
    Shape out_shape(r);
    for (int i = 0; i < r; ++i) {
        if (axes[i] < 0 || axes[i] >= r || seen[axes[i]])
            throw ShapeError("permute: invalid axes permutation");
        seen[axes[i]] = true;
        out_shape[i] = xn->shape[axes[i]];
    }
    auto in_strides = row_major_strides(xn->shape);
    std::vector<int64_t> gather(r);  // stride in input per output axis
    for (int i = 0; i < r; ++i) gather[i] = in_strides[axes[i]];

    auto node = make_op_node(out_shape, {xn}, [out_shape, gather](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        const double* g = self.grad.data();
        double* gp = p.grad.data();
        std::vector<int64_t> zeros(out_shape.size(), 0);
        bcast_iter(out_shape, gather, zeros, [&](int64_t lin, int64_t src, int64_t) { gp[src] += g[lin]; });
    });
    {
        const double* px = xn->data.data();
        double* po = node->data.data();
        std::vector<int64_t> zeros(r, 0);
        bcast_iter(out_shape, gather, zeros, [&](int64_t lin, int64_t src, int64_t) { po[lin] = px[src]; });
    }
    return Tensor(std::move(node));
}

Tensor concat(std::span<const Tensor> parts, int axis) {
    if (parts.empty()) throw ContractError("concat: no inputs");
    const int r = parts[0].rank();
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) throw ShapeError("concat: axis out of range");
    int64_t axis_total = 0;
    for (const auto& t : parts) {
        if (t.rank() != r) throw ShapeError("concat: rank mismatch");
        for (int d = 0; d < r; ++d)
            if (d != axis && t.shape()[d] != parts[0].shape()[d])
                throw ShapeError("concat: shapes " + shape_str(parts[0].shape()) + " and " +
                                 shape_str(t.shape()) + " differ outside axis " + std::to_string(axis));
        axis_total += t.shape()[axis];
    }
    Shape out_shape = parts[0].shape();
    out_shape[axis] = axis_total;
    int64_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= out_shape[d];
    for (int d = axis + 1; d < r; ++d) inner *= out_shape[d];

    std::vector<NodePtr> parents;
    std::vector<int64_t> axis_parts;
    for (const auto& t : parts) {
        parents.push_back(t.node());
        axis_parts.push_back(t.shape()[axis]);
    }
    auto node = make_op_node(out_shape, parents, [outer, inner, axis_parts, axis_total](Node& self) {
        const double* g = self.grad.data();
        int64_t pos = 0;
        for (size_t pi = 0; pi < self.parents.size(); ++pi) {
            Node& p = *self.parents[pi];
            const int64_t len = axis_parts[pi];
            if (p.requires_grad) {
                p.ensure_grad();
                for (int64_t o = 0; o < outer; ++o) {
                    const double* src = g + (o * axis_total + pos) * inner;
                    double* dst = p.grad.data() + o * len * inner;
                    for (int64_t i = 0; i < len * inner; ++i) dst[i] += src[i];
                }
            }
            pos += len;
        }
    });
    {
        double* po = node->data.data();
        int64_t pos = 0;
        for (size_t pi = 0; pi < parts.size(); ++pi) {
            const int64_t len = axis_parts[pi];
            const double* src = parts[pi].data().data();
            for (int64_t o = 0; o < outer; ++o)
                std::memcpy(po + (o * axis_total + pos) * inner, src + o * len * inner,
                            static_cast<size_t>(len * inner) * sizeof(double));
            pos += len;
        }
    }
    return Tensor(std::move(node));
}

Tensor slice(const Tensor& x, int axis, int64_t start, int64_t end) {
    const auto& xn = x.node();
    const int r = static_cast<int>(xn->shape.size());
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) throw ShapeError("slice: axis out of range");
    const int64_t len = xn->shape[axis];
    if (start < 0 || end < start || end > len)
        throw ShapeError("slice: range [" + std::to_string(start) + "," + std::to_string(end) +
                         ") invalid for axis length " + std::to_string(len));
    Shape out_shape = xn->shape;
    out_shape[axis] = end - start;
    int64_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= xn->shape[d];
    for (int d = axis + 1; d < r; ++d) inner *= xn->shape[d];
    const int64_t span = end - start;

    auto node = make_op_node(out_shape, {xn}, [outer, inner, span, len, start](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        const double* g = self.grad.data();
        for (int64_t o = 0; o < outer; ++o) {
            double* dst = p.grad.data() + (o * len + start) * inner;
            const double* src = g + o * span * inner;
            for (int64_t i = 0; i < span * inner; ++i) dst[i] += src[i];
        }
    });
    {
        double* po = node->data.data();
        const double* px = xn->data.data();
        for (int64_t o = 0; o < outer; ++o)
            std::memcpy(po + o * span * inner, px + (o * len + start) * inner,
                        static_cast<size_t>(span * inner) * sizeof(double));
    }
    return Tensor(std::move(node));
}

// ---- gathers ----

Tensor embedding(const Tensor& table, const std::vector<int>& ids) {
    const auto& tn = table.node();
    if (tn->shape.size() != 2) throw ShapeError("embedding: table must be [vocab, d]");
    const int64_t vocab = tn->shape[0];
    const int64_t d = tn->shape[1];
    for (int id : ids)
        if (id < 0 || id >= vocab)
            throw ContractError("embedding: token id " + std::to_string(id) +
                                " outside vocabulary of size " + std::to_string(vocab));
    const int64_t rows = static_cast<int64_t>(ids.size());
    auto node = make_op_node({rows, d}, {tn}, [ids, d](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        const double* g = self.grad.data();
        for (size_t r = 0; r < ids.size(); ++r) {
            double* dst = p.grad.data() + static_cast<int64_t>(ids[r]) * d;
            const double* src = g + static_cast<int64_t>(r) * d;
            for (int64_t j = 0; j < d; ++j) dst[j] += src[j];
        }
    });
    {
        double* po = node->data.data();
        const double* pt = tn->data.data();
        for (size_t r = 0; r < ids.size(); ++r)
            std::memcpy(po + static_cast<int64_t>(r) * d, pt + static_cast<int64_t>(ids[r]) * d,
                        static_cast<size_t>(d) * sizeof(double));
    }
    return Tensor(std::move(node));
}

Tensor bias_from_buckets(const Tensor& params, const std::vector<int>& buckets, int64_t q_len,
                         int64_t k_len) {
    const auto& pn = params.node();
    if (pn->shape.size() != 2) throw ShapeError("bias_from_buckets: params must be [heads, buckets]");
    const int64_t heads = pn->shape[0];
    const int64_t nb = pn->shape[1];
    if (static_cast<int64_t>(buckets.size()) != q_len * k_len)
        throw ShapeError("bias_from_buckets: bucket index count mismatch");
    for (int b : buckets)
        if (b < 0 || b >= nb) throw ContractError("bias_from_buckets: bucket index out of range");

    const int64_t plane = q_len * k_len;
    auto node = make_op_node({heads, q_len, k_len}, {pn}, [buckets, plane, nb](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        const double* g = self.grad.data();
        const int64_t heads = p.shape[0];
        for (int64_t h = 0; h < heads; ++h) {
            double* gp = p.grad.data() + h * nb;
            const double* gh = g + h * plane;
            for (int64_t i = 0; i < plane; ++i) gp[buckets[i]] += gh[i];
        }
    });
    {
        double* po = node->data.data();
        const double* pv = pn->data.data();
        for (int64_t h = 0; h < heads; ++h) {
            const double* row = pv + h * nb;
            double* oh = po + h * plane;
            for (int64_t i = 0; i < plane; ++i) oh[i] = row[buckets[i]];
        }
    }
    return Tensor(std::move(node));
}

// ---- losses / reductions ----

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets) {
    const auto& ln = logits.node();
    const int64_t v = ln->shape.back();
    const int64_t rows = ln->numel() / v;
    if (static_cast<int64_t>(targets.size()) != rows)
        throw ContractError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                            std::to_string(rows) + " logit rows");
    for (int t : targets)
        if (t < 0 || t >= v) throw ContractError("cross_entropy: target id out of vocabulary");

    auto node = make_op_node({}, {ln}, [targets, rows, v](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        const double g0 = self.grad[0] / static_cast<double>(rows);
        const double* x = p.data.data();
        double* gp = p.grad.data();
        for (int64_t r = 0; r < rows; ++r) {
            const double* xr = x + r * v;
            double mx = xr[0];
            for (int64_t j = 1; j < v; ++j) mx = std::max(mx, xr[j]);
            double sum = 0.0;
            for (int64_t j = 0; j < v; ++j) sum += std::exp(xr[j] - mx);
            const double inv = 1.0 / sum;
            double* gr = gp + r * v;
            for (int64_t j = 0; j < v; ++j) gr[j] += g0 * std::exp(xr[j] - mx) * inv;
            gr[targets[r]] -= g0;
        }
    });
    {
        const double* x = ln->data.data();
        double total = 0.0;
        for (int64_t r = 0; r < rows; ++r) {
            const double* xr = x + r * v;
            double mx = xr[0];
            for (int64_t j = 1; j < v; ++j) mx = std::max(mx, xr[j]);
            double sum = 0.0;
            for (int64_t j = 0; j < v; ++j) sum += std::exp(xr[j] - mx);
            total += mx + std::log(sum) - xr[targets[r]];
        }
        node->data[0] = total / static_cast<double>(rows);
    }
    return Tensor(std::move(node));
}

Tensor sum(const Tensor& x) {
    const auto& xn = x.node();
    const int64_t n = xn->numel();
    auto node = make_op_node({}, {xn}, [n](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        const double g0 = self.grad[0];
        double* gp = p.grad.data();
        for (int64_t i = 0; i < n; ++i) gp[i] += g0;
    });
    double total = 0.0;
    for (double vv : xn->data) total += vv;
    node->data[0] = total;
    return Tensor(std::move(node));
}


Tensor maybe_dropout(const Tensor& x) {
    if (!dropout_active()) return x;
    const double keep_scale = 1.0 / (1.0 - g_dropout_rate);
    std::vector<double> mask(static_cast<size_t>(x.size()));
    for (auto& m : mask) m = g_dropout_rng->next_double() < g_dropout_rate ? 0.0 : keep_scale;
    return mul(x, Tensor::from_data(x.shape(), std::move(mask)));
}

}  // namespace gram
