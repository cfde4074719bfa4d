#include "pmf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace pmf {

struct TensorImpl {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;  // sized lazily
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorImpl>> parents;
    std::function<void(TensorImpl&)> backprop;

    std::size_t size() const { return values.size(); }
    void ensure_grad() {
        if (grad.empty()) grad.assign(values.size(), 0.0);
    }
};

struct TensorAccess {
    static Tensor wrap(std::shared_ptr<TensorImpl> impl) { return Tensor(std::move(impl)); }
    static const std::shared_ptr<TensorImpl>& ptr(const Tensor& t) { return t.impl_; }
};

namespace {

std::shared_ptr<TensorImpl> new_impl(Shape shape, std::vector<double> values) {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->values = std::move(values);
    return impl;
}

void check_shape_dims(const Shape& s) {
    for (std::size_t d : s)
        if (d == 0) throw ShapeError("zero-sized axis in shape " + shape_str(s));
}

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
    std::ostringstream os;
    os << op << ": incompatible shapes " << shape_str(a) << " and " << shape_str(b);
    throw ShapeError(os.str());
}

/// Build a graph node: requires_grad and edges are recorded only when some
/// input requires gradients.
Tensor make_node(Shape shape, std::vector<double> values, const std::vector<Tensor>& inputs,
                 std::function<void(TensorImpl&)> backprop) {
    auto impl = new_impl(std::move(shape), std::move(values));
    bool needs = false;
    for (const auto& t : inputs) needs = needs || t.requires_grad();
    if (needs) {
        impl->requires_grad = true;
        impl->parents.reserve(inputs.size());
        for (const auto& t : inputs) impl->parents.push_back(TensorAccess::ptr(t));
        impl->backprop = std::move(backprop);
    }
    return TensorAccess::wrap(std::move(impl));
}

// numpy-style broadcast of two shapes (align right, 1 stretches)
Shape broadcast_shape(const char* op, const Shape& a, const Shape& b) {
    const std::size_t n = std::max(a.size(), b.size());
    Shape out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t da = i < n - a.size() ? 1 : a[i - (n - a.size())];
        const std::size_t db = i < n - b.size() ? 1 : b[i - (n - b.size())];
        if (da != db && da != 1 && db != 1) shape_fail(op, a, b);
        out[i] = std::max(da, db);
    }
    return out;
}

// Row-major strides of shape s right-aligned against an output of rank
// out_rank, with 0 on axes s broadcasts over.
std::vector<std::size_t> broadcast_strides(const Shape& s, std::size_t out_rank,
                                           const Shape& out) {
    std::vector<std::size_t> strides(out_rank, 0);
    std::size_t acc = 1;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const std::size_t axis = s.size() - 1 - i;
        const std::size_t out_axis = out_rank - 1 - i;
        strides[out_axis] = (s[axis] == 1 && out[out_axis] != 1) ? 0 : acc;
        acc *= s[axis];
    }
    return strides;
}

template <typename F>
std::vector<double> broadcast_apply(const TensorImpl& a, const TensorImpl& b, const Shape& out,
                                    F&& fn) {
    const std::size_t n = shape_size(out);
    std::vector<double> res(n);
    if (a.shape == b.shape) {
        for (std::size_t i = 0; i < n; ++i) res[i] = fn(a.values[i], b.values[i]);
        return res;
    }
    const std::size_t rank = out.size();
    const auto sa = broadcast_strides(a.shape, rank, out);
    const auto sb = broadcast_strides(b.shape, rank, out);
    std::vector<std::size_t> coord(rank, 0);
    std::size_t ia = 0, ib = 0;
    for (std::size_t i = 0; i < n; ++i) {
        res[i] = fn(a.values[ia], b.values[ib]);
        for (std::size_t axis = rank; axis-- > 0;) {
            ++coord[axis];
            ia += sa[axis];
            ib += sb[axis];
            if (coord[axis] < out[axis]) break;
            ia -= sa[axis] * out[axis];
            ib -= sb[axis] * out[axis];
            coord[axis] = 0;
        }
    }
    return res;
}

// Sum src (shaped `from`) into dst (shaped `to`, broadcastable to `from`).
void reduce_into(const std::vector<double>& src, const Shape& from, const Shape& to,
                 std::vector<double>& dst) {
    if (from == to) {
        for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
        return;
    }
    const std::size_t rank = from.size();
    const auto st = broadcast_strides(to, rank, from);
    std::vector<std::size_t> coord(rank, 0);
    std::size_t it = 0;
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[it] += src[i];
        for (std::size_t axis = rank; axis-- > 0;) {
            ++coord[axis];
            it += st[axis];
            if (coord[axis] < from[axis]) break;
            it -= st[axis] * from[axis];
            coord[axis] = 0;
        }
    }
}

template <typename FGradA, typename FGradB>
Tensor binary_broadcast_op(const char* name, const Tensor& a, const Tensor& b,
                           double (*fwd)(double, double), FGradA grad_a, FGradB grad_b) {
    const Shape out_shape = broadcast_shape(name, a.shape(), b.shape());
    auto values = broadcast_apply(*a.impl(), *b.impl(), out_shape, fwd);
    return make_node(
        out_shape, std::move(values), {a, b},
        [grad_a, grad_b, out_shape](TensorImpl& self) {
            TensorImpl& pa = *self.parents[0];
            TensorImpl& pb = *self.parents[1];
            if (pa.requires_grad) {
                std::vector<double> ga =
                    broadcast_apply(pa, pb, out_shape, grad_a);  // d(out)/d(a) elementwise
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= self.grad[i];
                pa.ensure_grad();
                reduce_into(ga, out_shape, pa.shape, pa.grad);
            }
            if (pb.requires_grad) {
                std::vector<double> gb = broadcast_apply(pa, pb, out_shape, grad_b);
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] *= self.grad[i];
                pb.ensure_grad();
                reduce_into(gb, out_shape, pb.shape, pb.grad);
            }
        });
}

// matmul kernels; all accumulate into C
void mm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
           std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m,k] += sum_n X[m,n] * Y[k,n]
void mm_nt(const double* x, const double* y, double* c, std::size_t m, std::size_t n,
           std::size_t k) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* xrow = x + i * n;
        double* crow = c + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double* yrow = y + p * n;
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += xrow[j] * yrow[j];
            crow[p] += s;
        }
    }
}

// C[k,n] += sum_m X[m,k] * Y[m,n]
void mm_tn(const double* x, const double* y, double* c, std::size_t m, std::size_t k,
           std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* xrow = x + i * k;
        const double* yrow = y + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double xv = xrow[p];
            double* crow = c + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += xv * yrow[j];
        }
    }
}

std::vector<double> permute_values(const std::vector<double>& vals, const Shape& shape,
                                   const std::vector<std::size_t>& perm, Shape& out_shape) {
    const std::size_t rank = shape.size();
    out_shape.resize(rank);
    for (std::size_t i = 0; i < rank; ++i) out_shape[i] = shape[perm[i]];
    std::vector<std::size_t> in_strides(rank, 1);
    for (std::size_t i = rank - 1; i-- > 0;) in_strides[i] = in_strides[i + 1] * shape[i + 1];
    std::vector<std::size_t> walk(rank);  // input stride of each output axis
    for (std::size_t i = 0; i < rank; ++i) walk[i] = in_strides[perm[i]];
    std::vector<double> out(vals.size());
    std::vector<std::size_t> coord(rank, 0);
    std::size_t src = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = vals[src];
        for (std::size_t axis = rank; axis-- > 0;) {
            ++coord[axis];
            src += walk[axis];
            if (coord[axis] < out_shape[axis]) break;
            src -= walk[axis] * out_shape[axis];
            coord[axis] = 0;
        }
    }
    return out;
}

template <typename FwdFn, typename GradFn>
Tensor unary_op(const Tensor& a, FwdFn fwd, GradFn dfn) {
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = fwd(a.values()[i]);
    return make_node(a.shape(), std::move(v), {a}, [dfn](TensorImpl& self) {
        TensorImpl& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            p.grad[i] += self.grad[i] * dfn(p.values[i]);
    });
}

double norm_cdf(double x) { return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))); }
double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }

}  // namespace

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ", ";
        os << s[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_size(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

// --------------------------------------------------------------------------
// Tensor basics
// --------------------------------------------------------------------------

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
    return full(shape, 0.0, requires_grad);
}

Tensor Tensor::full(const Shape& shape, double value, bool requires_grad) {
    check_shape_dims(shape);
    auto impl = new_impl(shape, std::vector<double>(shape_size(shape), value));
    impl->requires_grad = requires_grad;
    return TensorAccess::wrap(std::move(impl));
}

Tensor Tensor::from_values(const Shape& shape, std::vector<double> values, bool requires_grad) {
    check_shape_dims(shape);
    if (values.size() != shape_size(shape)) {
        std::ostringstream os;
        os << "from_values: " << values.size() << " values for shape " << shape_str(shape);
        throw ShapeError(os.str());
    }
    auto impl = new_impl(shape, std::move(values));
    impl->requires_grad = requires_grad;
    return TensorAccess::wrap(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    auto impl = new_impl(Shape{}, {value});
    impl->requires_grad = requires_grad;
    return TensorAccess::wrap(std::move(impl));
}

Tensor Tensor::randn(const Shape& shape, Rng& rng, double stddev, bool requires_grad) {
    check_shape_dims(shape);
    std::vector<double> v(shape_size(shape));
    for (double& x : v) x = rng.normal(0.0, stddev);
    auto impl = new_impl(shape, std::move(v));
    impl->requires_grad = requires_grad;
    return TensorAccess::wrap(std::move(impl));
}

const Shape& Tensor::shape() const {
    if (!impl_) throw ShapeError("use of undefined tensor");
    return impl_->shape;
}

std::size_t Tensor::size() const { return impl_ ? impl_->size() : 0; }
std::size_t Tensor::ndim() const { return shape().size(); }
bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

const std::vector<double>& Tensor::values() const {
    if (!impl_) throw ShapeError("use of undefined tensor");
    return impl_->values;
}

std::vector<double>& Tensor::mutable_values() {
    if (!impl_) throw ShapeError("use of undefined tensor");
    return impl_->values;
}

double Tensor::value() const {
    if (size() != 1) throw ShapeError("scalar accessor on tensor of shape " + shape_str(shape()));
    return impl_->values[0];
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

const std::vector<double>& Tensor::grad() const {
    if (!has_grad())
        throw Error("tensor has no gradient (run backward first, or tensor does not require grad)");
    return impl_->grad;
}

void Tensor::zero_grad() {
    if (impl_) impl_->grad.clear();
}

Tensor Tensor::detach() const { return TensorAccess::wrap(new_impl(shape(), values())); }

Tensor Tensor::clone() const {
    auto impl = new_impl(shape(), values());
    impl->requires_grad = requires_grad();
    return TensorAccess::wrap(std::move(impl));
}

void Tensor::backward() const {
    if (!impl_) throw ShapeError("backward on undefined tensor");
    if (impl_->size() != 1)
        throw Error("backward requires a scalar loss, got shape " + shape_str(impl_->shape));

    // postorder DFS, then reverse
    std::vector<TensorImpl*> order;
    std::unordered_set<TensorImpl*> seen;
    std::vector<std::pair<TensorImpl*, std::size_t>> stack;
    stack.emplace_back(impl_.get(), 0);
    seen.insert(impl_.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TensorImpl* p = node->parents[next].get();
            ++next;
            if (seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    impl_->ensure_grad();
    impl_->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorImpl* node = *it;
        if (node->backprop && !node->grad.empty()) node->backprop(*node);
    }
}

// --------------------------------------------------------------------------
// Elementwise and linear ops
// --------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_broadcast_op(
        "add", a, b, +[](double x, double y) { return x + y; },
        [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_broadcast_op(
        "sub", a, b, +[](double x, double y) { return x - y; },
        [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_broadcast_op(
        "mul", a, b, +[](double x, double y) { return x * y; },
        [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double c) {
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = c * a.values()[i];
    return make_node(a.shape(), std::move(v), {a}, [c](TensorImpl& self) {
        TensorImpl& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += c * self.grad[i];
    });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.size() < 2 || sb.size() < 2) shape_fail("matmul", sa, sb);
    const std::size_t m = sa[sa.size() - 2], k = sa[sa.size() - 1];
    const std::size_t kb = sb[sb.size() - 2], n = sb[sb.size() - 1];
    if (k != kb) shape_fail("matmul", sa, sb);

    const Shape batch_a(sa.begin(), sa.end() - 2);
    const Shape batch_b(sb.begin(), sb.end() - 2);
    const Shape batch = broadcast_shape("matmul", batch_a, batch_b);
    Shape out_shape = batch;
    out_shape.push_back(m);
    out_shape.push_back(n);

    const std::size_t n_batch = shape_size(batch);
    const auto stride_a = broadcast_strides(batch_a, batch.size(), batch);
    const auto stride_b = broadcast_strides(batch_b, batch.size(), batch);
    const std::size_t block_a = m * k, block_b = k * n, block_c = m * n;

    // enumerate flat batch offsets for both operands
    std::vector<std::size_t> offs_a(n_batch, 0), offs_b(n_batch, 0);
    {
        std::vector<std::size_t> coord(batch.size(), 0);
        std::size_t ia = 0, ib = 0;
        for (std::size_t i = 0; i < n_batch; ++i) {
            offs_a[i] = ia;
            offs_b[i] = ib;
            for (std::size_t axis = batch.size(); axis-- > 0;) {
                ++coord[axis];
                ia += stride_a[axis];
                ib += stride_b[axis];
                if (coord[axis] < batch[axis]) break;
                ia -= stride_a[axis] * batch[axis];
                ib -= stride_b[axis] * batch[axis];
                coord[axis] = 0;
            }
        }
    }

    std::vector<double> out(n_batch * block_c, 0.0);
    for (std::size_t i = 0; i < n_batch; ++i)
        mm_nn(a.values().data() + offs_a[i] * block_a, b.values().data() + offs_b[i] * block_b,
              out.data() + i * block_c, m, k, n);

    return make_node(out_shape, std::move(out), {a, b},
                     [offs_a, offs_b, n_batch, block_a, block_b, block_c, m, k, n](TensorImpl& self) {
                         TensorImpl& pa = *self.parents[0];
                         TensorImpl& pb = *self.parents[1];
                         if (pa.requires_grad) {
                             pa.ensure_grad();
                             for (std::size_t i = 0; i < n_batch; ++i)
                                 mm_nt(self.grad.data() + i * block_c,
                                       pb.values.data() + offs_b[i] * block_b,
                                       pa.grad.data() + offs_a[i] * block_a, m, n, k);
                         }
                         if (pb.requires_grad) {
                             pb.ensure_grad();
                             for (std::size_t i = 0; i < n_batch; ++i)
                                 mm_tn(pa.values.data() + offs_a[i] * block_a,
                                       self.grad.data() + i * block_c,
                                       pb.grad.data() + offs_b[i] * block_b, m, k, n);
                         }
                     });
}

Tensor transpose(const Tensor& a, const std::vector<std::size_t>& perm) {
    const std::size_t rank = a.ndim();
    if (perm.size() != rank) throw ShapeError("transpose: permutation rank mismatch");
    std::vector<bool> seen(rank, false);
    for (std::size_t p : perm) {
        if (p >= rank || seen[p]) throw ShapeError("transpose: invalid permutation");
        seen[p] = true;
    }
    Shape out_shape;
    auto values = permute_values(a.values(), a.shape(), perm, out_shape);
    std::vector<std::size_t> inv(rank);
    for (std::size_t i = 0; i < rank; ++i) inv[perm[i]] = i;
    return make_node(out_shape, std::move(values), {a}, [inv, out_shape](TensorImpl& self) {
        TensorImpl& p = *self.parents[0];
        if (!p.requires_grad) return;
        Shape back_shape;
        auto g = permute_values(self.grad, out_shape, inv, back_shape);
        p.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) p.grad[i] += g[i];
    });
}

Tensor transpose(const Tensor& a) {
    if (a.ndim() < 2) throw ShapeError("transpose: need at least 2 axes, got " + shape_str(a.shape()));
    std::vector<std::size_t> perm(a.ndim());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::swap(perm[perm.size() - 1], perm[perm.size() - 2]);
    return transpose(a, perm);
}

Tensor reshape(const Tensor& a, const Shape& shape) {
    check_shape_dims(shape);
    if (shape_size(shape) != a.size()) shape_fail("reshape", a.shape(), shape);
    return make_node(shape, a.values(), {a}, [](TensorImpl& self) {
        TensorImpl& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
    });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const Shape& first = parts[0].shape();
    if (axis >= first.size()) throw ShapeError("concat: axis out of range");
    Shape out_shape = first;
    std::size_t total_axis = 0;
    for (const auto& t : parts) {
        const Shape& s = t.shape();
        if (s.size() != first.size()) shape_fail("concat", first, s);
        for (std::size_t i = 0; i < s.size(); ++i)
            if (i != axis && s[i] != first[i]) shape_fail("concat", first, s);
        total_axis += s[axis];
    }
    out_shape[axis] = total_axis;

    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
    for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];

    std::vector<double> out(shape_size(out_shape));
    const std::size_t out_row = total_axis * inner;
    std::size_t col_off = 0;
    std::vector<std::size_t> offsets(parts.size());
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
        offsets[pi] = col_off;
        const auto& vals = parts[pi].values();
        const std::size_t part_row = parts[pi].shape()[axis] * inner;
        for (std::size_t o = 0; o < outer; ++o)
            std::copy_n(vals.data() + o * part_row, part_row,
                        out.data() + o * out_row + col_off * inner);
        col_off += parts[pi].shape()[axis];
    }

    return make_node(out_shape, std::move(out), parts,
                     [offsets, outer, inner, out_row, axis](TensorImpl& self) {
                         for (std::size_t pi = 0; pi < self.parents.size(); ++pi) {
                             TensorImpl& p = *self.parents[pi];
                             if (!p.requires_grad) continue;
                             p.ensure_grad();
                             const std::size_t part_row = p.shape[axis] * inner;
                             for (std::size_t o = 0; o < outer; ++o) {
                                 const double* src =
                                     self.grad.data() + o * out_row + offsets[pi] * inner;
                                 double* dst = p.grad.data() + o * part_row;
                                 for (std::size_t i = 0; i < part_row; ++i) dst[i] += src[i];
                             }
                         }
                     });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t end) {
    const Shape& s = a.shape();
    if (axis >= s.size()) throw ShapeError("slice: axis out of range for " + shape_str(s));
    if (start >= end || end > s[axis]) {
        std::ostringstream os;
        os << "slice: range [" << start << ", " << end << ") invalid for axis of size " << s[axis];
        throw ShapeError(os.str());
    }
    Shape out_shape = s;
    out_shape[axis] = end - start;
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
    const std::size_t in_row = s[axis] * inner;
    const std::size_t out_row = (end - start) * inner;

    std::vector<double> out(shape_size(out_shape));
    for (std::size_t o = 0; o < outer; ++o)
        std::copy_n(a.values().data() + o * in_row + start * inner, out_row,
                    out.data() + o * out_row);

    return make_node(out_shape, std::move(out), {a},
                     [outer, inner, in_row, out_row, start](TensorImpl& self) {
                         TensorImpl& p = *self.parents[0];
                         if (!p.requires_grad) return;
                         p.ensure_grad();
                         for (std::size_t o = 0; o < outer; ++o) {
                             const double* src = self.grad.data() + o * out_row;
                             double* dst = p.grad.data() + o * in_row + start * inner;
                             for (std::size_t i = 0; i < out_row; ++i) dst[i] += src[i];
                         }
                     });
}

Tensor rows(const Tensor& table, const std::vector<std::size_t>& ids) {
    if (table.ndim() != 2) throw ShapeError("rows: table must be 2-D, got " + shape_str(table.shape()));
    const std::size_t r = table.shape()[0], c = table.shape()[1];
    for (std::size_t id : ids)
        if (id >= r) {
            std::ostringstream os;
            os << "rows: index " << id << " out of range for table with " << r << " rows";
            throw ShapeError(os.str());
        }
    if (ids.empty()) throw ShapeError("rows: empty index list");
    std::vector<double> out(ids.size() * c);
    for (std::size_t i = 0; i < ids.size(); ++i)
        std::copy_n(table.values().data() + ids[i] * c, c, out.data() + i * c);
    return make_node(Shape{ids.size(), c}, std::move(out), {table}, [ids, c](TensorImpl& self) {
        TensorImpl& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const double* src = self.grad.data() + i * c;
            double* dst = p.grad.data() + ids[i] * c;
            for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
        }
    });
}

Tensor relu(const Tensor& a) {
    return unary_op(
        a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& a) {
    return unary_op(
        a, [](double x) { return x * norm_cdf(x); },
        [](double x) { return norm_cdf(x) + x * norm_pdf(x); });
}

Tensor dropout(const Tensor& a, double keep_prob, Rng& rng) {
    if (keep_prob <= 0.0 || keep_prob > 1.0)
        throw ConfigError("dropout: keep probability must be in (0, 1]");
    if (keep_prob == 1.0) return a;
    std::vector<double> mask(a.size());
    for (double& mi : mask) mi = rng.uniform() < keep_prob ? 1.0 / keep_prob : 0.0;
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] * mask[i];
    return make_node(a.shape(), std::move(v), {a}, [mask](TensorImpl& self) {
        TensorImpl& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i] * mask[i];
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    const Shape& s = x.shape();
    if (s.empty()) throw ShapeError("layer_norm: scalar input");
    const std::size_t n = s.back();
    if (gamma.shape() != Shape{n} || beta.shape() != Shape{n})
        throw ShapeError("layer_norm: affine parameters must have shape [" + std::to_string(n) +
                         "], got " + shape_str(gamma.shape()) + " and " + shape_str(beta.shape()));
    const std::size_t n_rows = x.size() / n;
    std::vector<double> xhat(x.size());
    std::vector<double> inv_std(n_rows);
    std::vector<double> out(x.size());
    for (std::size_t r = 0; r < n_rows; ++r) {
        const double* xr = x.values().data() + r * n;
        double mu = 0.0;
        for (std::size_t i = 0; i < n; ++i) mu += xr[i];
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) var += (xr[i] - mu) * (xr[i] - mu);
        var /= static_cast<double>(n);
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[r] = is;
        for (std::size_t i = 0; i < n; ++i) {
            const double xh = (xr[i] - mu) * is;
            xhat[r * n + i] = xh;
            out[r * n + i] = gamma.values()[i] * xh + beta.values()[i];
        }
    }
    return make_node(
        s, std::move(out), {x, gamma, beta}, [xhat, inv_std, n, n_rows](TensorImpl& self) {
            TensorImpl& px = *self.parents[0];
            TensorImpl& pg = *self.parents[1];
            TensorImpl& pb = *self.parents[2];
            const double nd = static_cast<double>(n);
            if (pg.requires_grad) pg.ensure_grad();
            if (pb.requires_grad) pb.ensure_grad();
            if (px.requires_grad) px.ensure_grad();
            std::vector<double> dxhat(n);
            for (std::size_t r = 0; r < n_rows; ++r) {
                const double* dy = self.grad.data() + r * n;
                const double* xh = xhat.data() + r * n;
                if (pg.requires_grad)
                    for (std::size_t i = 0; i < n; ++i) pg.grad[i] += dy[i] * xh[i];
                if (pb.requires_grad)
                    for (std::size_t i = 0; i < n; ++i) pb.grad[i] += dy[i];
                if (px.requires_grad) {
                    double sum_dx = 0.0, sum_dx_xh = 0.0;
                    for (std::size_t i = 0; i < n; ++i) {
                        dxhat[i] = dy[i] * pg.values[i];
                        sum_dx += dxhat[i];
                        sum_dx_xh += dxhat[i] * xh[i];
                    }
                    double* gx = px.grad.data() + r * n;
                    for (std::size_t i = 0; i < n; ++i)
                        gx[i] += inv_std[r] / nd * (nd * dxhat[i] - sum_dx - xh[i] * sum_dx_xh);
                }
            }
        });
}

Tensor softmax(const Tensor& a) {
    const Shape& s = a.shape();
    if (s.empty()) throw ShapeError("softmax: no axis to normalize on scalar input");
    const std::size_t n = s.back();
    const std::size_t n_rows = a.size() / n;
    std::vector<double> out(a.size());
    for (std::size_t r = 0; r < n_rows; ++r) {
        const double* xr = a.values().data() + r * n;
        double* yr = out.data() + r * n;
        double mx = xr[0];
        for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, xr[i]);
        double z = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            yr[i] = std::exp(xr[i] - mx);
            z += yr[i];
        }
        for (std::size_t i = 0; i < n; ++i) yr[i] /= z;
    }
    std::vector<double> saved = out;
    return make_node(s, std::move(out), {a}, [saved, n, n_rows](TensorImpl& self) {
        TensorImpl& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (std::size_t r = 0; r < n_rows; ++r) {
            const double* dy = self.grad.data() + r * n;
            const double* y = saved.data() + r * n;
            double dot = 0.0;
            for (std::size_t i = 0; i < n; ++i) dot += dy[i] * y[i];
            double* gx = p.grad.data() + r * n;
            for (std::size_t i = 0; i < n; ++i) gx[i] += y[i] * (dy[i] - dot);
        }
    });
}

Tensor mean(const Tensor& a) {
    double s = 0.0;
    for (double v : a.values()) s += v;
    const double inv_n = 1.0 / static_cast<double>(a.size());
    return make_node(Shape{}, {s * inv_n}, {a}, [inv_n](TensorImpl& self) {
        TensorImpl& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        const double g = self.grad[0] * inv_n;
        for (double& gi : p.grad) gi += g;
    });
}

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.values()) s += v;
    return make_node(Shape{}, {s}, {a}, [](TensorImpl& self) {
        TensorImpl& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        const double g = self.grad[0];
        for (double& gi : p.grad) gi += g;
    });
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps) {
    if (eps <= 0.0) throw ConfigError("grad_check: eps must be positive");
    Tensor probe = Tensor::from_values(x.shape(), x.values(), true);
    Tensor loss = f(probe);
    if (loss.size() != 1)
        throw Error("grad_check: f must be scalar-valued, got shape " + shape_str(loss.shape()));
    loss.backward();
    const std::vector<double> g_ad = probe.grad();

    std::vector<double> vals = x.values();
    double worst = 0.0;
    for (std::size_t i = 0; i < vals.size(); ++i) {
        const double keep = vals[i];
        vals[i] = keep + eps;
        const double fp = f(Tensor::from_values(x.shape(), vals)).value();
        vals[i] = keep - eps;
        const double fm = f(Tensor::from_values(x.shape(), vals)).value();
        vals[i] = keep;
        const double g_fd = (fp - fm) / (2.0 * eps);
        const double denom = std::max({1.0, std::abs(g_ad[i]), std::abs(g_fd)});
        worst = std::max(worst, std::abs(g_ad[i] - g_fd) / denom);
    }
    return worst;
}

}  // namespace pmf
