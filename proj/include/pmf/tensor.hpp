#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "pmf/errors.hpp"
#include "pmf/rng.hpp"

namespace pmf {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);
std::size_t shape_size(const Shape& s);

struct TensorImpl;

/// Dense double-precision tensor participating in a reverse-mode autodiff
/// graph. Value semantics over a shared node: copying a Tensor copies a
/// handle, not the buffer. Ops record graph edges whenever an operand
/// requires gradients; Tensor::backward walks the graph in reverse
/// topological order.
///
/// Gradients accumulate across backward calls until zero_grad. A graph is
/// single-owner while it is being built and differentiated; tensors that are
/// only read may be shared across threads.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(const Shape& shape, bool requires_grad = false);
    static Tensor full(const Shape& shape, double value, bool requires_grad = false);
    static Tensor from_values(const Shape& shape, std::vector<double> values,
                              bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    /// I.i.d. normal(0, stddev) entries; the usual parameter initializer.
    static Tensor randn(const Shape& shape, Rng& rng, double stddev = 1.0,
                        bool requires_grad = true);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    std::size_t size() const;
    std::size_t ndim() const;
    bool requires_grad() const;

    const std::vector<double>& values() const;
    /// Mutable access for leaf tensors (optimizer updates). Mutating a tensor
    /// that already participates in a recorded graph invalidates that graph.
    std::vector<double>& mutable_values();
    /// Scalar accessor; throws ShapeError unless size() == 1.
    double value() const;

    bool has_grad() const;
    const std::vector<double>& grad() const;
    void zero_grad();

    /// Same values, no graph, no gradient requirement.
    Tensor detach() const;
    /// Deep copy of values (and requires_grad flag), detached from any graph.
    Tensor clone() const;

    /// Reverse-mode sweep from a scalar root. Accumulates into .grad of every
    /// tensor with requires_grad reachable through the graph.
    void backward() const;

    TensorImpl* impl() const { return impl_.get(); }

private:
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<TensorImpl> impl_;

    friend struct TensorAccess;
};

// ---------------------------------------------------------------------------
// Operations. Elementwise ops broadcast numpy-style; matmul treats leading
// axes as (broadcastable) batch dimensions.
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);

/// [..., M, K] x [..., K, N] -> [..., M, N].
Tensor matmul(const Tensor& a, const Tensor& b);

/// Permute axes; perm must be a permutation of [0, ndim).
Tensor transpose(const Tensor& a, const std::vector<std::size_t>& perm);
/// Swap the last two axes.
Tensor transpose(const Tensor& a);

Tensor reshape(const Tensor& a, const Shape& shape);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
/// Rows [start, end) along `axis`.
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t end);
/// Gather rows of a 2-D table; backward scatter-adds.
Tensor rows(const Tensor& table, const std::vector<std::size_t>& ids);

Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);

/// Inverted dropout: each element is kept with probability keep_prob and
/// scaled by 1/keep_prob, so inference needs no rescaling. keep_prob == 1 is
/// the identity and consumes no randomness.
Tensor dropout(const Tensor& a, double keep_prob, Rng& rng);

/// Normalization over the last axis with affine parameters gamma/beta of
/// shape [last_dim]. Variance is biased; epsilon keeps constant rows finite.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

/// Softmax over the last axis.
Tensor softmax(const Tensor& a);

/// Full reductions to a scalar.
Tensor mean(const Tensor& a);
Tensor sum(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

/// Compare reverse-mode gradients of a scalar-valued function against central
/// differences at x. Returns max over coordinates of
/// |g_ad - g_fd| / max(1, |g_ad|, |g_fd|).
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps);

}  // namespace pmf
