// Reverse-mode automatic differentiation over dense 2-D double arrays.
// Eager evaluation; every op records a backward closure, and
// backward(root) runs the tape in reverse creation order. Higher-rank
// data (e.g. N_I x P x H x W attention stacks) is carried as flattened
// 2-D views by convention.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace sid::ad {

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
    std::size_t rows = 0, cols = 0;
    std::vector<double> val;
    std::vector<double> grad;  // sized lazily during backward
    bool requires_grad = false;
    std::vector<NodePtr> parents;
    std::function<void(Node&)> backfn;
    std::uint64_t id = 0;

    std::size_t size() const { return rows * cols; }
    void ensure_grad();
};

class Var {
public:
    Var() = default;
    explicit Var(NodePtr n) : n_(std::move(n)) {}

    bool defined() const { return n_ != nullptr; }
    std::size_t rows() const { return n_->rows; }
    std::size_t cols() const { return n_->cols; }
    std::size_t size() const { return n_->size(); }
    std::vector<double>& val() const { return n_->val; }
    std::vector<double>& grad() const { return n_->grad; }
    double item() const { return n_->val[0]; }
    const NodePtr& node() const { return n_; }

private:
    NodePtr n_;
};

// Leaves.
Var constant(std::size_t rows, std::size_t cols, std::vector<double> data);
Var constant(std::size_t rows, std::size_t cols, double fill = 0.0);
Var scalar(double v);
Var parameter(std::size_t rows, std::size_t cols, std::vector<double> data);

// Elementwise (same-shape unless noted).
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var neg(const Var& a);
Var add_scalar(const Var& a, double s);
Var mul_scalar(const Var& a, double s);
Var add_rowvec(const Var& a, const Var& r);  // r is (1, cols)
Var minimum(const Var& a, const Var& b);
Var maximum(const Var& a, const Var& b);
Var maximum_scalar(const Var& a, double s);
Var relu(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);  // clamps argument at 1e-300
Var sigmoid(const Var& a);
Var log_sigmoid(const Var& a);
Var abs(const Var& a);

// Linear algebra / reshuffling.
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var reshape(const Var& a, std::size_t rows, std::size_t cols);
Var slice_rows(const Var& a, std::size_t start, std::size_t len);
Var slice_cols(const Var& a, std::size_t start, std::size_t len);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var gather_rows(const Var& a, const std::vector<int>& idx);
// General gather over the flattened value array; index -1 reads 0
// (used for padded im2col).
Var gather_flat(const Var& a, std::size_t rows, std::size_t cols,
                const std::vector<long>& idx);

// Reductions and row-wise transforms.
Var sum(const Var& a);
Var mean(const Var& a);
Var sum_rows(const Var& a);  // (r,c) -> (r,1)
Var softmax_rows(const Var& a);
Var layernorm_rows(const Var& a, const Var& gamma, const Var& beta, double eps = 1e-5);

// Stable binary cross-entropy from logits against constant targets,
// elementwise: max(x,0) - x*t + log(1+exp(-|x|)).
Var bce_with_logits(const Var& logits, const std::vector<double>& targets);

// Runs reverse accumulation from a scalar root (seed gradient 1).
void backward(const Var& root);

}  // namespace sid::ad
