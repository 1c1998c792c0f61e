#include "sid/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace sid::ad {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<EMat>;
using ECMap = Eigen::Map<const EMat>;

static std::atomic<std::uint64_t> g_next_id{1};

void Node::ensure_grad() {
    if (grad.size() != size()) grad.assign(size(), 0.0);
}

static NodePtr make_node(std::size_t rows, std::size_t cols) {
    auto n = std::make_shared<Node>();
    n->rows = rows;
    n->cols = cols;
    n->val.assign(rows * cols, 0.0);
    n->id = g_next_id.fetch_add(1);
    return n;
}

static bool any_grad(std::initializer_list<Var> vs) {
    for (const auto& v : vs)
        if (v.node()->requires_grad) return true;
    return false;
}

static void attach(const NodePtr& n, std::initializer_list<Var> parents,
                   std::function<void(Node&)> backfn) {
    bool rg = false;
    for (const auto& p : parents) {
        n->parents.push_back(p.node());
        rg = rg || p.node()->requires_grad;
    }
    n->requires_grad = rg;
    if (rg) n->backfn = std::move(backfn);
}

Var constant(std::size_t rows, std::size_t cols, std::vector<double> data) {
    if (data.size() != rows * cols) throw std::invalid_argument("constant: size mismatch");
    auto n = make_node(rows, cols);
    n->val = std::move(data);
    return Var(n);
}

Var constant(std::size_t rows, std::size_t cols, double fill) {
    auto n = make_node(rows, cols);
    std::fill(n->val.begin(), n->val.end(), fill);
    return Var(n);
}

Var scalar(double v) { return constant(1, 1, std::vector<double>{v}); }

Var parameter(std::size_t rows, std::size_t cols, std::vector<double> data) {
    Var v = constant(rows, cols, std::move(data));
    v.node()->requires_grad = true;
    return v;
}

static void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

// ---------------------------------------------------------------- elementwise

Var add(const Var& a, const Var& b) {
    check_same_shape(a, b, "add");
    auto n = make_node(a.rows(), a.cols());
    for (std::size_t i = 0; i < n->size(); ++i) n->val[i] = a.val()[i] + b.val()[i];
    attach(n, {a, b}, [a, b](Node& out) {
        if (a.node()->requires_grad) {
            a.node()->ensure_grad();
            for (std::size_t i = 0; i < out.size(); ++i) a.grad()[i] += out.grad[i];
        }
        if (b.node()->requires_grad) {
            b.node()->ensure_grad();
            for (std::size_t i = 0; i < out.size(); ++i) b.grad()[i] += out.grad[i];
        }
    });
    return Var(n);
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a, b, "sub");
    auto n = make_node(a.rows(), a.cols());
    for (std::size_t i = 0; i < n->size(); ++i) n->val[i] = a.val()[i] - b.val()[i];
    attach(n, {a, b}, [a, b](Node& out) {
        if (a.node()->requires_grad) {
            a.node()->ensure_grad();
            for (std::size_t i = 0; i < out.size(); ++i) a.grad()[i] += out.grad[i];
        }
        if (b.node()->requires_grad) {
            b.node()->ensure_grad();
            for (std::size_t i = 0; i < out.size(); ++i) b.grad()[i] -= out.grad[i];
        }
    });
    return Var(n);
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a, b, "mul");
    auto n = make_node(a.rows(), a.cols());
    for (std::size_t i = 0; i < n->size(); ++i) n->val[i] = a.val()[i] * b.val()[i];
    attach(n, {a, b}, [a, b](Node& out) {
        if (a.node()->requires_grad) {
            a.node()->ensure_grad();
            for (std::size_t i = 0; i < out.size(); ++i)
                a.grad()[i] += out.grad[i] * b.val()[i];
        }
        if (b.node()->requires_grad) {
            b.node()->ensure_grad();
            for (std::size_t i = 0; i < out.size(); ++i)
                b.grad()[i] += out.grad[i] * a.val()[i];
        }
    });
    return Var(n);
}

Var div(const Var& a, const Var& b) {
    check_same_shape(a, b, "div");
    auto n = make_node(a.rows(), a.cols());
    for (std::size_t i = 0; i < n->size(); ++i) n->val[i] = a.val()[i] / b.val()[i];
    attach(n, {a, b}, [a, b](Node& out) {
        if (a.node()->requires_grad) {
            a.node()->ensure_grad();
            for (std::size_t i = 0; i < out.size(); ++i)
                a.grad()[i] += out.grad[i] / b.val()[i];
        }
        if (b.node()->requires_grad) {
            b.node()->ensure_grad();
            for (std::size_t i = 0; i < out.size(); ++i)
                b.grad()[i] -= out.grad[i] * a.val()[i] / (b.val()[i] * b.val()[i]);
        }
    });
    return Var(n);
}

Var neg(const Var& a) { return mul_scalar(a, -1.0); }

Var add_scalar(const Var& a, double s) {
    auto n = make_node(a.rows(), a.cols());
    for (std::size_t i = 0; i < n->size(); ++i) n->val[i] = a.val()[i] + s;
    attach(n, {a}, [a](Node& out) {
        a.node()->ensure_grad();
        for (std::size_t i = 0; i < out.size(); ++i) a.grad()[i] += out.grad[i];
    });
    return Var(n);
}

Var mul_scalar(const Var& a, double s) {
    auto n = make_node(a.rows(), a.cols());
    for (std::size_t i = 0; i < n->size(); ++i) n->val[i] = a.val()[i] * s;
    attach(n, {a}, [a, s](Node& out) {
        a.node()->ensure_grad();
        for (std::size_t i = 0; i < out.size(); ++i) a.grad()[i] += out.grad[i] * s;
    });
    return Var(n);
}

Var add_rowvec(const Var& a, const Var& r) {
    if (r.rows() != 1 || r.cols() != a.cols())
        throw std::invalid_argument("add_rowvec: shape mismatch");
    auto n = make_node(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            n->val[i * a.cols() + j] = a.val()[i * a.cols() + j] + r.val()[j];
    attach(n, {a, r}, [a, r](Node& out) {
        if (a.node()->requires_grad) {
            a.node()->ensure_grad();
            for (std::size_t i = 0; i < out.size(); ++i) a.grad()[i] += out.grad[i];
        }
        if (r.node()->requires_grad) {
            r.node()->ensure_grad();
            for (std::size_t i = 0; i < out.rows; ++i)
                for (std::size_t j = 0; j < out.cols; ++j)
                    r.grad()[j] += out.grad[i * out.cols + j];
        }
    });
    return Var(n);
}

Var minimum(const Var& a, const Var& b) {
    check_same_shape(a, b, "minimum");
    auto n = make_node(a.rows(), a.cols());
    for (std::size_t i = 0; i < n->size(); ++i)
        n->val[i] = std::min(a.val()[i], b.val()[i]);
    attach(n, {a, b}, [a, b](Node& out) {
        if (a.node()->requires_grad) a.node()->ensure_grad();
        if (b.node()->requires_grad) b.node()->ensure_grad();
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (a.val()[i] <= b.val()[i]) {
                if (a.node()->requires_grad) a.grad()[i] += out.grad[i];
            } else if (b.node()->requires_grad) {
                b.grad()[i] += out.grad[i];
            }
        }
    });
    return Var(n);
}

Var maximum(const Var& a, const Var& b) {
    check_same_shape(a, b, "maximum");
    auto n = make_node(a.rows(), a.cols());
    for (std::size_t i = 0; i < n->size(); ++i)
        n->val[i] = std::max(a.val()[i], b.val()[i]);
    attach(n, {a, b}, [a, b](Node& out) {
        if (a.node()->requires_grad) a.node()->ensure_grad();
        if (b.node()->requires_grad) b.node()->ensure_grad();
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (a.val()[i] >= b.val()[i]) {
                if (a.node()->requires_grad) a.grad()[i] += out.grad[i];
            } else if (b.node()->requires_grad) {
                b.grad()[i] += out.grad[i];
            }
        }
    });
    return Var(n);
}

Var maximum_scalar(const Var& a, double s) {
    auto n = make_node(a.rows(), a.cols());
    for (std::size_t i = 0; i < n->size(); ++i) n->val[i] = std::max(a.val()[i], s);
    attach(n, {a}, [a, s](Node& out) {
        a.node()->ensure_grad();
        for (std::size_t i = 0; i < out.size(); ++i)
            if (a.val()[i] > s) a.grad()[i] += out.grad[i];
    });
    return Var(n);
}

Var relu(const Var& a) { return maximum_scalar(a, 0.0); }

Var exp(const Var& a) {
    auto n = make_node(a.rows(), a.cols());
    for (std::size_t i = 0; i < n->size(); ++i) n->val[i] = std::exp(a.val()[i]);
    attach(n, {a}, [a](Node& out) {
        a.node()->ensure_grad();
        for (std::size_t i = 0; i < out.size(); ++i)
            a.grad()[i] += out.grad[i] * out.val[i];
    });
    return Var(n);
}

Var log(const Var& a) {
    auto n = make_node(a.rows(), a.cols());
    for (std::size_t i = 0; i < n->size(); ++i)
        n->val[i] = std::log(std::max(a.val()[i], 1e-300));
    attach(n, {a}, [a](Node& out) {
        a.node()->ensure_grad();
        for (std::size_t i = 0; i < out.size(); ++i)
            a.grad()[i] += out.grad[i] / std::max(a.val()[i], 1e-300);
    });
    return Var(n);
}

static double sigmoid_scalar(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Var sigmoid(const Var& a) {
    auto n = make_node(a.rows(), a.cols());
    for (std::size_t i = 0; i < n->size(); ++i) n->val[i] = sigmoid_scalar(a.val()[i]);
    attach(n, {a}, [a](Node& out) {
        a.node()->ensure_grad();
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double p = out.val[i];
            a.grad()[i] += out.grad[i] * p * (1.0 - p);
        }
    });
    return Var(n);
}

Var log_sigmoid(const Var& a) {
    // log sigmoid(x) = -softplus(-x) = min(x,0) - log1p(exp(-|x|))
    auto n = make_node(a.rows(), a.cols());
    for (std::size_t i = 0; i < n->size(); ++i) {
        const double x = a.val()[i];
        n->val[i] = std::min(x, 0.0) - std::log1p(std::exp(-std::abs(x)));
    }
    attach(n, {a}, [a](Node& out) {
        a.node()->ensure_grad();
        for (std::size_t i = 0; i < out.size(); ++i)
            a.grad()[i] += out.grad[i] * (1.0 - sigmoid_scalar(a.val()[i]));
    });
    return Var(n);
}

Var abs(const Var& a) {
    auto n = make_node(a.rows(), a.cols());
    for (std::size_t i = 0; i < n->size(); ++i) n->val[i] = std::abs(a.val()[i]);
    attach(n, {a}, [a](Node& out) {
        a.node()->ensure_grad();
        for (std::size_t i = 0; i < out.size(); ++i)
            a.grad()[i] += out.grad[i] * (a.val()[i] >= 0.0 ? 1.0 : -1.0);
    });
    return Var(n);
}

// ------------------------------------------------------------ linear algebra

Var matmul(const Var& a, const Var& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dim mismatch");
    auto n = make_node(a.rows(), b.cols());
    {
        ECMap A(a.val().data(), a.rows(), a.cols());
        ECMap B(b.val().data(), b.rows(), b.cols());
        EMap C(n->val.data(), n->rows, n->cols);
        C.noalias() = A * B;
    }
    attach(n, {a, b}, [a, b](Node& out) {
        ECMap G(out.grad.data(), out.rows, out.cols);
        if (a.node()->requires_grad) {
            a.node()->ensure_grad();
            ECMap B(b.val().data(), b.rows(), b.cols());
            EMap GA(a.grad().data(), a.rows(), a.cols());
            GA.noalias() += G * B.transpose();
        }
        if (b.node()->requires_grad) {
            b.node()->ensure_grad();
            ECMap A(a.val().data(), a.rows(), a.cols());
            EMap GB(b.grad().data(), b.rows(), b.cols());
            GB.noalias() += A.transpose() * G;
        }
    });
    return Var(n);
}

Var transpose(const Var& a) {
    auto n = make_node(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            n->val[j * a.rows() + i] = a.val()[i * a.cols() + j];
    attach(n, {a}, [a](Node& out) {
        a.node()->ensure_grad();
        for (std::size_t i = 0; i < out.rows; ++i)
            for (std::size_t j = 0; j < out.cols; ++j)
                a.grad()[j * out.rows + i] += out.grad[i * out.cols + j];
    });
    return Var(n);
}

Var reshape(const Var& a, std::size_t rows, std::size_t cols) {
    if (rows * cols != a.size()) throw std::invalid_argument("reshape: size mismatch");
    auto n = make_node(rows, cols);
    n->val = a.val();
    attach(n, {a}, [a](Node& out) {
        a.node()->ensure_grad();
        for (std::size_t i = 0; i < out.size(); ++i) a.grad()[i] += out.grad[i];
    });
    return Var(n);
}

Var slice_rows(const Var& a, std::size_t start, std::size_t len) {
    if (start + len > a.rows()) throw std::invalid_argument("slice_rows: out of range");
    auto n = make_node(len, a.cols());
    std::copy(a.val().begin() + start * a.cols(),
              a.val().begin() + (start + len) * a.cols(), n->val.begin());
    attach(n, {a}, [a, start](Node& out) {
        a.node()->ensure_grad();
        for (std::size_t i = 0; i < out.size(); ++i)
            a.grad()[start * out.cols + i] += out.grad[i];
    });
    return Var(n);
}

Var slice_cols(const Var& a, std::size_t start, std::size_t len) {
    if (start + len > a.cols()) throw std::invalid_argument("slice_cols: out of range");
    auto n = make_node(a.rows(), len);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < len; ++j)
            n->val[i * len + j] = a.val()[i * a.cols() + start + j];
    attach(n, {a, }, [a, start](Node& out) {
        a.node()->ensure_grad();
        const std::size_t ac = a.cols();
        for (std::size_t i = 0; i < out.rows; ++i)
            for (std::size_t j = 0; j < out.cols; ++j)
                a.grad()[i * ac + start + j] += out.grad[i * out.cols + j];
    });
    return Var(n);
}

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
    const std::size_t c = parts[0].cols();
    std::size_t r = 0;
    for (const auto& p : parts) {
        if (p.cols() != c) throw std::invalid_argument("concat_rows: col mismatch");
        r += p.rows();
    }
    auto n = make_node(r, c);
    std::size_t off = 0;
    bool rg = false;
    for (const auto& p : parts) {
        std::copy(p.val().begin(), p.val().end(), n->val.begin() + off);
        off += p.size();
        n->parents.push_back(p.node());
        rg = rg || p.node()->requires_grad;
    }
    n->requires_grad = rg;
    if (rg) {
        auto ps = parts;
        n->backfn = [ps](Node& out) {
            std::size_t off = 0;
            for (const auto& p : ps) {
                if (p.node()->requires_grad) {
                    p.node()->ensure_grad();
                    for (std::size_t i = 0; i < p.size(); ++i)
                        p.grad()[i] += out.grad[off + i];
                }
                off += p.size();
            }
        };
    }
    return Var(n);
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
    const std::size_t r = parts[0].rows();
    std::size_t c = 0;
    for (const auto& p : parts) {
        if (p.rows() != r) throw std::invalid_argument("concat_cols: row mismatch");
        c += p.cols();
    }
    auto n = make_node(r, c);
    std::size_t off = 0;
    bool rg = false;
    for (const auto& p : parts) {
        for (std::size_t i = 0; i < r; ++i)
            std::copy(p.val().begin() + i * p.cols(), p.val().begin() + (i + 1) * p.cols(),
                      n->val.begin() + i * c + off);
        off += p.cols();
        n->parents.push_back(p.node());
        rg = rg || p.node()->requires_grad;
    }
    n->requires_grad = rg;
    if (rg) {
        auto ps = parts;
        n->backfn = [ps](Node& out) {
            std::size_t off = 0;
            for (const auto& p : ps) {
                if (p.node()->requires_grad) {
                    p.node()->ensure_grad();
                    for (std::size_t i = 0; i < out.rows; ++i)
                        for (std::size_t j = 0; j < p.cols(); ++j)
                            p.grad()[i * p.cols() + j] += out.grad[i * out.cols + off + j];
                }
                off += p.cols();
            }
        };
    }
    return Var(n);
}

Var gather_rows(const Var& a, const std::vector<int>& idx) {
    auto n = make_node(idx.size(), a.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0 || static_cast<std::size_t>(idx[i]) >= a.rows())
            throw std::invalid_argument("gather_rows: index out of range");
        std::copy(a.val().begin() + idx[i] * a.cols(),
                  a.val().begin() + (idx[i] + 1) * a.cols(), n->val.begin() + i * a.cols());
    }
    attach(n, {a}, [a, idx](Node& out) {
        a.node()->ensure_grad();
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t j = 0; j < out.cols; ++j)
                a.grad()[idx[i] * out.cols + j] += out.grad[i * out.cols + j];
    });
    return Var(n);
}

Var gather_flat(const Var& a, std::size_t rows, std::size_t cols,
                const std::vector<long>& idx) {
    if (idx.size() != rows * cols) throw std::invalid_argument("gather_flat: size mismatch");
    auto n = make_node(rows, cols);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= static_cast<long>(a.size()))
            throw std::invalid_argument("gather_flat: index out of range");
        n->val[i] = idx[i] < 0 ? 0.0 : a.val()[idx[i]];
    }
    // idx captured by shared_ptr to avoid one copy per node.
    auto ip = std::make_shared<std::vector<long>>(idx);
    attach(n, {a}, [a, ip](Node& out) {
        a.node()->ensure_grad();
        for (std::size_t i = 0; i < ip->size(); ++i)
            if ((*ip)[i] >= 0) a.grad()[(*ip)[i]] += out.grad[i];
    });
    return Var(n);
}

// ------------------------------------------------------------------ reductions

Var sum(const Var& a) {
    auto n = make_node(1, 1);
    double s = 0.0;
    for (double v : a.val()) s += v;
    n->val[0] = s;
    attach(n, {a}, [a](Node& out) {
        a.node()->ensure_grad();
        for (std::size_t i = 0; i < a.size(); ++i) a.grad()[i] += out.grad[0];
    });
    return Var(n);
}

Var mean(const Var& a) { return mul_scalar(sum(a), 1.0 / static_cast<double>(a.size())); }

Var sum_rows(const Var& a) {
    auto n = make_node(a.rows(), 1);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += a.val()[i * a.cols() + j];
        n->val[i] = s;
    }
    attach(n, {a}, [a](Node& out) {
        a.node()->ensure_grad();
        const std::size_t c = a.cols();
        for (std::size_t i = 0; i < out.rows; ++i)
            for (std::size_t j = 0; j < c; ++j) a.grad()[i * c + j] += out.grad[i];
    });
    return Var(n);
}

Var softmax_rows(const Var& a) {
    auto n = make_node(a.rows(), a.cols());
    const std::size_t c = a.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double mx = -1e300;
        for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, a.val()[i * c + j]);
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            const double e = std::exp(a.val()[i * c + j] - mx);
            n->val[i * c + j] = e;
            s += e;
        }
        for (std::size_t j = 0; j < c; ++j) n->val[i * c + j] /= s;
    }
    attach(n, {a}, [a](Node& out) {
        a.node()->ensure_grad();
        const std::size_t c = out.cols;
        for (std::size_t i = 0; i < out.rows; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j)
                dot += out.grad[i * c + j] * out.val[i * c + j];
            for (std::size_t j = 0; j < c; ++j)
                a.grad()[i * c + j] +=
                    out.val[i * c + j] * (out.grad[i * c + j] - dot);
        }
    });
    return Var(n);
}

Var layernorm_rows(const Var& a, const Var& gamma, const Var& beta, double eps) {
    if (gamma.rows() != 1 || gamma.cols() != a.cols() || beta.rows() != 1 ||
        beta.cols() != a.cols())
        throw std::invalid_argument("layernorm_rows: affine shape mismatch");
    auto n = make_node(a.rows(), a.cols());
    const std::size_t c = a.cols();
    auto stats = std::make_shared<std::vector<double>>(a.rows() * 2);  // mean, inv-std
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double m = 0.0;
        for (std::size_t j = 0; j < c; ++j) m += a.val()[i * c + j];
        m /= static_cast<double>(c);
        double v = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            const double d = a.val()[i * c + j] - m;
            v += d * d;
        }
        v /= static_cast<double>(c);
        const double inv = 1.0 / std::sqrt(v + eps);
        (*stats)[2 * i] = m;
        (*stats)[2 * i + 1] = inv;
        for (std::size_t j = 0; j < c; ++j)
            n->val[i * c + j] =
                (a.val()[i * c + j] - m) * inv * gamma.val()[j] + beta.val()[j];
    }
    attach(n, {a, gamma, beta}, [a, gamma, beta, stats](Node& out) {
        const std::size_t c = out.cols;
        if (gamma.node()->requires_grad) gamma.node()->ensure_grad();
        if (beta.node()->requires_grad) beta.node()->ensure_grad();
        if (a.node()->requires_grad) a.node()->ensure_grad();
        for (std::size_t i = 0; i < out.rows; ++i) {
            const double m = (*stats)[2 * i], inv = (*stats)[2 * i + 1];
            double sum_dy = 0.0, sum_dyx = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                const double xhat = (a.val()[i * c + j] - m) * inv;
                const double dy = out.grad[i * c + j] * gamma.val()[j];
                sum_dy += dy;
                sum_dyx += dy * xhat;
                if (gamma.node()->requires_grad)
                    gamma.grad()[j] += out.grad[i * c + j] * xhat;
                if (beta.node()->requires_grad) beta.grad()[j] += out.grad[i * c + j];
            }
            if (a.node()->requires_grad) {
                const double nc = static_cast<double>(c);
                for (std::size_t j = 0; j < c; ++j) {
                    const double xhat = (a.val()[i * c + j] - m) * inv;
                    const double dy = out.grad[i * c + j] * gamma.val()[j];
                    a.grad()[i * c + j] +=
                        inv * (dy - sum_dy / nc - xhat * sum_dyx / nc);
                }
            }
        }
    });
    return Var(n);
}

Var bce_with_logits(const Var& logits, const std::vector<double>& targets) {
    if (targets.size() != logits.size())
        throw std::invalid_argument("bce_with_logits: target size mismatch");
    auto n = make_node(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < n->size(); ++i) {
        const double x = logits.val()[i];
        n->val[i] = std::max(x, 0.0) - x * targets[i] + std::log1p(std::exp(-std::abs(x)));
    }
    auto tp = std::make_shared<std::vector<double>>(targets);
    attach(n, {logits}, [logits, tp](Node& out) {
        logits.node()->ensure_grad();
        for (std::size_t i = 0; i < out.size(); ++i)
            logits.grad()[i] += out.grad[i] * (sigmoid_scalar(logits.val()[i]) - (*tp)[i]);
    });
    return Var(n);
}

// -------------------------------------------------------------------- backward

void backward(const Var& root) {
    if (root.size() != 1) throw std::invalid_argument("backward: root must be scalar");
    if (!root.node()->requires_grad) return;
    // Collect the reachable subgraph, then replay in reverse creation order.
    std::vector<NodePtr> nodes;
    std::unordered_set<Node*> seen;
    std::vector<NodePtr> stack{root.node()};
    seen.insert(root.node().get());
    while (!stack.empty()) {
        NodePtr n = stack.back();
        stack.pop_back();
        nodes.push_back(n);
        for (const auto& p : n->parents) {
            if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p);
        }
    }
    std::sort(nodes.begin(), nodes.end(),
              [](const NodePtr& a, const NodePtr& b) { return a->id > b->id; });
    root.node()->ensure_grad();
    root.node()->grad[0] = 1.0;
    for (const auto& n : nodes) {
        if (!n->backfn || n->grad.empty()) continue;
        n->backfn(*n);
    }
}

}  // namespace sid::ad
