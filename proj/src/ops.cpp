#include "mebm/ops.hpp"

#include "mebm/error.hpp"
#include "mebm/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace mebm::ops {
namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

// Builds the output node; history is recorded only when some input needs it.
Tensor make_result(Shape shape, std::vector<double> value, std::vector<NodePtr> parents,
                   std::function<void(Node&)> rule) {
    auto out = std::make_shared<Node>();
    out->shape = std::move(shape);
    out->value = std::move(value);
    const bool needs = std::any_of(parents.begin(), parents.end(),
                                   [](const NodePtr& p) { return p->requires_grad; });
    if (needs) {
        out->requires_grad = true;
        out->parents = std::move(parents);
        out->backward_fn = std::move(rule);
    }
    return Tensor(std::move(out));
}

bool wants(const NodePtr& p) { return p->requires_grad; }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ConfigError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                          shape_str(b.shape()));
    }
}

void require_matrix(const Tensor& a, const char* op) {
    if (a.rank() != 2) {
        throw ConfigError(std::string(op) + ": expected a matrix, got " + shape_str(a.shape()));
    }
}

}  // namespace

Tensor affine(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    if (x.rank() != 2 || weight.rank() != 2 || bias.rank() != 1 || x.dim(1) != weight.dim(0) ||
        bias.dim(0) != weight.dim(1)) {
        throw ConfigError("affine: shape mismatch x" + shape_str(x.shape()) + " W" +
                          shape_str(weight.shape()) + " b" + shape_str(bias.shape()));
    }
    const std::size_t batch = x.dim(0), in = x.dim(1), out = weight.dim(1);
    const auto& k = kernels::active();
    std::vector<double> y(batch * out);
    for (std::size_t i = 0; i < batch; ++i)
        std::copy(bias.values().begin(), bias.values().end(), y.begin() + i * out);
    k.gemm_nn(batch, out, in, x.values().data(), weight.values().data(), y.data(), true);

    return make_result({batch, out}, std::move(y), {x.node(), weight.node(), bias.node()},
                       [batch, in, out](Node& self) {
                           const auto& kt = kernels::active();
                           Node& xn = *self.parents[0];
                           Node& wn = *self.parents[1];
                           Node& bn = *self.parents[2];
                           const double* g = self.grad.data();
                           if (xn.requires_grad) {
                               kt.gemm_nt(batch, in, out, g, wn.value.data(), xn.grad.data(), true);
                           }
                           if (wn.requires_grad) {
                               kt.gemm_tn(in, out, batch, xn.value.data(), g, wn.grad.data(), true);
                           }
                           if (bn.requires_grad) {
                               for (std::size_t i = 0; i < batch; ++i)
                                   kt.axpy(out, 1.0, g + i * out, bn.grad.data());
                           }
                       });
}

Tensor leaky_relu(const Tensor& x, double slope) {
    if (!(slope >= 0.0 && slope < 1.0)) {
        throw ConfigError("leaky_relu: slope must lie in [0,1), got " + std::to_string(slope));
    }
    std::vector<double> y(x.numel());
    kernels::active().leaky_relu(x.numel(), slope, x.values().data(), y.data());
    return make_result(x.shape(), std::move(y), {x.node()}, [slope](Node& self) {
        Node& xn = *self.parents[0];
        kernels::active().leaky_relu_grad(self.value.size(), slope, xn.value.data(),
                                          self.grad.data(), xn.grad.data());
    });
}

Tensor logsumexp(const Tensor& logits) {
    require_matrix(logits, "logsumexp");
    const std::size_t rows = logits.dim(0), cols = logits.dim(1);
    if (cols == 0) throw ConfigError("logsumexp: needs at least one column");
    const double* v = logits.values().data();
    std::vector<double> out(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        const double* r = v + i * cols;
        const double m = *std::max_element(r, r + cols);
        double s = 0.0;
        for (std::size_t j = 0; j < cols; ++j) s += std::exp(r[j] - m);
        out[i] = m + std::log(s);
    }
    return make_result({rows}, std::move(out), {logits.node()}, [rows, cols](Node& self) {
        Node& ln = *self.parents[0];
        for (std::size_t i = 0; i < rows; ++i) {
            const double g = self.grad[i];
            const double lse = self.value[i];
            for (std::size_t j = 0; j < cols; ++j)
                ln.grad[i * cols + j] += g * std::exp(ln.value[i * cols + j] - lse);
        }
    });
}

Tensor softmax(const Tensor& logits) {
    require_matrix(logits, "softmax");
    const std::size_t rows = logits.dim(0), cols = logits.dim(1);
    const double* v = logits.values().data();
    std::vector<double> out(rows * cols);
    for (std::size_t i = 0; i < rows; ++i) {
        const double* r = v + i * cols;
        const double m = *std::max_element(r, r + cols);
        double s = 0.0;
        for (std::size_t j = 0; j < cols; ++j) s += out[i * cols + j] = std::exp(r[j] - m);
        for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] /= s;
    }
    return make_result(logits.shape(), std::move(out), {logits.node()}, [rows, cols](Node& self) {
        Node& ln = *self.parents[0];
        for (std::size_t i = 0; i < rows; ++i) {
            const double* s = self.value.data() + i * cols;
            const double* g = self.grad.data() + i * cols;
            double inner = 0.0;
            for (std::size_t j = 0; j < cols; ++j) inner += g[j] * s[j];
            for (std::size_t j = 0; j < cols; ++j) ln.grad[i * cols + j] += s[j] * (g[j] - inner);
        }
    });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::int32_t> labels) {
    require_matrix(logits, "softmax_cross_entropy");
    const std::size_t rows = logits.dim(0), cols = logits.dim(1);
    if (labels.size() != rows) {
        throw ConfigError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                          " labels for logits " + shape_str(logits.shape()));
    }
    if (rows == 0) throw ConfigError("softmax_cross_entropy: empty batch");
    for (std::int32_t y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= cols) {
            throw ConfigError("softmax_cross_entropy: label " + std::to_string(y) +
                              " outside [0, " + std::to_string(cols) + ")");
        }
    }
    const Tensor lse = logsumexp(logits.detach());
    std::vector<std::int32_t> ys(labels.begin(), labels.end());
    double total = 0.0;
    for (std::size_t i = 0; i < rows; ++i)
        total += lse[i] - logits.values()[i * cols + static_cast<std::size_t>(ys[i])];
    std::vector<double> lse_values(lse.values().begin(), lse.values().end());
    return make_result(
        {}, {total / static_cast<double>(rows)}, {logits.node()},
        [rows, cols, ys = std::move(ys), lse_values = std::move(lse_values)](Node& self) {
            Node& ln = *self.parents[0];
            const double g = self.grad[0] / static_cast<double>(rows);
            for (std::size_t i = 0; i < rows; ++i) {
                for (std::size_t j = 0; j < cols; ++j) {
                    double p = std::exp(ln.value[i * cols + j] - lse_values[i]);
                    if (j == static_cast<std::size_t>(ys[i])) p -= 1.0;
                    ln.grad[i * cols + j] += g * p;
                }
            }
        });
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> y(a.values().begin(), a.values().end());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += b[i];
    return make_result(a.shape(), std::move(y), {a.node(), b.node()}, [](Node& self) {
        for (std::size_t p = 0; p < 2; ++p) {
            Node& n = *self.parents[p];
            if (!wants(self.parents[p])) continue;
            for (std::size_t i = 0; i < self.grad.size(); ++i) n.grad[i] += self.grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> y(a.values().begin(), a.values().end());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] -= b[i];
    return make_result(a.shape(), std::move(y), {a.node(), b.node()}, [](Node& self) {
        Node& an = *self.parents[0];
        Node& bn = *self.parents[1];
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (an.requires_grad) an.grad[i] += self.grad[i];
            if (bn.requires_grad) bn.grad[i] -= self.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> y(a.numel());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] * b[i];
    return make_result(a.shape(), std::move(y), {a.node(), b.node()}, [](Node& self) {
        Node& an = *self.parents[0];
        Node& bn = *self.parents[1];
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (an.requires_grad) an.grad[i] += self.grad[i] * bn.value[i];
            if (bn.requires_grad) bn.grad[i] += self.grad[i] * an.value[i];
        }
    });
}

Tensor scale(const Tensor& a, double c) {
    std::vector<double> y(a.values().begin(), a.values().end());
    for (double& v : y) v *= c;
    return make_result(a.shape(), std::move(y), {a.node()}, [c](Node& self) {
        Node& an = *self.parents[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i) an.grad[i] += c * self.grad[i];
    });
}

Tensor add_scalar(const Tensor& a, double c) {
    std::vector<double> y(a.values().begin(), a.values().end());
    for (double& v : y) v += c;
    return make_result(a.shape(), std::move(y), {a.node()}, [](Node& self) {
        Node& an = *self.parents[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i) an.grad[i] += self.grad[i];
    });
}

Tensor square(const Tensor& a) {
    std::vector<double> y(a.numel());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] * a[i];
    return make_result(a.shape(), std::move(y), {a.node()}, [](Node& self) {
        Node& an = *self.parents[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            an.grad[i] += 2.0 * an.value[i] * self.grad[i];
    });
}

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.values()) s += v;
    return make_result({}, {s}, {a.node()}, [](Node& self) {
        Node& an = *self.parents[0];
        for (double& g : an.grad) g += self.grad[0];
    });
}

Tensor row_sum(const Tensor& a) {
    require_matrix(a, "row_sum");
    const std::size_t rows = a.dim(0), cols = a.dim(1);
    std::vector<double> y(rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) y[i] += a.values()[i * cols + j];
    return make_result({rows}, std::move(y), {a.node()}, [rows, cols](Node& self) {
        Node& an = *self.parents[0];
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) an.grad[i * cols + j] += self.grad[i];
    });
}

Tensor mean(const Tensor& a) {
    if (a.numel() == 0) throw ConfigError("mean of an empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.numel()) {
        throw ConfigError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                          shape_str(shape));
    }
    std::vector<double> y(a.values().begin(), a.values().end());
    return make_result(std::move(shape), std::move(y), {a.node()}, [](Node& self) {
        Node& an = *self.parents[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i) an.grad[i] += self.grad[i];
    });
}

}  // namespace mebm::ops
