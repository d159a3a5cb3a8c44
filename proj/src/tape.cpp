#include "storyplot/nn/tape.hpp"

#include <cmath>

namespace storyplot::nn {

namespace {

void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                    " vs " + std::to_string(b.rows()) + "x" +
                                    std::to_string(b.cols()));
    }
}

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

}  // namespace

double Var::scalar() const {
    if (rows() != 1 || cols() != 1) {
        throw std::logic_error("Var::scalar on non-scalar node");
    }
    return node->value(0, 0);
}

Node* Tape::alloc(Mat value) {
    nodes_.push_back(Node{std::move(value), Mat(), {}});
    Node* n = &nodes_.back();
    n->grad = Mat::Zero(n->value.rows(), n->value.cols());
    return n;
}

Var Tape::constant(Mat v) {
    return Var{alloc(std::move(v))};
}

Var Tape::leaf(Tensor& t) {
    Node* n = alloc(t.value);
    Tensor* tp = &t;
    n->back = [n, tp] { tp->grad += n->grad; };
    return Var{n};
}

Var Tape::add(Var a, Var b) {
    check_same_shape(a, b, "add");
    Node* n = alloc(a.value() + b.value());
    n->back = [n, a, b] {
        a.node->grad += n->grad;
        b.node->grad += n->grad;
    };
    return Var{n};
}

Var Tape::add_n(const std::vector<Var>& xs) {
    if (xs.empty()) throw std::invalid_argument("add_n: empty input");
    Mat v = xs[0].value();
    for (std::size_t i = 1; i < xs.size(); ++i) {
        check_same_shape(xs[0], xs[i], "add_n");
        v += xs[i].value();
    }
    Node* n = alloc(std::move(v));
    std::vector<Var> parents = xs;
    n->back = [n, parents] {
        for (const Var& p : parents) p.node->grad += n->grad;
    };
    return Var{n};
}

Var Tape::sub(Var a, Var b) {
    check_same_shape(a, b, "sub");
    Node* n = alloc(a.value() - b.value());
    n->back = [n, a, b] {
        a.node->grad += n->grad;
        b.node->grad -= n->grad;
    };
    return Var{n};
}

Var Tape::cmul(Var a, Var b) {
    check_same_shape(a, b, "cmul");
    Node* n = alloc(a.value().cwiseProduct(b.value()));
    n->back = [n, a, b] {
        a.node->grad += n->grad.cwiseProduct(b.value());
        b.node->grad += n->grad.cwiseProduct(a.value());
    };
    return Var{n};
}

Var Tape::affine(Var a, double alpha, double beta) {
    Node* n = alloc(alpha * a.value().array() + beta);
    n->back = [n, a, alpha] { a.node->grad += alpha * n->grad; };
    return Var{n};
}

Var Tape::matmul(Var a, Var b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dim mismatch");
    Node* n = alloc(a.value() * b.value());
    n->back = [n, a, b] {
        a.node->grad += n->grad * b.value().transpose();
        b.node->grad += a.value().transpose() * n->grad;
    };
    return Var{n};
}

Var Tape::matmul_nt(Var a, Var b) {
    if (a.cols() != b.cols()) throw std::invalid_argument("matmul_nt: inner dim mismatch");
    Node* n = alloc(a.value() * b.value().transpose());
    n->back = [n, a, b] {
        a.node->grad += n->grad * b.value();
        b.node->grad += n->grad.transpose() * a.value();
    };
    return Var{n};
}

Var Tape::matmul_tn(Var a, Var b) {
    if (a.rows() != b.rows()) throw std::invalid_argument("matmul_tn: inner dim mismatch");
    Node* n = alloc(a.value().transpose() * b.value());
    n->back = [n, a, b] {
        a.node->grad += b.value() * n->grad.transpose();
        b.node->grad += a.value() * n->grad;
    };
    return Var{n};
}

Var Tape::tanh(Var a) {
    Node* n = alloc(a.value().array().tanh());
    n->back = [n, a] {
        a.node->grad.array() += n->grad.array() * (1.0 - n->value.array().square());
    };
    return Var{n};
}

Var Tape::sigmoid(Var a) {
    Node* n = alloc((1.0 / (1.0 + (-a.value().array()).exp())));
    n->back = [n, a] {
        a.node->grad.array() += n->grad.array() * n->value.array() * (1.0 - n->value.array());
    };
    return Var{n};
}

Var Tape::gelu(Var a) {
    Mat v = a.value();
    Mat y(v.rows(), v.cols());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        double x = v(i);
        y(i) = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
    }
    Node* n = alloc(std::move(y));
    n->back = [n, a] {
        const Mat& v = a.value();
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            double x = v(i);
            double d = 0.5 * (1.0 + std::erf(x * kInvSqrt2)) +
                       x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
            a.node->grad(i) += n->grad(i) * d;
        }
    };
    return Var{n};
}

Var Tape::softmax_rows(Var a) {
    Mat y(a.rows(), a.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        y.row(i) = softmax_vector(a.value().row(i).transpose()).transpose();
    }
    Node* n = alloc(std::move(y));
    n->back = [n, a] {
        for (Eigen::Index i = 0; i < n->value.rows(); ++i) {
            auto yi = n->value.row(i).array();
            auto gi = n->grad.row(i).array();
            double dot = (gi * yi).sum();
            a.node->grad.row(i).array() += (gi - dot) * yi;
        }
    };
    return Var{n};
}

Var Tape::layer_norm(Var x, Var gain, Var bias, double eps) {
    if (gain.rows() != 1 || gain.cols() != x.cols() || bias.rows() != 1 ||
        bias.cols() != x.cols()) {
        throw std::invalid_argument("layer_norm: gain/bias must be 1 x cols");
    }
    const Eigen::Index d = x.cols();
    Mat xhat(x.rows(), d);
    Eigen::VectorXd inv_std(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double mu = x.value().row(i).mean();
        double var = (x.value().row(i).array() - mu).square().mean();
        double is = 1.0 / std::sqrt(var + eps);
        inv_std(i) = is;
        xhat.row(i) = (x.value().row(i).array() - mu) * is;
    }
    Mat y = (xhat.array().rowwise() * gain.value().row(0).array()).rowwise() +
            bias.value().row(0).array();
    Node* n = alloc(std::move(y));
    n->back = [n, x, gain, bias, xhat, inv_std] {
        using RowArray = Eigen::Array<double, 1, Eigen::Dynamic>;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            RowArray g = n->grad.row(i).array();
            RowArray xh = xhat.row(i).array();
            bias.node->grad.row(0).array() += g;
            gain.node->grad.row(0).array() += g * xh;
            RowArray dxh = g * gain.value().row(0).array();
            double m1 = dxh.mean();
            double m2 = (dxh * xh).mean();
            x.node->grad.row(i).array() += inv_std(i) * (dxh - m1 - xh * m2);
        }
    };
    return Var{n};
}

Var Tape::vconcat(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("vconcat: empty input");
    Eigen::Index rows = 0;
    for (const Var& p : parts) {
        if (p.cols() != parts[0].cols()) throw std::invalid_argument("vconcat: col mismatch");
        rows += p.rows();
    }
    Mat v(rows, parts[0].cols());
    Eigen::Index r = 0;
    for (const Var& p : parts) {
        v.middleRows(r, p.rows()) = p.value();
        r += p.rows();
    }
    Node* n = alloc(std::move(v));
    std::vector<Var> parents = parts;
    n->back = [n, parents] {
        Eigen::Index r = 0;
        for (const Var& p : parents) {
            p.node->grad += n->grad.middleRows(r, p.rows());
            r += p.rows();
        }
    };
    return Var{n};
}

Var Tape::hconcat(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("hconcat: empty input");
    Eigen::Index cols = 0;
    for (const Var& p : parts) {
        if (p.rows() != parts[0].rows()) throw std::invalid_argument("hconcat: row mismatch");
        cols += p.cols();
    }
    Mat v(parts[0].rows(), cols);
    Eigen::Index c = 0;
    for (const Var& p : parts) {
        v.middleCols(c, p.cols()) = p.value();
        c += p.cols();
    }
    Node* n = alloc(std::move(v));
    std::vector<Var> parents = parts;
    n->back = [n, parents] {
        Eigen::Index c = 0;
        for (const Var& p : parents) {
            p.node->grad += n->grad.middleCols(c, p.cols());
            c += p.cols();
        }
    };
    return Var{n};
}

Var Tape::slice_cols(Var a, Eigen::Index c0, Eigen::Index cn) {
    if (c0 < 0 || c0 + cn > a.cols()) throw std::out_of_range("slice_cols: out of range");
    Node* n = alloc(a.value().middleCols(c0, cn));
    n->back = [n, a, c0, cn] { a.node->grad.middleCols(c0, cn) += n->grad; };
    return Var{n};
}

Var Tape::row(Var a, Eigen::Index i) {
    if (i < 0 || i >= a.rows()) throw std::out_of_range("row: out of range");
    Node* n = alloc(a.value().row(i));
    n->back = [n, a, i] { a.node->grad.row(i) += n->grad; };
    return Var{n};
}

Var Tape::rows(Var table, const std::vector<int>& ids) {
    Mat v(static_cast<Eigen::Index>(ids.size()), table.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= table.rows()) {
            throw std::out_of_range("rows: id " + std::to_string(ids[i]) + " out of range");
        }
        v.row(static_cast<Eigen::Index>(i)) = table.value().row(ids[i]);
    }
    Node* n = alloc(std::move(v));
    std::vector<int> idx = ids;
    n->back = [n, table, idx] {
        for (std::size_t i = 0; i < idx.size(); ++i) {
            table.node->grad.row(idx[i]) += n->grad.row(static_cast<Eigen::Index>(i));
        }
    };
    return Var{n};
}

Var Tape::add_rowwise(Var a, Var brow) {
    if (brow.rows() != 1 || brow.cols() != a.cols()) {
        throw std::invalid_argument("add_rowwise: bias must be 1 x cols");
    }
    Node* n = alloc(a.value().rowwise() + brow.value().row(0));
    n->back = [n, a, brow] {
        a.node->grad += n->grad;
        brow.node->grad.row(0) += n->grad.colwise().sum();
    };
    return Var{n};
}

Var Tape::nll_rows(Var logits, const std::vector<int>& targets) {
    if (static_cast<Eigen::Index>(targets.size()) != logits.rows()) {
        throw std::invalid_argument("nll_rows: one target per row required");
    }
    double loss = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        int t = targets[static_cast<std::size_t>(i)];
        if (t < 0 || t >= logits.cols()) throw std::out_of_range("nll_rows: target out of range");
        Eigen::VectorXd z = logits.value().row(i).transpose();
        loss += log_sum_exp(z) - z(t);
    }
    Node* n = alloc(Mat::Constant(1, 1, loss));
    std::vector<int> tgt = targets;
    n->back = [n, logits, tgt] {
        double g = n->grad(0, 0);
        for (Eigen::Index i = 0; i < logits.rows(); ++i) {
            Eigen::VectorXd p = softmax_vector(logits.value().row(i).transpose());
            p(tgt[static_cast<std::size_t>(i)]) -= 1.0;
            logits.node->grad.row(i) += g * p.transpose();
        }
    };
    return Var{n};
}

Var Tape::bce_with_logit(Var z, double target) {
    if (z.rows() != 1 || z.cols() != 1) throw std::invalid_argument("bce_with_logit: 1x1 only");
    double x = z.value()(0, 0);
    // softplus(x) - target*x, computed stably
    double sp = x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    Node* n = alloc(Mat::Constant(1, 1, sp - target * x));
    n->back = [n, z, target] {
        double x = z.value()(0, 0);
        double s = 1.0 / (1.0 + std::exp(-x));
        z.node->grad(0, 0) += n->grad(0, 0) * (s - target);
    };
    return Var{n};
}

Var Tape::sum_all(Var a) {
    Node* n = alloc(Mat::Constant(1, 1, a.value().sum()));
    n->back = [n, a] { a.node->grad.array() += n->grad(0, 0); };
    return Var{n};
}

void Tape::backward(Var loss) {
    if (loss.rows() != 1 || loss.cols() != 1) {
        throw std::invalid_argument("backward: loss must be 1x1");
    }
    loss.node->grad(0, 0) = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (it->back) it->back();
    }
}

Eigen::VectorXd softmax_vector(const Eigen::VectorXd& z) {
    double m = z.maxCoeff();
    Eigen::VectorXd e = (z.array() - m).exp();
    return e / e.sum();
}

double log_sum_exp(const Eigen::VectorXd& z) {
    double m = z.maxCoeff();
    return m + std::log((z.array() - m).exp().sum());
}

}  // namespace storyplot::nn
