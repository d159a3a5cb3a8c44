#pragma once

#include <Eigen/Dense>

#include <deque>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

// Reverse-mode autodiff over dense double matrices. A Tape owns the nodes of
// one dynamically built computation graph; creation order is a valid
// topological order, so backward() just walks the deque in reverse. All
// learned models in this project (hop scorer, sentence generator, story
// discriminator) are expressed through these ops, so one gradient check
// validates them all.

namespace storyplot::nn {

using Mat = Eigen::MatrixXd;

// A named parameter matrix with a persistent gradient buffer. Lives outside
// any tape; leaf nodes accumulate into `grad` during backward().
struct Tensor {
    std::string name;
    Mat value;
    Mat grad;

    Tensor(std::string n, Eigen::Index rows, Eigen::Index cols)
        : name(std::move(n)), value(Mat::Zero(rows, cols)), grad(Mat::Zero(rows, cols)) {}
};

struct Node {
    Mat value;
    Mat grad;
    std::function<void()> back;  // empty for constants
};

struct Var {
    Node* node = nullptr;

    const Mat& value() const { return node->value; }
    Eigen::Index rows() const { return node->value.rows(); }
    Eigen::Index cols() const { return node->value.cols(); }
    double scalar() const;
};

class Tape {
public:
    Var constant(Mat v);
    Var leaf(Tensor& t);

    Var add(Var a, Var b);
    Var add_n(const std::vector<Var>& xs);
    Var sub(Var a, Var b);
    Var cmul(Var a, Var b);
    // alpha * a + beta (elementwise)
    Var affine(Var a, double alpha, double beta);
    Var scale(Var a, double s) { return affine(a, s, 0.0); }

    Var matmul(Var a, Var b);
    // a * b^T
    Var matmul_nt(Var a, Var b);
    // a^T * b
    Var matmul_tn(Var a, Var b);

    Var tanh(Var a);
    Var sigmoid(Var a);
    Var gelu(Var a);

    Var softmax_rows(Var a);
    // Rowwise layer norm; gain/bias are 1 x cols.
    Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);

    Var vconcat(const std::vector<Var>& parts);
    Var hconcat(const std::vector<Var>& parts);
    Var slice_cols(Var a, Eigen::Index c0, Eigen::Index n);
    Var row(Var a, Eigen::Index i);
    // Gather rows of an embedding table (usually a leaf).
    Var rows(Var table, const std::vector<int>& ids);
    // a + brow broadcast over rows; brow is 1 x cols.
    Var add_rowwise(Var a, Var brow);

    // Summed negative log-softmax of targets[i] over row i of `logits`.
    Var nll_rows(Var logits, const std::vector<int>& targets);
    // Binary cross-entropy on a 1x1 logit against target in {0,1}.
    Var bce_with_logit(Var z, double target);
    Var sum_all(Var a);

    void backward(Var loss);
    std::size_t size() const { return nodes_.size(); }

private:
    std::deque<Node> nodes_;

    Node* alloc(Mat value);
};

// Numerically stable helpers shared with forward-only code paths.
Eigen::VectorXd softmax_vector(const Eigen::VectorXd& z);
double log_sum_exp(const Eigen::VectorXd& z);

}  // namespace storyplot::nn
