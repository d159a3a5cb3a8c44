#include "storyplot/nn/adam.hpp"

#include <cmath>

namespace storyplot::nn {

void Adam::step(const std::vector<Tensor*>& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (Tensor* p : params) {
        State& s = state_[p];
        if (s.m.size() == 0) {
            s.m = Mat::Zero(p->value.rows(), p->value.cols());
            s.v = Mat::Zero(p->value.rows(), p->value.cols());
        }
        s.m = cfg_.beta1 * s.m + (1.0 - cfg_.beta1) * p->grad;
        s.v = cfg_.beta2 * s.v + (1.0 - cfg_.beta2) * p->grad.cwiseProduct(p->grad);
        const Mat mhat = s.m / bc1;
        const Mat vhat = s.v / bc2;
        p->value.array() -= cfg_.lr * mhat.array() / (vhat.array().sqrt() + cfg_.eps);
        p->grad.setZero();
    }
}

}  // namespace storyplot::nn
