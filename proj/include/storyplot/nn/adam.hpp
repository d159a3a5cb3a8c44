#pragma once

#include "storyplot/nn/params.hpp"

namespace storyplot::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    // One update over the given tensors from their accumulated grads; grads
    // are cleared afterwards. The bias-correction step counter is global.
    void step(const std::vector<Tensor*>& params);

    const AdamConfig& config() const { return cfg_; }

private:
    struct State {
        Mat m;
        Mat v;
    };

    AdamConfig cfg_;
    std::unordered_map<const Tensor*, State> state_;
    long t_ = 0;
};

}  // namespace storyplot::nn
