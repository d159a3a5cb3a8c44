#pragma once

#include <string>

#include "storyplot/nn/params.hpp"
#include "storyplot/nn/tape.hpp"

namespace storyplot::nn {

// Gated recurrent cell. States and inputs are row vectors (1 x dim).
struct GruCell {
    Tensor* wz = nullptr;
    Tensor* uz = nullptr;
    Tensor* bz = nullptr;
    Tensor* wr = nullptr;
    Tensor* ur = nullptr;
    Tensor* br = nullptr;
    Tensor* wh = nullptr;
    Tensor* uh = nullptr;
    Tensor* bh = nullptr;

    Eigen::Index input_dim = 0;
    Eigen::Index hidden_dim = 0;

    static GruCell create(ParamSet& ps, const std::string& prefix,
                          Eigen::Index input_dim, Eigen::Index hidden_dim, Rng& rng);
    static GruCell attach(ParamSet& ps, const std::string& prefix,
                          Eigen::Index input_dim, Eigen::Index hidden_dim);

    // x: 1 x input_dim, h: 1 x hidden_dim -> new hidden state 1 x hidden_dim
    Var step(Tape& t, Var x, Var h) const;
};

}  // namespace storyplot::nn
