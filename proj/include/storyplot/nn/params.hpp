#pragma once

#include "storyplot/nn/tape.hpp"

#include <cstdint>
#include <deque>
#include <random>
#include <unordered_map>

namespace storyplot::nn {

struct Rng {
    std::mt19937_64 gen;

    explicit Rng(std::uint64_t seed) : gen(seed) {}

    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(gen);
    }
    std::uint64_t next_u64() { return gen(); }
    int next_int(int lo, int hi) {  // inclusive bounds
        return std::uniform_int_distribution<int>(lo, hi)(gen);
    }
};

// Owns named parameter tensors in a stable registration order. Addresses stay
// valid for the lifetime of the set (deque storage), so models hold raw
// pointers into it.
class ParamSet {
public:
    ParamSet() = default;
    // Copying would leave the name index pointing into the source's storage.
    ParamSet(const ParamSet&) = delete;
    ParamSet& operator=(const ParamSet&) = delete;
    ParamSet(ParamSet&&) = default;
    ParamSet& operator=(ParamSet&&) = default;

    Tensor& add(const std::string& name, Eigen::Index rows, Eigen::Index cols);
    Tensor* find(const std::string& name);
    const Tensor* find(const std::string& name) const;
    std::vector<Tensor*> all();
    std::vector<const Tensor*> all() const;
    void zero_grads();
    std::size_t size() const { return tensors_.size(); }

private:
    std::deque<Tensor> tensors_;
    std::unordered_map<std::string, Tensor*> by_name_;
};

void init_uniform(Tensor& t, double lo, double hi, Rng& rng);
// Glorot/fan-balanced uniform init for weight matrices.
void init_glorot(Tensor& t, Rng& rng);

// Checkpoint container: <prefix>.json manifest (names, shapes, byte offsets)
// next to <prefix>.bin holding the raw little-endian float64 values in
// manifest order.
void save_checkpoint(const ParamSet& params, const std::string& prefix);
// Loads into an already-constructed ParamSet; every manifest tensor must
// exist with the same shape, and vice versa.
void load_checkpoint(ParamSet& params, const std::string& prefix);

}  // namespace storyplot::nn
