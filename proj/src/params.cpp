#include "storyplot/nn/params.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>

namespace storyplot::nn {

Tensor& ParamSet::add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    if (by_name_.count(name)) {
        throw std::invalid_argument("ParamSet: duplicate tensor name " + name);
    }
    tensors_.emplace_back(name, rows, cols);
    Tensor* t = &tensors_.back();
    by_name_[name] = t;
    return *t;
}

Tensor* ParamSet::find(const std::string& name) {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
}

const Tensor* ParamSet::find(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
}

std::vector<Tensor*> ParamSet::all() {
    std::vector<Tensor*> out;
    out.reserve(tensors_.size());
    for (Tensor& t : tensors_) out.push_back(&t);
    return out;
}

std::vector<const Tensor*> ParamSet::all() const {
    std::vector<const Tensor*> out;
    out.reserve(tensors_.size());
    for (const Tensor& t : tensors_) out.push_back(&t);
    return out;
}

void ParamSet::zero_grads() {
    for (Tensor& t : tensors_) t.grad.setZero();
}

void init_uniform(Tensor& t, double lo, double hi, Rng& rng) {
    for (Eigen::Index i = 0; i < t.value.size(); ++i) t.value(i) = rng.uniform(lo, hi);
}

void init_glorot(Tensor& t, Rng& rng) {
    double bound = std::sqrt(6.0 / static_cast<double>(t.value.rows() + t.value.cols()));
    init_uniform(t, -bound, bound, rng);
}

void save_checkpoint(const ParamSet& params, const std::string& prefix) {
    nlohmann::json manifest;
    manifest["format"] = "tensors-v1";
    nlohmann::json list = nlohmann::json::array();
    std::ofstream bin(prefix + ".bin", std::ios::binary | std::ios::trunc);
    if (!bin) throw std::runtime_error("cannot write " + prefix + ".bin");
    std::uint64_t offset = 0;
    for (const Tensor* t : params.all()) {
        nlohmann::json entry;
        entry["name"] = t->name;
        entry["rows"] = t->value.rows();
        entry["cols"] = t->value.cols();
        entry["offset"] = offset;
        list.push_back(entry);
        // Eigen is column-major; write row-major so the manifest shape reads
        // naturally for other tools.
        for (Eigen::Index r = 0; r < t->value.rows(); ++r) {
            for (Eigen::Index c = 0; c < t->value.cols(); ++c) {
                double v = t->value(r, c);
                bin.write(reinterpret_cast<const char*>(&v), sizeof(double));
            }
        }
        offset += static_cast<std::uint64_t>(t->value.size()) * sizeof(double);
    }
    manifest["tensors"] = list;
    std::ofstream mf(prefix + ".json", std::ios::trunc);
    if (!mf) throw std::runtime_error("cannot write " + prefix + ".json");
    mf << manifest.dump(2) << "\n";
}

void load_checkpoint(ParamSet& params, const std::string& prefix) {
    std::ifstream mf(prefix + ".json");
    if (!mf) throw std::runtime_error("cannot open " + prefix + ".json");
    nlohmann::json manifest = nlohmann::json::parse(mf);
    std::ifstream bin(prefix + ".bin", std::ios::binary);
    if (!bin) throw std::runtime_error("cannot open " + prefix + ".bin");

    std::size_t seen = 0;
    for (const auto& entry : manifest.at("tensors")) {
        const std::string name = entry.at("name").get<std::string>();
        Tensor* t = params.find(name);
        if (!t) throw std::runtime_error("checkpoint tensor " + name + " not in model");
        Eigen::Index rows = entry.at("rows").get<Eigen::Index>();
        Eigen::Index cols = entry.at("cols").get<Eigen::Index>();
        if (rows != t->value.rows() || cols != t->value.cols()) {
            throw std::runtime_error("checkpoint tensor " + name + " shape mismatch");
        }
        bin.seekg(static_cast<std::streamoff>(entry.at("offset").get<std::uint64_t>()));
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c) {
                double v;
                bin.read(reinterpret_cast<char*>(&v), sizeof(double));
                t->value(r, c) = v;
            }
        }
        if (!bin) throw std::runtime_error("checkpoint blob truncated at " + name);
        ++seen;
    }
    if (seen != params.size()) {
        throw std::runtime_error("checkpoint covers " + std::to_string(seen) + " of " +
                                 std::to_string(params.size()) + " model tensors");
    }
}

}  // namespace storyplot::nn
