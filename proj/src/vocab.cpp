#include "storyplot/vocab.hpp"

namespace storyplot {

std::uint64_t fnv1a_hash(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= static_cast<std::uint64_t>(c);
        h *= 1099511628211ull;
    }
    return h;
}

int Vocab::add(const std::string& token) {
    auto it = ids_.find(token);
    if (it != ids_.end()) return it->second;
    int id = static_cast<int>(names_.size());
    ids_.emplace(token, id);
    names_.push_back(token);
    return id;
}

int Vocab::id(const std::string& token) const {
    auto it = ids_.find(token);
    if (it != ids_.end()) return it->second;
    if (oov_buckets_ == 0) {
        throw std::out_of_range("vocab: unknown token '" + token + "'");
    }
    std::uint64_t bucket = fnv1a_hash(token) % static_cast<std::uint64_t>(oov_buckets_);
    return known_size() + static_cast<int>(bucket);
}

bool Vocab::contains(const std::string& token) const {
    return ids_.find(token) != ids_.end();
}

const std::string& Vocab::token(int id) const {
    if (id < 0 || id >= size()) throw std::out_of_range("vocab: id out of range");
    if (id < known_size()) return names_[static_cast<std::size_t>(id)];
    if (bucket_names_.empty()) {
        bucket_names_.resize(static_cast<std::size_t>(oov_buckets_));
        for (int k = 0; k < oov_buckets_; ++k) {
            bucket_names_[static_cast<std::size_t>(k)] = "<oov_" + std::to_string(k) + ">";
        }
    }
    return bucket_names_[static_cast<std::size_t>(id - known_size())];
}

}  // namespace storyplot
