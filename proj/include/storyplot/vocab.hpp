#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace storyplot {

// FNV-1a over the token bytes; used to spread out-of-vocabulary tokens over
// a fixed block of reserved rows.
std::uint64_t fnv1a_hash(const std::string& s);

// Token <-> id map. Out-of-vocabulary policy is fixed at construction:
//   oov_buckets == 0  -> lookup of an unknown token throws
//   oov_buckets == 1  -> every unknown token maps to one shared bucket
//   oov_buckets  > 1  -> unknown tokens are hashed over that many buckets
// Bucket ids sit after the known ids, so size() == known + oov_buckets.
class Vocab {
public:
    explicit Vocab(int oov_buckets = 0) : oov_buckets_(oov_buckets) {
        if (oov_buckets < 0) throw std::invalid_argument("vocab: negative oov bucket count");
    }

    int add(const std::string& token);          // idempotent
    int id(const std::string& token) const;     // applies the oov policy
    bool contains(const std::string& token) const;

    // Name for a known id; bucket ids render as "<oov_k>".
    const std::string& token(int id) const;

    int known_size() const { return static_cast<int>(names_.size()); }
    int oov_buckets() const { return oov_buckets_; }
    int size() const { return known_size() + oov_buckets_; }

    const std::vector<std::string>& tokens() const { return names_; }

private:
    std::unordered_map<std::string, int> ids_;
    std::vector<std::string> names_;
    mutable std::vector<std::string> bucket_names_;
    int oov_buckets_ = 0;
};

}  // namespace storyplot
