#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "storyplot/corpus.hpp"

namespace storyplot {

// Deduplicated triple store with ordered containers throughout, so iteration
// order never depends on insertion order.
class KnowledgeGraph {
public:
    void add(const NvnTuple& t);

    bool has_edge(const NvnTuple& t) const { return edges_.count(t) > 0; }
    // Outgoing (frame, tail) pairs sorted by (frame, tail).
    const std::vector<std::pair<std::string, std::string>>& outgoing(
        const std::string& head) const;

    const std::set<std::string>& nodes() const { return nodes_; }
    const std::set<std::string>& frames() const { return frames_; }
    const std::set<NvnTuple>& edges() const { return edges_; }

    std::size_t node_count() const { return nodes_.size(); }
    std::size_t frame_count() const { return frames_.size(); }
    std::size_t edge_count() const { return edges_.size(); }

    // `nodes=<n> relations=<r> links=<l> links_out=<o>` where links counts
    // edges as incident on both endpoints (|E|*2/|N|) and links_out counts
    // directed out-degree (|E|/|N|), both to 2 decimals.
    std::string stats() const;

private:
    std::set<std::string> nodes_;
    std::set<std::string> frames_;
    std::set<NvnTuple> edges_;
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> adjacency_;
};

KnowledgeGraph build_knowledge_graph(const std::vector<NvnTuple>& triples);
KnowledgeGraph merge(const KnowledgeGraph& g1, const KnowledgeGraph& g2);

struct StoryEntity {
    std::string label;
    int position = 0;  // 0..4 image index, 5 = transition token

    bool operator==(const StoryEntity&) const = default;
    auto operator<=>(const StoryEntity&) const = default;
};

inline constexpr int kTokenPosition = kImagesPerSequence;  // 5

struct StoryRelation {
    StoryEntity head;
    std::string frame;
    StoryEntity tail;

    bool operator==(const StoryRelation&) const = default;
    auto operator<=>(const StoryRelation&) const = default;
};

struct StoryGraph {
    std::vector<StoryEntity> entities;    // sorted, unique
    std::vector<StoryRelation> relations; // sorted, unique
    int max_sentences = 0;                // token nodes run <s0>..<s_max>

    std::vector<StoryRelation> outgoing(const StoryEntity& head) const;
    bool has_entity(const StoryEntity& e) const;
};

inline constexpr int kDefaultMaxSentences = 10;

// Places every object and term at its image position, adds transition token
// nodes <s0>..<sK>, then wires relations three ways: knowledge-graph frames
// between element pairs, an empty_frame fallback between every ordered
// element pair, and token links (<s_i>, empty_frame, a) / (a, empty_frame,
// <s_{i+1}>) for every element a and every i in 0..K-1.
StoryGraph assemble_story_graph(const StoryElements& elements, const KnowledgeGraph& kg,
                                int max_sentences = kDefaultMaxSentences);

}  // namespace storyplot
