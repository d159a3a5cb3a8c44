#include "storyplot/kgraph.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

#include "storyplot/tokens.hpp"

namespace storyplot {

void KnowledgeGraph::add(const NvnTuple& t) {
    if (t.head.empty() || t.tail.empty()) {
        throw std::invalid_argument("knowledge graph: empty endpoint");
    }
    if (!edges_.insert(t).second) return;
    nodes_.insert(t.head);
    nodes_.insert(t.tail);
    frames_.insert(t.frame);
    auto& adj = adjacency_[t.head];
    auto entry = std::make_pair(t.frame, t.tail);
    adj.insert(std::lower_bound(adj.begin(), adj.end(), entry), entry);
}

const std::vector<std::pair<std::string, std::string>>& KnowledgeGraph::outgoing(
    const std::string& head) const {
    static const std::vector<std::pair<std::string, std::string>> kNone;
    auto it = adjacency_.find(head);
    return it == adjacency_.end() ? kNone : it->second;
}

std::string KnowledgeGraph::stats() const {
    double links = 0.0;
    double links_out = 0.0;
    if (!nodes_.empty()) {
        links = static_cast<double>(edges_.size()) * 2.0 / static_cast<double>(nodes_.size());
        links_out = static_cast<double>(edges_.size()) / static_cast<double>(nodes_.size());
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "nodes=%zu relations=%zu links=%.2f links_out=%.2f",
                  nodes_.size(), frames_.size(), links, links_out);
    return buf;
}

KnowledgeGraph build_knowledge_graph(const std::vector<NvnTuple>& triples) {
    KnowledgeGraph g;
    for (const NvnTuple& t : triples) g.add(t);
    return g;
}

KnowledgeGraph merge(const KnowledgeGraph& g1, const KnowledgeGraph& g2) {
    KnowledgeGraph g;
    for (const NvnTuple& t : g1.edges()) g.add(t);
    for (const NvnTuple& t : g2.edges()) g.add(t);
    return g;
}

std::vector<StoryRelation> StoryGraph::outgoing(const StoryEntity& head) const {
    StoryRelation lo{head, "", StoryEntity{"", 0}};
    auto it = std::lower_bound(relations.begin(), relations.end(), lo,
                               [](const StoryRelation& a, const StoryRelation& b) {
                                   return a.head < b.head;
                               });
    std::vector<StoryRelation> out;
    for (; it != relations.end() && it->head == head; ++it) out.push_back(*it);
    return out;
}

bool StoryGraph::has_entity(const StoryEntity& e) const {
    return std::binary_search(entities.begin(), entities.end(), e);
}

StoryGraph assemble_story_graph(const StoryElements& elements, const KnowledgeGraph& kg,
                                int max_sentences) {
    if (elements.empty()) {
        throw std::invalid_argument("story graph: no elements in any image");
    }
    if (max_sentences < 1) {
        throw std::invalid_argument("story graph: max_sentences must be positive");
    }

    std::set<StoryEntity> members;
    for (int img = 0; img < kImagesPerSequence; ++img) {
        for (const std::string& label : elements.objects[static_cast<std::size_t>(img)]) {
            members.insert(StoryEntity{label, img});
        }
        for (const std::string& label : elements.terms[static_cast<std::size_t>(img)]) {
            members.insert(StoryEntity{label, img});
        }
    }

    std::set<StoryEntity> entities = members;
    for (int i = 0; i <= max_sentences; ++i) {
        entities.insert(StoryEntity{make_transition_token(i), kTokenPosition});
    }

    std::set<StoryRelation> rels;
    for (const StoryEntity& a : members) {
        for (const StoryEntity& b : members) {
            if (a == b) continue;
            for (const auto& [frame, tail] : kg.outgoing(a.label)) {
                if (tail == b.label) rels.insert(StoryRelation{a, frame, b});
            }
            rels.insert(StoryRelation{a, kEmptyFrame, b});
        }
        for (int i = 0; i < max_sentences; ++i) {
            rels.insert(StoryRelation{StoryEntity{make_transition_token(i), kTokenPosition},
                                      kEmptyFrame, a});
            rels.insert(StoryRelation{
                a, kEmptyFrame, StoryEntity{make_transition_token(i + 1), kTokenPosition}});
        }
    }

    StoryGraph sg;
    sg.max_sentences = max_sentences;
    sg.entities.assign(entities.begin(), entities.end());
    sg.relations.assign(rels.begin(), rels.end());
    return sg;
}

}  // namespace storyplot
