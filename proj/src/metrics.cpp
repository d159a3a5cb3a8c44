#include "storyplot/metrics.hpp"

#include <set>
#include <stdexcept>
#include <unordered_set>

#include "storyplot/kgraph.hpp"

namespace storyplot {

namespace {

double factor_count(const std::vector<std::string>& tokens, double threshold) {
    double factors = 0.0;
    std::unordered_set<std::string> types;
    std::size_t span = 0;
    double ttr = 1.0;
    for (const auto& tok : tokens) {
        types.insert(tok);
        span += 1;
        ttr = static_cast<double>(types.size()) / static_cast<double>(span);
        if (ttr < threshold) {
            factors += 1.0;
            types.clear();
            span = 0;
        }
    }
    if (span > 0) factors += (1.0 - ttr) / (1.0 - threshold);
    return factors;
}

}  // namespace

double mtld(const std::vector<std::string>& tokens, double threshold) {
    if (tokens.empty()) throw std::runtime_error("mtld: no tokens");
    if (threshold <= 0.0 || threshold >= 1.0) throw std::runtime_error("mtld: threshold outside (0,1)");

    const std::vector<std::string> reversed(tokens.rbegin(), tokens.rend());
    const double n = static_cast<double>(tokens.size());
    double total = 0.0;
    for (const auto* dir : {&tokens, &reversed}) {
        double factors = factor_count(*dir, threshold);
        if (factors == 0.0) throw std::runtime_error("mtld: zero diversity factors");
        total += n / factors;
    }
    return total / 2.0;
}

StoryStats story_stats(const std::vector<Storyline>& storylines, const std::vector<Story>& stories) {
    if (storylines.size() != stories.size()) {
        throw std::runtime_error("story_stats: " + std::to_string(storylines.size()) +
                                 " storylines vs " + std::to_string(stories.size()) + " stories");
    }
    if (stories.empty()) throw std::runtime_error("story_stats: no stories");

    double sentence_total = 0.0;
    std::size_t multi = 0;
    for (std::size_t k = 0; k < stories.size(); ++k) {
        sentence_total += static_cast<double>(stories[k].sentences.size());
        bool has_multi_image_event = false;
        for (const auto& event : storylines[k].events) {
            std::set<int> positions;
            for (const auto& hop : event) {
                if (hop.head.position != kTokenPosition) positions.insert(hop.head.position);
                if (hop.relation.tail_position != kTokenPosition) positions.insert(hop.relation.tail_position);
            }
            if (positions.size() >= 2) {
                has_multi_image_event = true;
                break;
            }
        }
        if (has_multi_image_event) multi += 1;
    }

    StoryStats out;
    out.mean_sentence_count = sentence_total / static_cast<double>(stories.size());
    out.multi_image_event_ratio = static_cast<double>(multi) / static_cast<double>(stories.size());
    return out;
}

}  // namespace storyplot
