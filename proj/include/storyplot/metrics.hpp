#pragma once

#include <string>
#include <vector>

#include "storyplot/generator.hpp"
#include "storyplot/predictor.hpp"

namespace storyplot {

// Measure of lexical diversity: mean factor length of the forward and
// backward scans, where a factor closes once its type-token ratio drops
// below the threshold and the tail contributes a partial factor. Throws
// "zero diversity factors" when a direction never closes a factor (short,
// all-distinct input).
double mtld(const std::vector<std::string>& tokens, double threshold = 0.72);

struct StoryStats {
    double mean_sentence_count = 0.0;
    double multi_image_event_ratio = 0.0;  // stories with an event spanning >= 2 images
};

// Storylines and stories must be aligned pairwise. An event spans multiple
// images when its hop endpoints carry >= 2 distinct image positions;
// transition tokens do not count as a position.
StoryStats story_stats(const std::vector<Storyline>& storylines, const std::vector<Story>& stories);

}  // namespace storyplot
