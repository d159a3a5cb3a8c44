#pragma once

#include <array>
#include <string>
#include <vector>

#include "storyplot/nn/adam.hpp"
#include "storyplot/nn/params.hpp"
#include "storyplot/vocab.hpp"

namespace storyplot {

inline constexpr int kImagesPerSequence = 5;

struct Detection {
    std::string label;       // lowercase noun
    double confidence = 0.0; // in [0,1]
    int image_index = 0;     // 0..4
};

struct FrameSpan {
    std::string label; // semantic verb frame
    std::string head;  // governed noun pair, reading order
    std::string tail;
};

struct AnnotatedSentence {
    std::vector<std::string> tokens;
    std::vector<std::string> nouns;       // ordered sublist of tokens
    std::vector<FrameSpan> frame_spans;
};

struct NvnTuple {
    std::string head;
    std::string frame;
    std::string tail;

    bool operator==(const NvnTuple&) const = default;
    auto operator<=>(const NvnTuple&) const = default;
};

struct GoldenStoryline {
    std::vector<NvnTuple> hops;
    int sentence_count = 0;

    bool operator==(const GoldenStoryline&) const = default;
};

struct StoryElements {
    std::array<std::vector<std::string>, kImagesPerSequence> objects;
    std::array<std::vector<std::string>, kImagesPerSequence> terms;

    bool empty() const;
};

// Top-5 detections per image by confidence; duplicate labels within an image
// collapse to their best-scoring instance first. Ties go to the
// lexicographically smaller label.
std::array<std::vector<std::string>, kImagesPerSequence> select_objects(
    const std::vector<Detection>& detections);

// Links consecutive nouns in reading order. A pair governed by one of the
// sentence's frame spans carries that frame, anything else falls back to
// empty_frame. Fewer than two nouns yield nothing.
std::vector<NvnTuple> extract_nvn_tuples(const AnnotatedSentence& sentence);

// Concatenates the per-sentence chains and wires them together with
// transition tokens: <s0> opens the story, <s_i> closes sentence i and opens
// sentence i+1, <sL> ends the story. Throws if a sentence has no nouns.
GoldenStoryline build_golden_storyline(const std::vector<AnnotatedSentence>& story);

// True when hops form a connected chain with strictly increasing transition
// tails ending at <sL>; used by tests and by storyline ingestion.
bool golden_invariants_hold(const GoldenStoryline& g);

// Predicts story-oriented nouns from an image's object bag. The object bag is
// mean-pooled over an embedding table, passed through one tanh layer and a
// per-noun sigmoid scoring head.
class TermPredictor {
public:
    struct Config {
        int embed_dim = 16;
        int hidden_dim = 32;
        int epochs = 100;
        double lr = 0.05;
        int top_k = 3;
    };

    using Pair = std::pair<std::vector<std::string>, std::vector<std::string>>;

    // `noun_vocab` must cover both bag tokens and reference nouns of every
    // training pair; anything outside it is an error.
    static TermPredictor train(const std::vector<Pair>& pairs,
                               const std::vector<std::string>& noun_vocab,
                               const Config& cfg, std::uint64_t seed);

    // Scores every vocabulary noun against the bag and returns the top-k,
    // ties broken by lexicographic token order. Bag tokens outside the
    // vocabulary are dropped.
    std::vector<std::string> predict(const std::vector<std::string>& object_bag) const;

    // Per-epoch mean binary cross-entropy recorded during training.
    const std::vector<double>& loss_curve() const { return loss_curve_; }
    const Vocab& vocab() const { return vocab_; }
    int top_k() const { return cfg_.top_k; }

private:
    TermPredictor() = default;

    Eigen::VectorXd score_bag(const std::vector<std::string>& bag) const;

    Config cfg_;
    Vocab vocab_;
    nn::ParamSet params_;
    std::vector<double> loss_curve_;
};

// Full story-elements pass for one sequence: objects from detections, terms
// from the trained predictor.
StoryElements make_story_elements(const std::vector<Detection>& detections,
                                  const TermPredictor& terms_model);

}  // namespace storyplot
