#pragma once

#include <string>
#include <vector>

#include "storyplot/generator.hpp"
#include "storyplot/nn/gru.hpp"
#include "storyplot/nn/params.hpp"
#include "storyplot/nn/tape.hpp"
#include "storyplot/vocab.hpp"

namespace storyplot {

struct LabeledStory {
    std::vector<std::string> tokens;  // story flattened to one token sequence
    int label = 0;                    // 1 = high quality, 0 = low
};

std::vector<std::string> flatten_story(const Story& story);

struct EvaluatorConfig {
    int word_dim = 50;
    int hidden = 64;
    int oov_buckets = 1;
};

// Story quality classifier: GRU over the flattened story, affine head,
// softmax over {low, high}. The head starts at zero, so an untrained model
// scores every story at exactly 0.5.
struct EvaluatorModel {
    EvaluatorConfig cfg;
    Vocab vocab;
    nn::ParamSet params;
    nn::Tensor* word = nullptr;
    nn::GruCell gru;
    nn::Tensor* head_w = nullptr;  // hidden x 2
    nn::Tensor* head_b = nullptr;  // 1 x 2

    static EvaluatorModel create(const std::vector<std::string>& vocab_tokens,
                                 const EvaluatorConfig& cfg, std::uint64_t seed);
};

// P(high quality); strictly inside (0, 1). Throws on an empty token list.
double score_tokens(const EvaluatorModel& model, const std::vector<std::string>& tokens);
double score_story(const EvaluatorModel& model, const Story& story);

// Reward multiplier for the story loss: low-scoring stories get pushed
// harder. Stays inside (0.5, 1.5) because p does.
double reward(double p);

// Cross-entropy of one labeled story, built on the caller's tape.
nn::Var evaluator_nll(nn::Tape& t, EvaluatorModel& model, const LabeledStory& ex);

struct EvaluatorTrainConfig {
    int epochs = 30;
    double lr = 0.002;
};

// One Adam step per story, in order. Throws unless both labels appear.
std::vector<double> train_evaluator(EvaluatorModel& model, const std::vector<LabeledStory>& data,
                                    const EvaluatorTrainConfig& tc);

double evaluator_accuracy(const EvaluatorModel& model, const std::vector<LabeledStory>& data);

// Crowd rankings over story variants: rank 1 is the best of its group,
// rank 5 the worst.
struct RankedStory {
    std::vector<std::string> tokens;
    int rank = 0;  // 1..5
};

struct StoryRanking {
    std::string sequence_id;
    std::vector<RankedStory> stories;
};

// Rank 1 becomes a positive example, rank 5 a negative one; middle ranks
// carry too little signal and are dropped.
std::vector<LabeledStory> labeled_from_rankings(const std::vector<StoryRanking>& rankings);

void save_evaluator(const EvaluatorModel& model, const std::string& prefix);
EvaluatorModel load_evaluator(const std::string& prefix);

}  // namespace storyplot
