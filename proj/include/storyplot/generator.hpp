#pragma once

#include <string>
#include <vector>

#include "storyplot/nn/params.hpp"
#include "storyplot/nn/tape.hpp"
#include "storyplot/predictor.hpp"
#include "storyplot/vocab.hpp"

namespace storyplot {

// Sentences keep their trailing <eos> marker; strip_eos() gives the bare
// token sequence for conditioning and metrics.
struct Story {
    std::vector<std::vector<std::string>> sentences;

    bool operator==(const Story&) const = default;
};

std::vector<std::string> strip_eos(const std::vector<std::string>& sentence);

struct GeneratorConfig {
    int dim = 64;
    int heads = 2;
    int enc_layers = 2;
    int dec_layers = 2;
    int ffn = 128;
    int max_positions = 64;
    int max_sentence_len = 25;  // content tokens per sentence before the forced stop
};

// Encoder-decoder transformer (pre-norm, learned positions) over word
// tokens. The encoder reads the linearized event followed by the previous
// sentence; the decoder emits one sentence.
struct GeneratorModel {
    GeneratorConfig cfg;
    Vocab vocab;  // closed; unknown tokens collapse to <unk>
    nn::ParamSet params;

    int to_id(const std::string& token) const;

    static GeneratorModel create(const std::vector<std::string>& vocab_tokens,
                                 const GeneratorConfig& cfg, std::uint64_t seed);
};

// Event -> encoder tokens: an <evt> marker, then the hop chain as
// alternating nouns and frames. Transition tokens never appear; the frame is
// dropped on hops that enter or leave a transition token.
std::vector<std::string> encode_event(const std::vector<StorylineHop>& event);

// Greedy decode of one sentence given the linearized event and the previous
// sentence's content tokens. Ties in the argmax go to the lexicographically
// smaller token. Returns content tokens plus the <eos> marker.
std::vector<std::string> generate_sentence(const GeneratorModel& model,
                                           const std::vector<std::string>& event_tokens,
                                           const std::vector<std::string>& y_prev);

// One sentence per storyline event; sentence i is conditioned on event i and
// the previously generated sentence. The token-list overload takes events
// that are already linearized.
Story generate_story(const GeneratorModel& model,
                     const std::vector<std::vector<std::string>>& events);
Story generate_story(const GeneratorModel& model, const Storyline& storyline);

// Teacher-forced negative log-likelihood of `target` (content tokens; the
// <eos> step is counted too), built on the caller's tape.
nn::Var sentence_nll(nn::Tape& t, GeneratorModel& model,
                     const std::vector<std::string>& event_tokens,
                     const std::vector<std::string>& y_prev,
                     const std::vector<std::string>& target);

struct SentenceExample {
    std::vector<std::string> event_tokens;
    std::vector<std::string> y_prev;   // content tokens, empty for the first sentence
    std::vector<std::string> target;   // content tokens
};

// Fraction of teacher-forced steps (including <eos>) whose argmax matches
// the reference.
double token_accuracy(const GeneratorModel& model, const std::vector<SentenceExample>& examples);

void save_generator(const GeneratorModel& model, const std::string& prefix);
GeneratorModel load_generator(const std::string& prefix);

}  // namespace storyplot
