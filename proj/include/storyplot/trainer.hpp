#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "storyplot/evaluator.hpp"
#include "storyplot/generator.hpp"
#include "storyplot/nn/adam.hpp"

namespace storyplot {

struct TrainConfig {
    int total_epochs = 60;
    int reward_start_epoch = 30;  // reward kicks in strictly after this epoch
    double c = 1.5;               // reward offset, R = c - p
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 0;
    int batch_size = 1;  // stories per step
};

// Throws unless 0 < reward_start_epoch < total_epochs and c > 1.
void validate(const TrainConfig& tc);

// One training story: encoder token lists (one per event, already
// linearized) and the aligned reference sentences.
struct StoryExample {
    std::vector<std::vector<std::string>> events;
    std::vector<std::vector<std::string>> sentences;
};

StoryExample make_story_example(const Storyline& storyline,
                                const std::vector<std::vector<std::string>>& sentences);

struct LossReport {
    int epoch = 0;
    std::vector<double> sentence_losses;
    double story_mle = 0.0;
    double multiplier = 1.0;   // 1 until the reward phase starts
    double story_loss = 0.0;   // multiplier * story_mle, the value optimized
    Story generated;           // greedy story under the post-sentence-update weights
};

// Teacher-forced negative log-likelihood of one reference sentence, summed
// over its tokens (end marker included).
double sentence_loss(GeneratorModel& model, const std::vector<std::string>& event_tokens,
                     const std::vector<std::string>& y_prev_ref,
                     const std::vector<std::string>& y_ref);

// Mean of the per-sentence losses where sentence i is conditioned on the
// model's own regenerated sentence i-1 instead of the reference.
double story_loss(GeneratorModel& model, const std::vector<std::vector<std::string>>& events,
                  const std::vector<std::vector<std::string>>& ref_sentences);
double story_loss(GeneratorModel& model, const Storyline& storyline,
                  const std::vector<std::vector<std::string>>& ref_sentences);

// One training step on one story: L sentence-level Adam updates, then one
// story-level update whose loss is scaled by the evaluator reward when
// reward_start_epoch < epoch <= total_epochs. The evaluator is read, never
// updated; it may be null before the reward phase.
LossReport step_epoch(GeneratorModel& gen, const EvaluatorModel* evaluator,
                      const StoryExample& ex, nn::Adam& opt, int epoch, const TrainConfig& tc);

// Full schedule over the data, one step_epoch per story per epoch. Writes
// one `epoch=.. step=.. J_sen=.. J_story=.. mult=..` line per step to `log`
// when given.
std::vector<LossReport> train_story_generator(GeneratorModel& gen, const EvaluatorModel* evaluator,
                                              const std::vector<StoryExample>& data,
                                              const TrainConfig& tc, std::ostream* log = nullptr);

std::string format_train_log_line(int epoch, int step, double j_sen, double j_story, double mult);

// Central-difference check of `loss` against the gradients it accumulates.
// loss(true) must rebuild the graph, run backward into the tensors' grad
// buffers and return the value; loss(false) is forward only. Returns the
// worst relative error over `probes` sampled coordinates per tensor.
double grad_check(const std::function<double(bool accumulate)>& loss,
                  const std::vector<nn::Tensor*>& params, double step = 1e-5, int probes = 5,
                  std::uint64_t seed = 0);

}  // namespace storyplot
