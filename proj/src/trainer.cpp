#include "storyplot/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <stdexcept>

namespace storyplot {

void validate(const TrainConfig& tc) {
    if (tc.reward_start_epoch <= 0 || tc.reward_start_epoch >= tc.total_epochs) {
        throw std::runtime_error("train config: need 0 < reward_start_epoch < total_epochs");
    }
    if (tc.c <= 1.0) throw std::runtime_error("train config: reward offset c must exceed 1");
    if (tc.batch_size != 1) throw std::runtime_error("train config: only batch_size 1 is supported");
}

double sentence_loss(GeneratorModel& model, const std::vector<std::string>& event_tokens,
                     const std::vector<std::string>& y_prev_ref,
                     const std::vector<std::string>& y_ref) {
    if (y_ref.empty()) throw std::runtime_error("sentence_loss: empty reference sentence");
    nn::Tape t;
    return sentence_nll(t, model, event_tokens, strip_eos(y_prev_ref), strip_eos(y_ref)).scalar();
}

StoryExample make_story_example(const Storyline& storyline,
                                const std::vector<std::vector<std::string>>& sentences) {
    StoryExample ex;
    for (const auto& event : storyline.events) ex.events.push_back(encode_event(event));
    ex.sentences = sentences;
    return ex;
}

namespace {

void check_alignment(const std::vector<std::vector<std::string>>& events,
                     const std::vector<std::vector<std::string>>& sentences) {
    if (sentences.size() != events.size()) {
        throw std::runtime_error("story_loss: " + std::to_string(sentences.size()) +
                                 " sentences for " + std::to_string(events.size()) + " events");
    }
    if (sentences.empty()) throw std::runtime_error("story_loss: empty story");
}

// Builds the story-level objective on one tape: mean teacher-forced loss of
// the references, each conditioned on the model's own previous sentence.
nn::Var story_objective(nn::Tape& t, GeneratorModel& model,
                        const std::vector<std::vector<std::string>>& events,
                        const std::vector<std::vector<std::string>>& ref_sentences,
                        const Story& regenerated) {
    std::vector<nn::Var> parts;
    for (std::size_t i = 0; i < ref_sentences.size(); ++i) {
        std::vector<std::string> prev =
            i == 0 ? std::vector<std::string>{} : strip_eos(regenerated.sentences[i - 1]);
        parts.push_back(sentence_nll(t, model, events[i], prev, strip_eos(ref_sentences[i])));
    }
    return t.scale(t.add_n(parts), 1.0 / static_cast<double>(parts.size()));
}

}  // namespace

double story_loss(GeneratorModel& model, const std::vector<std::vector<std::string>>& events,
                  const std::vector<std::vector<std::string>>& ref_sentences) {
    check_alignment(events, ref_sentences);
    Story regenerated = generate_story(model, events);
    nn::Tape t;
    return story_objective(t, model, events, ref_sentences, regenerated).scalar();
}

double story_loss(GeneratorModel& model, const Storyline& storyline,
                  const std::vector<std::vector<std::string>>& ref_sentences) {
    std::vector<std::vector<std::string>> events;
    for (const auto& event : storyline.events) events.push_back(encode_event(event));
    return story_loss(model, events, ref_sentences);
}

LossReport step_epoch(GeneratorModel& gen, const EvaluatorModel* evaluator,
                      const StoryExample& ex, nn::Adam& opt, int epoch, const TrainConfig& tc) {
    validate(tc);
    if (epoch < 1 || epoch > tc.total_epochs) {
        throw std::runtime_error("step_epoch: epoch " + std::to_string(epoch) + " outside 1.." +
                                 std::to_string(tc.total_epochs));
    }
    check_alignment(ex.events, ex.sentences);
    const bool reward_phase = epoch > tc.reward_start_epoch;
    if (reward_phase && evaluator == nullptr) {
        throw std::runtime_error("step_epoch: reward phase needs an evaluator");
    }

    LossReport report;
    report.epoch = epoch;
    auto tensors = gen.params.all();

    for (std::size_t i = 0; i < ex.sentences.size(); ++i) {
        std::vector<std::string> prev =
            i == 0 ? std::vector<std::string>{} : strip_eos(ex.sentences[i - 1]);
        nn::Tape t;
        nn::Var loss = sentence_nll(t, gen, ex.events[i], prev, strip_eos(ex.sentences[i]));
        report.sentence_losses.push_back(loss.scalar());
        t.backward(loss);
        opt.step(tensors);
    }

    report.generated = generate_story(gen, ex.events);
    report.multiplier =
        reward_phase ? tc.c - score_story(*evaluator, report.generated) : 1.0;

    nn::Tape t;
    nn::Var mle = story_objective(t, gen, ex.events, ex.sentences, report.generated);
    report.story_mle = mle.scalar();
    nn::Var objective = t.scale(mle, report.multiplier);
    report.story_loss = objective.scalar();
    t.backward(objective);
    opt.step(tensors);

    if (!std::isfinite(report.story_loss)) throw std::runtime_error("step_epoch: non-finite loss");
    return report;
}

std::string format_train_log_line(int epoch, int step, double j_sen, double j_story, double mult) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "epoch=%d step=%d J_sen=%.6f J_story=%.6f mult=%.6f", epoch,
                  step, j_sen, j_story, mult);
    return buf;
}

std::vector<LossReport> train_story_generator(GeneratorModel& gen, const EvaluatorModel* evaluator,
                                              const std::vector<StoryExample>& data,
                                              const TrainConfig& tc, std::ostream* log) {
    validate(tc);
    if (data.empty()) throw std::runtime_error("train_story_generator: no stories");
    nn::Adam opt({.lr = tc.lr, .beta1 = tc.beta1, .beta2 = tc.beta2, .eps = tc.eps});
    std::vector<LossReport> reports;
    for (int epoch = 1; epoch <= tc.total_epochs; ++epoch) {
        int step = 1;
        for (const auto& ex : data) {
            LossReport r = step_epoch(gen, evaluator, ex, opt, epoch, tc);
            double j_sen = 0.0;
            for (double v : r.sentence_losses) j_sen += v;
            j_sen /= static_cast<double>(r.sentence_losses.size());
            if (log != nullptr) {
                *log << format_train_log_line(epoch, step, j_sen, r.story_loss, r.multiplier)
                     << "\n";
            }
            reports.push_back(std::move(r));
            step += 1;
        }
    }
    return reports;
}

double grad_check(const std::function<double(bool accumulate)>& loss,
                  const std::vector<nn::Tensor*>& params, double step, int probes,
                  std::uint64_t seed) {
    for (nn::Tensor* p : params) p->grad.setZero();
    const double base = loss(true);
    if (!std::isfinite(base)) throw std::runtime_error("grad_check: non-finite loss");

    std::mt19937_64 gen(seed);
    double worst = 0.0;
    for (nn::Tensor* p : params) {
        for (int probe = 0; probe < probes; ++probe) {
            Eigen::Index i = static_cast<Eigen::Index>(gen() % p->value.rows());
            Eigen::Index j = static_cast<Eigen::Index>(gen() % p->value.cols());
            const double orig = p->value(i, j);
            p->value(i, j) = orig + step;
            const double fp = loss(false);
            p->value(i, j) = orig - step;
            const double fm = loss(false);
            p->value(i, j) = orig;
            if (!std::isfinite(fp) || !std::isfinite(fm)) {
                throw std::runtime_error("grad_check: non-finite loss");
            }
            const double num = (fp - fm) / (2.0 * step);
            const double ana = p->grad(i, j);
            const double denom = std::max({std::abs(num), std::abs(ana), 1e-6});
            worst = std::max(worst, std::abs(num - ana) / denom);
        }
    }
    return worst;
}

}  // namespace storyplot
