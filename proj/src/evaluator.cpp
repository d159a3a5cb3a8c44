#include "storyplot/evaluator.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "storyplot/nn/adam.hpp"

namespace storyplot {

std::vector<std::string> flatten_story(const Story& story) {
    std::vector<std::string> out;
    for (const auto& sentence : story.sentences) out.insert(out.end(), sentence.begin(), sentence.end());
    return out;
}

EvaluatorModel EvaluatorModel::create(const std::vector<std::string>& vocab_tokens,
                                      const EvaluatorConfig& cfg, std::uint64_t seed) {
    EvaluatorModel m;
    m.cfg = cfg;
    m.vocab = Vocab(cfg.oov_buckets);
    for (const auto& tok : vocab_tokens) m.vocab.add(tok);

    nn::Rng rng(seed);
    m.word = &m.params.add("ev.word", m.vocab.size(), cfg.word_dim);
    nn::init_uniform(*m.word, -0.1, 0.1, rng);
    m.gru = nn::GruCell::create(m.params, "ev.gru", cfg.word_dim, cfg.hidden, rng);
    // Zero head: a fresh model has no opinion, p(high) = 0.5 exactly.
    m.head_w = &m.params.add("ev.head.w", cfg.hidden, 2);
    m.head_b = &m.params.add("ev.head.b", 1, 2);
    return m;
}

namespace {

// Class logits tanh(h W) + b for a token sequence; column 1 is "high".
nn::Var class_logits(nn::Tape& t, const EvaluatorModel& m, const std::vector<std::string>& tokens) {
    if (tokens.empty()) throw std::runtime_error("evaluator: empty story");
    auto& mm = const_cast<EvaluatorModel&>(m);
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& tok : tokens) ids.push_back(m.vocab.id(tok));
    nn::Var emb = t.rows(t.leaf(*mm.word), ids);
    nn::Var h = t.constant(nn::Mat::Zero(1, m.cfg.hidden));
    for (std::size_t i = 0; i < ids.size(); ++i) {
        h = m.gru.step(t, t.row(emb, static_cast<Eigen::Index>(i)), h);
    }
    return t.add(t.tanh(t.matmul(h, t.leaf(*mm.head_w))), t.leaf(*mm.head_b));
}

}  // namespace

double score_tokens(const EvaluatorModel& model, const std::vector<std::string>& tokens) {
    nn::Tape t;
    nn::Var z = class_logits(t, model, tokens);
    Eigen::VectorXd probs = nn::softmax_vector(z.value().row(0).transpose());
    return probs(1);
}

double score_story(const EvaluatorModel& model, const Story& story) {
    return score_tokens(model, flatten_story(story));
}

double reward(double p) { return -p + 1.5; }

nn::Var evaluator_nll(nn::Tape& t, EvaluatorModel& model, const LabeledStory& ex) {
    if (ex.label != 0 && ex.label != 1) throw std::runtime_error("evaluator: label must be 0 or 1");
    return t.nll_rows(class_logits(t, model, ex.tokens), {ex.label});
}

std::vector<double> train_evaluator(EvaluatorModel& model, const std::vector<LabeledStory>& data,
                                    const EvaluatorTrainConfig& tc) {
    bool has_pos = false, has_neg = false;
    for (const auto& ex : data) (ex.label == 1 ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg) {
        throw std::runtime_error("train_evaluator: training data needs both positive and negative stories");
    }

    nn::Adam opt({.lr = tc.lr});
    auto tensors = model.params.all();
    std::vector<double> curve;
    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        double total = 0.0;
        for (const auto& ex : data) {
            nn::Tape t;
            nn::Var loss = evaluator_nll(t, model, ex);
            total += loss.scalar();
            t.backward(loss);
            opt.step(tensors);
        }
        curve.push_back(total / static_cast<double>(data.size()));
    }
    return curve;
}

double evaluator_accuracy(const EvaluatorModel& model, const std::vector<LabeledStory>& data) {
    if (data.empty()) throw std::runtime_error("evaluator_accuracy: no stories");
    std::size_t hits = 0;
    for (const auto& ex : data) {
        double p = score_tokens(model, ex.tokens);
        if ((p > 0.5) == (ex.label == 1)) hits += 1;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

std::vector<LabeledStory> labeled_from_rankings(const std::vector<StoryRanking>& rankings) {
    std::vector<LabeledStory> out;
    for (const auto& group : rankings) {
        for (const auto& rs : group.stories) {
            if (rs.rank < 1 || rs.rank > 5) {
                throw std::runtime_error("rankings: sequence " + group.sequence_id + " has rank " +
                                         std::to_string(rs.rank) + " outside 1..5");
            }
            if (rs.rank == 1) out.push_back({rs.tokens, 1});
            if (rs.rank == 5) out.push_back({rs.tokens, 0});
        }
    }
    return out;
}

void save_evaluator(const EvaluatorModel& model, const std::string& prefix) {
    nn::save_checkpoint(model.params, prefix);
    nlohmann::json meta;
    meta["word_dim"] = model.cfg.word_dim;
    meta["hidden"] = model.cfg.hidden;
    meta["oov_buckets"] = model.cfg.oov_buckets;
    meta["vocab"] = model.vocab.tokens();
    std::ofstream out(prefix + ".meta.json");
    if (!out) throw std::runtime_error("save_evaluator: cannot write " + prefix + ".meta.json");
    out << meta.dump(2) << "\n";
}

EvaluatorModel load_evaluator(const std::string& prefix) {
    std::ifstream in(prefix + ".meta.json");
    if (!in) throw std::runtime_error("load_evaluator: cannot read " + prefix + ".meta.json");
    nlohmann::json meta = nlohmann::json::parse(in);
    EvaluatorConfig cfg;
    cfg.word_dim = meta.at("word_dim").get<int>();
    cfg.hidden = meta.at("hidden").get<int>();
    cfg.oov_buckets = meta.at("oov_buckets").get<int>();
    auto tokens = meta.at("vocab").get<std::vector<std::string>>();
    EvaluatorModel m = EvaluatorModel::create(tokens, cfg, 0);
    nn::load_checkpoint(m.params, prefix);
    return m;
}

}  // namespace storyplot
