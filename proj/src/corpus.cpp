#include "storyplot/corpus.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

#include "storyplot/nn/tape.hpp"
#include "storyplot/tokens.hpp"

namespace storyplot {

bool StoryElements::empty() const {
    for (int i = 0; i < kImagesPerSequence; ++i) {
        if (!objects[static_cast<std::size_t>(i)].empty()) return false;
        if (!terms[static_cast<std::size_t>(i)].empty()) return false;
    }
    return true;
}

std::array<std::vector<std::string>, kImagesPerSequence> select_objects(
    const std::vector<Detection>& detections) {
    std::array<std::vector<std::string>, kImagesPerSequence> out;
    for (int img = 0; img < kImagesPerSequence; ++img) {
        std::map<std::string, double> best;  // label -> max confidence
        for (const Detection& d : detections) {
            if (d.image_index != img) continue;
            if (d.image_index < 0 || d.image_index >= kImagesPerSequence) {
                throw std::invalid_argument("select_objects: image_index out of range");
            }
            auto [it, inserted] = best.emplace(d.label, d.confidence);
            if (!inserted && d.confidence > it->second) it->second = d.confidence;
        }
        std::vector<std::pair<std::string, double>> ranked(best.begin(), best.end());
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        auto& labels = out[static_cast<std::size_t>(img)];
        for (std::size_t k = 0; k < ranked.size() && k < 5; ++k) {
            labels.push_back(ranked[k].first);
        }
    }
    return out;
}

std::vector<NvnTuple> extract_nvn_tuples(const AnnotatedSentence& sentence) {
    std::vector<NvnTuple> out;
    const auto& nouns = sentence.nouns;
    if (nouns.size() < 2) return out;
    for (std::size_t i = 0; i + 1 < nouns.size(); ++i) {
        const std::string& head = nouns[i];
        const std::string& tail = nouns[i + 1];
        std::string frame = kEmptyFrame;
        for (const FrameSpan& span : sentence.frame_spans) {
            if (span.head == head && span.tail == tail) {
                frame = span.label;
                break;
            }
        }
        out.push_back(NvnTuple{head, frame, tail});
    }
    return out;
}

GoldenStoryline build_golden_storyline(const std::vector<AnnotatedSentence>& story) {
    if (story.empty()) throw std::invalid_argument("golden storyline: story has no sentences");
    GoldenStoryline g;
    g.sentence_count = static_cast<int>(story.size());
    for (std::size_t i = 0; i < story.size(); ++i) {
        const AnnotatedSentence& s = story[i];
        if (s.nouns.empty()) {
            throw std::invalid_argument("golden storyline: sentence " + std::to_string(i) +
                                        " has no nouns");
        }
        g.hops.push_back(NvnTuple{i == 0 ? make_transition_token(0)
                                         : make_transition_token(static_cast<int>(i)),
                                  kEmptyFrame, s.nouns.front()});
        auto chain = extract_nvn_tuples(s);
        g.hops.insert(g.hops.end(), chain.begin(), chain.end());
        g.hops.push_back(NvnTuple{s.nouns.back(), kEmptyFrame,
                                  make_transition_token(static_cast<int>(i) + 1)});
    }
    return g;
}

bool golden_invariants_hold(const GoldenStoryline& g) {
    if (g.hops.empty()) return false;
    if (g.hops.front().head != make_transition_token(0)) return false;
    for (std::size_t k = 0; k + 1 < g.hops.size(); ++k) {
        if (g.hops[k].tail != g.hops[k + 1].head) return false;
    }
    int expected = 1;
    for (const NvnTuple& hop : g.hops) {
        auto idx = parse_transition_token(hop.tail);
        if (!idx) continue;
        if (*idx != expected) return false;
        ++expected;
    }
    if (expected != g.sentence_count + 1) return false;
    return g.hops.back().tail == make_transition_token(g.sentence_count);
}

// ---- term predictor --------------------------------------------------------

TermPredictor TermPredictor::train(const std::vector<Pair>& pairs,
                                   const std::vector<std::string>& noun_vocab,
                                   const Config& cfg, std::uint64_t seed) {
    if (pairs.empty()) throw std::invalid_argument("term predictor: empty training set");
    TermPredictor m;
    m.cfg_ = cfg;
    for (const std::string& n : noun_vocab) m.vocab_.add(n);
    for (const Pair& p : pairs) {
        for (const std::string& tok : p.first) {
            if (!m.vocab_.contains(tok)) {
                throw std::invalid_argument("term predictor: object '" + tok +
                                            "' not in vocabulary");
            }
        }
        for (const std::string& tok : p.second) {
            if (!m.vocab_.contains(tok)) {
                throw std::invalid_argument("term predictor: noun '" + tok +
                                            "' not in vocabulary");
            }
        }
    }

    const int v = m.vocab_.size();
    nn::Rng rng(seed);
    nn::Tensor& emb = m.params_.add("term.emb", v, cfg.embed_dim);
    nn::Tensor& w1 = m.params_.add("term.w1", cfg.embed_dim, cfg.hidden_dim);
    nn::Tensor& b1 = m.params_.add("term.b1", 1, cfg.hidden_dim);
    nn::Tensor& w2 = m.params_.add("term.w2", cfg.hidden_dim, v);
    nn::Tensor& b2 = m.params_.add("term.b2", 1, v);
    nn::init_uniform(emb, -0.1, 0.1, rng);
    nn::init_glorot(w1, rng);
    nn::init_glorot(w2, rng);

    nn::Adam opt(nn::AdamConfig{.lr = cfg.lr});
    auto tensors = m.params_.all();
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double total = 0.0;
        nn::Tape t;
        std::vector<nn::Var> losses;
        for (const Pair& p : pairs) {
            nn::Var bag;
            if (p.first.empty()) {
                bag = t.constant(nn::Mat::Zero(1, cfg.embed_dim));
            } else {
                std::vector<int> ids;
                for (const std::string& tok : p.first) ids.push_back(m.vocab_.id(tok));
                nn::Var gathered = t.rows(t.leaf(emb), ids);
                nn::Mat pool = nn::Mat::Constant(1, gathered.rows(), 1.0 / ids.size());
                bag = t.matmul(t.constant(pool), gathered);
            }
            nn::Var h = t.tanh(t.add(t.matmul(bag, t.leaf(w1)), t.leaf(b1)));
            nn::Var logits = t.add(t.matmul(h, t.leaf(w2)), t.leaf(b2));
            // multi-hot binary cross-entropy; one bce node per vocab cell is
            // fine at this scale and keeps the logits numerically stable
            nn::Mat targets = nn::Mat::Zero(1, v);
            for (const std::string& tok : p.second) targets(0, m.vocab_.id(tok)) = 1.0;
            std::vector<nn::Var> cells;
            for (int j = 0; j < v; ++j) {
                nn::Var zj = t.slice_cols(logits, j, 1);
                cells.push_back(t.bce_with_logit(zj, targets(0, j)));
            }
            nn::Var pair_loss = t.scale(t.add_n(cells), 1.0 / v);
            losses.push_back(pair_loss);
        }
        nn::Var epoch_loss = t.scale(t.add_n(losses), 1.0 / static_cast<double>(pairs.size()));
        t.backward(epoch_loss);
        total = epoch_loss.scalar();
        opt.step(tensors);
        m.loss_curve_.push_back(total);
    }
    return m;
}

Eigen::VectorXd TermPredictor::score_bag(const std::vector<std::string>& bag) const {
    const nn::Tensor* emb = params_.find("term.emb");
    const nn::Tensor* w1 = params_.find("term.w1");
    const nn::Tensor* b1 = params_.find("term.b1");
    const nn::Tensor* w2 = params_.find("term.w2");
    const nn::Tensor* b2 = params_.find("term.b2");
    Eigen::RowVectorXd pooled = Eigen::RowVectorXd::Zero(cfg_.embed_dim);
    int used = 0;
    for (const std::string& tok : bag) {
        if (!vocab_.contains(tok)) continue;  // unknown objects are dropped
        pooled += emb->value.row(vocab_.id(tok));
        ++used;
    }
    if (used > 0) pooled /= static_cast<double>(used);
    Eigen::RowVectorXd h = ((pooled * w1->value) + b1->value.row(0)).array().tanh();
    Eigen::RowVectorXd z = (h * w2->value) + b2->value.row(0);
    return (1.0 / (1.0 + (-z.transpose().array()).exp())).matrix();
}

std::vector<std::string> TermPredictor::predict(
    const std::vector<std::string>& object_bag) const {
    Eigen::VectorXd scores = score_bag(object_bag);
    std::vector<int> order(static_cast<std::size_t>(vocab_.size()));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (scores(a) != scores(b)) return scores(a) > scores(b);
        return vocab_.token(a) < vocab_.token(b);
    });
    std::vector<std::string> out;
    for (int i = 0; i < cfg_.top_k && i < static_cast<int>(order.size()); ++i) {
        out.push_back(vocab_.token(order[static_cast<std::size_t>(i)]));
    }
    return out;
}

StoryElements make_story_elements(const std::vector<Detection>& detections,
                                  const TermPredictor& terms_model) {
    StoryElements e;
    e.objects = select_objects(detections);
    for (int img = 0; img < kImagesPerSequence; ++img) {
        e.terms[static_cast<std::size_t>(img)] =
            terms_model.predict(e.objects[static_cast<std::size_t>(img)]);
    }
    return e;
}

}  // namespace storyplot
