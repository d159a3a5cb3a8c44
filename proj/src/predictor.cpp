#include "storyplot/predictor.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "storyplot/nn/adam.hpp"
#include "storyplot/tokens.hpp"

namespace storyplot {

using nn::Mat;
using nn::Tape;
using nn::Var;

Relation terminate_relation() {
    return Relation{"terminate", "<end>", kTokenPosition};
}

bool is_terminate(const Relation& r) {
    return r.frame == "terminate" && r.tail == "<end>";
}

std::vector<StorylineHop> Storyline::flat_hops() const {
    std::vector<StorylineHop> out;
    for (const auto& event : events) out.insert(out.end(), event.begin(), event.end());
    return out;
}

int ScoringModel::frame_slot(const std::string& frame) const {
    auto it = std::lower_bound(frames.begin(), frames.end(), frame);
    if (it != frames.end() && *it == frame) {
        return static_cast<int>(it - frames.begin());
    }
    return static_cast<int>(frames.size());  // empty_frame and anything unlisted
}

ScoringModel ScoringModel::create(const std::vector<std::string>& vocab_tokens,
                                  const std::vector<std::string>& frame_inventory,
                                  const Config& cfg, std::uint64_t seed) {
    ScoringModel m;
    m.cfg = cfg;
    m.vocab = Vocab(cfg.oov_buckets);
    for (const std::string& tok : vocab_tokens) m.vocab.add(tok);
    for (const std::string& f : frame_inventory) {
        if (f != kEmptyFrame) m.frames.push_back(f);
    }
    std::sort(m.frames.begin(), m.frames.end());
    m.frames.erase(std::unique(m.frames.begin(), m.frames.end()), m.frames.end());
    for (const std::string& f : m.frames) m.vocab.add(f);
    m.vocab.add(kEmptyFrame);
    for (int i = 0; i <= kDefaultMaxSentences; ++i) {
        m.vocab.add(make_transition_token(i));
    }

    const int d = cfg.word_dim;
    const int h = cfg.hidden;
    const int rl = m.relation_len();
    nn::Rng rng(seed);
    m.word_table = &m.params.add("pred.word", m.vocab.size(), d);
    nn::init_uniform(*m.word_table, -0.1, 0.1, rng);
    m.obj_in_w = &m.params.add("pred.obj_in_w", d, h);
    m.obj_in_b = &m.params.add("pred.obj_in_b", 1, h);
    m.rel_in_w = &m.params.add("pred.rel_in_w", rl, h);
    m.rel_in_b = &m.params.add("pred.rel_in_b", 1, h);
    nn::init_glorot(*m.obj_in_w, rng);
    nn::init_glorot(*m.rel_in_w, rng);
    m.fwd = nn::GruCell::create(m.params, "pred.fwd", h, h, rng);
    m.bwd = nn::GruCell::create(m.params, "pred.bwd", h, h, rng);
    m.proj = &m.params.add("pred.proj", rl, 2 * h);
    nn::init_glorot(*m.proj, rng);
    m.term_w = &m.params.add("pred.term_w", 2 * h, 1);
    nn::init_glorot(*m.term_w, rng);
    m.term_b = &m.params.add("pred.term_b", 1, 1);
    return m;
}

RelationEmbedding relation_embedding(const Relation& r, const ScoringModel& model) {
    if (r.tail_position < 0 || r.tail_position > kTokenPosition) {
        throw std::invalid_argument("relation embedding: tail_position out of range");
    }
    RelationEmbedding e;
    const int g = model.graphical_len();
    e.graphical = Eigen::VectorXd::Zero(g);
    e.graphical(model.frame_slot(r.frame)) = 1.0;
    e.graphical(static_cast<int>(model.frames.size()) + 1 + r.tail_position) = 1.0;
    const int d = model.cfg.word_dim;
    e.textual = Eigen::VectorXd::Zero(2 * d);
    e.textual.head(d) = model.word_table->value.row(model.vocab.id(r.frame)).transpose();
    e.textual.tail(d) = model.word_table->value.row(model.vocab.id(r.tail)).transpose();
    e.full = Eigen::VectorXd::Zero(g + 2 * d);
    e.full.head(g) = e.graphical;
    e.full.tail(2 * d) = e.textual;
    return e;
}

namespace {

// Shared tape construction for training and inference. Every call pulls
// fresh leaf nodes, so gradients accumulate into the model's tensors.
struct QueryNet {
    Tape& t;
    const ScoringModel& m;
    Var word;

    QueryNet(Tape& tape, const ScoringModel& model)
        : t(tape), m(model), word(tape.leaf(*model.word_table)) {}

    Var relation_var(const Relation& r) const {
        Mat graphical = Mat::Zero(1, m.graphical_len());
        graphical(0, m.frame_slot(r.frame)) = 1.0;
        graphical(0, static_cast<int>(m.frames.size()) + 1 + r.tail_position) = 1.0;
        Var fe = t.rows(word, {m.vocab.id(r.frame)});
        Var te = t.rows(word, {m.vocab.id(r.tail)});
        return t.hconcat({t.constant(std::move(graphical)), fe, te});
    }

    Var state(const std::vector<std::string>& objects,
              const std::vector<Relation>& history) const {
        std::vector<Var> xs;
        for (const std::string& tok : objects) {
            Var e = t.rows(word, {m.vocab.id(tok)});
            xs.push_back(t.tanh(t.add(t.matmul(e, t.leaf(*m.obj_in_w)), t.leaf(*m.obj_in_b))));
        }
        for (const Relation& r : history) {
            Var e = relation_var(r);
            xs.push_back(t.tanh(t.add(t.matmul(e, t.leaf(*m.rel_in_w)), t.leaf(*m.rel_in_b))));
        }
        const int h = m.cfg.hidden;
        if (xs.empty()) return t.constant(Mat::Zero(1, 2 * h));
        Var hf = t.constant(Mat::Zero(1, h));
        for (std::size_t i = 0; i < xs.size(); ++i) hf = m.fwd.step(t, xs[i], hf);
        Var hb = t.constant(Mat::Zero(1, h));
        for (std::size_t i = xs.size(); i-- > 0;) hb = m.bwd.step(t, xs[i], hb);
        return t.hconcat({hf, hb});
    }

    Var scores(Var st, const std::vector<Relation>& candidates) const {
        // one gemv per candidate; a batched product would make the low bits
        // of each score depend on the candidate order
        Var proj = t.leaf(*m.proj);
        std::vector<Var> per_candidate;
        per_candidate.reserve(candidates.size());
        for (const Relation& c : candidates) {
            Var projected = t.matmul(relation_var(c), proj);  // 1 x 2H
            per_candidate.push_back(t.matmul_nt(st, projected));
        }
        return t.hconcat(per_candidate);  // 1 x C
    }

    Var term_logit(Var st) const {
        return t.add(t.matmul(st, t.leaf(*m.term_w)), t.leaf(*m.term_b));
    }
};

int argmax_with_tiebreak(const std::vector<double>& scores,
                         const std::vector<Relation>& candidates) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(scores.size()); ++i) {
        const double s = scores[static_cast<std::size_t>(i)];
        const double bs = scores[static_cast<std::size_t>(best)];
        if (s > bs) {
            best = i;
            continue;
        }
        if (s == bs) {
            const Relation& c = candidates[static_cast<std::size_t>(i)];
            const Relation& b = candidates[static_cast<std::size_t>(best)];
            if (c.display() < b.display() ||
                (c.display() == b.display() && c.tail_position < b.tail_position)) {
                best = i;
            }
        }
    }
    return best;
}

}  // namespace

std::vector<Relation> candidate_relations(const StoryGraph& graph, const StoryEntity& head) {
    if (!graph.has_entity(head)) {
        throw std::invalid_argument("candidate relations: head '" + head.label +
                                    "' not in story graph");
    }
    std::vector<Relation> out;
    for (const StoryRelation& r : graph.outgoing(head)) {
        out.push_back(Relation{r.frame, r.tail.label, r.tail.position});
    }
    std::sort(out.begin(), out.end(), [](const Relation& a, const Relation& b) {
        const std::string da = a.display();
        const std::string db = b.display();
        if (da != db) return da < db;
        return a.tail_position < b.tail_position;
    });
    if (head.position == kTokenPosition) out.push_back(terminate_relation());
    return out;
}

std::vector<double> score_candidates(const ScoringModel& model,
                                     const std::vector<std::string>& objects,
                                     const std::vector<Relation>& history,
                                     const std::vector<Relation>& candidates) {
    if (candidates.empty()) {
        throw std::invalid_argument("score_candidates: empty candidate list");
    }
    Tape t;
    QueryNet net(t, model);
    Var st = net.state(objects, history);
    Var sc = net.scores(st, candidates);
    std::vector<double> out(candidates.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = sc.value()(0, static_cast<Eigen::Index>(i));
    }
    return out;
}

Relation single_hop(const ScoringModel& model, const std::vector<std::string>& objects,
                    const std::vector<Relation>& history,
                    const std::vector<Relation>& candidates) {
    auto scores = score_candidates(model, objects, history, candidates);
    return candidates[static_cast<std::size_t>(argmax_with_tiebreak(scores, candidates))];
}

double termination_probability(const ScoringModel& model,
                               const std::vector<std::string>& objects,
                               const std::vector<Relation>& history) {
    Tape t;
    QueryNet net(t, model);
    Var z = net.term_logit(net.state(objects, history));
    return 1.0 / (1.0 + std::exp(-z.value()(0, 0)));
}

std::vector<Relation> training_candidates(const KnowledgeGraph& kg, const NvnTuple& hop,
                                          int event_index) {
    auto position_of = [event_index](const std::string& tail) {
        return is_transition_token(tail) ? kTokenPosition : std::min(event_index, 4);
    };
    std::vector<Relation> cands;
    for (const auto& [frame, tail] : kg.outgoing(hop.head)) {
        cands.push_back(Relation{frame, tail, position_of(tail)});
    }
    Relation golden{hop.frame, hop.tail, position_of(hop.tail)};
    if (std::find(cands.begin(), cands.end(), golden) == cands.end()) {
        cands.push_back(golden);
    }
    return cands;
}

Storyline storyline_from_golden(const GoldenStoryline& golden) {
    Storyline line;
    std::vector<StorylineHop> event;
    int event_index = 0;
    auto position_of = [&event_index](const std::string& label) {
        return is_transition_token(label) ? kTokenPosition : std::min(event_index, 4);
    };
    for (const NvnTuple& hop : golden.hops) {
        StoryEntity head{hop.head, position_of(hop.head)};
        int tail_pos = position_of(hop.tail);
        event.push_back(StorylineHop{head, Relation{hop.frame, hop.tail, tail_pos}});
        if (tail_pos == kTokenPosition) {
            line.events.push_back(std::move(event));
            event.clear();
            ++event_index;
        }
    }
    if (!event.empty()) {
        throw std::runtime_error("storyline_from_golden: chain does not end on a token");
    }
    return line;
}

namespace {

bool is_synthetic_token_link(const NvnTuple& hop) {
    return hop.frame == kEmptyFrame &&
           (is_transition_token(hop.head) || is_transition_token(hop.tail));
}

void validate_training_set(const std::vector<PredictorExample>& examples,
                           const KnowledgeGraph& kg) {
    for (const PredictorExample& ex : examples) {
        for (const NvnTuple& hop : ex.golden.hops) {
            if (kg.has_edge(hop) || is_synthetic_token_link(hop)) continue;
            throw std::invalid_argument("train_predictor: golden hop (" + hop.head + ", " +
                                        hop.frame + ", " + hop.tail +
                                        ") missing from the knowledge graph");
        }
    }
}

struct StoryLossStats {
    long hops_seen = 0;
    long hops_correct = 0;
};

// Mean of the per-hop cross-entropies and the per-token-node termination
// losses along one teacher-forced golden walk.
Var build_story_loss(Tape& t, const ScoringModel& model, const PredictorExample& ex,
                     const KnowledgeGraph& kg, StoryLossStats* stats) {
    QueryNet net(t, model);
    std::vector<Var> losses;
    std::vector<Relation> history;
    int event_index = 0;
    const int last = ex.golden.sentence_count;

    // stop/continue target at <s_0> before anything happens
    losses.push_back(
        t.bce_with_logit(net.term_logit(net.state(ex.objects, history)), 0.0));

    for (const NvnTuple& hop : ex.golden.hops) {
        auto cands = training_candidates(kg, hop, event_index);
        Relation golden{hop.frame, hop.tail,
                        is_transition_token(hop.tail) ? kTokenPosition
                                                      : std::min(event_index, 4)};
        auto it = std::find(cands.begin(), cands.end(), golden);
        int target = static_cast<int>(it - cands.begin());

        Var st = net.state(ex.objects, history);
        Var sc = net.scores(st, cands);
        losses.push_back(t.nll_rows(sc, {target}));
        if (stats) {
            ++stats->hops_seen;
            std::vector<double> raw(cands.size());
            for (std::size_t i = 0; i < raw.size(); ++i) {
                raw[i] = sc.value()(0, static_cast<Eigen::Index>(i));
            }
            if (argmax_with_tiebreak(raw, cands) == target) ++stats->hops_correct;
        }

        history.push_back(golden);
        if (auto idx = parse_transition_token(hop.tail)) {
            event_index = *idx;
            Var z = net.term_logit(net.state(ex.objects, history));
            losses.push_back(t.bce_with_logit(z, *idx == last ? 1.0 : 0.0));
        }
    }
    return t.scale(t.add_n(losses), 1.0 / static_cast<double>(losses.size()));
}

}  // namespace

std::vector<double> train_predictor(ScoringModel& model,
                                    const std::vector<PredictorExample>& examples,
                                    const KnowledgeGraph& kg,
                                    const PredictorTrainConfig& cfg) {
    if (examples.empty()) throw std::invalid_argument("train_predictor: no examples");
    validate_training_set(examples, kg);
    nn::Adam opt(nn::AdamConfig{.lr = cfg.lr});
    auto tensors = model.params.all();
    std::vector<double> curve;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double total = 0.0;
        StoryLossStats stats;
        for (const PredictorExample& ex : examples) {
            Tape t;
            Var story_loss = build_story_loss(t, model, ex, kg, &stats);
            t.backward(story_loss);
            total += story_loss.scalar();
            opt.step(tensors);
        }
        curve.push_back(total / static_cast<double>(examples.size()));
        if (cfg.stop_at_accuracy > 0.0 && stats.hops_seen > 0 &&
            static_cast<double>(stats.hops_correct) /
                    static_cast<double>(stats.hops_seen) >=
                cfg.stop_at_accuracy) {
            break;
        }
    }
    return curve;
}

double predictor_loss(ScoringModel& model, const PredictorExample& ex,
                      const KnowledgeGraph& kg, bool accumulate) {
    Tape t;
    Var loss = build_story_loss(t, model, ex, kg, nullptr);
    if (accumulate) t.backward(loss);
    return loss.scalar();
}

double hop_accuracy(const ScoringModel& model, const std::vector<PredictorExample>& examples,
                    const KnowledgeGraph& kg) {
    long seen = 0;
    long correct = 0;
    for (const PredictorExample& ex : examples) {
        std::vector<Relation> history;
        int event_index = 0;
        for (const NvnTuple& hop : ex.golden.hops) {
            auto cands = training_candidates(kg, hop, event_index);
            Relation golden{hop.frame, hop.tail,
                            is_transition_token(hop.tail) ? kTokenPosition
                                                          : std::min(event_index, 4)};
            Relation picked = single_hop(model, ex.objects, history, cands);
            ++seen;
            if (picked == golden) ++correct;
            history.push_back(golden);
            if (auto idx = parse_transition_token(hop.tail)) event_index = *idx;
        }
    }
    return seen == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(seen);
}

Storyline predict_storyline(const ScoringModel& model, const StoryGraph& graph,
                            const std::vector<std::string>& objects,
                            const PathfindConfig& cfg) {
    if (cfg.max_hops_per_event < 2) {
        throw std::invalid_argument("predict_storyline: max_hops_per_event must be >= 2");
    }
    if (cfg.max_events < 1) {
        throw std::invalid_argument("predict_storyline: max_events must be >= 1");
    }
    StoryEntity head{make_transition_token(0), kTokenPosition};
    if (!graph.has_entity(head)) {
        throw std::invalid_argument("predict_storyline: story graph lacks <s_0>");
    }

    Storyline out;
    std::vector<Relation> history;
    while (true) {
        if (out.length() >= cfg.max_events) break;
        if (out.length() > 0 &&
            termination_probability(model, objects, history) >= 0.5) {
            break;
        }

        // head is a token node between events; a dead end here means the
        // terminate marker is the only choice left
        auto opening = candidate_relations(graph, head);
        std::erase_if(opening, [](const Relation& r) { return is_terminate(r); });
        if (opening.empty()) {
            if (out.events.empty()) {
                throw std::runtime_error("predict_storyline: no candidates at <s_0>");
            }
            break;
        }

        std::vector<StorylineHop> event;
        for (int hop_no = 0; hop_no < cfg.max_hops_per_event; ++hop_no) {
            std::vector<Relation> cands;
            if (hop_no == 0) {
                cands = opening;
            } else {
                cands = candidate_relations(graph, head);
                std::erase_if(cands, [](const Relation& r) { return is_terminate(r); });
            }
            if (hop_no == cfg.max_hops_per_event - 1) {
                // last slot of the event budget: only closing hops remain
                std::erase_if(cands, [](const Relation& r) {
                    return r.tail_position != kTokenPosition;
                });
            }
            if (cands.empty()) {
                throw std::runtime_error("predict_storyline: no candidates at '" +
                                         head.label + "'");
            }
            Relation rel = single_hop(model, objects, history, cands);
            event.push_back(StorylineHop{head, rel});
            history.push_back(rel);
            head = StoryEntity{rel.tail, rel.tail_position};
            if (rel.tail_position == kTokenPosition) break;
        }
        out.events.push_back(std::move(event));
    }
    return out;
}

void save_model(const ScoringModel& model, const std::string& prefix) {
    nn::save_checkpoint(model.params, prefix);
    nlohmann::json meta;
    meta["word_dim"] = model.cfg.word_dim;
    meta["hidden"] = model.cfg.hidden;
    meta["oov_buckets"] = model.cfg.oov_buckets;
    meta["vocab"] = model.vocab.tokens();
    meta["frames"] = model.frames;
    std::ofstream out(prefix + ".meta.json");
    if (!out) throw std::runtime_error("save_model: cannot write " + prefix + ".meta.json");
    out << meta.dump(2) << "\n";
}

ScoringModel load_model(const std::string& prefix) {
    std::ifstream in(prefix + ".meta.json");
    if (!in) throw std::runtime_error("load_model: cannot read " + prefix + ".meta.json");
    nlohmann::json meta = nlohmann::json::parse(in);
    ScoringModel::Config cfg;
    cfg.word_dim = meta.at("word_dim").get<int>();
    cfg.hidden = meta.at("hidden").get<int>();
    cfg.oov_buckets = meta.at("oov_buckets").get<int>();
    ScoringModel m = ScoringModel::create(meta.at("vocab").get<std::vector<std::string>>(),
                                          meta.at("frames").get<std::vector<std::string>>(),
                                          cfg, 0);
    nn::load_checkpoint(m.params, prefix);
    return m;
}

void load_word_vectors(ScoringModel& model, const std::string& tsv_path) {
    std::ifstream in(tsv_path);
    if (!in) throw std::runtime_error("load_word_vectors: cannot read " + tsv_path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string token;
        if (!std::getline(ss, token, '\t')) continue;
        std::vector<double> values;
        std::string cell;
        while (std::getline(ss, cell, '\t')) values.push_back(std::stod(cell));
        if (static_cast<int>(values.size()) != model.cfg.word_dim) {
            throw std::runtime_error("load_word_vectors: line " + std::to_string(line_no) +
                                     " has " + std::to_string(values.size()) +
                                     " values, expected " +
                                     std::to_string(model.cfg.word_dim));
        }
        if (!model.vocab.contains(token)) continue;
        for (int j = 0; j < model.cfg.word_dim; ++j) {
            model.word_table->value(model.vocab.id(token), j) = values[static_cast<std::size_t>(j)];
        }
    }
}

}  // namespace storyplot
