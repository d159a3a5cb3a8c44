#pragma once

#include <string>
#include <vector>

#include "storyplot/kgraph.hpp"
#include "storyplot/nn/gru.hpp"
#include "storyplot/nn/params.hpp"
#include "storyplot/nn/tape.hpp"
#include "storyplot/vocab.hpp"

namespace storyplot {

struct Relation {
    std::string frame;
    std::string tail;
    int tail_position = 0;  // 0..4 image, 5 token

    std::string display() const { return frame + "." + tail; }

    bool operator==(const Relation&) const = default;
    auto operator<=>(const Relation&) const = default;
};

// Synthetic stop marker appended to candidate lists at transition-token
// heads. It is never picked by argmax; the termination head decides it.
Relation terminate_relation();
bool is_terminate(const Relation& r);

struct RelationEmbedding {
    Eigen::VectorXd graphical;  // frame one-hot (|frames|+1) ++ position one-hot (6)
    Eigen::VectorXd textual;    // word vector of frame ++ word vector of tail
    Eigen::VectorXd full;       // graphical ++ textual
};

struct StorylineHop {
    StoryEntity head;
    Relation relation;

    bool operator==(const StorylineHop&) const = default;
};

struct Storyline {
    // One inner list per event; an event's last hop lands on a <s_i> token.
    std::vector<std::vector<StorylineHop>> events;

    int length() const { return static_cast<int>(events.size()); }
    std::vector<StorylineHop> flat_hops() const;

    bool operator==(const Storyline&) const = default;
};

// Relation scorer: a word table feeds two tanh input adapters (one for
// object tokens, one for composite relation vectors), a bidirectional GRU
// encodes the query sequence, and candidates are ranked by dot product
// between the encoder state and their projected embeddings. A binary head on
// the same state makes the stop/continue call at token nodes.
struct ScoringModel {
    struct Config {
        int word_dim = 50;
        int hidden = 64;
        int oov_buckets = 1024;
    };

    Config cfg;
    Vocab vocab;                       // word table rows; OOV hashed
    std::vector<std::string> frames;   // sorted, excludes empty_frame
    nn::ParamSet params;

    nn::Tensor* word_table = nullptr;  // vocab.size() x d
    nn::Tensor* obj_in_w = nullptr;    // d x enc_in
    nn::Tensor* obj_in_b = nullptr;
    nn::Tensor* rel_in_w = nullptr;    // relation_len x enc_in
    nn::Tensor* rel_in_b = nullptr;
    nn::GruCell fwd;
    nn::GruCell bwd;
    nn::Tensor* proj = nullptr;        // relation_len x 2*hidden
    nn::Tensor* term_w = nullptr;      // 2*hidden x 1
    nn::Tensor* term_b = nullptr;      // 1 x 1

    int frame_slot(const std::string& frame) const;  // empty/unknown -> last slot
    int graphical_len() const { return static_cast<int>(frames.size()) + 1 + 6; }
    int relation_len() const { return graphical_len() + 2 * cfg.word_dim; }

    static ScoringModel create(const std::vector<std::string>& vocab_tokens,
                               const std::vector<std::string>& frame_inventory,
                               const Config& cfg, std::uint64_t seed);
};

// [frame one-hot; position one-hot; word(frame); word(tail)], built from the
// model's current word table.
RelationEmbedding relation_embedding(const Relation& r, const ScoringModel& model);

// Outgoing relations of `head` sorted by (display, tail_position); token
// heads additionally offer the terminate marker. Throws if head is absent.
std::vector<Relation> candidate_relations(const StoryGraph& graph, const StoryEntity& head);

// One similarity score per candidate given the query (objects then relation
// history, in order). Throws on an empty candidate list.
std::vector<double> score_candidates(const ScoringModel& model,
                                     const std::vector<std::string>& objects,
                                     const std::vector<Relation>& history,
                                     const std::vector<Relation>& candidates);

// Argmax of score_candidates; ties go to the smallest display string, then
// the smallest tail_position.
Relation single_hop(const ScoringModel& model, const std::vector<std::string>& objects,
                    const std::vector<Relation>& history,
                    const std::vector<Relation>& candidates);

// Stop probability at the current query state (used at token nodes).
double termination_probability(const ScoringModel& model,
                               const std::vector<std::string>& objects,
                               const std::vector<Relation>& history);

// A golden storyline paired with the object bags of its sequence; the
// objects feed the encoder exactly as at pathfinding time.
struct PredictorExample {
    std::vector<std::string> objects;  // flat, image order
    GoldenStoryline golden;
};

struct PredictorTrainConfig {
    int epochs = 50;
    double lr = 0.002;
    // Stop once teacher-forced hop accuracy on the training set reaches this
    // value; 0 trains for the full epoch budget.
    double stop_at_accuracy = 0.0;
};

// Teacher-forced training: at each golden hop the candidate set is the
// knowledge graph's outgoing relations of the head plus the golden relation,
// scored with softmax cross-entropy against the golden choice; the
// termination head sees a binary target at every token node. One Adam update
// per storyline. Returns the per-epoch mean loss curve.
std::vector<double> train_predictor(ScoringModel& model,
                                    const std::vector<PredictorExample>& examples,
                                    const KnowledgeGraph& kg,
                                    const PredictorTrainConfig& cfg);

// Fraction of golden hops whose candidate argmax equals the golden relation
// under teacher forcing.
double hop_accuracy(const ScoringModel& model, const std::vector<PredictorExample>& examples,
                    const KnowledgeGraph& kg);

struct PathfindConfig {
    int max_hops_per_event = 6;  // closing hop included; must be >= 2
    int max_events = 10;
};

// Walks the story graph from <s0>, one single-hop classification per step.
// The head of each hop is the previous hop's tail; reaching a token closes
// the event; the termination head decides whether to stop there, with a stop
// forced at max_events and event closure forced once the per-event hop
// budget is down to its last slot.
Storyline predict_storyline(const ScoringModel& model, const StoryGraph& graph,
                            const std::vector<std::string>& objects,
                            const PathfindConfig& cfg = {});

// Splits a golden chain at its transition-token tails into per-event hop
// lists. Positions follow the training convention: noun endpoints take the
// event's image position (capped at 4), token endpoints take 5. Throws when
// the chain does not end on a token tail.
Storyline storyline_from_golden(const GoldenStoryline& golden);

// Train-time candidate set for one golden hop: the knowledge graph's
// outgoing relations of the head, with the golden relation appended when the
// graph lacks it. Noun tails take the event's image position (capped at 4),
// token tails take position 5, uniformly across the whole set.
std::vector<Relation> training_candidates(const KnowledgeGraph& kg, const NvnTuple& hop,
                                          int event_index);

// The exact per-story objective train_predictor optimizes, for one example;
// accumulate=true also adds its gradients to the model parameters.
double predictor_loss(ScoringModel& model, const PredictorExample& ex,
                      const KnowledgeGraph& kg, bool accumulate);

void save_model(const ScoringModel& model, const std::string& prefix);
ScoringModel load_model(const std::string& prefix);

// token<TAB>v1<TAB>...<TAB>vd per line; rows replace matching vocab entries.
void load_word_vectors(ScoringModel& model, const std::string& tsv_path);

}  // namespace storyplot
