#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "storyplot/io.hpp"
#include "storyplot/kgraph.hpp"

namespace storyplot {

struct PipelineConfig {
    // inputs and outputs
    std::string triples;
    std::string stories;
    std::string detections;
    std::string rankings;
    std::string embeddings;  // optional word-vector tsv, empty = random init
    std::string out_dir = "out";
    std::uint64_t seed = 0;

    // stage toggles and ablations
    bool plot = true;    // storyline prediction; off feeds terms straight to the generator
    bool rework = true;  // evaluator-weighted phase; off keeps the plain story loss
    std::string elements = "both";  // objects | terms | both
    std::string graphs = "both";    // vg | vist | both

    // knobs, grouped by stage
    int term_epochs = 100;
    int term_top_k = 3;
    int predictor_epochs = 50;
    double predictor_lr = 0.002;
    int word_dim = 50;
    int hidden = 64;
    int max_events = 10;
    int max_hops_per_event = 6;
    int generator_epochs = 60;
    int reward_start_epoch = 30;
    double generator_lr = 1e-3;
    int gen_dim = 64;
    int gen_heads = 2;
    int gen_ffn = 128;
    int gen_max_positions = 64;
    int gen_max_sentence_len = 25;
    int evaluator_epochs = 30;
    double evaluator_lr = 0.002;
};

// Applies one key=value pair. The config file and the CLI flags both go
// through this switch, so they cannot drift apart. Unknown keys and
// unparseable values throw.
void apply_config_entry(PipelineConfig& cfg, const std::string& key, const std::string& value);

// Flat key=value lines; blank lines and lines starting with '#' are
// skipped. Errors name the offending 1-based line.
PipelineConfig parse_pipeline_config(const std::string& path);

// Carries the failing stage and its exit status: config=2, extract=3,
// graphs=4, plot=5, generate=6, metrics=7.
struct StageError : std::runtime_error {
    StageError(std::string stage_name, int code, const std::string& what_arg)
        : std::runtime_error(what_arg), stage(std::move(stage_name)), exit_code(code) {}

    std::string stage;
    int exit_code = 1;
};

struct PipelineOutcome {
    std::string kg_stats_line;
    std::string metrics_line;
    int story_count = 0;
};

// Runs extract -> graphs -> plot -> generate -> metrics, writing every
// artifact under cfg.out_dir. `echo` mirrors the stats and metrics lines.
PipelineOutcome run_pipeline(const PipelineConfig& cfg, std::ostream& echo);

// Stage helpers shared between run_pipeline and the standalone subcommands.

// (object bag of image i, nouns of sentence min(i, L-1)) for every story and
// image; stories and detections are matched by id and every story needs a
// detection group.
std::vector<TermPredictor::Pair> term_training_pairs(const std::vector<StoryRecord>& stories,
                                                     const std::vector<DetectionGroup>& detections);

// Keeps only the requested half of the elements; "both" is the identity.
StoryElements ablate_elements(const StoryElements& full, const std::string& mode);

// Objects then terms of image 0, then image 1, and so on. This is the
// encoder's object context at both training and pathfinding time.
std::vector<std::string> flatten_elements(const StoryElements& elements);

// Builds the vg graph, the vist graph or their merge from tagged triples.
KnowledgeGraph select_graph(const std::vector<TripleRecord>& triples, const std::string& which);

// Event token lists for the plot-free mode: event i is the event marker
// followed by the terms of image min(i, 4), with no frames.
std::vector<std::vector<std::string>> term_events(const StoryElements& elements, int count);

// Stand-in storyline for the plot-free mode so story statistics stay
// computable: one single-image chain over each image's terms.
Storyline term_storyline(const StoryElements& elements);

}  // namespace storyplot
