#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "storyplot/evaluator.hpp"
#include "storyplot/generator.hpp"
#include "storyplot/io.hpp"
#include "storyplot/metrics.hpp"
#include "storyplot/pipeline.hpp"
#include "storyplot/predictor.hpp"
#include "storyplot/tokens.hpp"
#include "storyplot/trainer.hpp"

using namespace storyplot;
namespace fs = std::filesystem;

namespace {

// Failures in a single-stage command exit with `code`; pipeline stage errors
// keep their own stage code.
int guarded(int code, const std::function<int()>& body) {
    try {
        return body();
    } catch (const StageError& e) {
        std::cerr << "storyplot: " << e.what() << "\n";
        return e.exit_code;
    } catch (const std::exception& e) {
        std::cerr << "storyplot: " << e.what() << "\n";
        return code;
    }
}

std::vector<std::string> sorted(const std::set<std::string>& s) { return {s.begin(), s.end()}; }

std::map<std::string, StoryElements> elements_by_id(const std::string& path) {
    std::map<std::string, StoryElements> out;
    for (auto& rec : read_elements(path)) out.emplace(rec.sequence_id, std::move(rec.elements));
    return out;
}

// Vocabulary for a generator trained outside the full pipeline: reference
// tokens plus whatever can appear in linearized events.
std::vector<std::string> generator_vocab(const std::vector<StoryRecord>& stories,
                                         const std::vector<GoldenRecord>& golden,
                                         const std::map<std::string, StoryElements>& elements) {
    std::set<std::string> vocab;
    for (const auto& story : stories) {
        for (const auto& s : story.sentences) {
            vocab.insert(s.tokens.begin(), s.tokens.end());
            vocab.insert(s.nouns.begin(), s.nouns.end());
        }
    }
    for (const auto& rec : golden) {
        for (const auto& hop : rec.golden.hops) {
            vocab.insert(hop.frame);
            if (!is_transition_token(hop.head)) vocab.insert(hop.head);
            if (!is_transition_token(hop.tail)) vocab.insert(hop.tail);
        }
    }
    for (const auto& [id, el] : elements) {
        auto flat = flatten_elements(el);
        vocab.insert(flat.begin(), flat.end());
    }
    return sorted(vocab);
}

struct TrainGeneratorArgs {
    std::string stories;
    std::string golden;
    std::string elements;
    std::string evaluator;
    std::string out_dir = "out";
    bool no_plot = false;
    std::uint64_t seed = 0;
    int epochs = 60;
    int reward_start = 30;
    double lr = 1e-3;
    int dim = 64;
    int heads = 2;
    int ffn = 128;
    int max_positions = 64;
    int max_sentence_len = 25;
};

int cmd_train_generator(const TrainGeneratorArgs& a) {
    auto stories = read_stories(a.stories);
    auto golden = read_golden(a.golden);
    if (stories.size() != golden.size()) {
        throw std::runtime_error("train-generator: " + std::to_string(stories.size()) +
                                 " stories vs " + std::to_string(golden.size()) +
                                 " golden records");
    }
    std::map<std::string, StoryElements> elements;
    if (a.no_plot) {
        if (a.elements.empty()) {
            throw std::runtime_error("train-generator: --no-plot needs --elements");
        }
        elements = elements_by_id(a.elements);
    }

    GeneratorConfig gcfg;
    gcfg.dim = a.dim;
    gcfg.heads = a.heads;
    gcfg.ffn = a.ffn;
    gcfg.max_positions = a.max_positions;
    gcfg.max_sentence_len = a.max_sentence_len;
    GeneratorModel gen =
        GeneratorModel::create(generator_vocab(stories, golden, elements), gcfg, a.seed);

    std::vector<StoryExample> data;
    for (std::size_t i = 0; i < stories.size(); ++i) {
        std::vector<std::vector<std::string>> refs;
        for (const auto& s : stories[i].sentences) refs.push_back(s.tokens);
        if (a.no_plot) {
            StoryExample ex;
            ex.events = term_events(elements.at(stories[i].story_id), static_cast<int>(refs.size()));
            ex.sentences = refs;
            data.push_back(std::move(ex));
        } else {
            data.push_back(make_story_example(storyline_from_golden(golden[i].golden), refs));
        }
    }

    fs::create_directories(a.out_dir);
    std::ofstream log(fs::path(a.out_dir) / "train.log");
    if (!log) throw std::runtime_error("cannot write train.log");
    TrainConfig tc;
    tc.lr = a.lr;
    tc.seed = a.seed;
    if (!a.evaluator.empty()) {
        EvaluatorModel evaluator = load_evaluator(a.evaluator);
        tc.total_epochs = a.epochs;
        tc.reward_start_epoch = a.reward_start;
        train_story_generator(gen, &evaluator, data, tc, &log);
    } else {
        // no evaluator: the plain story objective for every epoch
        tc.total_epochs = a.epochs + 1;
        tc.reward_start_epoch = a.epochs;
        validate(tc);
        nn::Adam opt({.lr = tc.lr, .beta1 = tc.beta1, .beta2 = tc.beta2, .eps = tc.eps});
        for (int epoch = 1; epoch <= a.epochs; ++epoch) {
            int step = 1;
            for (const auto& ex : data) {
                LossReport r = step_epoch(gen, nullptr, ex, opt, epoch, tc);
                double j_sen = 0.0;
                for (double v : r.sentence_losses) j_sen += v;
                j_sen /= static_cast<double>(r.sentence_losses.size());
                log << format_train_log_line(epoch, step, j_sen, r.story_loss, r.multiplier)
                    << "\n";
                step += 1;
            }
        }
    }
    save_generator(gen, (fs::path(a.out_dir) / "generator").string());
    std::cout << "trained generator on " << data.size() << " stories over " << a.epochs
              << " epochs\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"visual storytelling pipeline: graphs, storylines, stories"};
    app.require_subcommand(1);

    // build-kg
    std::string kg_triples;
    std::string kg_graphs = "both";
    auto* build_kg = app.add_subcommand("build-kg", "build a knowledge graph and print its stats");
    build_kg->add_option("--triples", kg_triples, "tagged triples jsonl")->required();
    build_kg->add_option("--graphs", kg_graphs, "vg, vist or both");

    // extract
    struct {
        std::string stories;
        std::string detections;
        std::string out_dir = "out";
        std::uint64_t seed = 0;
        std::string elements = "both";
        int term_epochs = 100;
        int term_top_k = 3;
    } ex;
    auto* extract =
        app.add_subcommand("extract", "golden storylines and story elements from the corpus");
    extract->add_option("--stories", ex.stories)->required();
    extract->add_option("--detections", ex.detections)->required();
    extract->add_option("--out-dir", ex.out_dir);
    extract->add_option("--seed", ex.seed);
    extract->add_option("--elements", ex.elements, "objects, terms or both");
    extract->add_option("--term-epochs", ex.term_epochs);
    extract->add_option("--term-top-k", ex.term_top_k);

    // train-predictor
    struct {
        std::string golden;
        std::string elements;
        std::string triples;
        std::string graphs = "both";
        std::string embeddings;
        std::string out_dir = "out";
        std::uint64_t seed = 0;
        int epochs = 50;
        double lr = 0.002;
        int word_dim = 50;
        int hidden = 64;
        int max_events = 10;
    } tp;
    auto* train_pred =
        app.add_subcommand("train-predictor", "train the storyline hop scorer on golden chains");
    train_pred->add_option("--golden", tp.golden)->required();
    train_pred->add_option("--elements", tp.elements)->required();
    train_pred->add_option("--triples", tp.triples)->required();
    train_pred->add_option("--graphs", tp.graphs);
    train_pred->add_option("--embeddings", tp.embeddings);
    train_pred->add_option("--out-dir", tp.out_dir);
    train_pred->add_option("--seed", tp.seed);
    train_pred->add_option("--epochs", tp.epochs);
    train_pred->add_option("--lr", tp.lr);
    train_pred->add_option("--word-dim", tp.word_dim);
    train_pred->add_option("--hidden", tp.hidden);
    train_pred->add_option("--max-events", tp.max_events);

    // plot
    struct {
        std::string predictor;
        std::string elements;
        std::string triples;
        std::string graphs = "both";
        std::string out_dir = "out";
        int max_events = 10;
        int max_hops = 6;
    } pl;
    auto* plot = app.add_subcommand("plot", "predict storylines over the story graphs");
    plot->add_option("--predictor", pl.predictor, "checkpoint prefix")->required();
    plot->add_option("--elements", pl.elements)->required();
    plot->add_option("--triples", pl.triples)->required();
    plot->add_option("--graphs", pl.graphs);
    plot->add_option("--out-dir", pl.out_dir);
    plot->add_option("--max-events", pl.max_events);
    plot->add_option("--max-hops-per-event", pl.max_hops);

    // train-generator
    TrainGeneratorArgs tg;
    auto* train_gen = app.add_subcommand("train-generator", "train the sentence-per-event model");
    train_gen->add_option("--stories", tg.stories)->required();
    train_gen->add_option("--golden", tg.golden)->required();
    train_gen->add_option("--elements", tg.elements);
    train_gen->add_option("--evaluator", tg.evaluator, "checkpoint prefix; enables the reward phase");
    train_gen->add_option("--out-dir", tg.out_dir);
    train_gen->add_flag("--no-plot", tg.no_plot, "train on bare term events instead of hops");
    train_gen->add_option("--seed", tg.seed);
    train_gen->add_option("--epochs", tg.epochs);
    train_gen->add_option("--reward-start", tg.reward_start);
    train_gen->add_option("--lr", tg.lr);
    train_gen->add_option("--dim", tg.dim);
    train_gen->add_option("--heads", tg.heads);
    train_gen->add_option("--ffn", tg.ffn);
    train_gen->add_option("--max-positions", tg.max_positions);
    train_gen->add_option("--max-sentence-len", tg.max_sentence_len);

    // train-evaluator
    struct {
        std::string rankings;
        std::string out_dir = "out";
        std::uint64_t seed = 0;
        int epochs = 30;
        double lr = 0.002;
        int word_dim = 50;
        int hidden = 64;
    } te;
    auto* train_eval =
        app.add_subcommand("train-evaluator", "train the story quality scorer on ranked stories");
    train_eval->add_option("--rankings", te.rankings)->required();
    train_eval->add_option("--out-dir", te.out_dir);
    train_eval->add_option("--seed", te.seed);
    train_eval->add_option("--epochs", te.epochs);
    train_eval->add_option("--lr", te.lr);
    train_eval->add_option("--word-dim", te.word_dim);
    train_eval->add_option("--hidden", te.hidden);

    // generate
    struct {
        std::string generator;
        std::string storylines;
        std::string elements;
        std::string out_dir = "out";
        bool no_plot = false;
    } ge;
    auto* generate = app.add_subcommand("generate", "decode stories from storylines or terms");
    generate->add_option("--generator", ge.generator, "checkpoint prefix")->required();
    generate->add_option("--storylines", ge.storylines);
    generate->add_option("--elements", ge.elements);
    generate->add_option("--out-dir", ge.out_dir);
    generate->add_flag("--no-plot", ge.no_plot, "decode from bare term events");

    // metrics
    struct {
        std::string storylines;
        std::string stories_out;
    } me;
    auto* metrics = app.add_subcommand("metrics", "lexical diversity and story statistics");
    metrics->add_option("--storylines", me.storylines)->required();
    metrics->add_option("--stories-out", me.stories_out)->required();

    // pipeline
    struct {
        std::string config;
        std::string triples, stories, detections, rankings, embeddings, out_dir;
        std::string seed, elements, graphs;
        bool no_plot = false;
        bool no_rework = false;
    } pi;
    auto* pipeline = app.add_subcommand("pipeline", "run every stage end to end");
    pipeline->add_option("--config", pi.config, "flat key=value file");
    auto* o_triples = pipeline->add_option("--triples", pi.triples);
    auto* o_stories = pipeline->add_option("--stories", pi.stories);
    auto* o_detect = pipeline->add_option("--detections", pi.detections);
    auto* o_rank = pipeline->add_option("--rankings", pi.rankings);
    auto* o_emb = pipeline->add_option("--embeddings", pi.embeddings);
    auto* o_out = pipeline->add_option("--out-dir", pi.out_dir);
    auto* o_seed = pipeline->add_option("--seed", pi.seed);
    auto* o_elem = pipeline->add_option("--elements", pi.elements, "objects, terms or both");
    auto* o_graphs = pipeline->add_option("--graphs", pi.graphs, "vg, vist or both");
    pipeline->add_flag("--no-plot", pi.no_plot, "skip storyline prediction, feed terms directly");
    pipeline->add_flag("--no-rework", pi.no_rework, "plain story loss for all epochs");

    CLI11_PARSE(app, argc, argv);

    if (*build_kg) {
        return guarded(2, [&] {
            std::cout << select_graph(read_triples(kg_triples), kg_graphs).stats() << "\n";
            return 0;
        });
    }

    if (*extract) {
        return guarded(2, [&] {
            auto stories = read_stories(ex.stories);
            if (stories.empty()) throw std::runtime_error("no stories in " + ex.stories);
            auto detections = read_detections(ex.detections);
            fs::create_directories(ex.out_dir);

            std::vector<GoldenRecord> golden;
            for (const auto& story : stories) {
                golden.push_back({story.story_id, build_golden_storyline(story.sentences)});
            }
            write_golden(golden, (fs::path(ex.out_dir) / "golden.jsonl").string());

            auto pairs = term_training_pairs(stories, detections);
            std::set<std::string> nouns;
            for (const auto& [bag, refs] : pairs) {
                nouns.insert(bag.begin(), bag.end());
                nouns.insert(refs.begin(), refs.end());
            }
            TermPredictor::Config tcfg;
            tcfg.epochs = ex.term_epochs;
            tcfg.top_k = ex.term_top_k;
            TermPredictor terms = TermPredictor::train(pairs, sorted(nouns), tcfg, ex.seed + 1);

            std::map<std::string, const DetectionGroup*> by_id;
            for (const auto& g : detections) by_id.emplace(g.sequence_id, &g);
            std::vector<ElementsRecord> elements;
            for (const auto& story : stories) {
                StoryElements full =
                    make_story_elements(by_id.at(story.story_id)->detections, terms);
                elements.push_back({story.story_id, ablate_elements(full, ex.elements)});
            }
            write_elements(elements, (fs::path(ex.out_dir) / "elements.jsonl").string());
            std::cout << "wrote " << golden.size() << " golden storylines and " << elements.size()
                      << " element sets\n";
            return 0;
        });
    }

    if (*train_pred) {
        return guarded(2, [&] {
            auto golden = read_golden(tp.golden);
            auto elements = read_elements(tp.elements);
            KnowledgeGraph kg = select_graph(read_triples(tp.triples), tp.graphs);

            std::set<std::string> vocab(kg.nodes().begin(), kg.nodes().end());
            vocab.insert(kg.frames().begin(), kg.frames().end());
            vocab.insert(kEmptyFrame);
            std::map<std::string, StoryElements> by_id;
            for (auto& rec : elements) by_id.emplace(rec.sequence_id, rec.elements);
            for (const auto& [id, el] : by_id) {
                auto flat = flatten_elements(el);
                vocab.insert(flat.begin(), flat.end());
            }
            for (int i = 0; i <= tp.max_events; ++i) vocab.insert(make_transition_token(i));
            std::vector<std::string> frames(kg.frames().begin(), kg.frames().end());
            std::erase(frames, std::string(kEmptyFrame));

            ScoringModel::Config scfg;
            scfg.word_dim = tp.word_dim;
            scfg.hidden = tp.hidden;
            ScoringModel model = ScoringModel::create(sorted(vocab), frames, scfg, tp.seed);
            if (!tp.embeddings.empty()) load_word_vectors(model, tp.embeddings);

            std::vector<PredictorExample> examples;
            for (const auto& rec : golden) {
                auto it = by_id.find(rec.story_id);
                if (it == by_id.end()) {
                    throw std::runtime_error("no elements for story " + rec.story_id);
                }
                examples.push_back({flatten_elements(it->second), rec.golden});
            }
            PredictorTrainConfig pcfg;
            pcfg.epochs = tp.epochs;
            pcfg.lr = tp.lr;
            train_predictor(model, examples, kg, pcfg);
            fs::create_directories(tp.out_dir);
            save_model(model, (fs::path(tp.out_dir) / "predictor").string());
            std::cout << "trained hop scorer: accuracy="
                      << hop_accuracy(model, examples, kg) << "\n";
            return 0;
        });
    }

    if (*plot) {
        return guarded(2, [&] {
            ScoringModel model = load_model(pl.predictor);
            auto elements = read_elements(pl.elements);
            KnowledgeGraph kg = select_graph(read_triples(pl.triples), pl.graphs);
            PathfindConfig pcfg;
            pcfg.max_hops_per_event = pl.max_hops;
            pcfg.max_events = pl.max_events;
            std::vector<StorylineRecord> storylines;
            for (const auto& rec : elements) {
                StoryGraph graph = assemble_story_graph(rec.elements, kg, pl.max_events);
                storylines.push_back({rec.sequence_id, predict_storyline(model, graph,
                                                                         flatten_elements(rec.elements),
                                                                         pcfg)});
            }
            fs::create_directories(pl.out_dir);
            write_storylines(storylines, (fs::path(pl.out_dir) / "storylines.jsonl").string());
            std::cout << "wrote " << storylines.size() << " storylines\n";
            return 0;
        });
    }

    if (*train_gen) return guarded(2, [&] { return cmd_train_generator(tg); });

    if (*train_eval) {
        return guarded(2, [&] {
            auto labeled = labeled_from_rankings(read_rankings(te.rankings));
            std::set<std::string> vocab;
            for (const auto& s : labeled) vocab.insert(s.tokens.begin(), s.tokens.end());
            EvaluatorConfig ecfg;
            ecfg.word_dim = te.word_dim;
            ecfg.hidden = te.hidden;
            EvaluatorModel model = EvaluatorModel::create(sorted(vocab), ecfg, te.seed);
            EvaluatorTrainConfig tcfg;
            tcfg.epochs = te.epochs;
            tcfg.lr = te.lr;
            train_evaluator(model, labeled, tcfg);
            fs::create_directories(te.out_dir);
            save_evaluator(model, (fs::path(te.out_dir) / "evaluator").string());
            std::cout << "trained evaluator: accuracy=" << evaluator_accuracy(model, labeled)
                      << "\n";
            return 0;
        });
    }

    if (*generate) {
        return guarded(2, [&] {
            GeneratorModel gen = load_generator(ge.generator);
            std::vector<StoryOutRecord> out;
            if (ge.no_plot) {
                if (ge.elements.empty()) {
                    throw std::runtime_error("generate: --no-plot needs --elements");
                }
                for (const auto& rec : read_elements(ge.elements)) {
                    Story story =
                        generate_story(gen, term_events(rec.elements, kImagesPerSequence));
                    StoryOutRecord r{rec.sequence_id, {}};
                    for (const auto& s : story.sentences) r.sentences.push_back(join_tokens(strip_eos(s)));
                    out.push_back(std::move(r));
                }
            } else {
                if (ge.storylines.empty()) {
                    throw std::runtime_error("generate: need --storylines (or --no-plot)");
                }
                for (const auto& rec : read_storylines(ge.storylines)) {
                    Story story = generate_story(gen, rec.storyline);
                    StoryOutRecord r{rec.sequence_id, {}};
                    for (const auto& s : story.sentences) r.sentences.push_back(join_tokens(strip_eos(s)));
                    out.push_back(std::move(r));
                }
            }
            fs::create_directories(ge.out_dir);
            write_stories_out(out, (fs::path(ge.out_dir) / "stories_out.jsonl").string());
            std::cout << "wrote " << out.size() << " stories\n";
            return 0;
        });
    }

    if (*metrics) {
        return guarded(2, [&] {
            auto storylines = read_storylines(me.storylines);
            auto records = read_stories_out(me.stories_out);
            std::vector<Storyline> lines;
            for (auto& rec : storylines) lines.push_back(std::move(rec.storyline));
            std::vector<Story> stories;
            std::vector<std::string> pooled;
            for (const auto& rec : records) {
                Story s;
                for (const auto& sentence : rec.sentences) {
                    auto tokens = split_tokens(sentence);
                    pooled.insert(pooled.end(), tokens.begin(), tokens.end());
                    s.sentences.push_back(std::move(tokens));
                }
                stories.push_back(std::move(s));
            }
            double diversity = mtld(pooled);
            StoryStats stats = story_stats(lines, stories);
            char buf[96];
            std::snprintf(buf, sizeof buf, "mtld=%.2f mean_sents=%.2f multi_image_ratio=%.2f",
                          diversity, stats.mean_sentence_count, stats.multi_image_event_ratio);
            std::cout << buf << "\n";
            return 0;
        });
    }

    if (*pipeline) {
        return guarded(1, [&] {
            PipelineConfig cfg;
            if (!pi.config.empty()) cfg = parse_pipeline_config(pi.config);
            try {
                if (o_triples->count()) apply_config_entry(cfg, "triples", pi.triples);
                if (o_stories->count()) apply_config_entry(cfg, "stories", pi.stories);
                if (o_detect->count()) apply_config_entry(cfg, "detections", pi.detections);
                if (o_rank->count()) apply_config_entry(cfg, "rankings", pi.rankings);
                if (o_emb->count()) apply_config_entry(cfg, "embeddings", pi.embeddings);
                if (o_out->count()) apply_config_entry(cfg, "out_dir", pi.out_dir);
                if (o_seed->count()) apply_config_entry(cfg, "seed", pi.seed);
                if (o_elem->count()) apply_config_entry(cfg, "elements", pi.elements);
                if (o_graphs->count()) apply_config_entry(cfg, "graphs", pi.graphs);
                if (pi.no_plot) apply_config_entry(cfg, "plot", "false");
                if (pi.no_rework) apply_config_entry(cfg, "rework", "false");
            } catch (const std::exception& e) {
                throw StageError("config", 2, std::string("config: ") + e.what());
            }
            PipelineOutcome outcome = run_pipeline(cfg, std::cout);
            std::cout << "pipeline complete: " << outcome.story_count << " stories in "
                      << cfg.out_dir << "\n";
            return 0;
        });
    }

    return 1;
}
