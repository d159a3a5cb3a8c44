#include "storyplot/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include <nlohmann/json.hpp>

#include "storyplot/evaluator.hpp"
#include "storyplot/generator.hpp"
#include "storyplot/metrics.hpp"
#include "storyplot/predictor.hpp"
#include "storyplot/tokens.hpp"
#include "storyplot/trainer.hpp"

namespace storyplot {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::runtime_error("expected true or false, got '" + v + "'");
}

template <typename T, typename Fn>
T parse_number(const std::string& v, Fn&& convert) {
    try {
        std::size_t used = 0;
        T out = convert(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw std::runtime_error("bad number '" + v + "'");
    }
}

int parse_int(const std::string& v) {
    return parse_number<int>(v, [](const std::string& s, std::size_t* u) { return std::stoi(s, u); });
}

std::uint64_t parse_u64(const std::string& v) {
    return parse_number<std::uint64_t>(
        v, [](const std::string& s, std::size_t* u) { return std::stoull(s, u); });
}

double parse_double(const std::string& v) {
    return parse_number<double>(v, [](const std::string& s, std::size_t* u) { return std::stod(s, u); });
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string enum_value(const std::string& v, std::initializer_list<const char*> allowed,
                       const std::string& key) {
    for (const char* a : allowed) {
        if (v == a) return v;
    }
    std::string msg = key + " must be one of";
    for (const char* a : allowed) msg += std::string(" ") + a;
    throw std::runtime_error(msg + ", got '" + v + "'");
}

}  // namespace

void apply_config_entry(PipelineConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "triples") cfg.triples = value;
    else if (key == "stories") cfg.stories = value;
    else if (key == "detections") cfg.detections = value;
    else if (key == "rankings") cfg.rankings = value;
    else if (key == "embeddings") cfg.embeddings = value;
    else if (key == "out_dir") cfg.out_dir = value;
    else if (key == "seed") cfg.seed = parse_u64(value);
    else if (key == "plot") cfg.plot = parse_bool(value);
    else if (key == "rework") cfg.rework = parse_bool(value);
    else if (key == "elements") cfg.elements = enum_value(value, {"objects", "terms", "both"}, key);
    else if (key == "graphs") cfg.graphs = enum_value(value, {"vg", "vist", "both"}, key);
    else if (key == "term_epochs") cfg.term_epochs = parse_int(value);
    else if (key == "term_top_k") cfg.term_top_k = parse_int(value);
    else if (key == "predictor_epochs") cfg.predictor_epochs = parse_int(value);
    else if (key == "predictor_lr") cfg.predictor_lr = parse_double(value);
    else if (key == "word_dim") cfg.word_dim = parse_int(value);
    else if (key == "hidden") cfg.hidden = parse_int(value);
    else if (key == "max_events") cfg.max_events = parse_int(value);
    else if (key == "max_hops_per_event") cfg.max_hops_per_event = parse_int(value);
    else if (key == "generator_epochs") cfg.generator_epochs = parse_int(value);
    else if (key == "reward_start_epoch") cfg.reward_start_epoch = parse_int(value);
    else if (key == "generator_lr") cfg.generator_lr = parse_double(value);
    else if (key == "gen_dim") cfg.gen_dim = parse_int(value);
    else if (key == "gen_heads") cfg.gen_heads = parse_int(value);
    else if (key == "gen_ffn") cfg.gen_ffn = parse_int(value);
    else if (key == "gen_max_positions") cfg.gen_max_positions = parse_int(value);
    else if (key == "gen_max_sentence_len") cfg.gen_max_sentence_len = parse_int(value);
    else if (key == "evaluator_epochs") cfg.evaluator_epochs = parse_int(value);
    else if (key == "evaluator_lr") cfg.evaluator_lr = parse_double(value);
    else throw std::runtime_error("unknown key '" + key + "'");
}

PipelineConfig parse_pipeline_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw StageError("config", 2, path + ": cannot open");
    PipelineConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        lineno += 1;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw StageError("config", 2,
                             path + ": line " + std::to_string(lineno) + ": expected key=value");
        }
        try {
            apply_config_entry(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
        } catch (const std::exception& e) {
            throw StageError("config", 2,
                             path + ": line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

std::vector<TermPredictor::Pair> term_training_pairs(
    const std::vector<StoryRecord>& stories, const std::vector<DetectionGroup>& detections) {
    std::map<std::string, const DetectionGroup*> by_id;
    for (const auto& g : detections) by_id.emplace(g.sequence_id, &g);
    std::vector<TermPredictor::Pair> pairs;
    for (const auto& story : stories) {
        auto it = by_id.find(story.story_id);
        if (it == by_id.end()) {
            throw std::runtime_error("no detections for story " + story.story_id);
        }
        if (story.sentences.empty()) {
            throw std::runtime_error("story " + story.story_id + " has no sentences");
        }
        auto bags = select_objects(it->second->detections);
        int last = static_cast<int>(story.sentences.size()) - 1;
        for (int img = 0; img < kImagesPerSequence; ++img) {
            const auto& sent = story.sentences[static_cast<std::size_t>(std::min(img, last))];
            pairs.emplace_back(bags[static_cast<std::size_t>(img)], sent.nouns);
        }
    }
    return pairs;
}

StoryElements ablate_elements(const StoryElements& full, const std::string& mode) {
    StoryElements out = full;
    if (mode == "objects") {
        for (auto& t : out.terms) t.clear();
    } else if (mode == "terms") {
        for (auto& o : out.objects) o.clear();
    } else if (mode != "both") {
        throw std::runtime_error("elements must be one of objects terms both, got '" + mode + "'");
    }
    return out;
}

std::vector<std::string> flatten_elements(const StoryElements& elements) {
    std::vector<std::string> out;
    for (int img = 0; img < kImagesPerSequence; ++img) {
        const auto& objs = elements.objects[static_cast<std::size_t>(img)];
        const auto& terms = elements.terms[static_cast<std::size_t>(img)];
        out.insert(out.end(), objs.begin(), objs.end());
        out.insert(out.end(), terms.begin(), terms.end());
    }
    return out;
}

KnowledgeGraph select_graph(const std::vector<TripleRecord>& triples, const std::string& which) {
    enum_value(which, {"vg", "vist", "both"}, "graphs");
    std::vector<NvnTuple> vg;
    std::vector<NvnTuple> vist;
    for (const auto& rec : triples) {
        (rec.source == "vg" ? vg : vist).push_back(rec.triple);
    }
    if (which == "vg") return build_knowledge_graph(vg);
    if (which == "vist") return build_knowledge_graph(vist);
    return merge(build_knowledge_graph(vg), build_knowledge_graph(vist));
}

std::vector<std::vector<std::string>> term_events(const StoryElements& elements, int count) {
    std::vector<std::vector<std::string>> events;
    for (int i = 0; i < count; ++i) {
        std::vector<std::string> ev{kEventMarker};
        const auto& terms =
            elements.terms[static_cast<std::size_t>(std::min(i, kImagesPerSequence - 1))];
        ev.insert(ev.end(), terms.begin(), terms.end());
        events.push_back(std::move(ev));
    }
    return events;
}

Storyline term_storyline(const StoryElements& elements) {
    Storyline line;
    for (int img = 0; img < kImagesPerSequence; ++img) {
        const auto& terms = elements.terms[static_cast<std::size_t>(img)];
        std::vector<StorylineHop> event;
        StoryEntity head{make_transition_token(img), kTokenPosition};
        for (const auto& term : terms) {
            event.push_back({head, Relation{kEmptyFrame, term, img}});
            head = StoryEntity{term, img};
        }
        event.push_back(
            {head, Relation{kEmptyFrame, make_transition_token(img + 1), kTokenPosition}});
        line.events.push_back(std::move(event));
    }
    return line;
}

namespace {

// Runs `body` and rebrands any failure with the stage name and exit code.
template <typename Fn>
void stage(const char* name, int code, Fn&& body) {
    try {
        body();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, code, std::string(name) + ": " + e.what());
    }
}

void write_run_manifest(const PipelineConfig& cfg, const std::string& path) {
    json j;
    j["triples"] = cfg.triples;
    j["stories"] = cfg.stories;
    j["detections"] = cfg.detections;
    j["rankings"] = cfg.rankings;
    j["embeddings"] = cfg.embeddings;
    j["out_dir"] = cfg.out_dir;
    j["seed"] = cfg.seed;
    j["plot"] = cfg.plot;
    j["rework"] = cfg.rework;
    j["elements"] = cfg.elements;
    j["graphs"] = cfg.graphs;
    j["term_epochs"] = cfg.term_epochs;
    j["term_top_k"] = cfg.term_top_k;
    j["predictor_epochs"] = cfg.predictor_epochs;
    j["predictor_lr"] = cfg.predictor_lr;
    j["word_dim"] = cfg.word_dim;
    j["hidden"] = cfg.hidden;
    j["max_events"] = cfg.max_events;
    j["max_hops_per_event"] = cfg.max_hops_per_event;
    j["generator_epochs"] = cfg.generator_epochs;
    j["reward_start_epoch"] = cfg.reward_start_epoch;
    j["generator_lr"] = cfg.generator_lr;
    j["gen_dim"] = cfg.gen_dim;
    j["gen_heads"] = cfg.gen_heads;
    j["gen_ffn"] = cfg.gen_ffn;
    j["gen_max_positions"] = cfg.gen_max_positions;
    j["gen_max_sentence_len"] = cfg.gen_max_sentence_len;
    j["evaluator_epochs"] = cfg.evaluator_epochs;
    j["evaluator_lr"] = cfg.evaluator_lr;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

std::vector<std::string> sorted_vocab(const std::set<std::string>& s) {
    return {s.begin(), s.end()};
}

std::string format_metrics_line(double mtld_value, const StoryStats& stats) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "mtld=%.2f mean_sents=%.2f multi_image_ratio=%.2f", mtld_value,
                  stats.mean_sentence_count, stats.multi_image_event_ratio);
    return buf;
}

}  // namespace

PipelineOutcome run_pipeline(const PipelineConfig& cfg, std::ostream& echo) {
    PipelineOutcome outcome;
    const fs::path out_dir(cfg.out_dir);

    stage("config", 2, [&] {
        enum_value(cfg.elements, {"objects", "terms", "both"}, "elements");
        enum_value(cfg.graphs, {"vg", "vist", "both"}, "graphs");
        for (const std::string* p : {&cfg.triples, &cfg.stories, &cfg.detections}) {
            if (p->empty()) throw std::runtime_error("triples, stories and detections are required");
        }
        if (cfg.rework && cfg.rankings.empty()) {
            throw std::runtime_error("rankings are required unless rework is off");
        }
        fs::create_directories(out_dir);
        write_run_manifest(cfg, (out_dir / "run.json").string());
    });

    // extract: golden chains from the stories, elements from the detections
    std::vector<StoryRecord> stories;
    std::vector<GoldenRecord> golden;
    std::vector<ElementsRecord> elements;
    stage("extract", 3, [&] {
        stories = read_stories(cfg.stories);
        if (stories.empty()) throw std::runtime_error("no stories in " + cfg.stories);
        auto detections = read_detections(cfg.detections);
        for (const auto& story : stories) {
            golden.push_back({story.story_id, build_golden_storyline(story.sentences)});
        }
        write_golden(golden, (out_dir / "golden.jsonl").string());

        auto pairs = term_training_pairs(stories, detections);
        std::set<std::string> nouns;
        for (const auto& [bag, refs] : pairs) {
            nouns.insert(bag.begin(), bag.end());
            nouns.insert(refs.begin(), refs.end());
        }
        TermPredictor::Config tcfg;
        tcfg.epochs = cfg.term_epochs;
        tcfg.top_k = cfg.term_top_k;
        TermPredictor terms =
            TermPredictor::train(pairs, sorted_vocab(nouns), tcfg, cfg.seed + 1);

        std::map<std::string, const DetectionGroup*> by_id;
        for (const auto& g : detections) by_id.emplace(g.sequence_id, &g);
        for (const auto& story : stories) {
            StoryElements full = make_story_elements(by_id.at(story.story_id)->detections, terms);
            elements.push_back({story.story_id, ablate_elements(full, cfg.elements)});
        }
        write_elements(elements, (out_dir / "elements.jsonl").string());
    });

    // graphs: tagged triples to the selected knowledge graph
    KnowledgeGraph kg;
    stage("graphs", 4, [&] {
        kg = select_graph(read_triples(cfg.triples), cfg.graphs);
        outcome.kg_stats_line = kg.stats();
        std::ofstream out(out_dir / "kg_stats.txt");
        if (!out) throw std::runtime_error("cannot write kg_stats.txt");
        out << outcome.kg_stats_line << "\n";
        echo << outcome.kg_stats_line << "\n";
    });

    // plot: storyline predictor training and pathfinding
    std::vector<StorylineRecord> storylines;
    stage("plot", 5, [&] {
        if (!cfg.plot) return;
        std::set<std::string> vocab(kg.nodes().begin(), kg.nodes().end());
        vocab.insert(kg.frames().begin(), kg.frames().end());
        vocab.insert(kEmptyFrame);
        for (const auto& rec : elements) {
            auto flat = flatten_elements(rec.elements);
            vocab.insert(flat.begin(), flat.end());
        }
        for (int i = 0; i <= cfg.max_events; ++i) vocab.insert(make_transition_token(i));
        std::vector<std::string> frames(kg.frames().begin(), kg.frames().end());
        std::erase(frames, std::string(kEmptyFrame));

        ScoringModel::Config scfg;
        scfg.word_dim = cfg.word_dim;
        scfg.hidden = cfg.hidden;
        ScoringModel model =
            ScoringModel::create(sorted_vocab(vocab), frames, scfg, cfg.seed + 2);
        if (!cfg.embeddings.empty()) load_word_vectors(model, cfg.embeddings);

        std::vector<PredictorExample> examples;
        for (std::size_t i = 0; i < stories.size(); ++i) {
            examples.push_back({flatten_elements(elements[i].elements), golden[i].golden});
        }
        PredictorTrainConfig pcfg;
        pcfg.epochs = cfg.predictor_epochs;
        pcfg.lr = cfg.predictor_lr;
        train_predictor(model, examples, kg, pcfg);
        save_model(model, (out_dir / "predictor").string());

        PathfindConfig path_cfg;
        path_cfg.max_hops_per_event = cfg.max_hops_per_event;
        path_cfg.max_events = cfg.max_events;
        for (const auto& rec : elements) {
            StoryGraph graph = assemble_story_graph(rec.elements, kg, cfg.max_events);
            Storyline line =
                predict_storyline(model, graph, flatten_elements(rec.elements), path_cfg);
            storylines.push_back({rec.sequence_id, std::move(line)});
        }
        write_storylines(storylines, (out_dir / "storylines.jsonl").string());
    });

    // generate: evaluator, generator training, decoding
    std::vector<Story> generated;
    std::vector<StoryOutRecord> stories_out;
    stage("generate", 6, [&] {
        EvaluatorModel evaluator;
        if (cfg.rework) {
            auto labeled = labeled_from_rankings(read_rankings(cfg.rankings));
            std::set<std::string> vocab;
            for (const auto& ex : labeled) vocab.insert(ex.tokens.begin(), ex.tokens.end());
            EvaluatorConfig ecfg;
            ecfg.word_dim = cfg.word_dim;
            ecfg.hidden = cfg.hidden;
            evaluator = EvaluatorModel::create(sorted_vocab(vocab), ecfg, cfg.seed + 4);
            EvaluatorTrainConfig etc_cfg;
            etc_cfg.epochs = cfg.evaluator_epochs;
            etc_cfg.lr = cfg.evaluator_lr;
            train_evaluator(evaluator, labeled, etc_cfg);
            save_evaluator(evaluator, (out_dir / "evaluator").string());
        }

        std::set<std::string> vocab;
        for (const auto& story : stories) {
            for (const auto& s : story.sentences) {
                vocab.insert(s.tokens.begin(), s.tokens.end());
                vocab.insert(s.nouns.begin(), s.nouns.end());
            }
        }
        vocab.insert(kg.frames().begin(), kg.frames().end());
        for (const auto& rec : elements) {
            auto flat = flatten_elements(rec.elements);
            vocab.insert(flat.begin(), flat.end());
        }
        GeneratorConfig gcfg;
        gcfg.dim = cfg.gen_dim;
        gcfg.heads = cfg.gen_heads;
        gcfg.ffn = cfg.gen_ffn;
        gcfg.max_positions = cfg.gen_max_positions;
        gcfg.max_sentence_len = cfg.gen_max_sentence_len;
        GeneratorModel gen = GeneratorModel::create(sorted_vocab(vocab), gcfg, cfg.seed + 3);

        std::vector<StoryExample> data;
        for (std::size_t i = 0; i < stories.size(); ++i) {
            std::vector<std::vector<std::string>> refs;
            for (const auto& s : stories[i].sentences) refs.push_back(s.tokens);
            if (cfg.plot) {
                data.push_back(make_story_example(storyline_from_golden(golden[i].golden), refs));
            } else {
                StoryExample ex;
                ex.events = term_events(elements[i].elements, static_cast<int>(refs.size()));
                ex.sentences = refs;
                data.push_back(std::move(ex));
            }
        }

        TrainConfig tc;
        tc.lr = cfg.generator_lr;
        tc.seed = cfg.seed + 3;
        std::ofstream log(out_dir / "train.log");
        if (!log) throw std::runtime_error("cannot write train.log");
        if (cfg.rework) {
            tc.total_epochs = cfg.generator_epochs;
            tc.reward_start_epoch = cfg.reward_start_epoch;
            train_story_generator(gen, &evaluator, data, tc, &log);
        } else {
            // plain story objective for every epoch: keep the schedule bound
            // one past the end so no executed epoch enters the reward phase
            tc.total_epochs = cfg.generator_epochs + 1;
            tc.reward_start_epoch = cfg.generator_epochs;
            validate(tc);
            nn::Adam opt({.lr = tc.lr, .beta1 = tc.beta1, .beta2 = tc.beta2, .eps = tc.eps});
            for (int epoch = 1; epoch <= cfg.generator_epochs; ++epoch) {
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
        save_generator(gen, (out_dir / "generator").string());

        for (std::size_t i = 0; i < elements.size(); ++i) {
            Story story = cfg.plot
                              ? generate_story(gen, storylines[i].storyline)
                              : generate_story(gen, term_events(elements[i].elements,
                                                                kImagesPerSequence));
            StoryOutRecord rec;
            rec.sequence_id = elements[i].sequence_id;
            for (const auto& s : story.sentences) rec.sentences.push_back(join_tokens(strip_eos(s)));
            stories_out.push_back(std::move(rec));
            generated.push_back(std::move(story));
        }
        write_stories_out(stories_out, (out_dir / "stories_out.jsonl").string());
    });

    // metrics: lexical diversity over everything generated, storyline stats
    stage("metrics", 7, [&] {
        std::vector<std::string> pooled;
        for (const auto& story : generated) {
            for (const auto& s : story.sentences) {
                auto content = strip_eos(s);
                pooled.insert(pooled.end(), content.begin(), content.end());
            }
        }
        double diversity = mtld(pooled);

        std::vector<Storyline> lines;
        if (cfg.plot) {
            for (const auto& rec : storylines) lines.push_back(rec.storyline);
        } else {
            for (const auto& rec : elements) lines.push_back(term_storyline(rec.elements));
        }
        StoryStats stats = story_stats(lines, generated);
        outcome.metrics_line = format_metrics_line(diversity, stats);
        std::ofstream out(out_dir / "metrics.txt");
        if (!out) throw std::runtime_error("cannot write metrics.txt");
        out << outcome.metrics_line << "\n";
        echo << outcome.metrics_line << "\n";
    });

    outcome.story_count = static_cast<int>(stories_out.size());
    return outcome;
}

}  // namespace storyplot
