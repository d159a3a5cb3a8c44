// Writes the bundled corpus under data/fixture: 20 five-image sequences over
// 4 themes, with aligned stories, detections, tagged triples and crowd
// rankings. Everything is a fixed table, so reruns are byte-identical.
//
// Graph bookkeeping, per theme: 6 nouns in a chained 6-edge story cycle
// (frames f0, ef, f1, ef, f0, ef), plus 2 vg-only and 2 vist-only extras.
// Both sources carry every story edge. Totals: 24 nodes, 9 frames including
// empty_frame, 32 vg edges, 32 vist edges, 40 in the union.

#include <array>
#include <cassert>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "storyplot/io.hpp"
#include "storyplot/tokens.hpp"

using namespace storyplot;
namespace fs = std::filesystem;

namespace {

struct Theme {
    std::array<std::string, 6> nouns;
    std::string frame0, verb0;
    std::string frame1, verb1;
    std::string extra_word;
};

const std::array<Theme, 4> kThemes = {{
    {{"dog", "ball", "park", "owner", "bench", "tree"},
     "self_motion", "chased", "cause_motion", "threw", "quickly"},
    {{"kid", "wave", "sand", "castle", "shell", "sun"},
     "creating", "built", "perception", "watched", "happily"},
    {{"cook", "pan", "egg", "plate", "bread", "table"},
     "apply_heat", "fried", "placing", "placed", "carefully"},
    {{"pitcher", "game", "crowd", "field", "team", "trophy"},
     "competition", "played", "getting", "won", "proudly"},
}};

constexpr int kSequences = 20;

// The 6-edge story cycle: consecutive edges share an endpoint, so golden
// chains stay connected for any starting offset.
std::array<NvnTuple, 6> story_edges(const Theme& t) {
    return {{
        {t.nouns[0], t.frame0, t.nouns[1]},
        {t.nouns[1], kEmptyFrame, t.nouns[2]},
        {t.nouns[2], t.frame1, t.nouns[3]},
        {t.nouns[3], kEmptyFrame, t.nouns[4]},
        {t.nouns[4], t.frame0, t.nouns[5]},
        {t.nouns[5], kEmptyFrame, t.nouns[0]},
    }};
}

AnnotatedSentence sentence_for(const Theme& t, const NvnTuple& edge) {
    AnnotatedSentence s;
    if (edge.frame == t.frame0) {
        s.tokens = {"the", edge.head, t.verb0, "the", edge.tail};
        s.frame_spans = {{edge.frame, edge.head, edge.tail}};
    } else if (edge.frame == t.frame1) {
        s.tokens = {"the", edge.head, t.verb1, "the", edge.tail, t.extra_word};
        s.frame_spans = {{edge.frame, edge.head, edge.tail}};
    } else {
        s.tokens = {"the", edge.head, "near", "the", edge.tail};
    }
    s.nouns = {edge.head, edge.tail};
    return s;
}

std::string seq_id(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "seq%02d", i + 1);
    return buf;
}

}  // namespace

int main(int argc, char** argv) {
    fs::path dir = argc > 1 ? argv[1] : "data/fixture";
    fs::create_directories(dir);

    std::vector<StoryRecord> stories;
    std::vector<DetectionGroup> detections;
    std::vector<StoryRanking> rankings;

    for (int i = 0; i < kSequences; ++i) {
        const Theme& theme = kThemes[static_cast<std::size_t>(i % 4)];
        auto edges = story_edges(theme);
        int offset = (i / 4) % 6;
        int length = 3 + i % 3;

        StoryRecord story;
        story.story_id = seq_id(i);
        for (int j = 0; j < length; ++j) {
            story.sentences.push_back(
                sentence_for(theme, edges[static_cast<std::size_t>((offset + j) % 6)]));
        }
        stories.push_back(story);

        DetectionGroup group;
        group.sequence_id = story.story_id;
        for (int img = 0; img < kImagesPerSequence; ++img) {
            const auto& edge =
                edges[static_cast<std::size_t>((offset + std::min(img, length - 1)) % 6)];
            group.detections.push_back({edge.head, 0.90 - 0.01 * img, img});
            group.detections.push_back({edge.tail, 0.85, img});
            group.detections.push_back(
                {theme.nouns[static_cast<std::size_t>((offset + img + 2) % 6)], 0.55, img});
            group.detections.push_back({"background", 0.30, img});
            if (img == 0) {
                // duplicate label (dedup keeps the best) and a confidence tie
                group.detections.push_back({edge.head, 0.50, img});
                group.detections.push_back(
                    {theme.nouns[static_cast<std::size_t>((offset + 4) % 6)], 0.55, img});
            }
        }
        detections.push_back(std::move(group));

        StoryRanking ranking;
        ranking.sequence_id = story.story_id;
        std::vector<std::string> flat;
        for (const auto& s : story.sentences) flat.insert(flat.end(), s.tokens.begin(), s.tokens.end());
        for (int rank = 1; rank <= 4; ++rank) {
            // rank 1 is the reference text; 2..4 are rotations (dropped later)
            std::vector<std::string> tokens = flat;
            std::rotate(tokens.begin(), tokens.begin() + (rank - 1) * 2 % tokens.size(),
                        tokens.end());
            ranking.stories.push_back({std::move(tokens), rank});
        }
        ranking.stories.push_back({std::vector<std::string>(10, "blah"), 5});
        rankings.push_back(std::move(ranking));
    }

    std::vector<TripleRecord> triples;
    std::set<NvnTuple> vg_set;
    std::set<NvnTuple> vist_set;
    for (const Theme& theme : kThemes) {
        auto edges = story_edges(theme);
        for (const auto& e : edges) {
            triples.push_back({e, "vg"});
            triples.push_back({e, "vist"});
            vg_set.insert(e);
            vist_set.insert(e);
        }
        const auto& n = theme.nouns;
        for (const NvnTuple& e : {NvnTuple{n[0], theme.frame1, n[2]},
                                  NvnTuple{n[1], theme.frame0, n[3]}}) {
            triples.push_back({e, "vg"});
            vg_set.insert(e);
        }
        for (const NvnTuple& e : {NvnTuple{n[2], theme.frame0, n[4]},
                                  NvnTuple{n[3], theme.frame1, n[5]}}) {
            triples.push_back({e, "vist"});
            vist_set.insert(e);
        }
    }

    // every story hop must be answerable from either source alone
    for (const auto& story : stories) {
        for (const auto& s : story.sentences) {
            NvnTuple t{s.nouns[0], s.frame_spans.empty() ? kEmptyFrame : s.frame_spans[0].label,
                       s.nouns[1]};
            assert(vg_set.count(t) == 1 && vist_set.count(t) == 1);
        }
    }
    assert(vg_set.size() == 32 && vist_set.size() == 32);

    write_stories(stories, (dir / "stories.jsonl").string());
    write_detections(detections, (dir / "detections.jsonl").string());
    write_triples(triples, (dir / "triples.jsonl").string());
    write_rankings(rankings, (dir / "rankings.jsonl").string());

    std::ofstream cfg(dir / "pipeline.cfg");
    cfg << "# fixture pipeline, desk-scale knobs\n"
        << "triples=data/fixture/triples.jsonl\n"
        << "stories=data/fixture/stories.jsonl\n"
        << "detections=data/fixture/detections.jsonl\n"
        << "rankings=data/fixture/rankings.jsonl\n"
        << "out_dir=out/fixture\n"
        << "seed=7\n"
        << "term_epochs=40\n"
        << "term_top_k=3\n"
        << "predictor_epochs=12\n"
        << "predictor_lr=0.004\n"
        << "word_dim=16\n"
        << "hidden=24\n"
        << "max_events=8\n"
        << "max_hops_per_event=4\n"
        << "generator_epochs=6\n"
        << "reward_start_epoch=3\n"
        << "generator_lr=0.002\n"
        << "gen_dim=32\n"
        << "gen_heads=2\n"
        << "gen_ffn=64\n"
        << "gen_max_positions=48\n"
        << "gen_max_sentence_len=12\n"
        << "evaluator_epochs=10\n"
        << "evaluator_lr=0.004\n";

    std::cout << "fixture written to " << dir.string() << ": " << stories.size() << " sequences, "
              << triples.size() << " triples\n";
    return 0;
}
