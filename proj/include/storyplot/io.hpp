#pragma once

#include <string>
#include <vector>

#include "storyplot/corpus.hpp"
#include "storyplot/evaluator.hpp"
#include "storyplot/predictor.hpp"

namespace storyplot {

// JSONL corpus files. Every reader reports malformed input as
// "<path>: line <n>: <reason>" and ignores unknown fields.

struct StoryRecord {
    std::string story_id;
    std::vector<AnnotatedSentence> sentences;
};

std::vector<StoryRecord> read_stories(const std::string& path);
void write_stories(const std::vector<StoryRecord>& stories, const std::string& path);

struct DetectionGroup {
    std::string sequence_id;
    std::vector<Detection> detections;
};

// Groups rows by sequence_id in first-seen order.
std::vector<DetectionGroup> read_detections(const std::string& path);
void write_detections(const std::vector<DetectionGroup>& groups, const std::string& path);

struct TripleRecord {
    NvnTuple triple;
    std::string source;  // "vg" or "vist"
};

std::vector<TripleRecord> read_triples(const std::string& path);
void write_triples(const std::vector<TripleRecord>& triples, const std::string& path);

struct GoldenRecord {
    std::string story_id;
    GoldenStoryline golden;
};

std::vector<GoldenRecord> read_golden(const std::string& path);
void write_golden(const std::vector<GoldenRecord>& records, const std::string& path);

struct ElementsRecord {
    std::string sequence_id;
    StoryElements elements;
};

std::vector<ElementsRecord> read_elements(const std::string& path);
void write_elements(const std::vector<ElementsRecord>& records, const std::string& path);

struct StorylineRecord {
    std::string sequence_id;
    Storyline storyline;
};

// Head positions are not stored: the first hop of an event starts at a
// transition token and every later hop starts where the previous one ended,
// so the reader rebuilds them.
std::vector<StorylineRecord> read_storylines(const std::string& path);
void write_storylines(const std::vector<StorylineRecord>& records, const std::string& path);

struct StoryOutRecord {
    std::string sequence_id;
    std::vector<std::string> sentences;  // space-joined content tokens
};

std::vector<StoryOutRecord> read_stories_out(const std::string& path);
void write_stories_out(const std::vector<StoryOutRecord>& records, const std::string& path);

std::vector<StoryRanking> read_rankings(const std::string& path);
void write_rankings(const std::vector<StoryRanking>& rankings, const std::string& path);

std::string join_tokens(const std::vector<std::string>& tokens);
std::vector<std::string> split_tokens(const std::string& line);

}  // namespace storyplot
