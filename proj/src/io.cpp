#include "storyplot/io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "storyplot/tokens.hpp"

namespace storyplot {

namespace {

using nlohmann::json;

// Parses one JSON object per non-empty line, reporting the 1-based line on
// any failure.
template <typename Fn>
void for_each_record(const std::string& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        lineno += 1;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            fn(json::parse(line));
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ": line " + std::to_string(lineno) + ": " + e.what());
        }
    }
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot write");
    return out;
}

}  // namespace

std::vector<StoryRecord> read_stories(const std::string& path) {
    std::vector<StoryRecord> out;
    for_each_record(path, [&](const json& j) {
        StoryRecord rec;
        rec.story_id = j.at("story_id").get<std::string>();
        for (const auto& js : j.at("sentences")) {
            AnnotatedSentence s;
            s.tokens = js.at("tokens").get<std::vector<std::string>>();
            s.nouns = js.at("nouns").get<std::vector<std::string>>();
            if (js.contains("frames")) {
                for (const auto& jf : js.at("frames")) {
                    s.frame_spans.push_back({jf.at("label").get<std::string>(),
                                             jf.at("head").get<std::string>(),
                                             jf.at("tail").get<std::string>()});
                }
            }
            rec.sentences.push_back(std::move(s));
        }
        out.push_back(std::move(rec));
    });
    return out;
}

void write_stories(const std::vector<StoryRecord>& stories, const std::string& path) {
    auto out = open_out(path);
    for (const auto& rec : stories) {
        json j;
        j["story_id"] = rec.story_id;
        j["sentences"] = json::array();
        for (const auto& s : rec.sentences) {
            json js;
            js["tokens"] = s.tokens;
            js["nouns"] = s.nouns;
            js["frames"] = json::array();
            for (const auto& f : s.frame_spans) {
                js["frames"].push_back({{"label", f.label}, {"head", f.head}, {"tail", f.tail}});
            }
            j["sentences"].push_back(std::move(js));
        }
        out << j.dump() << "\n";
    }
}

std::vector<DetectionGroup> read_detections(const std::string& path) {
    std::vector<DetectionGroup> out;
    std::unordered_map<std::string, std::size_t> index;
    for_each_record(path, [&](const json& j) {
        std::string seq = j.at("sequence_id").get<std::string>();
        Detection d;
        d.label = j.at("label").get<std::string>();
        d.confidence = j.at("confidence").get<double>();
        d.image_index = j.at("image_index").get<int>();
        auto [it, inserted] = index.try_emplace(seq, out.size());
        if (inserted) out.push_back({std::move(seq), {}});
        out[it->second].detections.push_back(std::move(d));
    });
    return out;
}

void write_detections(const std::vector<DetectionGroup>& groups, const std::string& path) {
    auto out = open_out(path);
    for (const auto& g : groups) {
        for (const auto& d : g.detections) {
            json j{{"sequence_id", g.sequence_id},
                   {"image_index", d.image_index},
                   {"label", d.label},
                   {"confidence", d.confidence}};
            out << j.dump() << "\n";
        }
    }
}

std::vector<TripleRecord> read_triples(const std::string& path) {
    std::vector<TripleRecord> out;
    for_each_record(path, [&](const json& j) {
        TripleRecord rec;
        rec.triple.head = j.at("head").get<std::string>();
        rec.triple.frame = j.at("frame").get<std::string>();
        rec.triple.tail = j.at("tail").get<std::string>();
        rec.source = j.value("source", std::string("vist"));
        if (rec.source != "vg" && rec.source != "vist") {
            throw std::runtime_error("source must be vg or vist, got " + rec.source);
        }
        out.push_back(std::move(rec));
    });
    return out;
}

void write_triples(const std::vector<TripleRecord>& triples, const std::string& path) {
    auto out = open_out(path);
    for (const auto& rec : triples) {
        json j{{"head", rec.triple.head},
               {"frame", rec.triple.frame},
               {"tail", rec.triple.tail},
               {"source", rec.source}};
        out << j.dump() << "\n";
    }
}

std::vector<GoldenRecord> read_golden(const std::string& path) {
    std::vector<GoldenRecord> out;
    for_each_record(path, [&](const json& j) {
        GoldenRecord rec;
        rec.story_id = j.at("story_id").get<std::string>();
        rec.golden.sentence_count = j.at("sentence_count").get<int>();
        for (const auto& jh : j.at("hops")) {
            rec.golden.hops.push_back({jh.at("head").get<std::string>(),
                                       jh.at("frame").get<std::string>(),
                                       jh.at("tail").get<std::string>()});
        }
        out.push_back(std::move(rec));
    });
    return out;
}

void write_golden(const std::vector<GoldenRecord>& records, const std::string& path) {
    auto out = open_out(path);
    for (const auto& rec : records) {
        json j;
        j["story_id"] = rec.story_id;
        j["sentence_count"] = rec.golden.sentence_count;
        j["hops"] = json::array();
        for (const auto& h : rec.golden.hops) {
            j["hops"].push_back({{"head", h.head}, {"frame", h.frame}, {"tail", h.tail}});
        }
        out << j.dump() << "\n";
    }
}

std::vector<ElementsRecord> read_elements(const std::string& path) {
    std::vector<ElementsRecord> out;
    for_each_record(path, [&](const json& j) {
        ElementsRecord rec;
        rec.sequence_id = j.at("sequence_id").get<std::string>();
        const auto& jo = j.at("objects");
        const auto& jt = j.at("terms");
        if (jo.size() != kImagesPerSequence || jt.size() != kImagesPerSequence) {
            throw std::runtime_error("objects and terms need one list per image");
        }
        for (int i = 0; i < kImagesPerSequence; ++i) {
            rec.elements.objects[i] = jo[i].get<std::vector<std::string>>();
            rec.elements.terms[i] = jt[i].get<std::vector<std::string>>();
        }
        out.push_back(std::move(rec));
    });
    return out;
}

void write_elements(const std::vector<ElementsRecord>& records, const std::string& path) {
    auto out = open_out(path);
    for (const auto& rec : records) {
        json j;
        j["sequence_id"] = rec.sequence_id;
        j["objects"] = rec.elements.objects;
        j["terms"] = rec.elements.terms;
        out << j.dump() << "\n";
    }
}

std::vector<StorylineRecord> read_storylines(const std::string& path) {
    std::vector<StorylineRecord> out;
    for_each_record(path, [&](const json& j) {
        StorylineRecord rec;
        rec.sequence_id = j.at("sequence_id").get<std::string>();
        for (const auto& je : j.at("events")) {
            std::vector<StorylineHop> event;
            for (const auto& jh : je) {
                Relation r{jh.at("frame").get<std::string>(), jh.at("tail").get<std::string>(),
                           jh.at("tail_pos").get<int>()};
                std::string head = jh.at("head").get<std::string>();
                int head_pos = event.empty() ? kTokenPosition : event.back().relation.tail_position;
                if (!event.empty() && event.back().relation.tail != head) {
                    throw std::runtime_error("event hops do not chain at " + head);
                }
                event.push_back({StoryEntity{std::move(head), head_pos}, std::move(r)});
            }
            rec.storyline.events.push_back(std::move(event));
        }
        out.push_back(std::move(rec));
    });
    return out;
}

void write_storylines(const std::vector<StorylineRecord>& records, const std::string& path) {
    auto out = open_out(path);
    for (const auto& rec : records) {
        json j;
        j["sequence_id"] = rec.sequence_id;
        j["events"] = json::array();
        for (const auto& event : rec.storyline.events) {
            json je = json::array();
            for (const auto& hop : event) {
                je.push_back({{"head", hop.head.label},
                              {"frame", hop.relation.frame},
                              {"tail", hop.relation.tail},
                              {"tail_pos", hop.relation.tail_position}});
            }
            j["events"].push_back(std::move(je));
        }
        out << j.dump() << "\n";
    }
}

std::vector<StoryOutRecord> read_stories_out(const std::string& path) {
    std::vector<StoryOutRecord> out;
    for_each_record(path, [&](const json& j) {
        out.push_back({j.at("sequence_id").get<std::string>(),
                       j.at("sentences").get<std::vector<std::string>>()});
    });
    return out;
}

void write_stories_out(const std::vector<StoryOutRecord>& records, const std::string& path) {
    auto out = open_out(path);
    for (const auto& rec : records) {
        json j{{"sequence_id", rec.sequence_id}, {"sentences", rec.sentences}};
        out << j.dump() << "\n";
    }
}

std::vector<StoryRanking> read_rankings(const std::string& path) {
    std::vector<StoryRanking> out;
    for_each_record(path, [&](const json& j) {
        StoryRanking group;
        group.sequence_id = j.at("sequence_id").get<std::string>();
        for (const auto& js : j.at("stories")) {
            group.stories.push_back(
                {js.at("tokens").get<std::vector<std::string>>(), js.at("rank").get<int>()});
        }
        out.push_back(std::move(group));
    });
    return out;
}

void write_rankings(const std::vector<StoryRanking>& rankings, const std::string& path) {
    auto out = open_out(path);
    for (const auto& group : rankings) {
        json j;
        j["sequence_id"] = group.sequence_id;
        j["stories"] = json::array();
        for (const auto& rs : group.stories) {
            j["stories"].push_back({{"tokens", rs.tokens}, {"rank", rs.rank}});
        }
        out << j.dump() << "\n";
    }
}

std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) out += ' ';
        out += tokens[i];
    }
    return out;
}

std::vector<std::string> split_tokens(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

}  // namespace storyplot
