#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "storyplot/corpus.hpp"
#include "storyplot/evaluator.hpp"
#include "storyplot/kgraph.hpp"
#include "storyplot/metrics.hpp"

namespace py = pybind11;
using namespace storyplot;

namespace {

using PyDetection = std::tuple<std::string, double, int>;
using PyFrameSpan = std::tuple<std::string, std::string, std::string>;
// (tokens, nouns, frame spans as (label, head, tail))
using PySentence =
    std::tuple<std::vector<std::string>, std::vector<std::string>, std::vector<PyFrameSpan>>;
using PyHop = std::tuple<std::string, std::string, std::string>;

std::vector<Detection> to_detections(const std::vector<PyDetection>& rows) {
    std::vector<Detection> out;
    for (const auto& [label, confidence, image] : rows) {
        out.push_back(Detection{label, confidence, image});
    }
    return out;
}

std::vector<AnnotatedSentence> to_sentences(const std::vector<PySentence>& rows) {
    std::vector<AnnotatedSentence> out;
    for (const auto& [tokens, nouns, spans] : rows) {
        AnnotatedSentence s;
        s.tokens = tokens;
        s.nouns = nouns;
        for (const auto& [label, head, tail] : spans) {
            s.frame_spans.push_back(FrameSpan{label, head, tail});
        }
        out.push_back(std::move(s));
    }
    return out;
}

GoldenStoryline to_golden(const std::vector<PyHop>& hops, int sentence_count) {
    GoldenStoryline g;
    g.sentence_count = sentence_count;
    for (const auto& [head, frame, tail] : hops) g.hops.push_back(NvnTuple{head, frame, tail});
    return g;
}

}  // namespace

PYBIND11_MODULE(_storyplot, m) {
    m.doc() = "story graph and storyline pipeline core";

    m.def(
        "select_objects",
        [](const std::vector<PyDetection>& rows) {
            auto bags = select_objects(to_detections(rows));
            return std::vector<std::vector<std::string>>(bags.begin(), bags.end());
        },
        py::arg("detections"),
        "Top five labels per image from (label, confidence, image_index) rows.");

    m.def(
        "golden_storyline",
        [](const std::vector<PySentence>& sentences) {
            GoldenStoryline g = build_golden_storyline(to_sentences(sentences));
            std::vector<PyHop> hops;
            for (const auto& h : g.hops) hops.emplace_back(h.head, h.frame, h.tail);
            return py::make_tuple(hops, g.sentence_count);
        },
        py::arg("sentences"),
        "Reference hop chain of a story given (tokens, nouns, frame_spans) sentences.");

    m.def(
        "golden_invariants_hold",
        [](const std::vector<PyHop>& hops, int sentence_count) {
            return golden_invariants_hold(to_golden(hops, sentence_count));
        },
        py::arg("hops"), py::arg("sentence_count"));

    py::class_<KnowledgeGraph>(m, "KnowledgeGraph")
        .def(py::init<>())
        .def(
            "add",
            [](KnowledgeGraph& g, const std::string& head, const std::string& frame,
               const std::string& tail) { g.add(NvnTuple{head, frame, tail}); },
            py::arg("head"), py::arg("frame"), py::arg("tail"))
        .def("node_count", &KnowledgeGraph::node_count)
        .def("frame_count", &KnowledgeGraph::frame_count)
        .def("edge_count", &KnowledgeGraph::edge_count)
        .def("stats", &KnowledgeGraph::stats)
        .def(
            "outgoing",
            [](const KnowledgeGraph& g, const std::string& head) { return g.outgoing(head); },
            py::arg("head"));

    m.def("merge", &merge, py::arg("g1"), py::arg("g2"));

    m.def("mtld", &mtld, py::arg("tokens"), py::arg("threshold") = 0.72,
          "Mean diversity factor length over forward and backward scans.");

    m.def("reward", &reward, py::arg("p"),
          "Loss multiplier for a story scored p by the evaluator.");
}
