#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "storyplot/generator.hpp"
#include "storyplot/nn/adam.hpp"
#include "storyplot/tokens.hpp"

using namespace storyplot;
namespace fs = std::filesystem;

namespace {

StorylineHop hop(const std::string& head, const std::string& frame, const std::string& tail, int pos = 0) {
    int head_pos = is_transition_token(head) ? kTokenPosition : 0;
    return {StoryEntity{head, head_pos}, Relation{frame, tail, pos}};
}

GeneratorConfig tiny_config() {
    GeneratorConfig cfg;
    cfg.dim = 32;
    cfg.ffn = 64;
    cfg.max_positions = 32;
    return cfg;
}

std::vector<double> train(GeneratorModel& m, const std::vector<SentenceExample>& data,
                          int epochs, double lr) {
    nn::Adam opt({.lr = lr});
    auto tensors = m.params.all();
    std::vector<double> curve;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        double total = 0.0;
        for (const auto& ex : data) {
            nn::Tape t;
            nn::Var loss = sentence_nll(t, m, ex.event_tokens, ex.y_prev, ex.target);
            total += loss.scalar();
            t.backward(loss);
            opt.step(tensors);
        }
        curve.push_back(total / static_cast<double>(data.size()));
    }
    return curve;
}

}  // namespace

TEST_CASE("event linearization") {
    SUBCASE("plain noun-frame-noun hop") {
        std::vector<StorylineHop> e{hop("dog", "self_motion", "park")};
        CHECK(encode_event(e) == std::vector<std::string>{"<evt>", "dog", "self_motion", "park"});
    }
    SUBCASE("lone hop into a transition token keeps only the noun") {
        std::vector<StorylineHop> e{hop("x", kEmptyFrame, "<s_1>", kTokenPosition)};
        CHECK(encode_event(e) == std::vector<std::string>{"<evt>", "x"});
    }
    SUBCASE("two chained hops give five content tokens") {
        std::vector<StorylineHop> e{hop("a", "f1", "b"), hop("b", "f2", "c")};
        auto toks = encode_event(e);
        CHECK(toks == std::vector<std::string>{"<evt>", "a", "f1", "b", "f2", "c"});
        CHECK(toks.size() - 1 == 5);
    }
    SUBCASE("boundary hops contribute no frame or token") {
        std::vector<StorylineHop> e{
            hop("<s_0>", kEmptyFrame, "dog"),
            hop("dog", "self_motion", "park"),
            hop("park", kEmptyFrame, "<s_1>", kTokenPosition),
        };
        CHECK(encode_event(e) == std::vector<std::string>{"<evt>", "dog", "self_motion", "park"});
    }
    SUBCASE("interior empty-frame hops keep the frame token") {
        std::vector<StorylineHop> e{hop("a", kEmptyFrame, "b"), hop("b", "run", "c")};
        CHECK(encode_event(e) ==
              std::vector<std::string>{"<evt>", "a", kEmptyFrame, "b", "run", "c"});
    }
    SUBCASE("no transition token ever leaks through") {
        std::vector<StorylineHop> e{
            hop("<s_2>", kEmptyFrame, "cat"),
            hop("cat", "placing", "sofa"),
            hop("sofa", kEmptyFrame, "lamp"),
            hop("lamp", kEmptyFrame, "<s_3>", kTokenPosition),
        };
        for (const auto& tok : encode_event(e)) CHECK_FALSE(is_transition_token(tok));
    }
}

TEST_CASE("greedy decoding") {
    auto m = GeneratorModel::create({"ant", "cat", "dog"}, tiny_config(), 42);

    SUBCASE("deterministic and terminated") {
        auto s1 = generate_sentence(m, {"<evt>", "dog"}, {});
        auto s2 = generate_sentence(m, {"<evt>", "dog"}, {});
        CHECK(s1 == s2);
        REQUIRE(!s1.empty());
        CHECK(s1.back() == kEos);
        CHECK(strip_eos(s1).size() <= static_cast<std::size_t>(m.cfg.max_sentence_len));
    }

    SUBCASE("ties go to the lexicographically smaller token") {
        for (auto* t : m.params.all()) t->value.setZero();
        auto* b = m.params.find("gen.out.b");
        REQUIRE(b != nullptr);
        b->value(0, m.vocab.id("cat")) = 5.0;
        b->value(0, m.vocab.id("ant")) = 5.0;
        auto s = generate_sentence(m, {"<evt>", "dog"}, {});
        REQUIRE(strip_eos(s).size() == static_cast<std::size_t>(m.cfg.max_sentence_len));
        for (const auto& tok : strip_eos(s)) CHECK(tok == "ant");

        b->value(0, m.vocab.id(std::string(kEos))) = 6.0;
        CHECK(generate_sentence(m, {"<evt>", "dog"}, {}) == std::vector<std::string>{kEos});
    }

    SUBCASE("sentence budget forces the end marker") {
        for (auto* t : m.params.all()) t->value.setZero();
        m.params.find("gen.out.b")->value(0, m.vocab.id("dog")) = 1.0;
        auto s = generate_sentence(m, {"<evt>", "dog"}, {});
        CHECK(s.size() == static_cast<std::size_t>(m.cfg.max_sentence_len) + 1);
        CHECK(s.back() == kEos);
    }
}

TEST_CASE("story has one sentence per event") {
    auto m = GeneratorModel::create({"a", "b", "c"}, tiny_config(), 7);
    for (int len : {1, 6, 10}) {
        Storyline line;
        for (int i = 0; i < len; ++i) {
            line.events.push_back({hop(make_transition_token(i), kEmptyFrame, "a"),
                                   hop("a", "f", "b"),
                                   hop("b", kEmptyFrame, make_transition_token(i + 1), kTokenPosition)});
        }
        Story story = generate_story(m, line);
        CHECK(story.sentences.size() == static_cast<std::size_t>(len));
        for (const auto& s : story.sentences) CHECK(s.back() == kEos);
    }
}

TEST_CASE("unknown tokens collapse to the shared slot") {
    auto m = GeneratorModel::create({"a"}, tiny_config(), 7);
    CHECK(m.to_id("zebra") == m.vocab.id(std::string(kUnk)));
    nn::Tape t;
    nn::Var loss = sentence_nll(t, m, {"<evt>", "zebra"}, {}, {"zebra", "a"});
    CHECK(std::isfinite(loss.scalar()));
}

TEST_CASE("overfits two storyline events and reproduces the references") {
    std::vector<std::string> vocab{"the", "dog",  "ran", "to",  "park", "a",
                                   "cat", "sat",  "on",  "sofa", "self_motion", "placing"};
    auto m = GeneratorModel::create(vocab, tiny_config(), 11);

    std::vector<StorylineHop> e1{hop("dog", "self_motion", "park")};
    std::vector<StorylineHop> e2{hop("cat", "placing", "sofa")};
    std::vector<std::string> r1{"the", "dog", "ran", "to", "the", "park"};
    std::vector<std::string> r2{"a", "cat", "sat", "on", "the", "sofa"};
    std::vector<SentenceExample> data{
        {encode_event(e1), {}, r1},
        {encode_event(e2), r1, r2},
    };

    auto curve = train(m, data, 250, 0.003);
    CHECK(curve.back() < curve.front());
    CHECK(token_accuracy(m, data) == 1.0);

    CHECK(generate_sentence(m, encode_event(e1), {}) == [&] {
        auto s = r1;
        s.emplace_back(kEos);
        return s;
    }());

    Storyline line;
    line.events = {e1, e2};
    Story story = generate_story(m, line);
    REQUIRE(story.sentences.size() == 2);
    CHECK(strip_eos(story.sentences[0]) == r1);
    CHECK(strip_eos(story.sentences[1]) == r2);
}

TEST_CASE("same seed, same data, same weights") {
    auto make = [] { return GeneratorModel::create({"a", "b"}, tiny_config(), 99); };
    auto m1 = make();
    auto m2 = make();
    std::vector<SentenceExample> data{{{"<evt>", "a"}, {}, {"b", "a"}}};
    train(m1, data, 3, 0.01);
    train(m2, data, 3, 0.01);
    auto p1 = std::as_const(m1.params).all();
    auto p2 = std::as_const(m2.params).all();
    REQUIRE(p1.size() == p2.size());
    for (std::size_t i = 0; i < p1.size(); ++i) {
        CHECK((p1[i]->value - p2[i]->value).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("teacher-forced gradients match finite differences") {
    GeneratorConfig cfg;
    cfg.dim = 8;
    cfg.heads = 2;
    cfg.ffn = 12;
    cfg.max_positions = 16;
    auto m = GeneratorModel::create({"a", "b", "c"}, cfg, 5);

    std::vector<std::string> event{"<evt>", "a", "f", "b"};
    std::vector<std::string> prev{"c", "a"};
    std::vector<std::string> target{"b", "c", "a"};

    auto loss_value = [&] {
        nn::Tape t;
        return sentence_nll(t, m, event, prev, target).scalar();
    };

    m.params.zero_grads();
    {
        nn::Tape t;
        nn::Var loss = sentence_nll(t, m, event, prev, target);
        CHECK(std::isfinite(loss.scalar()));
        t.backward(loss);
    }

    std::mt19937_64 gen(321);
    const double h = 1e-5;
    for (nn::Tensor* p : m.params.all()) {
        for (int probe = 0; probe < 5; ++probe) {
            Eigen::Index i = static_cast<Eigen::Index>(gen() % p->value.rows());
            Eigen::Index j = static_cast<Eigen::Index>(gen() % p->value.cols());
            const double orig = p->value(i, j);
            p->value(i, j) = orig + h;
            double fp = loss_value();
            p->value(i, j) = orig - h;
            double fm = loss_value();
            p->value(i, j) = orig;
            double num = (fp - fm) / (2.0 * h);
            double ana = p->grad(i, j);
            double denom = std::max({std::abs(num), std::abs(ana), 1e-6});
            INFO(p->name, "(", i, ",", j, ")");
            CHECK(std::abs(num - ana) / denom < 1e-4);
        }
    }
}

TEST_CASE("fine-tuning resumes from a saved checkpoint") {
    std::vector<std::string> vocab{"a", "b", "c", "f"};
    auto m = GeneratorModel::create(vocab, tiny_config(), 3);
    std::vector<SentenceExample> pretrain{{{"<evt>", "a", "f", "b"}, {}, {"a", "b"}}};
    train(m, pretrain, 5, 0.005);

    fs::path dir = fs::temp_directory_path() / "storyplot_generator_test";
    fs::create_directories(dir);
    std::string prefix = (dir / "gen").string();
    save_generator(m, prefix);

    auto resumed = load_generator(prefix);
    CHECK(resumed.vocab.tokens() == m.vocab.tokens());
    auto p1 = std::as_const(m.params).all();
    auto p2 = std::as_const(resumed.params).all();
    REQUIRE(p1.size() == p2.size());
    for (std::size_t i = 0; i < p1.size(); ++i) {
        CHECK(p1[i]->name == p2[i]->name);
        CHECK((p1[i]->value - p2[i]->value).cwiseAbs().maxCoeff() == 0.0);
    }

    std::vector<SentenceExample> finetune{{{"<evt>", "c", "f", "a"}, {"a", "b"}, {"c", "a"}}};
    auto curve = train(resumed, finetune, 3, 0.005);
    CHECK(curve.size() == 3);
    for (double v : curve) CHECK(std::isfinite(v));
}

TEST_CASE("encoder input length guard") {
    GeneratorConfig cfg = tiny_config();
    cfg.max_positions = 4;
    auto m = GeneratorModel::create({"a"}, cfg, 1);
    CHECK_THROWS_WITH_AS(generate_sentence(m, {"<evt>", "a", "a", "a", "a"}, {}),
                         "generator: sequence of 5 tokens exceeds max_positions=4",
                         std::runtime_error);
}
