#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "storyplot/evaluator.hpp"
#include "storyplot/tokens.hpp"

using namespace storyplot;
namespace fs = std::filesystem;

namespace {

EvaluatorConfig tiny_config() {
    EvaluatorConfig cfg;
    cfg.word_dim = 12;
    cfg.hidden = 16;
    return cfg;
}

std::vector<std::string> pool(const std::string& stem, int n) {
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) out.push_back(stem + std::to_string(i));
    return out;
}

// Positive stories draw from one token pool, negative stories from another.
struct SeparableData {
    std::vector<std::string> vocab;
    std::vector<LabeledStory> train;
    std::vector<LabeledStory> held_out;
};

SeparableData separable(int train_per_class, int held_per_class, std::uint64_t seed) {
    SeparableData d;
    auto good = pool("good_", 10);
    auto bad = pool("bad_", 10);
    d.vocab = good;
    d.vocab.insert(d.vocab.end(), bad.begin(), bad.end());

    std::mt19937_64 gen(seed);
    auto story = [&](const std::vector<std::string>& words, int label) {
        LabeledStory s;
        s.label = label;
        for (int k = 0; k < 8; ++k) s.tokens.push_back(words[gen() % words.size()]);
        return s;
    };
    for (int i = 0; i < train_per_class; ++i) {
        d.train.push_back(story(good, 1));
        d.train.push_back(story(bad, 0));
    }
    for (int i = 0; i < held_per_class; ++i) {
        d.held_out.push_back(story(good, 1));
        d.held_out.push_back(story(bad, 0));
    }
    return d;
}

}  // namespace

TEST_CASE("fresh model is exactly undecided") {
    auto m = EvaluatorModel::create({"a", "b"}, tiny_config(), 9);
    CHECK(score_tokens(m, {"a", "b", "a"}) == 0.5);
    CHECK(reward(score_tokens(m, {"b"})) == 1.0);
}

TEST_CASE("reward arithmetic") {
    CHECK(reward(0.25) == 1.25);
    CHECK(reward(0.5) == 1.0);
    double prev = reward(0.001);
    for (double p = 0.05; p < 1.0; p += 0.05) {
        double r = reward(p);
        CHECK(r < prev);
        prev = r;
    }
}

TEST_CASE("scores stay strictly inside the unit interval") {
    auto m = EvaluatorModel::create(pool("w_", 20), tiny_config(), 4);
    std::mt19937_64 gen(7);
    for (int i = 0; i < 1000; ++i) {
        std::vector<std::string> toks;
        int len = 1 + static_cast<int>(gen() % 30);
        for (int k = 0; k < len; ++k) toks.push_back("w_" + std::to_string(gen() % 20));
        double p = score_tokens(m, toks);
        CHECK(p > 0.0);
        CHECK(p < 1.0);
        double r = reward(p);
        CHECK(r > 0.5);
        CHECK(r < 1.5);
    }
}

TEST_CASE("head bias sits inside the softmax") {
    auto m = EvaluatorModel::create({"a"}, tiny_config(), 1);
    for (auto* t : m.params.all()) t->value.setZero();
    m.head_b->value(0, 1) = std::log(3.0);
    // tanh(h W) is zero, so p = softmax([0, log 3])[1] = 3/4
    CHECK(score_tokens(m, {"a", "a"}) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("empty story is rejected") {
    auto m = EvaluatorModel::create({"a"}, tiny_config(), 1);
    CHECK_THROWS_WITH_AS(score_story(m, Story{}), "evaluator: empty story", std::runtime_error);
}

TEST_CASE("scoring leaves the weights untouched") {
    auto m = EvaluatorModel::create({"a", "b", "c"}, tiny_config(), 12);
    std::vector<Eigen::MatrixXd> before;
    for (const auto* t : std::as_const(m.params).all()) before.push_back(t->value);
    double p1 = score_tokens(m, {"a", "b", "c", "b"});
    double p2 = score_tokens(m, {"a", "b", "c", "b"});
    CHECK(p1 == p2);
    auto after = std::as_const(m.params).all();
    for (std::size_t i = 0; i < after.size(); ++i) {
        CHECK((after[i]->value - before[i]).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("training requires both labels") {
    auto m = EvaluatorModel::create({"a"}, tiny_config(), 1);
    std::vector<LabeledStory> only_pos{{{"a"}, 1}, {{"a", "a"}, 1}};
    CHECK_THROWS_WITH_AS(train_evaluator(m, only_pos, {}),
                         "train_evaluator: training data needs both positive and negative stories",
                         std::runtime_error);
    std::vector<LabeledStory> only_neg{{{"a"}, 0}};
    CHECK_THROWS(train_evaluator(m, only_neg, {}));
}

TEST_CASE("separates two easy story populations") {
    auto d = separable(20, 10, 77);
    auto m = EvaluatorModel::create(d.vocab, tiny_config(), 21);
    EvaluatorTrainConfig tc;
    tc.epochs = 12;
    tc.lr = 0.01;
    auto curve = train_evaluator(m, d.train, tc);
    CHECK(curve.back() < curve.front());
    CHECK(evaluator_accuracy(m, d.held_out) >= 0.95);

    SUBCASE("good stories earn smaller rewards than bad ones") {
        double r_good = reward(score_tokens(m, d.held_out[0].tokens));
        double r_bad = reward(score_tokens(m, d.held_out[1].tokens));
        CHECK(r_good < r_bad);
    }
}

TEST_CASE("memorizes a tiny labeled set") {
    std::vector<LabeledStory> data{
        {{"sun", "rose", "slowly"}, 1},
        {{"sun", "sun", "sun"}, 0},
        {{"rain", "fell", "softly"}, 1},
        {{"fell", "fell", "rain"}, 0},
    };
    auto m = EvaluatorModel::create({"sun", "rose", "slowly", "rain", "fell", "softly"}, tiny_config(), 5);
    EvaluatorTrainConfig tc;
    tc.epochs = 60;
    tc.lr = 0.02;
    train_evaluator(m, data, tc);
    CHECK(evaluator_accuracy(m, data) == 1.0);
}

TEST_CASE("same seed training is bit identical") {
    auto d = separable(4, 0, 3);
    auto run = [&] {
        auto m = EvaluatorModel::create(d.vocab, tiny_config(), 8);
        EvaluatorTrainConfig tc;
        tc.epochs = 3;
        tc.lr = 0.01;
        train_evaluator(m, d.train, tc);
        return m;
    };
    auto m1 = run();
    auto m2 = run();
    auto p1 = std::as_const(m1.params).all();
    auto p2 = std::as_const(m2.params).all();
    for (std::size_t i = 0; i < p1.size(); ++i) {
        CHECK((p1[i]->value - p2[i]->value).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK(score_tokens(m1, d.train[0].tokens) == score_tokens(m2, d.train[0].tokens));
}

TEST_CASE("rankings distill to top and bottom examples") {
    StoryRanking g1{"seq-1",
                    {{{"w1"}, 3}, {{"best", "story"}, 1}, {{"w2"}, 2}, {{"w3"}, 4}, {{"worst"}, 5}}};
    StoryRanking g2{"seq-2", {{{"solid"}, 1}, {{"poor"}, 5}}};
    auto labeled = labeled_from_rankings({g1, g2});
    REQUIRE(labeled.size() == 4);
    CHECK(labeled[0].tokens == std::vector<std::string>{"best", "story"});
    CHECK(labeled[0].label == 1);
    CHECK(labeled[1].tokens == std::vector<std::string>{"worst"});
    CHECK(labeled[1].label == 0);
    CHECK(labeled[2].label == 1);
    CHECK(labeled[3].label == 0);

    StoryRanking bad{"seq-3", {{{"x"}, 0}}};
    CHECK_THROWS_WITH_AS(labeled_from_rankings({bad}),
                         "rankings: sequence seq-3 has rank 0 outside 1..5", std::runtime_error);
    StoryRanking bad6{"seq-4", {{{"x"}, 6}}};
    CHECK_THROWS(labeled_from_rankings({bad6}));
}

TEST_CASE("classifier gradients match finite differences") {
    EvaluatorConfig cfg;
    cfg.word_dim = 5;
    cfg.hidden = 6;
    auto m = EvaluatorModel::create({"a", "b", "c"}, cfg, 13);
    // give the zero head something to differentiate through
    nn::Rng rng(2);
    nn::init_uniform(*m.head_w, -0.3, 0.3, rng);
    nn::init_uniform(*m.head_b, -0.3, 0.3, rng);
    LabeledStory ex{{"a", "c", "b", "a"}, 1};

    auto loss_value = [&] {
        nn::Tape t;
        return evaluator_nll(t, m, ex).scalar();
    };

    m.params.zero_grads();
    {
        nn::Tape t;
        nn::Var loss = evaluator_nll(t, m, ex);
        CHECK(std::isfinite(loss.scalar()));
        t.backward(loss);
    }

    std::mt19937_64 gen(55);
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

TEST_CASE("persistence round trip") {
    auto d = separable(3, 0, 31);
    auto m = EvaluatorModel::create(d.vocab, tiny_config(), 17);
    EvaluatorTrainConfig tc;
    tc.epochs = 2;
    tc.lr = 0.01;
    train_evaluator(m, d.train, tc);

    fs::path dir = fs::temp_directory_path() / "storyplot_evaluator_test";
    fs::create_directories(dir);
    std::string prefix = (dir / "ev").string();
    save_evaluator(m, prefix);
    auto loaded = load_evaluator(prefix);
    CHECK(loaded.vocab.tokens() == m.vocab.tokens());
    CHECK(score_tokens(loaded, d.train[0].tokens) == score_tokens(m, d.train[0].tokens));
}

TEST_CASE("stories flatten sentence by sentence") {
    Story s;
    s.sentences = {{"a", "b", kEos}, {"c", kEos}};
    CHECK(flatten_story(s) == std::vector<std::string>{"a", "b", kEos, "c", kEos});
}
