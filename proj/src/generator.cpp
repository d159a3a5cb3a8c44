#include "storyplot/generator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "storyplot/tokens.hpp"

namespace storyplot {

namespace {

constexpr double kMaskedOut = -1e9;

}  // namespace

std::vector<std::string> strip_eos(const std::vector<std::string>& sentence) {
    std::vector<std::string> out = sentence;
    while (!out.empty() && out.back() == kEos) out.pop_back();
    return out;
}

int GeneratorModel::to_id(const std::string& token) const {
    if (vocab.contains(token)) return vocab.id(token);
    return vocab.id(std::string(kUnk));
}

GeneratorModel GeneratorModel::create(const std::vector<std::string>& vocab_tokens,
                                      const GeneratorConfig& cfg, std::uint64_t seed) {
    if (cfg.dim % cfg.heads != 0) throw std::runtime_error("generator: dim must divide evenly across heads");
    GeneratorModel m;
    m.cfg = cfg;
    for (const auto& tok : vocab_tokens) m.vocab.add(tok);
    for (const char* tok : {kUnk, kBos, kEos, kEventMarker, kEmptyFrame}) m.vocab.add(tok);

    nn::Rng rng(seed);
    auto& ps = m.params;
    const int v = m.vocab.size();
    const int d = cfg.dim;
    nn::init_uniform(ps.add("gen.tok", v, d), -0.1, 0.1, rng);
    nn::init_uniform(ps.add("gen.pos", cfg.max_positions, d), -0.1, 0.1, rng);

    auto add_ln = [&](const std::string& prefix) {
        ps.add(prefix + ".g", 1, d).value.setOnes();
        ps.add(prefix + ".b", 1, d);
    };
    auto add_attn = [&](const std::string& prefix) {
        for (const char* w : {".wq", ".wk", ".wv", ".wo"}) nn::init_glorot(ps.add(prefix + w, d, d), rng);
    };
    auto add_ffn = [&](const std::string& prefix) {
        nn::init_glorot(ps.add(prefix + ".w1", d, cfg.ffn), rng);
        ps.add(prefix + ".b1", 1, cfg.ffn);
        nn::init_glorot(ps.add(prefix + ".w2", cfg.ffn, d), rng);
        ps.add(prefix + ".b2", 1, d);
    };

    for (int l = 0; l < cfg.enc_layers; ++l) {
        std::string b = "gen.e" + std::to_string(l);
        add_ln(b + ".ln1");
        add_attn(b + ".a");
        add_ln(b + ".ln2");
        add_ffn(b + ".f");
    }
    for (int l = 0; l < cfg.dec_layers; ++l) {
        std::string b = "gen.d" + std::to_string(l);
        add_ln(b + ".ln1");
        add_attn(b + ".s");
        add_ln(b + ".ln2");
        add_attn(b + ".c");
        add_ln(b + ".ln3");
        add_ffn(b + ".f");
    }
    add_ln("gen.ln");
    nn::init_glorot(ps.add("gen.out.w", d, v), rng);
    ps.add("gen.out.b", 1, v);
    return m;
}

std::vector<std::string> encode_event(const std::vector<StorylineHop>& event) {
    std::vector<std::string> out{std::string(kEventMarker)};
    std::string last;
    for (const auto& hop : event) {
        if (is_terminate(hop.relation)) continue;
        const std::string& head = hop.head.label;
        const std::string& tail = hop.relation.tail;
        if (!is_transition_token(head) && head != last) {
            out.push_back(head);
            last = head;
        }
        if (is_transition_token(tail)) continue;
        if (!is_transition_token(head)) out.push_back(hop.relation.frame);
        out.push_back(tail);
        last = tail;
    }
    return out;
}

namespace {

// Forward pass builder; every call adds nodes to the shared tape. The
// const_cast is confined to forward-only callers; gradients touch the model
// only when the caller runs backward on a tape built via sentence_nll.
struct Net {
    nn::Tape& t;
    const GeneratorModel& m;

    nn::Var p(const std::string& name) {
        auto* tensor = const_cast<nn::Tensor*>(m.params.find(name));
        if (tensor == nullptr) throw std::runtime_error("generator: unknown parameter " + name);
        return t.leaf(*tensor);
    }

    std::vector<int> ids(const std::vector<std::string>& tokens) const {
        std::vector<int> out;
        out.reserve(tokens.size());
        for (const auto& tok : tokens) out.push_back(m.to_id(tok));
        return out;
    }

    nn::Var embed(const std::vector<int>& token_ids) {
        if (static_cast<int>(token_ids.size()) > m.cfg.max_positions) {
            throw std::runtime_error("generator: sequence of " + std::to_string(token_ids.size()) +
                                     " tokens exceeds max_positions=" + std::to_string(m.cfg.max_positions));
        }
        std::vector<int> pos(token_ids.size());
        std::iota(pos.begin(), pos.end(), 0);
        return t.add(t.rows(p("gen.tok"), token_ids), t.rows(p("gen.pos"), pos));
    }

    nn::Var ln(nn::Var x, const std::string& prefix) {
        return t.layer_norm(x, p(prefix + ".g"), p(prefix + ".b"));
    }

    nn::Var attend(nn::Var q_in, nn::Var kv, const std::string& prefix, bool causal) {
        nn::Var q = t.matmul(q_in, p(prefix + ".wq"));
        nn::Var k = t.matmul(kv, p(prefix + ".wk"));
        nn::Var v = t.matmul(kv, p(prefix + ".wv"));
        const int dh = m.cfg.dim / m.cfg.heads;
        const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));
        std::vector<nn::Var> heads;
        for (int h = 0; h < m.cfg.heads; ++h) {
            nn::Var qh = t.slice_cols(q, h * dh, dh);
            nn::Var kh = t.slice_cols(k, h * dh, dh);
            nn::Var vh = t.slice_cols(v, h * dh, dh);
            nn::Var scores = t.scale(t.matmul_nt(qh, kh), inv_scale);
            if (causal) {
                const auto n = scores.node->value.rows();
                Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(n, n);
                for (Eigen::Index i = 0; i < n; ++i)
                    for (Eigen::Index j = i + 1; j < n; ++j) mask(i, j) = kMaskedOut;
                scores = t.add(scores, t.constant(mask));
            }
            heads.push_back(t.matmul(t.softmax_rows(scores), vh));
        }
        return t.matmul(t.hconcat(heads), p(prefix + ".wo"));
    }

    nn::Var ffn(nn::Var x, const std::string& prefix) {
        nn::Var h = t.gelu(t.add_rowwise(t.matmul(x, p(prefix + ".w1")), p(prefix + ".b1")));
        return t.add_rowwise(t.matmul(h, p(prefix + ".w2")), p(prefix + ".b2"));
    }

    nn::Var encode(const std::vector<int>& src) {
        nn::Var x = embed(src);
        for (int l = 0; l < m.cfg.enc_layers; ++l) {
            std::string b = "gen.e" + std::to_string(l);
            nn::Var h = ln(x, b + ".ln1");
            x = t.add(x, attend(h, h, b + ".a", false));
            x = t.add(x, ffn(ln(x, b + ".ln2"), b + ".f"));
        }
        return x;
    }

    // Returns one logit row per decoder position.
    nn::Var decode(nn::Var enc_out, const std::vector<int>& dec_in) {
        nn::Var x = embed(dec_in);
        for (int l = 0; l < m.cfg.dec_layers; ++l) {
            std::string b = "gen.d" + std::to_string(l);
            nn::Var h = ln(x, b + ".ln1");
            x = t.add(x, attend(h, h, b + ".s", true));
            x = t.add(x, attend(ln(x, b + ".ln2"), enc_out, b + ".c", false));
            x = t.add(x, ffn(ln(x, b + ".ln3"), b + ".f"));
        }
        return t.add_rowwise(t.matmul(ln(x, "gen.ln"), p("gen.out.w")), p("gen.out.b"));
    }
};

std::vector<int> source_ids(const Net& net, const std::vector<std::string>& event_tokens,
                            const std::vector<std::string>& y_prev) {
    std::vector<std::string> src = event_tokens;
    src.insert(src.end(), y_prev.begin(), y_prev.end());
    if (src.empty()) throw std::runtime_error("generator: empty encoder input");
    return net.ids(src);
}

int argmax_lexicographic(const GeneratorModel& m, const Eigen::MatrixXd& logits, Eigen::Index row) {
    int best = 0;
    for (int j = 1; j < logits.cols(); ++j) {
        if (logits(row, j) > logits(row, best)) {
            best = j;
        } else if (logits(row, j) == logits(row, best) && m.vocab.token(j) < m.vocab.token(best)) {
            best = j;
        }
    }
    return best;
}

}  // namespace

std::vector<std::string> generate_sentence(const GeneratorModel& model,
                                           const std::vector<std::string>& event_tokens,
                                           const std::vector<std::string>& y_prev) {
    nn::Tape t;
    Net net{t, model};
    nn::Var enc = net.encode(source_ids(net, event_tokens, y_prev));
    const int eos_id = model.vocab.id(std::string(kEos));

    std::vector<int> prefix{model.vocab.id(std::string(kBos))};
    std::vector<std::string> out;
    for (int step = 0; step < model.cfg.max_sentence_len; ++step) {
        nn::Var logits = net.decode(enc, prefix);
        int pick = argmax_lexicographic(model, logits.node->value, logits.node->value.rows() - 1);
        if (pick == eos_id) break;
        out.push_back(model.vocab.token(pick));
        prefix.push_back(pick);
    }
    out.emplace_back(kEos);
    return out;
}

Story generate_story(const GeneratorModel& model,
                     const std::vector<std::vector<std::string>>& events) {
    Story story;
    std::vector<std::string> y_prev;
    for (const auto& event_tokens : events) {
        std::vector<std::string> sentence = generate_sentence(model, event_tokens, y_prev);
        y_prev = strip_eos(sentence);
        story.sentences.push_back(std::move(sentence));
    }
    return story;
}

Story generate_story(const GeneratorModel& model, const Storyline& storyline) {
    std::vector<std::vector<std::string>> events;
    events.reserve(storyline.events.size());
    for (const auto& event : storyline.events) events.push_back(encode_event(event));
    return generate_story(model, events);
}

nn::Var sentence_nll(nn::Tape& t, GeneratorModel& model,
                     const std::vector<std::string>& event_tokens,
                     const std::vector<std::string>& y_prev,
                     const std::vector<std::string>& target) {
    Net net{t, model};
    nn::Var enc = net.encode(source_ids(net, event_tokens, y_prev));

    std::vector<int> dec_in{model.vocab.id(std::string(kBos))};
    std::vector<int> want;
    for (const auto& tok : target) {
        int id = model.to_id(tok);
        dec_in.push_back(id);
        want.push_back(id);
    }
    want.push_back(model.vocab.id(std::string(kEos)));
    return t.nll_rows(net.decode(enc, dec_in), want);
}

double token_accuracy(const GeneratorModel& model, const std::vector<SentenceExample>& examples) {
    std::size_t hits = 0, total = 0;
    for (const auto& ex : examples) {
        nn::Tape t;
        Net net{t, model};
        nn::Var enc = net.encode(source_ids(net, ex.event_tokens, ex.y_prev));
        std::vector<int> dec_in{model.vocab.id(std::string(kBos))};
        std::vector<int> want;
        for (const auto& tok : ex.target) {
            int id = model.to_id(tok);
            dec_in.push_back(id);
            want.push_back(id);
        }
        want.push_back(model.vocab.id(std::string(kEos)));
        nn::Var logits = net.decode(enc, dec_in);
        for (std::size_t i = 0; i < want.size(); ++i) {
            total += 1;
            if (argmax_lexicographic(model, logits.node->value, static_cast<Eigen::Index>(i)) == want[i]) hits += 1;
        }
    }
    if (total == 0) throw std::runtime_error("token_accuracy: no teacher-forced steps");
    return static_cast<double>(hits) / static_cast<double>(total);
}

void save_generator(const GeneratorModel& model, const std::string& prefix) {
    nn::save_checkpoint(model.params, prefix);
    nlohmann::json meta;
    meta["dim"] = model.cfg.dim;
    meta["heads"] = model.cfg.heads;
    meta["enc_layers"] = model.cfg.enc_layers;
    meta["dec_layers"] = model.cfg.dec_layers;
    meta["ffn"] = model.cfg.ffn;
    meta["max_positions"] = model.cfg.max_positions;
    meta["max_sentence_len"] = model.cfg.max_sentence_len;
    meta["vocab"] = model.vocab.tokens();
    std::ofstream out(prefix + ".meta.json");
    if (!out) throw std::runtime_error("save_generator: cannot write " + prefix + ".meta.json");
    out << meta.dump(2) << "\n";
}

GeneratorModel load_generator(const std::string& prefix) {
    std::ifstream in(prefix + ".meta.json");
    if (!in) throw std::runtime_error("load_generator: cannot read " + prefix + ".meta.json");
    nlohmann::json meta = nlohmann::json::parse(in);
    GeneratorConfig cfg;
    cfg.dim = meta.at("dim").get<int>();
    cfg.heads = meta.at("heads").get<int>();
    cfg.enc_layers = meta.at("enc_layers").get<int>();
    cfg.dec_layers = meta.at("dec_layers").get<int>();
    cfg.ffn = meta.at("ffn").get<int>();
    cfg.max_positions = meta.at("max_positions").get<int>();
    cfg.max_sentence_len = meta.at("max_sentence_len").get<int>();
    auto tokens = meta.at("vocab").get<std::vector<std::string>>();
    GeneratorModel m = GeneratorModel::create(tokens, cfg, 0);
    nn::load_checkpoint(m.params, prefix);
    return m;
}

}  // namespace storyplot
