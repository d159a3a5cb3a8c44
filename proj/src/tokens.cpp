#include "storyplot/tokens.hpp"

#include <cctype>

namespace storyplot {

std::string normalize_token(const std::string& raw) {
    std::size_t begin = 0;
    std::size_t end = raw.size();
    auto is_edge_punct = [](unsigned char c) {
        return std::ispunct(c) && c != '<' && c != '>';
    };
    while (begin < end && is_edge_punct(static_cast<unsigned char>(raw[begin]))) ++begin;
    while (end > begin && is_edge_punct(static_cast<unsigned char>(raw[end - 1]))) --end;
    std::string out;
    out.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(raw[i]))));
    }
    return out;
}

std::string make_transition_token(int index) {
    return "<s_" + std::to_string(index) + ">";
}

std::optional<int> parse_transition_token(const std::string& token) {
    if (token.size() < 5 || token.compare(0, 3, "<s_") != 0 || token.back() != '>') {
        return std::nullopt;
    }
    int value = 0;
    for (std::size_t i = 3; i + 1 < token.size(); ++i) {
        char c = token[i];
        if (c < '0' || c > '9') return std::nullopt;
        value = value * 10 + (c - '0');
    }
    return value;
}

bool is_transition_token(const std::string& token) {
    return parse_transition_token(token).has_value();
}

}  // namespace storyplot
