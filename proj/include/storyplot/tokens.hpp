#pragma once

#include <optional>
#include <string>

namespace storyplot {

// Lowercases ASCII letters and strips punctuation from both ends. Interior
// punctuation (hyphens, apostrophes) is kept.
std::string normalize_token(const std::string& raw);

// Sentence-transition markers "<s_0>", "<s_1>", ...
std::string make_transition_token(int index);
std::optional<int> parse_transition_token(const std::string& token);
bool is_transition_token(const std::string& token);

inline constexpr const char* kEmptyFrame = "empty_frame";
inline constexpr const char* kEventMarker = "<evt>";
inline constexpr const char* kBos = "<bos>";
inline constexpr const char* kEos = "<eos>";
inline constexpr const char* kPad = "<pad>";
inline constexpr const char* kUnk = "<unk>";

}  // namespace storyplot
