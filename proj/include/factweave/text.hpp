#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace factweave {

// Token with character offsets into the normalized (space-joined) string.
struct TokenSpan {
  std::string token;
  std::size_t begin = 0;  // inclusive, offset in joined string
  std::size_t end = 0;    // exclusive
};

struct NormalizedText {
  std::string joined;            // tokens joined by single spaces
  std::vector<TokenSpan> tokens;
};

// Lowercase ASCII, treat anything that is not [a-z0-9] as a separator
// (this covers punctuation and underscores), collapse runs of separators.
std::string normalize_text(std::string_view raw);

std::vector<std::string> tokenize(std::string_view raw);

NormalizedText normalize_with_spans(std::string_view raw);

// Concept surface forms use underscores for multiword concepts; normalizing
// them goes through the same path, so "ice_cream" -> "ice cream".
std::string normalize_surface(std::string_view raw);

// True if `phrase` occurs as a consecutive run of whole tokens in `text`.
bool contains_token_bounded(const std::vector<std::string>& text_tokens,
                            const std::vector<std::string>& phrase_tokens);

}  // namespace factweave
