#include "factweave/text.hpp"

#include <cctype>

namespace factweave {

namespace {

inline bool keep_char(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
}

}  // namespace

std::string normalize_text(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (unsigned char c : raw) {
    unsigned char lc = static_cast<unsigned char>(std::tolower(c));
    if (keep_char(lc)) {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(lc));
    } else {
      pending_space = true;
    }
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view raw) {
  std::vector<std::string> tokens;
  for (const TokenSpan& t : normalize_with_spans(raw).tokens) tokens.push_back(t.token);
  return tokens;
}

NormalizedText normalize_with_spans(std::string_view raw) {
  NormalizedText out;
  out.joined = normalize_text(raw);
  std::size_t i = 0;
  const std::string& s = out.joined;
  while (i < s.size()) {
    std::size_t j = s.find(' ', i);
    if (j == std::string::npos) j = s.size();
    out.tokens.push_back(TokenSpan{s.substr(i, j - i), i, j});
    i = j + 1;
  }
  return out;
}

std::string normalize_surface(std::string_view raw) { return normalize_text(raw); }

bool contains_token_bounded(const std::vector<std::string>& text_tokens,
                            const std::vector<std::string>& phrase_tokens) {
  if (phrase_tokens.empty() || phrase_tokens.size() > text_tokens.size()) return false;
  for (std::size_t i = 0; i + phrase_tokens.size() <= text_tokens.size(); ++i) {
    bool hit = true;
    for (std::size_t j = 0; j < phrase_tokens.size(); ++j) {
      if (text_tokens[i + j] != phrase_tokens[j]) {
        hit = false;
        break;
      }
    }
    if (hit) return true;
  }
  return false;
}

}  // namespace factweave
