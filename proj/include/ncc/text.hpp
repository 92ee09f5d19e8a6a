#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace ncc {

struct TextSpan {
  size_t begin = 0;
  size_t end = 0;  // half-open

  size_t size() const { return end - begin; }
  bool operator==(const TextSpan&) const = default;
};

namespace textdetail {

inline bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '\'' || c == '-';
}

inline bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

}  // namespace textdetail

// Rule-based splitter: a sentence ends at terminal punctuation followed by
// whitespace (or end of text) and at any newline. Offsets index the note.
inline std::vector<TextSpan> split_sentences(std::string_view text) {
  std::vector<TextSpan> out;
  size_t start = 0;
  auto flush = [&](size_t end) {
    while (start < end && std::isspace(static_cast<unsigned char>(text[start]))) ++start;
    size_t e = end;
    while (e > start && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
    if (e > start) out.push_back({start, e});
    start = end;
  };
  for (size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') {
      flush(i);
      start = i + 1;
    } else if (textdetail::is_terminal(c)) {
      size_t j = i + 1;
      while (j < text.size() && (text[j] == '"' || text[j] == '\'' || text[j] == ')')) ++j;
      if (j >= text.size() || std::isspace(static_cast<unsigned char>(text[j]))) {
        flush(j);
        i = j - 1;
      }
    }
  }
  flush(text.size());
  return out;
}

// Maximal runs of word characters (alnum plus internal '/'-free hyphen and
// apostrophe). Trigger phrases are tokenized with the same rule.
inline std::vector<TextSpan> tokenize(std::string_view text, TextSpan range) {
  std::vector<TextSpan> out;
  size_t i = range.begin;
  while (i < range.end) {
    if (!textdetail::is_word_char(text[i])) {
      ++i;
      continue;
    }
    const size_t b = i;
    while (i < range.end && textdetail::is_word_char(text[i])) ++i;
    out.push_back({b, i});
  }
  return out;
}

inline std::vector<TextSpan> tokenize(std::string_view text) {
  return tokenize(text, {0, text.size()});
}

inline std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// True when [begin, end) starts at a token start and ends at a token end.
inline bool token_aligned(std::string_view text, size_t begin, size_t end) {
  if (begin >= end || end > text.size()) return false;
  const auto tokens = tokenize(text);
  bool starts = false, ends = false;
  for (const auto& t : tokens) {
    if (t.begin == begin) starts = true;
    if (t.end == end) ends = true;
  }
  return starts && ends;
}

}  // namespace ncc
