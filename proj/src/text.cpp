#include "stance/text.hpp"

#include <algorithm>
#include <cctype>

namespace stance::text {
namespace {

bool is_space(unsigned char c) { return std::isspace(c) != 0; }

bool is_word_byte(unsigned char c) { return c >= 0x80 || std::isalnum(c) != 0 || c == '_'; }

bool is_joiner(unsigned char c) { return c == '\'' || c == '-'; }

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && s.substr(0, prefix.size()) == prefix;
}

}  // namespace

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  const std::size_t n = text.size();
  std::size_t i = 0;
  while (i < n) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (is_space(c)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    std::string_view rest = text.substr(i);
    if (starts_with(rest, "http://") || starts_with(rest, "https://")) {
      while (j < n && !is_space(static_cast<unsigned char>(text[j]))) ++j;
    } else if ((c == '#' || c == '@') && i + 1 < n &&
               is_word_byte(static_cast<unsigned char>(text[i + 1]))) {
      j = i + 1;
      while (j < n && is_word_byte(static_cast<unsigned char>(text[j]))) ++j;
    } else if (is_word_byte(c)) {
      while (j < n) {
        const auto cj = static_cast<unsigned char>(text[j]);
        if (is_word_byte(cj)) {
          ++j;
        } else if (is_joiner(cj) && j + 1 < n &&
                   is_word_byte(static_cast<unsigned char>(text[j + 1]))) {
          j += 2;
        } else {
          break;
        }
      }
    } else {
      while (j < n) {
        const auto cj = static_cast<unsigned char>(text[j]);
        if (is_space(cj) || is_word_byte(cj)) break;
        // a hashtag or mention starts a new token
        if ((cj == '#' || cj == '@') && j > i && j + 1 < n &&
            is_word_byte(static_cast<unsigned char>(text[j + 1])))
          break;
        ++j;
      }
    }
    out.push_back(Token{std::string(text.substr(i, j - i)), i, j});
    i = j;
  }
  return out;
}

std::vector<std::string> token_strings(std::string_view text) {
  std::vector<std::string> out;
  for (auto& t : tokenize(text)) out.push_back(std::move(t.surface));
  return out;
}

std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80) ch = static_cast<char>(std::tolower(c));
  }
  return out;
}

std::vector<std::string> normalized_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && (std::isspace(c) || std::ispunct(c))) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

bool contains_mention(std::string_view haystack, std::string_view needle) {
  const auto hay = normalized_words(haystack);
  const auto pat = normalized_words(needle);
  if (pat.empty() || pat.size() > hay.size()) return false;
  return std::search(hay.begin(), hay.end(), pat.begin(), pat.end()) != hay.end();
}

}  // namespace stance::text
