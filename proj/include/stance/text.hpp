#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace stance::text {

// A surface token with byte offsets into its source text.
struct Token {
  std::string surface;
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Whitespace/punctuation tokenizer used by the tagger and the model.
// Hashtags, @-mentions and URLs stay whole; runs of punctuation form one
// token; apostrophes and hyphens between word characters are kept inside
// the word. Every non-whitespace byte lands in exactly one token.
std::vector<Token> tokenize(std::string_view text);

std::vector<std::string> token_strings(std::string_view text);

// Lowercased, ASCII punctuation replaced by spaces, whitespace collapsed,
// split into words.
std::vector<std::string> normalized_words(std::string_view text);

// True iff the normalized needle occurs in the normalized haystack as a
// contiguous run of whole words.
bool contains_mention(std::string_view haystack, std::string_view needle);

std::string to_lower_ascii(std::string_view s);

}  // namespace stance::text
