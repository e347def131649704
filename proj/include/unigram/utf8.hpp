#ifndef UNIGRAM_UTF8_HPP_
#define UNIGRAM_UTF8_HPP_

#include <string>
#include <string_view>

namespace unigram::utf8 {

// Throws DataError on malformed input (overlong forms, surrogates, truncation).
std::u32string decode(std::string_view bytes);
std::string encode(std::u32string_view chars);
std::string encode(char32_t c);

// Locale-independent lowercasing for ASCII, Latin-1, Latin Extended-A,
// Greek and Cyrillic. Everything else is returned unchanged.
char32_t to_lower(char32_t c);

}  // namespace unigram::utf8

#endif  // UNIGRAM_UTF8_HPP_
