#ifndef UNIGRAM_ERRORS_HPP_
#define UNIGRAM_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace unigram {

// Bad or missing input data: empty corpus, unknown grapheme, corrupt file.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Numerically degenerate model: a = b = 0 with no usable cluster, zero
// probability on an evaluated token, and the like.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace unigram

#endif  // UNIGRAM_ERRORS_HPP_
