#ifndef UNIGRAM_NGRAM_HPP_
#define UNIGRAM_NGRAM_HPP_

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "unigram/generator.hpp"

namespace unigram {

enum class Smoothing {
  // Interpolated Witten-Bell: P(x|h) = (c(h,x) + T(h) P(x|h')) / (c(h) + T(h)),
  // where T(h) is the number of distinct successors of h.
  kWittenBell,
  // Add-k on the full-order context only, no backoff.
  kAddK,
  // Fixed-weight interpolation: (1 - lambda) c(h,x)/c(h) + lambda P(x|h').
  // Depends on count ratios only.
  kJelinekMercer,
};

struct NGramOptions {
  int order = 4;
  Smoothing smoothing = Smoothing::kWittenBell;
  double add_k = 1.0;
  double lambda = 0.1;
};

// Character n-gram generator. Histories are padded with begin-of-word; the
// lowest level interpolates with the uniform distribution over the output
// symbols, so an unfitted model is uniform. End-of-word gets probability
// zero at the first position, which makes the model a distribution over
// non-empty forms.
class NGramGenerator final : public Generator {
 public:
  NGramGenerator(Alphabet alphabet, NGramOptions options = {});

  std::string kind() const override { return "ngram"; }
  double log_prob(const WordForm& w) const override;
  WordForm sample(Rng& rng) const override;
  FitReport fit(const TokenDataset& train, const TokenDataset& dev,
                const TrainingSchedule& schedule) override;
  std::unique_ptr<Generator> clone() const override;
  nlohmann::json checkpoint_body() const override;
  static std::unique_ptr<NGramGenerator> from_checkpoint(const Alphabet& alphabet, const nlohmann::json& body,
                                                         std::uint64_t version);

  const NGramOptions& options() const { return options_; }

  // Distribution over the output symbols (content graphemes, then
  // end-of-word) given the preceding symbols of the word. Only the last
  // order-1 symbols matter.
  std::vector<double> next_distribution(std::span<const int> prefix) const;
  double conditional(std::span<const int> prefix, int next) const;

  // Number of stored contexts with non-zero count at each level.
  std::vector<std::size_t> context_counts() const;

 private:
  struct ContextStats {
    std::vector<double> counts;  // per output symbol
    double total = 0.0;
    double distinct = 0.0;
  };
  using Level = std::unordered_map<std::uint64_t, ContextStats>;

  std::uint64_t context_key(std::span<const int> prefix, int length) const;
  // Smoothed estimate before the first-position end-of-word exclusion.
  double raw_conditional(std::span<const int> prefix, int next) const;
  void distribution_into(std::span<const int> prefix, std::vector<double>& out) const;
  void add_word(const std::vector<int>& symbols, double weight);

  NGramOptions options_;
  std::vector<Level> levels_;  // levels_[k] holds contexts of length k
};

}  // namespace unigram

#endif  // UNIGRAM_NGRAM_HPP_
