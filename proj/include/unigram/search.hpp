#ifndef UNIGRAM_SEARCH_HPP_
#define UNIGRAM_SEARCH_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "unigram/trainer.hpp"

namespace unigram {

struct SearchSpace {
  double a_min = 0.0;
  double a_max = 1.0;  // exclusive
  double b_min = 100.0;
  double b_max = 200000.0;  // exclusive
  int trials = 5;
  std::int64_t subset_size = 100000;
  // Draw b log-uniformly; false draws it uniformly.
  bool log_uniform_b = true;

  void validate() const;
};

struct Trial {
  int trial = 0;  // 1-based
  double a = 0.0;
  double b = 0.0;
  double dev_cross_entropy = 0.0;
  double seconds = 0.0;
};

struct SearchResult {
  std::vector<Trial> trials;
  std::size_t best = 0;  // index into trials
  // a to two decimals, b to the nearest thousand. The model below keeps the
  // exact values.
  double reported_a = 0.0;
  double reported_b = 0.0;
  std::optional<TwoStageModel> best_model;
  // The training set had fewer tokens than subset_size; all were used.
  bool subset_truncated = false;
};

double round_reported_a(double a);
double round_reported_b(double b);

// Draws `subset_size` tokens of `data` without replacement.
TokenDataset token_subset(const TokenDataset& data, std::int64_t subset_size, Rng& rng);

// Trains one two-stage model per trial on a token subset, each with its own
// (a, b) and seeds, and keeps the one with the lowest dev cross-entropy.
// Trials run in parallel when `parallel_trials` is set.
SearchResult random_search(const TokenDataset& train, const TokenDataset& dev, const SearchSpace& space,
                           const EMConfig& cfg, const Generator& prototype, std::uint64_t seed,
                           bool parallel_trials = false);

// CSV: trial,a,b,dev_cross_entropy,seconds
void write_trials(std::ostream& out, const std::vector<Trial>& trials);

}  // namespace unigram

#endif  // UNIGRAM_SEARCH_HPP_
