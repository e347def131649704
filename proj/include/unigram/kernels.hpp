#ifndef UNIGRAM_KERNELS_HPP_
#define UNIGRAM_KERNELS_HPP_

#include <span>
#include <vector>

#include "unigram/corpus.hpp"
#include "unigram/generator.hpp"

// Data-parallel loops over word forms. Each OpenMP kernel has a serial
// twin with the same contract; the twins are the reference in tests and
// the baseline in the benchmark target.
namespace unigram::kernels {

std::vector<double> batch_log_prob(const LogProbModel& model, std::span<const WordForm> forms);
std::vector<double> batch_log_prob_serial(const LogProbModel& model, std::span<const WordForm> forms);

// Sum over entries of count * -log_prob(form). Returns +inf as soon as any
// entry has zero probability.
double weighted_surprisal(const LogProbModel& model, const TokenDataset& data);
double weighted_surprisal_serial(const LogProbModel& model, const TokenDataset& data);

// weighted_surprisal / total_tokens, or NaN for an empty dataset.
double mean_surprisal(const LogProbModel& model, const TokenDataset& data, bool parallel = true);

}  // namespace unigram::kernels

#endif  // UNIGRAM_KERNELS_HPP_
