#ifndef UNIGRAM_GIBBS_HPP_
#define UNIGRAM_GIBBS_HPP_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <unordered_map>
#include <vector>

#include "unigram/adaptor.hpp"
#include "unigram/generator.hpp"

namespace unigram {

struct SamplerConfig {
  int epochs_per_iteration = 6;
  std::uint64_t rng_seed = 1;
  // Visit tokens in a fresh random order each sweep instead of data order.
  bool shuffle = false;
  // Run AdaptorState::check_invariants after every token visit.
  bool check_invariants = false;

  void validate() const;
};

// Generator log-probabilities memoized for a fixed set of forms. The
// generator must not change while the cache is in use; `generator_version`
// records which fit the values came from.
class FormLogProbCache final : public LogProbModel {
 public:
  FormLogProbCache(const Generator& generator, std::span<const WordForm> forms, bool parallel = true);

  // Falls back to the generator for forms outside the cache.
  double log_prob(const WordForm& w) const override;
  std::uint64_t generator_version() const { return version_; }
  const Generator& generator() const { return generator_; }
  std::size_t size() const { return values_.size(); }

 private:
  const Generator& generator_;
  std::uint64_t version_;
  std::unordered_map<WordForm, double, WordFormHash> values_;
};

// p_model(w) for a seating state, a parameter pair and a generator. Holds
// references; the state must not be mutated while the view is read.
class PredictiveView final : public LogProbModel {
 public:
  PredictiveView(const AdaptorState& state, const PYPParams& params, const LogProbModel& generator)
      : state_(state), params_(params), generator_(generator) {}

  double log_prob(const WordForm& w) const override {
    return predictive_log_prob(state_, params_, w, generator_.log_prob(w));
  }

 private:
  const AdaptorState& state_;
  PYPParams params_;
  const LogProbModel& generator_;
};

// Seats tokens[0..n) in order, each drawn from the seating conditional given
// the tokens before it: an exact draw from the prior process.
void seat_from_prior(AdaptorState& state, const PYPParams& params, const LogProbModel& generator,
                     std::span<const WordForm> tokens, Rng& rng);

// Every token in its own cluster.
void seat_singletons(AdaptorState& state, std::span<const WordForm> tokens);

// One pass over all tokens: unseat, draw from the conditional, reseat.
// Every token must already be seated.
void gibbs_sweep(AdaptorState& state, const PYPParams& params, const LogProbModel& generator,
                 std::span<const WordForm> tokens, Rng& rng, const SamplerConfig& cfg = {});

struct SweepLogRow {
  int epoch = 0;
  double dev_cross_entropy = 0.0;
  std::int64_t clusters = 0;
  std::int64_t customers = 0;
};

struct SweepResult {
  AdaptorState state;
  double dev_cross_entropy = 0.0;
  int epoch = 0;  // 1-based
  std::vector<SweepLogRow> log;
};

// Mean dev surprisal of p_model. Throws NumericError when infinite.
double dev_cross_entropy(const AdaptorState& state, const PYPParams& params, const LogProbModel& generator,
                         const TokenDataset& dev);

// Runs cfg.epochs_per_iteration sweeps from `state` (which is left at the
// last sweep) and returns the post-sweep state with the lowest dev
// cross-entropy; the earliest wins ties.
SweepResult run_sampler(AdaptorState& state, const PYPParams& params, const LogProbModel& generator,
                        std::span<const WordForm> tokens, const TokenDataset& dev, const SamplerConfig& cfg);

// CSV: epoch,dev_cross_entropy,K,N
void write_sweep_log(std::ostream& out, std::span<const SweepLogRow> rows, bool header = true);

}  // namespace unigram

#endif  // UNIGRAM_GIBBS_HPP_
