#include "unigram/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

#include "unigram/errors.hpp"
#include "unigram/kernels.hpp"

namespace unigram {

void SamplerConfig::validate() const {
  if (epochs_per_iteration < 1) throw std::invalid_argument("sampler needs at least one epoch");
}

FormLogProbCache::FormLogProbCache(const Generator& generator, std::span<const WordForm> forms, bool parallel)
    : generator_(generator), version_(generator.version()) {
  const auto values = parallel ? kernels::batch_log_prob(generator, forms)
                               : kernels::batch_log_prob_serial(generator, forms);
  values_.reserve(forms.size());
  for (std::size_t i = 0; i < forms.size(); ++i) values_.emplace(forms[i], values[i]);
}

double FormLogProbCache::log_prob(const WordForm& w) const {
  if (generator_.version() != version_) throw std::logic_error("generator changed under a log-prob cache");
  auto it = values_.find(w);
  return it != values_.end() ? it->second : generator_.log_prob(w);
}

void seat_from_prior(AdaptorState& state, const PYPParams& params, const LogProbModel& generator,
                     std::span<const WordForm> tokens, Rng& rng) {
  for (TokenIndex t = 0; t < tokens.size(); ++t) {
    const auto weights = seating_weights(state, params, tokens[t], generator.log_prob(tokens[t]));
    state.seat(t, tokens[t], sample_seat(state, weights, tokens[t], rng));
  }
}

void seat_singletons(AdaptorState& state, std::span<const WordForm> tokens) {
  for (TokenIndex t = 0; t < tokens.size(); ++t) state.seat(t, tokens[t], SeatChoice::new_cluster());
}

void gibbs_sweep(AdaptorState& state, const PYPParams& params, const LogProbModel& generator,
                 std::span<const WordForm> tokens, Rng& rng, const SamplerConfig& cfg) {
  std::vector<TokenIndex> order(tokens.size());
  std::iota(order.begin(), order.end(), TokenIndex{0});
  if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);
  for (TokenIndex t : order) {
    const WordForm& w = tokens[t];
    state.unseat(t);
    const auto weights = seating_weights(state, params, w, generator.log_prob(w));
    state.seat(t, w, sample_seat(state, weights, w, rng));
    if (cfg.check_invariants) state.check_invariants();
  }
}

double dev_cross_entropy(const AdaptorState& state, const PYPParams& params, const LogProbModel& generator,
                         const TokenDataset& dev) {
  if (dev.empty()) throw std::invalid_argument("empty dev set");
  const double ce = kernels::mean_surprisal(PredictiveView(state, params, generator), dev);
  if (!std::isfinite(ce)) throw NumericError("infinite cross-entropy on the dev set");
  return ce;
}

SweepResult run_sampler(AdaptorState& state, const PYPParams& params, const LogProbModel& generator,
                        std::span<const WordForm> tokens, const TokenDataset& dev, const SamplerConfig& cfg) {
  cfg.validate();
  if (dev.empty()) throw std::invalid_argument("run_sampler: empty dev set");
  Rng rng(cfg.rng_seed);
  SweepResult best;
  best.dev_cross_entropy = std::numeric_limits<double>::infinity();
  std::vector<SweepLogRow> log;
  for (int epoch = 1; epoch <= cfg.epochs_per_iteration; ++epoch) {
    gibbs_sweep(state, params, generator, tokens, rng, cfg);
    const double ce = dev_cross_entropy(state, params, generator, dev);
    log.push_back({epoch, ce, state.cluster_count(), state.total_customers()});
    if (ce < best.dev_cross_entropy) {
      best.state = state;
      best.dev_cross_entropy = ce;
      best.epoch = epoch;
    }
  }
  best.log = std::move(log);
  return best;
}

void write_sweep_log(std::ostream& out, std::span<const SweepLogRow> rows, bool header) {
  if (header) out << "epoch,dev_cross_entropy,K,N\n";
  out << std::setprecision(12);
  for (const auto& r : rows) {
    out << r.epoch << ',' << r.dev_cross_entropy << ',' << r.clusters << ',' << r.customers << '\n';
  }
}

}  // namespace unigram
