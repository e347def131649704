#include "unigram/search.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <iomanip>
#include <ostream>

namespace unigram {

void SearchSpace::validate() const {
  if (trials < 1) throw std::invalid_argument("search needs at least one trial");
  if (!(a_min >= 0.0 && a_min < a_max && a_max <= 1.0)) throw std::invalid_argument("bad range for a");
  if (!(b_min >= 0.0 && b_min < b_max)) throw std::invalid_argument("bad range for b");
  if (log_uniform_b && !(b_min > 0.0)) throw std::invalid_argument("log-uniform b needs b_min > 0");
  if (subset_size < 1) throw std::invalid_argument("subset size must be positive");
}

double round_reported_a(double a) { return std::round(a * 100.0) / 100.0; }
double round_reported_b(double b) { return std::round(b / 1000.0) * 1000.0; }

TokenDataset token_subset(const TokenDataset& data, std::int64_t subset_size, Rng& rng) {
  if (data.total_tokens() <= subset_size) return data;
  auto tokens = data.expand();
  const auto k = static_cast<std::size_t>(subset_size);
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, tokens.size() - 1);
    std::swap(tokens[i], tokens[pick(rng)]);
  }
  return TokenDataset::from_tokens({tokens.data(), k});
}

SearchResult random_search(const TokenDataset& train, const TokenDataset& dev, const SearchSpace& space,
                           const EMConfig& cfg, const Generator& prototype, std::uint64_t seed,
                           bool parallel_trials) {
  space.validate();
  Rng rng(seed);
  SearchResult result;
  result.subset_truncated = train.total_tokens() < space.subset_size;
  const TokenDataset subset = token_subset(train, space.subset_size, rng);

  struct Plan {
    PYPParams params;
    std::uint64_t seed;
  };
  std::vector<Plan> plans;
  std::uniform_real_distribution<double> draw_a(space.a_min, space.a_max);
  std::uniform_real_distribution<double> draw_b(space.b_min, space.b_max);
  std::uniform_real_distribution<double> draw_log_b(std::log(space.b_min), std::log(space.b_max));
  for (int t = 0; t < space.trials; ++t) {
    const double a = draw_a(rng);
    const double b = space.log_uniform_b ? std::min(std::exp(draw_log_b(rng)), std::nextafter(space.b_max, 0.0))
                                         : draw_b(rng);
    plans.push_back({{a, b}, rng()});
  }

  const auto n = static_cast<int>(plans.size());
  std::vector<std::optional<TwoStageModel>> models(plans.size());
  result.trials.resize(plans.size());
  std::vector<std::exception_ptr> errors(plans.size());
#pragma omp parallel for schedule(dynamic, 1) if (parallel_trials)
  for (int t = 0; t < n; ++t) {
    const auto i = static_cast<std::size_t>(t);
    try {
      const auto started = std::chrono::steady_clock::now();
      EMConfig trial_cfg = cfg;
      trial_cfg.params = plans[i].params;
      auto em = run_em(subset, dev, trial_cfg, prototype.clone(), plans[i].seed);
      const double ce = em.trace.back().dev_cross_entropy;
      const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      result.trials[i] = {t + 1, plans[i].params.a, plans[i].params.b, ce, seconds};
      models[i].emplace(std::move(em.model));
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (std::size_t i = 1; i < result.trials.size(); ++i) {
    if (result.trials[i].dev_cross_entropy < result.trials[result.best].dev_cross_entropy) result.best = i;
  }
  const Trial& best = result.trials[result.best];
  result.reported_a = round_reported_a(best.a);
  result.reported_b = round_reported_b(best.b);
  result.best_model = std::move(models[result.best]);
  return result;
}

void write_trials(std::ostream& out, const std::vector<Trial>& trials) {
  out << "trial,a,b,dev_cross_entropy,seconds\n" << std::setprecision(12);
  for (const auto& t : trials) {
    out << t.trial << ',' << t.a << ',' << t.b << ',' << t.dev_cross_entropy << ',' << t.seconds << '\n';
  }
}

}  // namespace unigram
