#include "unigram/kernels.hpp"

#include <cmath>
#include <exception>
#include <limits>

namespace unigram::kernels {

namespace {

// Exceptions must not leave an OpenMP region; keep the first one and
// rethrow it after the loop.
class FirstError {
 public:
  template <typename F>
  void guard(F&& f) {
    try {
      f();
    } catch (...) {
#pragma omp critical(unigram_first_error)
      if (!error_) error_ = std::current_exception();
    }
  }
  void rethrow() const {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::exception_ptr error_;
};

}  // namespace

std::vector<double> batch_log_prob(const LogProbModel& model, std::span<const WordForm> forms) {
  std::vector<double> out(forms.size());
  const auto n = static_cast<std::ptrdiff_t>(forms.size());
  FirstError error;
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    error.guard([&] { out[static_cast<std::size_t>(i)] = model.log_prob(forms[static_cast<std::size_t>(i)]); });
  }
  error.rethrow();
  return out;
}

std::vector<double> batch_log_prob_serial(const LogProbModel& model, std::span<const WordForm> forms) {
  std::vector<double> out;
  out.reserve(forms.size());
  for (const auto& f : forms) out.push_back(model.log_prob(f));
  return out;
}

double weighted_surprisal(const LogProbModel& model, const TokenDataset& data) {
  const auto& entries = data.entries();
  const auto n = static_cast<std::ptrdiff_t>(entries.size());
  double total = 0.0;
  FirstError error;
#pragma omp parallel for schedule(dynamic, 64) reduction(+ : total)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& e = entries[static_cast<std::size_t>(i)];
    error.guard([&] { total += -static_cast<double>(e.count) * model.log_prob(e.form); });
  }
  error.rethrow();
  return total;
}

double weighted_surprisal_serial(const LogProbModel& model, const TokenDataset& data) {
  double total = 0.0;
  for (const auto& e : data.entries()) {
    const double lp = model.log_prob(e.form);
    if (lp == -std::numeric_limits<double>::infinity()) return std::numeric_limits<double>::infinity();
    total += -static_cast<double>(e.count) * lp;
  }
  return total;
}

double mean_surprisal(const LogProbModel& model, const TokenDataset& data, bool parallel) {
  if (data.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double sum = parallel ? weighted_surprisal(model, data) : weighted_surprisal_serial(model, data);
  return sum / static_cast<double>(data.total_tokens());
}

}  // namespace unigram::kernels
