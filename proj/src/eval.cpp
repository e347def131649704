#include "unigram/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "unigram/errors.hpp"
#include "unigram/kernels.hpp"

namespace unigram {

double cross_entropy(const LogProbModel& model, const TokenDataset& test, bool parallel) {
  if (test.empty()) throw std::invalid_argument("cross_entropy of an empty test set");
  const double ce = kernels::mean_surprisal(model, test, parallel);
  if (!std::isfinite(ce)) throw NumericError("infinite cross-entropy");
  return ce;
}

std::size_t default_window(std::size_t types) { return std::max<std::size_t>(1, types / 100); }

std::vector<SurprisalRecord> surprisal_by_frequency(const LogProbModel& model, const TokenDataset& test,
                                                    const TokenDataset& train, std::size_t window) {
  if (window < 1) throw std::invalid_argument("rolling window must be at least 1");
  std::vector<WordForm> forms;
  forms.reserve(test.type_count());
  for (const auto& e : test.entries()) forms.push_back(e.form);
  const auto lp = kernels::batch_log_prob(model, forms);
  std::vector<SurprisalRecord> records;
  records.reserve(forms.size());
  for (std::size_t i = 0; i < forms.size(); ++i) {
    records.push_back({forms[i], train.count_of(forms[i]), -lp[i], 0.0});
  }
  std::sort(records.begin(), records.end(), [](const SurprisalRecord& x, const SurprisalRecord& y) {
    return std::tie(x.train_frequency, x.form) < std::tie(y.train_frequency, y.form);
  });
  double sum = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    sum += records[i].surprisal;
    if (i >= window) sum -= records[i - window].surprisal;
    const std::size_t span = std::min(window, i + 1);
    records[i].rolling_mean = window == 1 ? records[i].surprisal : sum / static_cast<double>(span);
  }
  return records;
}

void write_surprisal_csv(std::ostream& out, const std::vector<SurprisalRecord>& records) {
  out << "form,train_frequency,surprisal,rolling_mean\n" << std::setprecision(12);
  for (const auto& r : records) {
    out << r.form.utf8() << ',' << r.train_frequency << ',' << r.surprisal << ',' << r.rolling_mean << '\n';
  }
}

TypeBreakdown type_breakdown(const LogProbModel& model, const TokenDataset& test) {
  TypeBreakdown out;
  std::vector<WordForm> forms;
  for (const auto& e : test.entries()) forms.push_back(e.form);
  const auto lp = kernels::batch_log_prob(model, forms);
  double single_sum = 0.0;
  double multi_sum = 0.0;
  for (std::size_t i = 0; i < forms.size(); ++i) {
    if (test.entries()[i].count == 1) {
      single_sum += -lp[i];
      ++out.singletons;
    } else {
      multi_sum += -lp[i];
      ++out.non_singletons;
    }
  }
  if (out.singletons > 0) out.singleton_average = single_sum / static_cast<double>(out.singletons);
  if (out.non_singletons > 0) out.non_singleton_average = multi_sum / static_cast<double>(out.non_singletons);
  if (!forms.empty()) out.singleton_ratio = static_cast<double>(out.singletons) / static_cast<double>(forms.size());
  return out;
}

nlohmann::json EvalReport::to_json() const {
  const auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); };
  return {{"model", model},
          {"token_cross_entropy", token_cross_entropy},
          {"singleton_average_surprisal", opt(singleton_average)},
          {"non_singleton_average_surprisal", opt(non_singleton_average)},
          {"singleton_ratio", singleton_ratio}};
}

std::vector<EvalReport> compare_models(const std::vector<NamedModel>& models, const TokenDataset& test) {
  std::vector<EvalReport> reports;
  for (const auto& m : models) {
    if (m.model == nullptr) throw std::invalid_argument("compare_models: null model '" + m.name + "'");
    const auto breakdown = type_breakdown(*m.model, test);
    reports.push_back({m.name, cross_entropy(*m.model, test), breakdown.singleton_average,
                       breakdown.non_singleton_average, breakdown.singleton_ratio});
  }
  return reports;
}

void print_reports(std::ostream& out, const std::vector<EvalReport>& reports) {
  const auto cell = [](const std::optional<double>& v) {
    std::ostringstream s;
    if (v) {
      s << std::fixed << std::setprecision(3) << *v;
    } else {
      s << "-";
    }
    return s.str();
  };
  out << std::left << std::setw(16) << "model" << std::right << std::setw(12) << "token CE" << std::setw(14)
      << "singleton" << std::setw(16) << "non-singleton" << std::setw(10) << "%single" << '\n';
  for (const auto& r : reports) {
    out << std::left << std::setw(16) << r.model << std::right << std::setw(12) << cell(r.token_cross_entropy)
        << std::setw(14) << cell(r.singleton_average) << std::setw(16) << cell(r.non_singleton_average)
        << std::setw(9) << std::fixed << std::setprecision(1) << 100.0 * r.singleton_ratio << "%" << '\n';
    out.unsetf(std::ios::floatfield);
  }
}

}  // namespace unigram
