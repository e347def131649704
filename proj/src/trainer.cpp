#include "unigram/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "unigram/errors.hpp"
#include "unigram/kernels.hpp"

namespace unigram {

namespace {

std::vector<WordForm> union_of_forms(const TokenDataset& x, const TokenDataset& y) {
  std::vector<WordForm> forms;
  forms.reserve(x.type_count() + y.type_count());
  for (const auto& e : x.entries()) forms.push_back(e.form);
  for (const auto& e : y.entries()) {
    if (x.count_of(e.form) == 0) forms.push_back(e.form);
  }
  return forms;
}

TokenDataset types_of(const TokenDataset& data) {
  std::unordered_map<WordForm, std::int64_t, WordFormHash> counts;
  for (const auto& e : data.entries()) counts[e.form] = 1;
  return TokenDataset::from_counts(counts);
}

}  // namespace

GeneratorModel::GeneratorModel(std::unique_ptr<Generator> generator, std::string training)
    : generator_(std::move(generator)), training_(std::move(training)) {
  if (!generator_) throw std::invalid_argument("GeneratorModel needs a generator");
}

nlohmann::json GeneratorModel::to_json() const {
  return {{"format", "unigram-model"},
          {"format_version", kModelFormatVersion},
          {"kind", kind()},
          {"training", training_},
          {"generator", generator_to_json(*generator_)}};
}

std::unique_ptr<UnigramModel> GeneratorModel::clone_model() const {
  return std::make_unique<GeneratorModel>(generator_->clone(), training_);
}

TwoStageModel::TwoStageModel(AdaptorState adaptor, std::unique_ptr<Generator> generator, PYPParams params)
    : adaptor_(std::move(adaptor)), generator_(std::move(generator)), params_(params) {
  if (!generator_) throw std::invalid_argument("TwoStageModel needs a generator");
  params_.validate();
}

TwoStageModel::TwoStageModel(const TwoStageModel& other)
    : adaptor_(other.adaptor_), generator_(other.generator_->clone()), params_(other.params_) {}

TwoStageModel& TwoStageModel::operator=(const TwoStageModel& other) {
  if (this != &other) {
    adaptor_ = other.adaptor_;
    generator_ = other.generator_->clone();
    params_ = other.params_;
  }
  return *this;
}

double TwoStageModel::log_prob(const WordForm& w) const {
  return predictive_log_prob(adaptor_, params_, w, generator_->log_prob(w));
}

nlohmann::json TwoStageModel::to_json() const {
  return {{"format", "unigram-model"},
          {"format_version", kModelFormatVersion},
          {"kind", kind()},
          {"params", {{"a", params_.a}, {"b", params_.b}}},
          {"adaptor", adaptor_.to_json()},
          {"generator", generator_to_json(*generator_)}};
}

std::unique_ptr<UnigramModel> TwoStageModel::clone_model() const { return std::make_unique<TwoStageModel>(*this); }

std::unique_ptr<UnigramModel> model_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object() || j.value("format", "") != "unigram-model") throw DataError("corrupt file: not a model file");
    const int fv = j.at("format_version").get<int>();
    if (fv != kModelFormatVersion) throw DataError("version mismatch: model format " + std::to_string(fv));
    const auto kind = j.at("kind").get<std::string>();
    auto generator = generator_from_json(j.at("generator"));
    if (kind == "generator") {
      return std::make_unique<GeneratorModel>(std::move(generator), j.at("training").get<std::string>());
    }
    if (kind == "two_stage") {
      PYPParams params{j.at("params").at("a").get<double>(), j.at("params").at("b").get<double>()};
      try {
        params.validate();
      } catch (const std::invalid_argument& e) {
        throw DataError(std::string("corrupt file: ") + e.what());
      }
      return std::make_unique<TwoStageModel>(AdaptorState::from_json(j.at("adaptor")), std::move(generator),
                                             params);
    }
    throw DataError("corrupt file: unknown model kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt file: ") + e.what());
  }
}

void save_model(const UnigramModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << model.to_json().dump() << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

std::unique_ptr<UnigramModel> load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("corrupt file: " + path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

SamplingSession::SamplingSession(const UnigramModel& model, std::uint64_t seed) : model_(model), rng_(seed) {
  two_stage_ = dynamic_cast<const TwoStageModel*>(&model);
  if (two_stage_ == nullptr) return;
  std::vector<Cluster> table;
  two_stage_->adaptor().for_each_cluster([&](ClusterId, const Cluster& c) { table.push_back(c); });
  std::sort(table.begin(), table.end(),
            [](const Cluster& x, const Cluster& y) { return std::tie(x.label, x.size) < std::tie(y.label, y.size); });
  scratch_ = AdaptorState::from_clusters(table);
  scratch_.for_each_cluster([&](ClusterId id, const Cluster& c) {
    customers_.insert(customers_.end(), static_cast<std::size_t>(c.size), id);
  });
  // for_each_cluster walks a hash map; fix the order so draws depend on the seed only.
  std::sort(customers_.begin(), customers_.end());
}

WordForm SamplingSession::next() {
  if (two_stage_ == nullptr) return model_.generator().sample(rng_);
  // With nothing seated the draw is a plain generator sample.
  if (customers_.empty()) {
    WordForm w = model_.generator().sample(rng_);
    customers_.push_back(scratch_.seat_anonymous(w, SeatChoice::new_cluster()));
    return w;
  }
  const PYPParams& p = two_stage_->params();
  const double n = static_cast<double>(scratch_.total_customers());
  const double k = static_cast<double>(scratch_.cluster_count());
  const double old_weight = n - p.a * k;
  const double new_weight = p.a * k + p.b;
  if (!(old_weight + new_weight > 0.0)) throw NumericError("degenerate PYP: nothing to sample from");
  if (std::uniform_real_distribution<double>(0.0, old_weight + new_weight)(rng_) >= old_weight) {
    WordForm w = model_.generator().sample(rng_);
    customers_.push_back(scratch_.seat_anonymous(w, SeatChoice::new_cluster()));
    return w;
  }
  std::uniform_int_distribution<std::size_t> pick(0, customers_.size() - 1);
  std::uniform_real_distribution<double> accept(0.0, 1.0);
  for (;;) {
    const ClusterId id = customers_[pick(rng_)];
    const double size = static_cast<double>(scratch_.cluster(id).size);
    if (accept(rng_) * size < size - p.a) {
      WordForm w = scratch_.cluster(id).label;
      scratch_.seat_anonymous(w, SeatChoice::existing(id));
      customers_.push_back(id);
      return w;
    }
  }
}

TokenDataset make_dampened_dataset(const AdaptorState& state) {
  if (state.cluster_count() == 0) throw std::invalid_argument("dampened dataset of an empty adaptor state");
  std::unordered_map<WordForm, std::int64_t, WordFormHash> counts;
  state.for_each_form([&](const WordForm& w, std::int64_t, std::int64_t n_w) { counts[w] = n_w; });
  return TokenDataset::from_counts(counts);
}

std::pair<TokenDataset, TokenDataset> holdout_split(const TokenDataset& data, double fraction, Rng& rng) {
  auto units = data.expand();
  const auto held = static_cast<std::size_t>(fraction * static_cast<double>(units.size()));
  if (held == 0 || held >= units.size()) return {data, data};
  std::shuffle(units.begin(), units.end(), rng);
  const auto mid = units.end() - static_cast<std::ptrdiff_t>(held);
  return {TokenDataset::from_tokens({units.begin(), mid}), TokenDataset::from_tokens({mid, units.end()})};
}

void EMConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("EM needs at least one iteration");
  if (!(generator_dev_fraction >= 0.0 && generator_dev_fraction < 1.0)) {
    throw std::invalid_argument("generator dev fraction must be in [0, 1)");
  }
  sampler.validate();
  schedule.validate();
  params.validate();
}

EMResult run_em(const TokenDataset& train, const TokenDataset& dev, const EMConfig& cfg,
                std::unique_ptr<Generator> generator, std::uint64_t seed, const ProgressFn& progress) {
  cfg.validate();
  if (train.empty() || dev.empty()) throw std::invalid_argument("run_em needs non-empty train and dev sets");
  if (!generator) throw std::invalid_argument("run_em needs a generator");
  for (const auto* data : {&train, &dev}) {
    for (const auto& e : data->entries()) {
      if (!generator->alphabet().covers(e.form)) throw DataError("form outside the alphabet: " + e.form.utf8());
    }
  }

  const auto started = std::chrono::steady_clock::now();
  const auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  };
  Rng rng(seed);
  EMResult result{TwoStageModel(AdaptorState{}, generator->clone(), cfg.params), {}, {}, {}, {}};
  const auto record = [&](int iteration, const char* phase, double ce, std::int64_t k) {
    result.trace.push_back({iteration, phase, ce, k, elapsed(), generator->version()});
    if (progress) progress(result.trace.back());
  };

  const auto fit_on = [&](const TokenDataset& data) {
    auto [fit_train, fit_dev] = holdout_split(data, cfg.generator_dev_fraction, rng);
    TrainingSchedule schedule = cfg.schedule;
    schedule.seed = rng();
    schedule.parallel = cfg.parallel;
    generator->fit(fit_train, fit_dev, schedule);
  };

  fit_on(types_of(train));
  const auto forms = union_of_forms(train, dev);
  const auto tokens = train.expand();
  AdaptorState state;
  {
    FormLogProbCache cache(*generator, forms, cfg.parallel);
    // An empty restaurant predicts with the generator alone.
    const double ce = kernels::mean_surprisal(cache, dev, cfg.parallel);
    if (!std::isfinite(ce)) throw NumericError("infinite cross-entropy on the dev set");
    record(0, "hotstart", ce, 0);
    seat_from_prior(state, cfg.params, cache, tokens, rng);
  }

  int epochs_so_far = 0;
  for (int it = 1; it <= cfg.iterations; ++it) {
    SweepResult best;
    {
      FormLogProbCache cache(*generator, forms, cfg.parallel);
      result.e_step_versions.push_back(cache.generator_version());
      SamplerConfig sampler = cfg.sampler;
      sampler.rng_seed = rng();
      best = run_sampler(state, cfg.params, cache, tokens, dev, sampler);
    }
    for (auto row : best.log) {
      row.epoch += epochs_so_far;
      result.sweeps.push_back(row);
    }
    epochs_so_far += cfg.sampler.epochs_per_iteration;
    state = std::move(best.state);
    record(it, "e_step", best.dev_cross_entropy, state.cluster_count());

    fit_on(make_dampened_dataset(state));
    result.m_step_versions.push_back(generator->version());
    FormLogProbCache cache(*generator, forms, cfg.parallel);
    record(it, "m_step", dev_cross_entropy(state, cfg.params, cache, dev), state.cluster_count());
  }
  result.model = TwoStageModel(std::move(state), std::move(generator), cfg.params);
  return result;
}

GeneratorModel train_baseline(std::unique_ptr<Generator> generator, const TokenDataset& train,
                              const TokenDataset& dev, Baseline baseline, const TrainingSchedule& schedule,
                              FitReport* report) {
  if (!generator) throw std::invalid_argument("train_baseline needs a generator");
  FitReport r;
  std::string name;
  if (baseline == Baseline::kType) {
    r = generator->fit(types_of(train), types_of(dev), schedule);
    name = "type";
  } else {
    r = generator->fit(train, dev, schedule);
    name = "token";
  }
  if (report != nullptr) *report = r;
  return GeneratorModel(std::move(generator), name);
}

void write_training_log(std::ostream& out, std::span<const EMTraceRow> rows) {
  out << "iteration,phase,dev_cross_entropy,K,wallclock_seconds\n" << std::setprecision(12);
  for (const auto& r : rows) {
    out << r.iteration << ',' << r.phase << ',' << r.dev_cross_entropy << ',' << r.clusters << ','
        << r.wallclock_seconds << '\n';
  }
}

}  // namespace unigram
