#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "doctest.h"
#include "oracles.hpp"
#include "unigram/errors.hpp"
#include "unigram/ngram.hpp"
#include "unigram/trainer.hpp"

using namespace unigram;
using oracle::wf;

namespace {

std::filesystem::path scratch_dir() {
  auto dir = std::filesystem::temp_directory_path() / "unigram_trainer_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

std::unique_ptr<NGramGenerator> bigram_over(std::string_view letters) {
  return std::make_unique<NGramGenerator>(oracle::alphabet_of(letters), NGramOptions{2});
}

// A known two-stage source: a bigram generator over {a, b, c} fitted on a
// few words, with an empty seating.
TwoStageModel synthetic_truth(const PYPParams& p) {
  auto g = bigram_over("abc");
  const auto words = TokenDataset::from_counts(
      {{wf("ab"), 3}, {wf("ba"), 2}, {wf("cab"), 2}, {wf("a"), 4}, {wf("bca"), 1}, {wf("cc"), 1}});
  g->fit(words, words, TrainingSchedule{});
  return TwoStageModel(AdaptorState{}, std::move(g), p);
}

struct SyntheticCorpus {
  TokenDataset train;
  TokenDataset dev;
  double true_entropy = 0.0;
};

// Train tokens come from the sequential process; dev tokens are independent
// draws from the true predictive distribution given the train seating.
SyntheticCorpus draw_corpus(const TwoStageModel& truth, int n_train, int n_dev, std::uint64_t seed) {
  SamplingSession session(truth, seed);
  std::vector<WordForm> train;
  for (int i = 0; i < n_train; ++i) train.push_back(session.next());
  TwoStageModel posterior(session.state(), truth.generator().clone(), truth.params());
  std::vector<WordForm> dev;
  double surprisal = 0.0;
  for (int i = 0; i < n_dev; ++i) {
    SamplingSession one(posterior, seed * 1000003 + static_cast<std::uint64_t>(i));
    dev.push_back(one.next());
    surprisal -= posterior.log_prob(dev.back());
  }
  return {TokenDataset::from_tokens(train), TokenDataset::from_tokens(dev), surprisal / n_dev};
}

}  // namespace

TEST_CASE("dampened dataset counts clusters per form") {
  const std::vector<Cluster> table{{wf("the"), 500}, {wf("the"), 300}, {wf("the"), 200}, {wf("cat"), 2}};
  const auto d = make_dampened_dataset(AdaptorState::from_clusters(table));
  CHECK(d.count_of(wf("the")) == 3);
  CHECK(d.count_of(wf("cat")) == 1);
  CHECK(d.total_tokens() == 4);
  CHECK(d.type_count() == 2);

  const auto tokens = TokenDataset::from_counts({{wf("a"), 3}, {wf("b"), 2}});
  AdaptorState singletons;
  const auto expanded = tokens.expand();
  for (TokenIndex t = 0; t < expanded.size(); ++t) singletons.seat(t, expanded[t], SeatChoice::new_cluster());
  const auto ds = make_dampened_dataset(singletons);
  CHECK(ds.count_of(wf("a")) == 3);
  CHECK(ds.count_of(wf("b")) == 2);

  const std::vector<Cluster> per_form{{wf("a"), 3}, {wf("b"), 2}};
  const auto dt = make_dampened_dataset(AdaptorState::from_clusters(per_form));
  CHECK(dt.count_of(wf("a")) == 1);
  CHECK(dt.count_of(wf("b")) == 1);

  CHECK_THROWS_AS(make_dampened_dataset(AdaptorState{}), std::invalid_argument);
}

TEST_CASE("holdout split") {
  const auto data = TokenDataset::from_counts({{wf("a"), 60}, {wf("b"), 30}, {wf("c"), 10}});
  Rng rng(4);
  const auto [train, held] = holdout_split(data, 0.1, rng);
  CHECK(train.total_tokens() == 90);
  CHECK(held.total_tokens() == 10);
  for (const char* s : {"a", "b", "c"}) CHECK(train.count_of(wf(s)) + held.count_of(wf(s)) == data.count_of(wf(s)));
  const auto [all, same] = holdout_split(data, 0.0, rng);
  CHECK(all.total_tokens() == 100);
  CHECK(same.total_tokens() == 100);
}

TEST_CASE("EM config validation") {
  EMConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.iterations = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.iterations = 1;
  cfg.params.a = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("one EM iteration on a one-word corpus") {
  const auto train = TokenDataset::from_counts({{wf("a"), 5}});
  const auto dev = TokenDataset::from_counts({{wf("a"), 2}});
  EMConfig cfg;
  cfg.iterations = 1;
  const auto r = run_em(train, dev, cfg, bigram_over("ab"), 1);
  CHECK(std::exp(r.model.log_prob(wf("a"))) > 0.9);
  REQUIRE(r.trace.size() == 3);
  CHECK(r.trace[0].phase == "hotstart");
  CHECK(r.trace[1].phase == "e_step");
  CHECK(r.trace[2].phase == "m_step");
  CHECK(r.trace.back().dev_cross_entropy < 0.1);
  CHECK(r.model.adaptor().total_customers() == 5);
  CHECK(r.sweeps.size() == 6);
}

TEST_CASE("run_em rejects bad inputs") {
  const auto train = TokenDataset::from_counts({{wf("a"), 5}});
  EMConfig cfg;
  CHECK_THROWS_AS(run_em(train, TokenDataset{}, cfg, bigram_over("ab"), 1), std::invalid_argument);
  CHECK_THROWS_AS(run_em(TokenDataset::from_counts({{wf("az"), 1}}), train, cfg, bigram_over("ab"), 1), DataError);
}

TEST_CASE("EM recovers a known two-stage source") {
  const PYPParams p{0.5, 10.0};
  const auto truth = synthetic_truth(p);
  const auto corpus = draw_corpus(truth, 3000, 3000, 11);
  EMConfig cfg;
  cfg.params = p;
  const auto r = run_em(corpus.train, corpus.dev, cfg, bigram_over("abc"), 5);
  const double ce = r.trace.back().dev_cross_entropy;
  MESSAGE("true entropy " << corpus.true_entropy << ", model dev cross-entropy " << ce);
  CHECK(std::abs(ce - corpus.true_entropy) <= 0.15);
}

TEST_CASE("each E-step reads the generator of the previous M-step") {
  const auto truth = synthetic_truth({0.5, 10.0});
  const auto corpus = draw_corpus(truth, 500, 200, 3);
  EMConfig cfg;
  cfg.iterations = 4;
  cfg.sampler.epochs_per_iteration = 2;
  const auto r = run_em(corpus.train, corpus.dev, cfg, bigram_over("abc"), 9);
  REQUIRE(r.e_step_versions.size() == 4);
  REQUIRE(r.m_step_versions.size() == 4);
  CHECK(r.e_step_versions[0] == 1);  // the hotstart fit
  for (std::size_t t = 0; t + 1 < r.e_step_versions.size(); ++t) {
    CHECK(r.e_step_versions[t + 1] == r.m_step_versions[t]);
    CHECK(r.m_step_versions[t] == r.e_step_versions[t] + 1);
  }
  CHECK(r.model.generator().version() == r.m_step_versions.back());
  CHECK(r.sweeps.size() == 8);
  for (std::size_t i = 0; i < r.sweeps.size(); ++i) CHECK(r.sweeps[i].epoch == static_cast<int>(i) + 1);
  std::ostringstream log;
  write_training_log(log, r.trace);
  const std::string text = log.str();
  CHECK(text.substr(0, text.find('\n')) == "iteration,phase,dev_cross_entropy,K,wallclock_seconds");
  CHECK(std::count(text.begin(), text.end(), '\n') == static_cast<std::ptrdiff_t>(r.trace.size()) + 1);
}

TEST_CASE("EM is deterministic for a seed") {
  const auto truth = synthetic_truth({0.5, 10.0});
  const auto corpus = draw_corpus(truth, 400, 100, 5);
  EMConfig cfg;
  cfg.iterations = 2;
  const auto x = run_em(corpus.train, corpus.dev, cfg, bigram_over("abc"), 21);
  const auto y = run_em(corpus.train, corpus.dev, cfg, bigram_over("abc"), 21);
  CHECK(x.model.adaptor().canonical() == y.model.adaptor().canonical());
  REQUIRE(x.trace.size() == y.trace.size());
  for (std::size_t i = 0; i < x.trace.size(); ++i) CHECK(x.trace[i].dev_cross_entropy == y.trace[i].dev_cross_entropy);
}

TEST_CASE("EM trace monotonicity (reported)") {
  const auto truth = synthetic_truth({0.5, 10.0});
  std::vector<int> decreasing;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto corpus = draw_corpus(truth, 1000, 300, seed + 40);
    EMConfig cfg;
    cfg.params = {0.5, 10.0};
    const auto r = run_em(corpus.train, corpus.dev, cfg, bigram_over("abc"), seed);
    double prev = r.trace.front().dev_cross_entropy;
    int n = 0;
    for (const auto& row : r.trace) {
      if (row.phase != "m_step") continue;
      if (row.dev_cross_entropy <= prev) ++n;
      prev = row.dev_cross_entropy;
    }
    decreasing.push_back(n);
  }
  std::sort(decreasing.begin(), decreasing.end());
  MESSAGE("non-increasing iterations out of 5, median over 10 seeds: "
          << (decreasing[4] + decreasing[5]) / 2.0);
}

TEST_CASE("model files round trip") {
  const auto truth = synthetic_truth({0.5, 10.0});
  const auto corpus = draw_corpus(truth, 300, 100, 8);
  EMConfig cfg;
  cfg.iterations = 1;
  const auto r = run_em(corpus.train, corpus.dev, cfg, bigram_over("abc"), 2);
  const auto path = scratch_dir() / "model.json";
  save_model(r.model, path);
  const auto loaded = load_model(path);
  REQUIRE(loaded->kind() == "two_stage");
  const auto& m = dynamic_cast<const TwoStageModel&>(*loaded);
  CHECK(m.adaptor().total_customers() == r.model.adaptor().total_customers());
  CHECK(m.adaptor().cluster_count() == r.model.adaptor().cluster_count());
  CHECK(m.params().a == r.model.params().a);
  CHECK(m.params().b == r.model.params().b);
  for (const auto& w : oracle::all_strings(oracle::alphabet_of("abc"), 4)) CHECK(m.log_prob(w) == r.model.log_prob(w));

  std::ifstream in(path);
  nlohmann::json j;
  in >> j;
  CHECK(j["adaptor"]["N"] == r.model.adaptor().total_customers());
  CHECK(j["adaptor"]["K"] == r.model.adaptor().cluster_count());

  SUBCASE("truncated file") {
    const auto text = j.dump();
    const auto cut = scratch_dir() / "truncated.json";
    std::ofstream(cut) << text.substr(0, text.size() / 2);
    try {
      load_model(cut);
      FAIL("expected a DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("corrupt file") != std::string::npos);
    }
  }
  SUBCASE("version mismatch") {
    j["format_version"] = kModelFormatVersion + 1;
    CHECK_THROWS_WITH_AS(model_from_json(j), doctest::Contains("version mismatch"), DataError);
  }
  SUBCASE("generator model") {
    GeneratorModel g(bigram_over("abc"), "type");
    const auto gpath = scratch_dir() / "generator_model.json";
    save_model(g, gpath);
    const auto back = load_model(gpath);
    CHECK(back->kind() == "generator");
    CHECK(dynamic_cast<const GeneratorModel&>(*back).training() == "type");
    CHECK(back->log_prob(wf("cab")) == g.log_prob(wf("cab")));
  }
}

TEST_CASE("sampling sessions") {
  const auto truth = synthetic_truth({0.5, 10.0});

  SUBCASE("an empty seating starts with a plain generator draw") {
    SamplingSession s(truth, 17);
    Rng rng(17);
    CHECK(s.next() == truth.generator().sample(rng));
    GeneratorModel g(truth.generator().clone(), "token");
    SamplingSession sg(g, 17);
    Rng rng2(17);
    CHECK(sg.next() == g.generator().sample(rng2));
  }

  SUBCASE("same seed, same stream") {
    SamplingSession x(truth, 3), y(truth, 3);
    for (int i = 0; i < 200; ++i) CHECK(x.next() == y.next());
    CHECK(x.state().total_customers() == 200);
    x.state().check_invariants();
  }

  SUBCASE("first draw follows the predictive distribution") {
    // Clusters: x of size 5, x of size 1, y of size 2. a = 0.5, b = 2:
    // P(join an x cluster) = (4.5 + 0.5) / 10, P(join y) = 1.5 / 10, and a
    // new cluster has mass (1.5 + 2) / 10.
    const std::vector<Cluster> table{{wf("x"), 5}, {wf("x"), 1}, {wf("y"), 2}};
    auto g = std::make_unique<NGramGenerator>(oracle::alphabet_of("abxy"), NGramOptions{1});
    const double p_x_gen = std::exp(g->log_prob(wf("x")));
    const double p_y_gen = std::exp(g->log_prob(wf("y")));
    TwoStageModel m(AdaptorState::from_clusters(table), std::move(g), {0.5, 2.0});
    const double want_x = 0.5 + 0.35 * p_x_gen;
    const double want_y = 0.15 + 0.35 * p_y_gen;
    CHECK(std::exp(m.log_prob(wf("x"))) == doctest::Approx(want_x).epsilon(1e-12));
    const int n = 20000;
    int hits_x = 0, hits_y = 0;
    for (int i = 0; i < n; ++i) {
      SamplingSession s(m, static_cast<std::uint64_t>(i) + 1);
      const auto w = s.next();
      hits_x += w == wf("x");
      hits_y += w == wf("y");
    }
    for (auto [hits, want] : {std::pair{hits_x, want_x}, std::pair{hits_y, want_y}}) {
      const double sigma = std::sqrt(want * (1 - want) / n);
      CHECK(std::abs(static_cast<double>(hits) / n - want) < 3 * sigma);
    }
  }
}

TEST_CASE("type baseline ignores frequency") {
  const auto skewed = TokenDataset::from_counts({{wf("ab"), 100}, {wf("b"), 1}, {wf("ca"), 7}});
  const auto flat = TokenDataset::from_counts({{wf("ab"), 1}, {wf("b"), 1}, {wf("ca"), 1}});
  const auto x = train_baseline(bigram_over("abc"), skewed, skewed, Baseline::kType, TrainingSchedule{});
  const auto y = train_baseline(bigram_over("abc"), flat, flat, Baseline::kType, TrainingSchedule{});
  const auto z = train_baseline(bigram_over("abc"), skewed, skewed, Baseline::kToken, TrainingSchedule{});
  CHECK(x.training() == "type");
  CHECK(z.training() == "token");
  for (const auto& w : oracle::all_strings(oracle::alphabet_of("abc"), 3)) CHECK(x.log_prob(w) == y.log_prob(w));
  CHECK(z.log_prob(wf("ab")) > x.log_prob(wf("ab")));
}
