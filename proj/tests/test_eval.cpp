#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_map>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "unigram/errors.hpp"
#include "unigram/eval.hpp"

using namespace unigram;
using oracle::wf;

TEST_CASE("cross-entropy of a uniform and a deterministic model") {
  const oracle::TableModel uniform{{"a", 0.25}, {"b", 0.25}, {"ab", 0.25}, {"ba", 0.25}};
  for (const auto& test : {TokenDataset::from_counts({{wf("a"), 7}, {wf("ba"), 1}}),
                           TokenDataset::from_counts({{wf("ab"), 1}}),
                           TokenDataset::from_counts({{wf("a"), 1}, {wf("b"), 2}, {wf("ab"), 3}, {wf("ba"), 4}})}) {
    CHECK(cross_entropy(uniform, test) == doctest::Approx(std::log(4.0)).epsilon(1e-15));
    CHECK(cross_entropy(uniform, test, false) == doctest::Approx(std::log(4.0)).epsilon(1e-15));
  }
  const oracle::TableModel point{{"a", 1.0}};
  CHECK(cross_entropy(point, TokenDataset::from_counts({{wf("a"), 12}})) == 0.0);
}

TEST_CASE("zero probability gives an infinite cross-entropy error") {
  const oracle::TableModel point{{"a", 1.0}};
  const auto test = TokenDataset::from_counts({{wf("a"), 3}, {wf("b"), 1}});
  CHECK_THROWS_WITH_AS(cross_entropy(point, test), doctest::Contains("infinite cross-entropy"), NumericError);
  CHECK_THROWS_AS(cross_entropy(point, TokenDataset{}), std::invalid_argument);
}

TEST_CASE("errors inside the parallel kernels reach the caller") {
  struct Throwing final : LogProbModel {
    double log_prob(const WordForm& w) const override {
      if (w == wf("ba")) throw NumericError("boom");
      return std::log(0.5);
    }
  };
  std::unordered_map<WordForm, std::int64_t, WordFormHash> counts;
  for (const auto& w : oracle::all_strings(oracle::alphabet_of("ab"), 8)) counts[w] = 1;
  const auto test = TokenDataset::from_counts(counts);
  CHECK_THROWS_WITH_AS(cross_entropy(Throwing{}, test, true), "boom", NumericError);
  CHECK_THROWS_WITH_AS(cross_entropy(Throwing{}, test, false), "boom", NumericError);
  CHECK_THROWS_AS(type_breakdown(Throwing{}, test), NumericError);
}

TEST_CASE("count weighting equals the expanded token mean") {
  const oracle::TableModel q{{"a", 0.5}, {"b", 0.3}, {"ab", 0.15}, {"ba", 0.05}};
  const auto test = TokenDataset::from_counts({{wf("a"), 13}, {wf("b"), 5}, {wf("ab"), 1}, {wf("ba"), 40}});
  double sum = 0.0;
  const auto tokens = test.expand();
  for (const auto& w : tokens) sum -= q.log_prob(w);
  const double expanded = sum / static_cast<double>(tokens.size());
  CHECK(std::abs(cross_entropy(q, test) - expanded) <= 1e-12 * expanded);
  CHECK(std::abs(cross_entropy(q, test, false) - expanded) <= 1e-12 * expanded);
}

TEST_CASE("cross-entropy is never below the source entropy") {
  const std::vector<std::pair<const char*, double>> p{{"a", 0.4}, {"b", 0.3}, {"ab", 0.2}, {"ba", 0.1}};
  oracle::TableModel truth;
  double entropy = 0.0;
  for (const auto& [s, x] : p) {
    truth.set(wf(s), x);
    entropy -= x * std::log(x);
  }
  Rng rng(10);
  std::discrete_distribution<int> draw({0.4, 0.3, 0.2, 0.1});
  const int n = 100000;
  std::unordered_map<WordForm, std::int64_t, WordFormHash> counts;
  for (int i = 0; i < n; ++i) ++counts[wf(p[static_cast<std::size_t>(draw(rng))].first)];
  const auto sample = TokenDataset::from_counts(counts);

  const std::vector<oracle::TableModel> others{
      {{"a", 0.25}, {"b", 0.25}, {"ab", 0.25}, {"ba", 0.25}},
      {{"a", 0.41}, {"b", 0.29}, {"ab", 0.2}, {"ba", 0.1}},
      {{"a", 0.1}, {"b", 0.2}, {"ab", 0.3}, {"ba", 0.4}},
  };
  for (const auto& q : others) {
    // Standard deviation of one token's surprisal under the source.
    double m1 = 0.0, m2 = 0.0;
    for (const auto& [s, x] : p) {
      const double v = -q.log_prob(wf(s));
      m1 += x * v;
      m2 += x * v * v;
    }
    const double sigma = std::sqrt((m2 - m1 * m1) / n);
    CHECK(cross_entropy(q, sample) >= entropy - 3 * sigma);
  }
  double m2 = 0.0;
  for (const auto& [s, x] : p) m2 += x * std::log(x) * std::log(x);
  const double sigma = std::sqrt((m2 - entropy * entropy) / n);
  CHECK(std::abs(cross_entropy(truth, sample) - entropy) < 3 * sigma);
}

TEST_CASE("surprisal by training frequency") {
  const oracle::TableModel q{{"a", 0.5}, {"b", 0.25}, {"ab", 0.125}, {"ba", 0.125}};
  const auto test = TokenDataset::from_counts({{wf("a"), 2}, {wf("b"), 1}, {wf("ab"), 1}, {wf("ba"), 3}});

  SUBCASE("unseen in train") {
    const auto records = surprisal_by_frequency(q, test, TokenDataset::from_counts({{wf("bb"), 4}}), 1);
    REQUIRE(records.size() == 4);
    for (const auto& r : records) {
      CHECK(r.train_frequency == 0);
      CHECK(r.rolling_mean == r.surprisal);
      CHECK(r.surprisal == -q.log_prob(r.form));
    }
  }

  SUBCASE("sorted with a trailing mean") {
    const auto train = TokenDataset::from_counts({{wf("a"), 9}, {wf("b"), 3}, {wf("ba"), 1}});
    const auto records = surprisal_by_frequency(q, test, train, 2);
    REQUIRE(records.size() == 4);
    CHECK(records[0].form == wf("ab"));
    CHECK(records[1].form == wf("ba"));
    CHECK(records[2].form == wf("b"));
    CHECK(records[3].form == wf("a"));
    CHECK(records[0].train_frequency == 0);
    CHECK(records[3].train_frequency == 9);
    CHECK(records[0].rolling_mean == doctest::Approx(std::log(8.0)));
    CHECK(records[1].rolling_mean == doctest::Approx(std::log(8.0)));
    CHECK(records[2].rolling_mean == doctest::Approx((std::log(8.0) + std::log(4.0)) / 2));
    CHECK(records[3].rolling_mean == doctest::Approx((std::log(4.0) + std::log(2.0)) / 2));
    std::ostringstream out;
    write_surprisal_csv(out, records);
    CHECK(out.str().substr(0, out.str().find('\n')) == "form,train_frequency,surprisal,rolling_mean");
  }

  CHECK(default_window(50) == 1);
  CHECK(default_window(2500) == 25);
  CHECK_THROWS_AS(surprisal_by_frequency(q, test, test, 0), std::invalid_argument);
}

TEST_CASE("type breakdown") {
  const oracle::TableModel q{{"a", 0.5}, {"b", 0.25}, {"ab", 0.125}, {"ba", 0.125}};

  SUBCASE("mixed buckets") {
    const auto test = TokenDataset::from_counts({{wf("a"), 2}, {wf("b"), 1}, {wf("ab"), 1}, {wf("ba"), 3}});
    const auto b = type_breakdown(q, test);
    CHECK(b.singletons == 2);
    CHECK(b.non_singletons == 2);
    CHECK(b.singletons + b.non_singletons == test.type_count());
    CHECK(b.singleton_ratio == 0.5);
    CHECK(*b.singleton_average == doctest::Approx((std::log(4.0) + std::log(8.0)) / 2));
    CHECK(*b.non_singleton_average == doctest::Approx((std::log(2.0) + std::log(8.0)) / 2));
  }

  SUBCASE("all singletons") {
    const auto test = TokenDataset::from_counts({{wf("a"), 1}, {wf("b"), 1}});
    const auto b = type_breakdown(q, test);
    CHECK(b.singleton_ratio == 1.0);
    CHECK_FALSE(b.non_singleton_average.has_value());
    EvalReport r{"q", 1.0, b.singleton_average, b.non_singleton_average, b.singleton_ratio};
    const auto j = r.to_json();
    CHECK(j["non_singleton_average_surprisal"].is_null());
    CHECK(j["singleton_average_surprisal"].get<double>() == *b.singleton_average);
    CHECK(j["singleton_ratio"].get<double>() == 1.0);
  }
}

TEST_CASE("compare models") {
  const oracle::TableModel q{{"a", 0.5}, {"b", 0.25}, {"ab", 0.125}, {"ba", 0.125}};
  const oracle::TableModel u{{"a", 0.25}, {"b", 0.25}, {"ab", 0.25}, {"ba", 0.25}};
  const auto test = TokenDataset::from_counts({{wf("a"), 2}, {wf("b"), 1}, {wf("ab"), 1}, {wf("ba"), 3}});
  CHECK(compare_models({{"q", &q}}, test).size() == 1);
  const auto r = compare_models({{"q", &q}, {"same", &q}, {"u", &u}}, test);
  REQUIRE(r.size() == 3);
  CHECK(r[0].model == "q");
  CHECK(r[2].model == "u");
  CHECK(r[0].token_cross_entropy == r[1].token_cross_entropy);
  CHECK(r[0].singleton_average == r[1].singleton_average);
  CHECK(r[0].non_singleton_average == r[1].non_singleton_average);
  CHECK(r[2].token_cross_entropy == doctest::Approx(std::log(4.0)));
  std::ostringstream out;
  print_reports(out, r);
  const auto text = out.str();
  CHECK(text.find("non-singleton") != std::string::npos);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
}
