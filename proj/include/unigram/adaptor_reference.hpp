#ifndef UNIGRAM_ADAPTOR_REFERENCE_HPP_
#define UNIGRAM_ADAPTOR_REFERENCE_HPP_

#include <cstdint>
#include <optional>
#include <vector>

#include "unigram/adaptor.hpp"

// Linear-scan seating arrangement used as the test oracle for AdaptorState.
// Nothing here is indexed: every query walks the whole cluster table.
namespace unigram::reference {

class NaiveAdaptor {
 public:
  struct Slot {
    WordForm label;
    std::int64_t size = 0;  // 0 once the cluster is gone
  };

  // Seats token t into cluster `slot`, or into a fresh cluster when nullopt.
  // Returns the slot index.
  std::size_t seat(TokenIndex t, const WordForm& w, std::optional<std::size_t> slot);
  void unseat(TokenIndex t);

  std::int64_t total_customers() const;
  std::int64_t cluster_count() const;
  std::int64_t form_customers(const WordForm& w) const;
  std::int64_t form_clusters(const WordForm& w) const;
  // Live slots labeled w, in slot order.
  std::vector<std::size_t> clusters_of(const WordForm& w) const;
  const std::vector<Slot>& slots() const { return slots_; }
  std::optional<std::size_t> assignment(TokenIndex t) const;

  CanonicalState canonical() const;

 private:
  std::vector<Slot> slots_;
  std::vector<std::optional<std::size_t>> assignments_;
};

// One weight per live cluster labeled w (slot order) plus the new-cluster
// weight, computed by scanning.
struct ScanWeights {
  std::vector<std::pair<std::size_t, double>> old_clusters;
  double new_weight = 0.0;
};
ScanWeights seating_weights_scan(const NaiveAdaptor& state, const PYPParams& params, const WordForm& w,
                                 double gen_log_prob);

// Buckets the scan weights by cluster size, in the layout seating_weights
// returns.
SeatingWeights bucketed(const NaiveAdaptor& state, const ScanWeights& weights);

double predictive_log_prob_scan(const NaiveAdaptor& state, const PYPParams& params, const WordForm& w,
                                double gen_log_prob);

}  // namespace unigram::reference

#endif  // UNIGRAM_ADAPTOR_REFERENCE_HPP_
