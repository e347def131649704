#ifndef UNIGRAM_ADAPTOR_HPP_
#define UNIGRAM_ADAPTOR_HPP_

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "unigram/corpus.hpp"
#include "unigram/generator.hpp"

namespace unigram {

// Discount a in [0, 1) and concentration b >= 0.
struct PYPParams {
  double a = 0.5;
  double b = 1.0;

  void validate() const;
};

using ClusterId = std::uint64_t;
using TokenIndex = std::size_t;

struct Cluster {
  WordForm label;
  std::int64_t size = 0;
};

struct SeatChoice {
  static constexpr ClusterId kNew = std::numeric_limits<ClusterId>::max();
  ClusterId cluster = kNew;

  static SeatChoice new_cluster() { return {}; }
  static SeatChoice existing(ClusterId id) { return {id}; }
  bool is_new() const { return cluster == kNew; }
};

// All clusters of one form that share a size carry the same seating weight,
// so the old-cluster options are reported per size bucket.
struct SizeBucket {
  std::int64_t size = 0;
  std::int64_t clusters = 0;
  double weight_per_cluster = 0.0;  // size - a

  double total() const { return static_cast<double>(clusters) * weight_per_cluster; }
};

struct SeatingWeights {
  std::vector<SizeBucket> old_buckets;  // ascending size
  double new_weight = 0.0;              // (a K + b) p_phi(w)

  double old_total() const;
  double total() const { return old_total() + new_weight; }
};

// Multiset of (label, size) pairs plus the token partition, independent of
// cluster ids.
struct CanonicalState {
  std::vector<std::pair<WordForm, std::int64_t>> clusters;  // sorted
  std::vector<std::vector<TokenIndex>> partition;           // sorted blocks, sorted list

  bool operator==(const CanonicalState&) const = default;
};

// Pitman-Yor seating arrangement. For every form the live clusters are
// indexed by size (form -> size -> cluster ids), which is what the sampler
// walks; the cluster table and token assignments are kept alongside.
class AdaptorState {
 public:
  std::int64_t total_customers() const { return customers_; }  // N
  std::int64_t cluster_count() const { return static_cast<std::int64_t>(clusters_.size()); }  // K
  std::int64_t form_customers(const WordForm& w) const;  // c_w
  std::int64_t form_clusters(const WordForm& w) const;   // n_w
  bool empty() const { return customers_ == 0 && clusters_.empty(); }

  const Cluster& cluster(ClusterId id) const;
  bool has_cluster(ClusterId id) const { return clusters_.count(id) != 0; }
  std::vector<ClusterId> cluster_ids() const;  // ascending
  template <typename F>
  void for_each_cluster(F&& f) const {
    for (const auto& [id, rec] : clusters_) f(id, rec.cluster);
  }

  // Forms with at least one live cluster, with their (c_w, n_w).
  template <typename F>
  void for_each_form(F&& f) const {
    for (const auto& [form, entry] : forms_) f(form, entry.customers, entry.clusters);
  }

  std::optional<ClusterId> assignment(TokenIndex t) const;
  std::size_t assigned_tokens() const { return assigned_; }

  // Size histogram for one form: size -> number of clusters.
  std::vector<std::pair<std::int64_t, std::int64_t>> size_histogram(const WordForm& w) const;
  // The i-th cluster (0-based) of form w with the given size.
  ClusterId cluster_in_bucket(const WordForm& w, std::int64_t size, std::size_t i) const;

  // Seats token t with form w. Throws std::invalid_argument if t is already
  // seated or the chosen cluster's label differs from w.
  ClusterId seat(TokenIndex t, const WordForm& w, SeatChoice choice);
  // Seats a customer that is not tied to a token index (used when a model
  // is grown by sampling).
  ClusterId seat_anonymous(const WordForm& w, SeatChoice choice);
  // Removes token t; removes its cluster when it becomes empty.
  void unseat(TokenIndex t);

  CanonicalState canonical() const;
  // Throws std::logic_error describing the first violated invariant.
  void check_invariants() const;

  nlohmann::json to_json() const;
  static AdaptorState from_json(const nlohmann::json& j);

  // Restores a cluster table without token assignments.
  static AdaptorState from_clusters(std::span<const Cluster> clusters);

 private:
  struct ClusterRecord {
    Cluster cluster;
    std::size_t slot = 0;  // position inside forms_[label].by_size[size]
  };
  struct FormEntry {
    std::int64_t customers = 0;
    std::int64_t clusters = 0;
    std::map<std::int64_t, std::vector<ClusterId>> by_size;
  };
  static constexpr ClusterId kUnassigned = std::numeric_limits<ClusterId>::max();

  ClusterId place(const WordForm& w, SeatChoice choice);
  void bucket_insert(FormEntry& entry, ClusterId id, ClusterRecord& rec);
  void bucket_remove(FormEntry& entry, ClusterRecord& rec);

  std::unordered_map<ClusterId, ClusterRecord> clusters_;
  std::unordered_map<WordForm, FormEntry, WordFormHash> forms_;
  std::vector<ClusterId> assignments_;
  std::size_t assigned_ = 0;
  std::int64_t customers_ = 0;
  ClusterId next_id_ = 0;
};

// Unnormalized seating options for a token of form w given p_phi(w) in log
// space. Old clusters of form w weigh size - a, a new cluster weighs
// (a K + b) p_phi(w), or a p_phi(w) for the first customer when b = 0.
// Throws NumericError("degenerate PYP") when every weight is zero.
SeatingWeights seating_weights(const AdaptorState& state, const PYPParams& params, const WordForm& w,
                               double gen_log_prob);

// Draws a choice from weights produced by seating_weights for form w.
SeatChoice sample_seat(const AdaptorState& state, const SeatingWeights& weights, const WordForm& w, Rng& rng);

// log p_model(w) = log[(c_w - n_w a)/(N + b) + (a K + b)/(N + b) p_phi(w)].
// Throws NumericError("degenerate PYP") when N + b = 0. Returns -inf when
// the form has zero probability (only possible with a = b = 0).
double predictive_log_prob(const AdaptorState& state, const PYPParams& params, const WordForm& w,
                           double gen_log_prob);

// The same formula from raw counts.
double predictive_log_prob_counts(std::int64_t c_w, std::int64_t n_w, std::int64_t k, std::int64_t n,
                                  const PYPParams& params, double gen_log_prob);

// The same quantity computed as log(sum of the seating weights of form w)
// - log(N + b).
double predictive_log_prob_from_weights(const AdaptorState& state, const PYPParams& params, const WordForm& w,
                                        double gen_log_prob);

// Log joint probability of forms and assignment, seating tokens in the
// given order into an initially empty restaurant. `blocks[n]` names the
// cluster of token n; a label must match every token of its cluster, else
// the result is -inf. The first customer opens a cluster with probability 1.
double joint_log_prob(std::span<const WordForm> tokens, std::span<const int> blocks, const PYPParams& params,
                      const LogProbModel& generator);

inline constexpr int kAdaptorFormatVersion = 1;

}  // namespace unigram

#endif  // UNIGRAM_ADAPTOR_HPP_
