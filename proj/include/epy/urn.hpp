#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "epy/prior.hpp"
#include "epy/random.hpp"

namespace epy {

struct Dish {
  Label label;
  std::int64_t count = 0;
};

struct FamilyCluster {
  Label label;
  std::int64_t count = 0;
  std::vector<Dish> dishes;
  PyParams params;

  std::size_t k() const { return dishes.size(); }
};

struct CountRecord {
  Label family;
  Label species;
  std::int64_t count = 0;
};

struct Observation {
  Label family;
  Label species;

  friend bool operator==(const Observation&, const Observation&) = default;
};

// Sufficient statistic of the nested urn: families in order of appearance,
// each with its dishes in order of appearance.
class NestedPartitionState {
 public:
  std::int64_t n() const { return n_; }
  std::size_t k_x() const { return families_.size(); }
  std::size_t k_y() const;

  const std::vector<FamilyCluster>& families() const { return families_; }
  const FamilyCluster& family(std::size_t r) const { return families_.at(r); }

  std::optional<std::size_t> find_family(const Label& x) const;
  std::optional<std::size_t> find_dish(std::size_t r, const Label& y) const;

  std::size_t add_family(Label x, PyParams params);
  // Adds `count` observations of dish y to family r, creating the dish if needed.
  // Returns the dish index.
  std::size_t add_to_dish(std::size_t r, const Label& y, std::int64_t count = 1);

  void set_params(std::size_t r, PyParams params) { families_.at(r).params = params; }

 private:
  std::int64_t n_ = 0;
  std::vector<FamilyCluster> families_;
  std::unordered_map<Label, std::size_t> family_index_;
  std::vector<std::unordered_map<Label, std::size_t>> dish_index_;
};

// Families and dishes in input order; all families get default PyParams (DP, beta = 1).
NestedPartitionState state_from_counts(std::span<const CountRecord> records);
// Builds a state from an ordered sequence of observations.
NestedPartitionState state_from_sequence(std::span<const Observation> sequence);
// Sets each family's parameters from the model (by label, else default_params).
void apply_params(NestedPartitionState& state, const EpyModel& model);

inline constexpr std::size_t kNewCluster = std::numeric_limits<std::size_t>::max();

struct PredictiveDistribution {
  struct Atom {
    std::size_t target = kNewCluster;  // cluster index or kNewCluster
    double probability = 0.0;
  };
  std::vector<Atom> atoms;

  double probability_of(std::size_t target) const;
  double new_probability() const { return probability_of(kNewCluster); }
  double total() const;
};

// Family predictive: n_r / (alpha + n) for family r, alpha / (alpha + n) for a new one.
PredictiveDistribution x_predictive(const NestedPartitionState& state, double alpha);

// Dish predictive inside family r, or for a new family (nullopt), where the
// next dish is new with probability 1.
PredictiveDistribution y_predictive(const NestedPartitionState& state, std::optional<std::size_t> family,
                                    const PyParams& params_for_new = {});

struct StepOutcome {
  Label x;
  Label y;
  bool new_family = false;
  bool new_species = false;
};

// One draw of (X, Y) from the enriched urn, updating the state in place.
// Draws from an atomic base that hit an existing label join that cluster.
StepOutcome step(NestedPartitionState& state, const EpyModel& model, Stream& stream);

// One draw of Y inside existing family r.
StepOutcome step_within_family(NestedPartitionState& state, std::size_t r, const EpyModel& model,
                               Stream& stream);

struct StepFlags {
  bool new_family = false;
  bool new_species = false;
};

struct Discoveries {
  std::int64_t new_families = 0;
  std::int64_t new_species = 0;
  std::vector<StepFlags> trajectory;
};

// Runs m further draws from a copy of the state and counts families and
// species absent from it.
Discoveries simulate_discoveries(const NestedPartitionState& state, const EpyModel& model, std::int64_t m,
                                 Stream& stream, bool record_trajectory = false);

// Same, but always through the label-tracking step(); kept as the reference
// for the count-only kernel.
Discoveries simulate_discoveries_reference(const NestedPartitionState& state, const EpyModel& model,
                                           std::int64_t m, Stream& stream, bool record_trajectory = false);

// Count-only simulator of future discoveries. Only (n_r, k_r) drive the urn's
// novelty events, so labels are never materialized. Immutable once built;
// `run` may be called concurrently with distinct streams.
class DiscoveryKernel {
 public:
  // alpha == 0 disables new families (pooled single-PY prediction).
  DiscoveryKernel(const NestedPartitionState& state, double alpha, PyParams new_family_params);

  // Cumulative (new species, new families) after each grid point; grid must be
  // nondecreasing and nonnegative.
  void run(std::span<const std::int64_t> grid, Stream& stream, std::span<std::int64_t> new_species,
           std::span<std::int64_t> new_families) const;
  Discoveries run(std::int64_t m, Stream& stream, bool record_trajectory = false) const;

 private:
  struct Family {
    double n = 0.0;
    double k = 0.0;
    PyParams params;
  };
  template <class OnStep>
  void simulate(std::int64_t m, Stream& stream, OnStep&& on_step) const;

  double alpha_;
  PyParams fresh_;
  std::vector<Family> families_;
  std::vector<std::uint32_t> owner_;  // family of each observed customer
};

// log of the nested EPPF, up to the constant dropped by the proportionality:
// k_x log alpha - log (alpha)_n + sum_r log (n_r - 1)! + sum_r family_log_eppf_r.
double log_eppf(const NestedPartitionState& state, double alpha);
double log_eppf(const NestedPartitionState& state, double alpha, std::span<const PyParams> params);

// Within-family term: sum_{j<k} log(beta + j sigma) - log (beta + 1)_{n-1}
// + sum_j log (1 - sigma)_{n_j - 1}, for dish counts n_j.
double family_log_eppf(std::span<const std::int64_t> dish_counts, const PyParams& params);

double log_pochhammer(double a, double n);

// Sum of log predictive probabilities of each observation given its prefix.
double log_seq_prob(std::span<const Observation> sequence, double alpha,
                    const std::map<Label, PyParams>& params, const PyParams& fallback = {});

}  // namespace epy
