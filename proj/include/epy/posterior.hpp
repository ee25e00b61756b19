#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "epy/prior.hpp"
#include "epy/urn.hpp"

namespace epy {

// DP(alpha P_X + sum_r n_r delta_{x*_r}).
struct PosteriorX {
  double alpha = 0.0;
  std::vector<std::pair<Label, std::int64_t>> base_atoms;
  double diffuse_mass = 0.0;

  double total_mass() const;
  // Expected mass of atom r, n_r / (alpha + n).
  double atom_fraction(std::size_t r) const;
  double diffuse_fraction() const;
};

// Finite remainder of the bounded branch: symmetric Dirichlet over
// `components` fresh atoms, each with parameter `component_param`.
struct FiniteRemainder {
  std::size_t components = 0;
  double component_param = 0.0;
};

// For an observed family: (W_0, W_1..W_k) ~ Dirichlet(dirichlet_params) over
// the remainder and the observed dishes. For an unobserved x: the prior.
struct PosteriorYCond {
  Label family;
  bool observed = false;
  std::vector<double> dirichlet_params;  // index 0 is the remainder weight W_0
  std::vector<Label> observed_atoms;
  std::variant<PyParams, FiniteRemainder> remainder;
  PyParams prior;  // set when !observed

  // E[W_j] = param_j / sum(params); j == 0 is the remainder.
  double expected_weight(std::size_t j) const;
};

PosteriorX posterior_x(const EpyModel& model, const NestedPartitionState& state);
PosteriorYCond posterior_y(const EpyModel& model, const NestedPartitionState& state, const Label& x);

// Joint draw from the posterior: outer sticks Beta(1, alpha + n) with atoms
// from the normalized updated base and each conditional from its posterior.
TruncatedEpyMeasure sample_posterior_measure(const EpyModel& model, const NestedPartitionState& state,
                                             Stream& stream, const TruncationPolicy& policy = {});

struct ConsistencyReport {
  bool ok = true;
  double max_deviation = 0.0;
  std::vector<std::string> failures;
};

// Posterior means versus the urn predictive weights, compared at 1e-12.
ConsistencyReport posterior_predictive_check(const EpyModel& model, const NestedPartitionState& state,
                                             double tolerance = 1e-12);

}  // namespace epy
