#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "epy/ebayes.hpp"
#include "epy/prior.hpp"

namespace epy {

// Outcome of one verification. An identity passes when its deviation is within
// the threshold; a negative control (a deliberately perturbed model) passes
// when its deviation exceeds the threshold, showing the check can fail.
struct IdentityReport {
  std::string name;
  std::string method;  // exact-enumeration | analytic | monte-carlo
  bool negative_control = false;
  double max_deviation = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::int64_t sample_size = 0;  // draws, states or enumerated sequences
  std::string detail;

  void decide() { pass = negative_control ? max_deviation > threshold : max_deviation <= threshold; }
};

std::string to_json_line(const IdentityReport& r);

// Random nested states with n <= n_max, including bounded (sigma < 0) families:
// log_eppf against the sequential urn product, and the urn product across
// `orderings` random permutations. The control perturbs beta in the urn product.
std::vector<IdentityReport> check_eppf_consistency(int trials, int n_max, int orderings, std::uint64_t seed);

// Marginal EDP over L atoms with beta_l = alpha_l against DP(sum alpha_l P_l),
// over every component-tagged Y sequence up to n_max. The control sets
// beta_l = alpha_l + 1.
std::vector<IdentityReport> check_cor2_collapse(const std::vector<double>& alphas, int n_max);

// Outer spike and slab (Beta(a1, a2) weight, DP(a2) slab) against the inner one
// (DP with base a1 delta_y0 + a2 P_2). The control uses a PY slab with discount
// slab_sigma against a PY with the contaminated base.
std::vector<IdentityReport> check_spike_slab_equivalence(double alpha1, double alpha2, int n_max,
                                                         double slab_sigma = 0.5);

// sigma = 0, beta = beta_small for every family, trajectories of length 20 with
// alpha = 1: analytic new-dish bound and the frequency of multi-dish families.
// The control repeats the simulation with beta = 1.
std::vector<IdentityReport> check_dp_limit(double beta_small, int trials, std::uint64_t seed);

// sigma = -beta / H in every family: dish counts never exceed H and the
// new-dish probability is exactly 0 at k = H. The control uses sigma = 0.
std::vector<IdentityReport> check_bounded_clusters(int H, double beta, int trials, int length, std::uint64_t seed);

// Mean of the truncated measure of A x B against P(A x B) for an atomic model:
// P_X = (1/2, 1/2), alpha = 2, P(B | x1) = 0.3, P(B | x2) = 0.1. The control
// compares against P(A x B) under P_X = (0.8, 0.2).
std::vector<IdentityReport> check_moment_measure(int reps, std::uint64_t seed);

// Dirichlet-mean identities on random states, and one (X, Y) draw from sampled
// posterior measures against the urn predictive.
std::vector<IdentityReport> check_posterior_consistency(int states, int draws, std::uint64_t seed);

// EPY objective at sigma = 0 against the EDP objective on a beta grid.
std::vector<IdentityReport> check_edp_restriction(std::uint64_t seed);

struct CoverageOptions {
  int worlds = 200;
  std::int64_t n_train = 10000;
  std::vector<std::int64_t> grid{2500, 5000, 7500, 10000};
  int reps = 500;
  double alpha = 5.0;
  double sigma = 0.4;
  double beta = 2.0;
  double level = 0.9;
  double lower = 0.85;
  double upper = 0.95;
};

// Worlds are simulated from a known EPY; bands come from predict_curve under
// the generating parameters and are scored on the held-out continuation.
IdentityReport check_prediction_coverage(const CoverageOptions& options, std::uint64_t seed);

struct RecoveryOptions {
  std::vector<double> sigmas{0.2, 0.5};
  std::vector<double> betas{1.0, 5.0};
  int draws = 50;
  std::int64_t n = 10000;
  PriorDensities prior;
};

// For each (sigma, beta), `draws` families of size n are simulated and fitted
// under `prior`; the truth must lie in the central 95% interval of
// the estimates, for sigma and for beta.
std::vector<IdentityReport> check_eb_recovery(const RecoveryOptions& options, std::uint64_t seed);

// Suites: all, eppf, identities, coverage. Throws DomainError on an unknown name.
std::vector<IdentityReport> run_suite(const std::string& suite, std::uint64_t seed);

}  // namespace epy
