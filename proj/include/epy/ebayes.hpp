#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "epy/urn.hpp"

namespace epy {

// Gamma(shape, rate); log densities are kernels (normalizing constants dropped).
struct GammaPrior {
  double shape = 2.0;
  double rate = 1.0;

  double log_kernel(double x) const;
  double mode() const;
};

struct BetaPrior {
  double a = 1.0;
  double b = 10.0;

  // 0 * log 0 is taken as 0, so Beta(1, b) has a finite kernel at sigma = 0.
  double log_kernel(double sigma) const;
  double mode() const;
};

struct PriorDensities {
  GammaPrior alpha{2.0, 0.01};
  BetaPrior sigma{1.0, 10.0};
  GammaPrior beta{2.0, 1.0};
  // Concentration prior of the pooled single-DP comparison model.
  GammaPrior dp_beta{2.0, 0.001};

  void validate() const;
};

enum class ModelVariant { DP, EDP, EPY };

std::string to_string(ModelVariant v);
ModelVariant parse_variant(const std::string& s);

struct FitOptions {
  double alpha_lo = 1e-6;
  double alpha_hi = 1e6;
  double sigma_lo = 1e-8;
  double sigma_hi = 1.0 - 1e-8;
  double beta_lo = 1e-6;
  double beta_hi = 1e8;
  double tolerance = 1e-8;
  int scan_points = 241;
  int max_iterations = 20000;
  std::vector<double> sigma_starts{0.05, 0.3, 0.7};
  std::vector<double> beta_starts{0.5, 2.0, 10.0};
  int threads = 0;  // 0: OpenMP default
};

// Dish counts of one family, stored as a histogram of count values.
class FamilyCounts {
 public:
  explicit FamilyCounts(std::span<const std::int64_t> dish_counts);

  std::int64_t n() const { return n_; }
  std::int64_t k() const { return k_; }
  const std::vector<std::pair<std::int64_t, std::int64_t>>& histogram() const { return hist_; }

 private:
  std::int64_t n_ = 0;
  std::int64_t k_ = 0;
  std::vector<std::pair<std::int64_t, std::int64_t>> hist_;  // (count value, multiplicity)
};

// log f(alpha) + k_x log alpha + lnGamma(alpha) - lnGamma(alpha + n).
double alpha_objective(double alpha, std::int64_t n, std::int64_t k_x, const GammaPrior& prior);
// log f(sigma) + log f(beta) + within-family log EPPF.
double epy_family_objective(double sigma, double beta, const FamilyCounts& counts, const PriorDensities& prior);
// The sigma = 0 restriction, written directly.
double edp_family_objective(double beta, const FamilyCounts& counts, const GammaPrior& beta_prior);

struct AlphaFit {
  double alpha = 0.0;
  double objective = 0.0;
  int iterations = 0;
};

struct FamilyFit {
  double sigma = 0.0;
  double beta = 1.0;
  double objective = 0.0;
  int iterations = 0;
  int restarts = 0;
  int converged_starts = 0;
  double tolerance_achieved = 0.0;
  bool sigma_at_boundary = false;
  bool beta_at_boundary = false;
};

// Throws ConvergenceError when the maximum sits on the edge of the search bracket.
AlphaFit fit_alpha(std::int64_t n, std::int64_t k_x, const PriorDensities& prior, const FitOptions& options = {});

// variant EPY: (sigma, beta) by multi-start Nelder-Mead on (logit sigma, log beta).
// variant EDP: sigma = 0, golden-section on log beta. DP is not a per-family variant.
FamilyFit fit_family(std::span<const std::int64_t> dish_counts, const PriorDensities& prior, ModelVariant variant,
                     const FitOptions& options = {});

struct DefaultFamily {
  double sigma = 0.0;
  double beta = 1.0;
  bool clamped = false;
  std::string warning;
};

// Joint prior mode, clamped into the admissible region.
DefaultFamily default_new_family(const PriorDensities& prior, const FitOptions& options = {});

struct FitResult {
  ModelVariant variant = ModelVariant::EPY;
  double alpha_hat = 0.0;  // 0 for DP: no family level
  double alpha_objective = 0.0;
  int alpha_iterations = 0;
  std::vector<Label> labels;
  std::vector<FamilyFit> families;
  DefaultFamily default_family;
  std::vector<std::string> warnings;
};

// DP pools every (family, species) pair into one family labeled "*".
inline const Label kPooledFamily = "*";

FitResult fit_model(const NestedPartitionState& state, const PriorDensities& prior, ModelVariant variant,
                    const FitOptions& options = {});

// All dish counts of the state, families concatenated in order.
std::vector<std::int64_t> pooled_counts(const NestedPartitionState& state);

}  // namespace epy
