#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "epy/random.hpp"

namespace epy {

using Label = std::string;

// Discount sigma, concentration beta and, for the Dirichlet-multinomial
// branch, the number of components H. Either sigma in [0, 1) with
// beta > -sigma, or H >= 2, beta > 0 and sigma == -beta / H exactly.
class PyParams {
 public:
  // Dirichlet process with unit concentration.
  PyParams() = default;

  static PyParams make(double sigma, double beta, std::optional<int> H = std::nullopt);

  double sigma() const { return sigma_; }
  double beta() const { return beta_; }
  std::optional<int> H() const { return H_; }
  bool bounded() const { return H_.has_value(); }

  // Weight of a new cluster, beta + k * sigma, for k occupied clusters.
  // In the bounded branch this is evaluated as (1 - k / H) * beta, which is
  // exactly zero once k == H.
  double new_cluster_weight(std::size_t k) const;

  friend bool operator==(const PyParams&, const PyParams&) = default;

 private:
  PyParams(double sigma, double beta, std::optional<int> H) : sigma_(sigma), beta_(beta), H_(H) {}

  double sigma_ = 0.0;
  double beta_ = 1.0;
  std::optional<int> H_;
};

// Discount values must stay this far below 1 so that (1 - sigma) terms stay positive.
inline constexpr double kMaxDiscount = 1.0 - 1e-10;

PyParams validate_py_params(double sigma, double beta, std::optional<int> H = std::nullopt);

// Base measures carry labels only. A fresh-label measure is diffuse: every
// draw mints a label never seen before in the stream. A labeled mixture is a
// weighted set of mutually singular diffuse components, and its labels record
// the component they came from ("<component>#<n>").
class BaseMeasure {
 public:
  struct Fresh {
    std::string prefix;
  };
  struct Atomic {
    std::vector<Label> labels;
    std::vector<double> probabilities;
  };
  struct Mixture {
    std::vector<double> weights;
    std::vector<std::string> components;
  };

  BaseMeasure() : kind_(Fresh{"L"}) {}

  static BaseMeasure fresh(std::string prefix);
  static BaseMeasure atomic(std::vector<Label> labels, std::vector<double> probabilities);
  static BaseMeasure mixture(std::vector<double> weights, std::vector<std::string> components);

  Label draw(Stream& stream) const;
  bool diffuse() const { return !std::holds_alternative<Atomic>(kind_); }
  // Probability of a set of labels; only defined for atomic measures.
  double probability_of(const std::set<Label>& labels) const;

  const std::variant<Fresh, Atomic, Mixture>& kind() const { return kind_; }

 private:
  explicit BaseMeasure(std::variant<Fresh, Atomic, Mixture> k) : kind_(std::move(k)) {}
  std::variant<Fresh, Atomic, Mixture> kind_;
};

// Component id of a label minted by a labeled mixture (or fresh) measure.
std::string label_component(const Label& label);

struct EpyModel {
  double alpha = 1.0;
  BaseMeasure base_x = BaseMeasure::fresh("NEW-F");
  std::map<Label, BaseMeasure> base_y_given_x;
  BaseMeasure default_base_y = BaseMeasure::fresh("NEW-S");
  std::map<Label, PyParams> params;
  PyParams default_params;

  const PyParams& params_for(const Label& x) const;
  const BaseMeasure& base_y_for(const Label& x) const;
  // Throws DomainError unless alpha > 0.
  void validate() const;
};

struct TruncationPolicy {
  std::size_t max_length = 10000;
  double residual_tol = 1e-8;

  void validate() const;
};

struct TruncatedStickBreaking {
  std::vector<double> weights;
  double residual = 1.0;
};

// nu_j ~ Beta(1 - sigma, beta + j sigma). Stops when the remaining stick drops
// below the policy tolerance or max_length sticks exist; the bounded branch
// always yields exactly H weights with zero residual.
TruncatedStickBreaking sample_stick_breaking(const PyParams& params, Stream& stream,
                                             const TruncationPolicy& policy = {});

struct WeightedLabel {
  Label label;
  double weight = 0.0;
};

struct InnerMeasure {
  std::vector<WeightedLabel> atoms;
  double residual = 0.0;

  double mass() const;
};

// Finite realization of the square-breaking representation. Outer atoms may
// repeat a label (atomic base measures); repeated labels share one conditional.
struct TruncatedEpyMeasure {
  std::vector<WeightedLabel> outer;
  std::map<Label, InnerMeasure> inner;
  double outer_residual = 0.0;

  // Sum over outer atoms of xi * (represented inner mass).
  double represented_mass() const;
  // Mass assigned to A x B by the represented part.
  double mass(const std::set<Label>& xs, const std::set<Label>& ys) const;
  // Draws (x, y) conditional on the represented part of the measure.
  std::pair<Label, Label> draw(Stream& stream) const;
};

TruncatedEpyMeasure sample_epy_truncated(const EpyModel& model, Stream& stream,
                                         const TruncationPolicy& policy = {});

struct MarginalComponent {
  PyParams params;
  BaseMeasure base;
};

// Label of the l-th (0-based) latent component in sample_marginal_discrete.
Label marginal_component_label(std::size_t index);

// (Pi_1..Pi_L) ~ Dirichlet(alpha_1..alpha_L) and independent PY components,
// assembled as sum_l Pi_l p_l with outer atoms labeled by component.
TruncatedEpyMeasure sample_marginal_discrete(const std::vector<double>& weights_prior,
                                             const std::vector<MarginalComponent>& components,
                                             Stream& stream, const TruncationPolicy& policy = {});

}  // namespace epy
