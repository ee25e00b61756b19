#include "epy/prior.hpp"

#include <cmath>
#include <numeric>

#include "epy/error.hpp"

namespace epy {

PyParams PyParams::make(double sigma, double beta, std::optional<int> H) {
  if (!std::isfinite(sigma) || !std::isfinite(beta))
    throw DomainError("PyParams: sigma and beta must be finite");
  if (H) {
    if (*H < 2) throw DomainError("PyParams: H must be an integer >= 2");
    if (!(beta > 0.0)) throw DomainError("PyParams: bounded branch requires beta > 0");
    const double expected = -beta / *H;
    if (std::abs(sigma - expected) > 1e-12)
      throw DomainError("PyParams: bounded branch requires sigma == -beta / H");
    return PyParams(expected, beta, H);
  }
  if (sigma < 0.0) throw DomainError("PyParams: negative sigma requires H");
  if (!(sigma < kMaxDiscount)) throw DomainError("PyParams: sigma must lie in [0, 1)");
  if (!(beta > -sigma)) throw DomainError("PyParams: beta must exceed -sigma");
  return PyParams(sigma, beta, std::nullopt);
}

double PyParams::new_cluster_weight(std::size_t k) const {
  if (H_) return (1.0 - static_cast<double>(k) / *H_) * beta_;
  return beta_ + static_cast<double>(k) * sigma_;
}

PyParams validate_py_params(double sigma, double beta, std::optional<int> H) {
  return PyParams::make(sigma, beta, H);
}

namespace {

void check_probabilities(const std::vector<double>& p, const char* what) {
  if (p.empty()) throw DomainError(std::string(what) + ": empty");
  double total = 0.0;
  for (double x : p) {
    if (!(x > 0.0) || !std::isfinite(x)) throw DomainError(std::string(what) + ": probabilities must be positive");
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-12) throw DomainError(std::string(what) + ": probabilities must sum to 1");
}

std::size_t pick(const std::vector<double>& p, double u) {
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return i;
  }
  return p.size() - 1;
}

}  // namespace

BaseMeasure BaseMeasure::fresh(std::string prefix) { return BaseMeasure(Fresh{std::move(prefix)}); }

BaseMeasure BaseMeasure::atomic(std::vector<Label> labels, std::vector<double> probabilities) {
  if (labels.size() != probabilities.size()) throw DomainError("atomic base: size mismatch");
  check_probabilities(probabilities, "atomic base");
  std::set<Label> seen(labels.begin(), labels.end());
  if (seen.size() != labels.size()) throw DomainError("atomic base: duplicate label");
  return BaseMeasure(Atomic{std::move(labels), std::move(probabilities)});
}

BaseMeasure BaseMeasure::mixture(std::vector<double> weights, std::vector<std::string> components) {
  if (weights.size() != components.size()) throw DomainError("mixture base: size mismatch");
  check_probabilities(weights, "mixture base");
  return BaseMeasure(Mixture{std::move(weights), std::move(components)});
}

Label BaseMeasure::draw(Stream& stream) const {
  if (const auto* f = std::get_if<Fresh>(&kind_)) return f->prefix + "#" + std::to_string(stream.next_label());
  if (const auto* a = std::get_if<Atomic>(&kind_)) return a->labels[pick(a->probabilities, stream.uniform())];
  const auto& m = std::get<Mixture>(kind_);
  const std::size_t c = pick(m.weights, stream.uniform());
  return m.components[c] + "#" + std::to_string(stream.next_label());
}

double BaseMeasure::probability_of(const std::set<Label>& labels) const {
  const auto* a = std::get_if<Atomic>(&kind_);
  if (!a) throw DomainError("probability_of: only defined for atomic base measures");
  double total = 0.0;
  for (std::size_t i = 0; i < a->labels.size(); ++i)
    if (labels.count(a->labels[i])) total += a->probabilities[i];
  return total;
}

std::string label_component(const Label& label) {
  const auto pos = label.rfind('#');
  return pos == Label::npos ? label : label.substr(0, pos);
}

const PyParams& EpyModel::params_for(const Label& x) const {
  auto it = params.find(x);
  return it == params.end() ? default_params : it->second;
}

const BaseMeasure& EpyModel::base_y_for(const Label& x) const {
  auto it = base_y_given_x.find(x);
  return it == base_y_given_x.end() ? default_base_y : it->second;
}

void EpyModel::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("EpyModel: alpha must be positive");
}

void TruncationPolicy::validate() const {
  if (max_length < 1) throw DomainError("TruncationPolicy: max_length must be >= 1");
  if (!(residual_tol > 0.0 && residual_tol < 1.0))
    throw DomainError("TruncationPolicy: residual_tol must lie in (0, 1)");
}

TruncatedStickBreaking sample_stick_breaking(const PyParams& params, Stream& stream,
                                             const TruncationPolicy& policy) {
  policy.validate();
  TruncatedStickBreaking out;
  const double a = 1.0 - params.sigma();
  double remaining = 1.0;
  if (params.bounded()) {
    const int H = *params.H();
    out.weights.reserve(H);
    for (int j = 1; j < H; ++j) {
      const double nu = stream.beta(a, params.beta() + j * params.sigma());
      const double w = remaining * nu;
      out.weights.push_back(w);
      remaining -= w;
    }
    // nu_H ~ Beta(1 - sigma, 0) is the constant 1.
    out.weights.push_back(remaining);
    out.residual = 0.0;
    return out;
  }
  for (std::size_t j = 1;; ++j) {
    const double nu = stream.beta(a, params.beta() + static_cast<double>(j) * params.sigma());
    out.weights.push_back(remaining * nu);
    remaining *= 1.0 - nu;
    if (remaining < policy.residual_tol || out.weights.size() >= policy.max_length) break;
  }
  out.residual = remaining;
  return out;
}

double InnerMeasure::mass() const {
  double total = 0.0;
  for (const auto& a : atoms) total += a.weight;
  return total;
}

double TruncatedEpyMeasure::represented_mass() const {
  double total = 0.0;
  for (const auto& o : outer) total += o.weight * inner.at(o.label).mass();
  return total;
}

double TruncatedEpyMeasure::mass(const std::set<Label>& xs, const std::set<Label>& ys) const {
  double total = 0.0;
  for (const auto& o : outer) {
    if (!xs.count(o.label)) continue;
    double inner_mass = 0.0;
    for (const auto& a : inner.at(o.label).atoms)
      if (ys.count(a.label)) inner_mass += a.weight;
    total += o.weight * inner_mass;
  }
  return total;
}

std::pair<Label, Label> TruncatedEpyMeasure::draw(Stream& stream) const {
  if (outer.empty()) throw DomainError("TruncatedEpyMeasure::draw: empty measure");
  std::vector<double> contrib(outer.size());
  double total = 0.0;
  for (std::size_t i = 0; i < outer.size(); ++i) {
    contrib[i] = outer[i].weight * inner.at(outer[i].label).mass();
    total += contrib[i];
  }
  double u = stream.uniform() * total;
  std::size_t chosen = outer.size() - 1;
  for (std::size_t i = 0; i < outer.size(); ++i) {
    if (u < contrib[i]) {
      chosen = i;
      break;
    }
    u -= contrib[i];
  }
  const auto& in = inner.at(outer[chosen].label);
  double v = stream.uniform() * in.mass();
  for (const auto& a : in.atoms) {
    if (v < a.weight) return {outer[chosen].label, a.label};
    v -= a.weight;
  }
  return {outer[chosen].label, in.atoms.back().label};
}

namespace {

InnerMeasure sample_inner(const PyParams& params, const BaseMeasure& base, Stream& stream,
                          const TruncationPolicy& policy) {
  auto sticks = sample_stick_breaking(params, stream, policy);
  InnerMeasure inner;
  inner.residual = sticks.residual;
  inner.atoms.reserve(sticks.weights.size());
  for (double w : sticks.weights) inner.atoms.push_back({base.draw(stream), w});
  return inner;
}

}  // namespace

TruncatedEpyMeasure sample_epy_truncated(const EpyModel& model, Stream& stream,
                                         const TruncationPolicy& policy) {
  model.validate();
  policy.validate();
  TruncatedEpyMeasure out;
  const auto sticks = sample_stick_breaking(PyParams::make(0.0, model.alpha), stream, policy);
  out.outer_residual = sticks.residual;
  out.outer.reserve(sticks.weights.size());
  for (double w : sticks.weights) {
    Label x = model.base_x.draw(stream);
    if (!out.inner.count(x))
      out.inner.emplace(x, sample_inner(model.params_for(x), model.base_y_for(x), stream, policy));
    out.outer.push_back({std::move(x), w});
  }
  return out;
}

Label marginal_component_label(std::size_t index) { return "x" + std::to_string(index + 1); }

TruncatedEpyMeasure sample_marginal_discrete(const std::vector<double>& weights_prior,
                                             const std::vector<MarginalComponent>& components,
                                             Stream& stream, const TruncationPolicy& policy) {
  if (weights_prior.empty()) throw DomainError("sample_marginal_discrete: need at least one component");
  if (weights_prior.size() != components.size())
    throw DomainError("sample_marginal_discrete: size mismatch");
  for (double a : weights_prior)
    if (!(a > 0.0) || !std::isfinite(a)) throw DomainError("sample_marginal_discrete: weights must be positive");
  policy.validate();

  const std::vector<double> pi =
      weights_prior.size() == 1 ? std::vector<double>{1.0} : stream.dirichlet(weights_prior);
  TruncatedEpyMeasure out;
  for (std::size_t l = 0; l < components.size(); ++l) {
    Label x = marginal_component_label(l);
    out.inner.emplace(x, sample_inner(components[l].params, components[l].base, stream, policy));
    out.outer.push_back({std::move(x), pi[l]});
  }
  return out;
}

}  // namespace epy
