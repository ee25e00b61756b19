#include "epy/posterior.hpp"

#include <cmath>
#include <sstream>

#include "epy/error.hpp"

namespace epy {

double PosteriorX::total_mass() const {
  double t = diffuse_mass;
  for (const auto& [x, n] : base_atoms) t += static_cast<double>(n);
  return t;
}

double PosteriorX::atom_fraction(std::size_t r) const {
  return static_cast<double>(base_atoms.at(r).second) / total_mass();
}

double PosteriorX::diffuse_fraction() const { return diffuse_mass / total_mass(); }

double PosteriorYCond::expected_weight(std::size_t j) const {
  double total = 0.0;
  for (double a : dirichlet_params) total += a;
  return dirichlet_params.at(j) / total;
}

PosteriorX posterior_x(const EpyModel& model, const NestedPartitionState& state) {
  model.validate();
  PosteriorX out;
  out.alpha = model.alpha;
  out.diffuse_mass = model.alpha;
  out.base_atoms.reserve(state.k_x());
  for (const auto& f : state.families()) out.base_atoms.emplace_back(f.label, f.count);
  return out;
}

PosteriorYCond posterior_y(const EpyModel& model, const NestedPartitionState& state, const Label& x) {
  PosteriorYCond out;
  out.family = x;
  const auto r = state.find_family(x);
  if (!r) {
    out.prior = model.params_for(x);
    out.remainder = out.prior;
    return out;
  }
  const auto& f = state.family(*r);
  const PyParams& p = f.params;
  out.observed = true;
  const double w0 = p.new_cluster_weight(f.k());
  if (p.bounded()) {
    if (static_cast<int>(f.k()) > *p.H()) throw DomainError("posterior_y: more dishes than H");
  } else if (!(w0 > 0.0)) {
    throw DomainError("posterior_y: beta + k sigma must be positive");
  }
  out.dirichlet_params.reserve(f.k() + 1);
  out.dirichlet_params.push_back(w0);
  for (const auto& d : f.dishes) {
    out.dirichlet_params.push_back(static_cast<double>(d.count) - p.sigma());
    out.observed_atoms.push_back(d.label);
  }
  if (p.bounded()) {
    out.remainder = FiniteRemainder{static_cast<std::size_t>(*p.H()) - f.k(), p.beta() / *p.H()};
  } else {
    out.remainder = PyParams::make(p.sigma(), w0);
  }
  return out;
}

namespace {

InnerMeasure sample_prior_inner(const PyParams& params, const BaseMeasure& base, Stream& stream,
                                const TruncationPolicy& policy) {
  const auto sticks = sample_stick_breaking(params, stream, policy);
  InnerMeasure inner;
  inner.residual = sticks.residual;
  for (double w : sticks.weights) inner.atoms.push_back({base.draw(stream), w});
  return inner;
}

InnerMeasure sample_posterior_inner(const PosteriorYCond& post, const BaseMeasure& base, Stream& stream,
                                    const TruncationPolicy& policy) {
  const auto w = stream.dirichlet(post.dirichlet_params);
  InnerMeasure inner;
  for (std::size_t j = 0; j < post.observed_atoms.size(); ++j)
    if (w[j + 1] > 0.0) inner.atoms.push_back({post.observed_atoms[j], w[j + 1]});
  const double w0 = w[0];
  if (w0 == 0.0) return inner;
  if (const auto* py = std::get_if<PyParams>(&post.remainder)) {
    const auto sticks = sample_stick_breaking(*py, stream, policy);
    for (double s : sticks.weights) inner.atoms.push_back({base.draw(stream), w0 * s});
    inner.residual = w0 * sticks.residual;
  } else {
    const auto& fin = std::get<FiniteRemainder>(post.remainder);
    const std::vector<double> params(fin.components, fin.component_param);
    const auto rw = fin.components == 1 ? std::vector<double>{1.0} : stream.dirichlet(params);
    for (double s : rw) inner.atoms.push_back({base.draw(stream), w0 * s});
  }
  return inner;
}

}  // namespace

TruncatedEpyMeasure sample_posterior_measure(const EpyModel& model, const NestedPartitionState& state,
                                             Stream& stream, const TruncationPolicy& policy) {
  model.validate();
  policy.validate();
  const double n = static_cast<double>(state.n());
  const double total = model.alpha + n;
  TruncatedEpyMeasure out;
  const auto sticks = sample_stick_breaking(PyParams::make(0.0, total), stream, policy);
  out.outer_residual = sticks.residual;
  out.outer.reserve(sticks.weights.size());
  for (double w : sticks.weights) {
    // Atom from the normalized updated base: x*_r w.p. n_r / (alpha + n), else P_X.
    Label x;
    double u = stream.uniform() * total;
    if (u < model.alpha) {
      x = model.base_x.draw(stream);
    } else {
      u -= model.alpha;
      std::size_t r = state.k_x() - 1;
      for (std::size_t i = 0; i < state.k_x(); ++i) {
        const double c = static_cast<double>(state.family(i).count);
        if (u < c) {
          r = i;
          break;
        }
        u -= c;
      }
      x = state.family(r).label;
    }
    if (!out.inner.count(x)) {
      const auto post = posterior_y(model, state, x);
      out.inner.emplace(x, post.observed
                               ? sample_posterior_inner(post, model.base_y_for(x), stream, policy)
                               : sample_prior_inner(post.prior, model.base_y_for(x), stream, policy));
    }
    out.outer.push_back({std::move(x), w});
  }
  return out;
}

ConsistencyReport posterior_predictive_check(const EpyModel& model, const NestedPartitionState& state,
                                             double tolerance) {
  ConsistencyReport rep;
  auto compare = [&](double a, double b, const std::string& what) {
    const double d = std::abs(a - b);
    rep.max_deviation = std::max(rep.max_deviation, d);
    if (!(d <= tolerance)) {
      rep.ok = false;
      std::ostringstream os;
      os << what << ": posterior mean " << a << " vs predictive " << b;
      rep.failures.push_back(os.str());
    }
  };
  const auto px = posterior_x(model, state);
  const auto xp = x_predictive(state, model.alpha);
  for (std::size_t r = 0; r < state.k_x(); ++r)
    compare(px.atom_fraction(r), xp.probability_of(r), "family " + state.family(r).label);
  compare(px.diffuse_fraction(), xp.new_probability(), "new family");
  for (std::size_t r = 0; r < state.k_x(); ++r) {
    const auto& f = state.family(r);
    const auto post = posterior_y(model, state, f.label);
    const auto yp = y_predictive(state, r);
    for (std::size_t j = 0; j < f.k(); ++j)
      compare(post.expected_weight(j + 1), yp.probability_of(j), "dish " + f.label + "/" + f.dishes[j].label);
    compare(post.expected_weight(0), yp.new_probability(), "new dish in " + f.label);
  }
  return rep;
}

}  // namespace epy
