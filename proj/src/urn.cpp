#include "epy/urn.hpp"

#include <cmath>

#include "epy/detail/math.hpp"
#include "epy/error.hpp"

namespace epy {

std::size_t NestedPartitionState::k_y() const {
  std::size_t k = 0;
  for (const auto& f : families_) k += f.k();
  return k;
}

std::optional<std::size_t> NestedPartitionState::find_family(const Label& x) const {
  auto it = family_index_.find(x);
  if (it == family_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> NestedPartitionState::find_dish(std::size_t r, const Label& y) const {
  const auto& index = dish_index_.at(r);
  auto it = index.find(y);
  if (it == index.end()) return std::nullopt;
  return it->second;
}

std::size_t NestedPartitionState::add_family(Label x, PyParams params) {
  if (family_index_.count(x)) throw DomainError("duplicate family label: " + x);
  const std::size_t r = families_.size();
  family_index_.emplace(x, r);
  families_.push_back(FamilyCluster{std::move(x), 0, {}, params});
  dish_index_.emplace_back();
  return r;
}

std::size_t NestedPartitionState::add_to_dish(std::size_t r, const Label& y, std::int64_t count) {
  if (count < 1) throw DomainError("counts must be >= 1");
  auto& f = families_.at(r);
  auto& index = dish_index_[r];
  std::size_t j;
  if (auto it = index.find(y); it != index.end()) {
    j = it->second;
  } else {
    j = f.dishes.size();
    index.emplace(y, j);
    f.dishes.push_back(Dish{y, 0});
  }
  f.dishes[j].count += count;
  f.count += count;
  n_ += count;
  return j;
}

NestedPartitionState state_from_counts(std::span<const CountRecord> records) {
  NestedPartitionState state;
  for (const auto& rec : records) {
    if (rec.count < 1) throw DomainError("nonpositive count for (" + rec.family + ", " + rec.species + ")");
    auto r = state.find_family(rec.family);
    if (!r) r = state.add_family(rec.family, PyParams{});
    if (state.find_dish(*r, rec.species))
      throw DomainError("duplicate (family, species) pair: (" + rec.family + ", " + rec.species + ")");
    state.add_to_dish(*r, rec.species, rec.count);
  }
  return state;
}

NestedPartitionState state_from_sequence(std::span<const Observation> sequence) {
  NestedPartitionState state;
  for (const auto& obs : sequence) {
    auto r = state.find_family(obs.family);
    if (!r) r = state.add_family(obs.family, PyParams{});
    state.add_to_dish(*r, obs.species);
  }
  return state;
}

void apply_params(NestedPartitionState& state, const EpyModel& model) {
  for (std::size_t r = 0; r < state.k_x(); ++r) state.set_params(r, model.params_for(state.family(r).label));
}

double PredictiveDistribution::probability_of(std::size_t target) const {
  for (const auto& a : atoms)
    if (a.target == target) return a.probability;
  return 0.0;
}

double PredictiveDistribution::total() const {
  double t = 0.0;
  for (const auto& a : atoms) t += a.probability;
  return t;
}

PredictiveDistribution x_predictive(const NestedPartitionState& state, double alpha) {
  if (!(alpha > 0.0)) throw DomainError("x_predictive: alpha must be positive");
  const double denom = alpha + static_cast<double>(state.n());
  PredictiveDistribution out;
  out.atoms.reserve(state.k_x() + 1);
  for (std::size_t r = 0; r < state.k_x(); ++r)
    out.atoms.push_back({r, static_cast<double>(state.family(r).count) / denom});
  out.atoms.push_back({kNewCluster, alpha / denom});
  return out;
}

PredictiveDistribution y_predictive(const NestedPartitionState& state, std::optional<std::size_t> family,
                                    const PyParams& /*params_for_new*/) {
  PredictiveDistribution out;
  if (!family) {
    out.atoms.push_back({kNewCluster, 1.0});
    return out;
  }
  if (*family >= state.k_x()) throw DomainError("y_predictive: family index out of range");
  const auto& f = state.family(*family);
  const double sigma = f.params.sigma();
  const double denom = f.params.beta() + static_cast<double>(f.count);
  out.atoms.reserve(f.k() + 1);
  for (std::size_t j = 0; j < f.k(); ++j)
    out.atoms.push_back({j, (static_cast<double>(f.dishes[j].count) - sigma) / denom});
  out.atoms.push_back({kNewCluster, f.params.new_cluster_weight(f.k()) / denom});
  return out;
}

namespace {

// Draws a dish for family r (already holding >= 1 customer unless fresh).
bool draw_dish(NestedPartitionState& state, std::size_t r, const EpyModel& model, Stream& stream, Label& y) {
  const auto& f = state.family(r);
  const auto& base = model.base_y_for(f.label);
  if (f.count > 0) {
    const double sigma = f.params.sigma();
    double v = stream.uniform() * (f.params.beta() + static_cast<double>(f.count));
    const double w_new = f.params.new_cluster_weight(f.k());
    if (!(v < w_new)) {
      v -= w_new;
      std::size_t j = f.k() - 1;
      for (std::size_t i = 0; i < f.k(); ++i) {
        const double w = static_cast<double>(f.dishes[i].count) - sigma;
        if (v < w) {
          j = i;
          break;
        }
        v -= w;
      }
      y = f.dishes[j].label;
      state.add_to_dish(r, y);
      return false;
    }
  }
  y = base.draw(stream);
  const bool fresh = !state.find_dish(r, y).has_value();
  state.add_to_dish(r, y);
  return fresh;
}

}  // namespace

StepOutcome step(NestedPartitionState& state, const EpyModel& model, Stream& stream) {
  model.validate();
  StepOutcome out;
  const double u = stream.uniform() * (model.alpha + static_cast<double>(state.n()));
  std::size_t r = 0;
  if (u < model.alpha) {
    Label x = model.base_x.draw(stream);
    if (auto existing = state.find_family(x)) {
      r = *existing;
    } else {
      r = state.add_family(x, model.params_for(x));
      out.new_family = true;
    }
  } else {
    double c = u - model.alpha;
    r = state.k_x() - 1;
    for (std::size_t i = 0; i < state.k_x(); ++i) {
      const double w = static_cast<double>(state.family(i).count);
      if (c < w) {
        r = i;
        break;
      }
      c -= w;
    }
  }
  out.x = state.family(r).label;
  out.new_species = draw_dish(state, r, model, stream, out.y);
  return out;
}

StepOutcome step_within_family(NestedPartitionState& state, std::size_t r, const EpyModel& model,
                               Stream& stream) {
  if (r >= state.k_x()) throw DomainError("step_within_family: family index out of range");
  StepOutcome out;
  out.x = state.family(r).label;
  out.new_species = draw_dish(state, r, model, stream, out.y);
  return out;
}

namespace {

bool all_bases_diffuse(const EpyModel& model) {
  if (!model.base_x.diffuse() || !model.default_base_y.diffuse()) return false;
  for (const auto& [x, base] : model.base_y_given_x)
    if (!base.diffuse()) return false;
  return true;
}

}  // namespace

Discoveries simulate_discoveries_reference(const NestedPartitionState& state, const EpyModel& model,
                                           std::int64_t m, Stream& stream, bool record_trajectory) {
  if (m < 0) throw DomainError("simulate_discoveries: m must be >= 0");
  NestedPartitionState work = state;
  Discoveries out;
  if (record_trajectory) out.trajectory.reserve(static_cast<std::size_t>(m));
  for (std::int64_t t = 0; t < m; ++t) {
    const auto s = step(work, model, stream);
    out.new_families += s.new_family;
    out.new_species += s.new_species;
    if (record_trajectory) out.trajectory.push_back({s.new_family, s.new_species});
  }
  return out;
}

Discoveries simulate_discoveries(const NestedPartitionState& state, const EpyModel& model, std::int64_t m,
                                 Stream& stream, bool record_trajectory) {
  model.validate();
  if (m < 0) throw DomainError("simulate_discoveries: m must be >= 0");
  if (!all_bases_diffuse(model)) return simulate_discoveries_reference(state, model, m, stream, record_trajectory);
  DiscoveryKernel kernel(state, model.alpha, model.default_params);
  return kernel.run(m, stream, record_trajectory);
}

double log_pochhammer(double a, double n) {
  if (n == 0.0) return 0.0;
  return detail::lgamma_pos(a + n) - detail::lgamma_pos(a);
}

double family_log_eppf(std::span<const std::int64_t> dish_counts, const PyParams& params) {
  const std::size_t k = dish_counts.size();
  if (k == 0) return 0.0;
  double total = 0.0;
  std::int64_t n = 0;
  for (std::size_t j = 1; j < k; ++j) {
    const double w = params.new_cluster_weight(j);
    if (!(w > 0.0)) throw DomainError("family_log_eppf: inadmissible factor beta + j sigma <= 0");
    total += std::log(w);
  }
  const double a = 1.0 - params.sigma();
  for (std::int64_t c : dish_counts) {
    if (c < 1) throw DomainError("family_log_eppf: counts must be >= 1");
    n += c;
    total += log_pochhammer(a, static_cast<double>(c - 1));
  }
  total -= log_pochhammer(params.beta() + 1.0, static_cast<double>(n - 1));
  return total;
}

double log_eppf(const NestedPartitionState& state, double alpha, std::span<const PyParams> params) {
  if (!(alpha > 0.0)) throw DomainError("log_eppf: alpha must be positive");
  if (params.size() != state.k_x()) throw DomainError("log_eppf: one PyParams per family required");
  if (state.n() == 0) return 0.0;
  double total = static_cast<double>(state.k_x()) * std::log(alpha) -
                 log_pochhammer(alpha, static_cast<double>(state.n()));
  std::vector<std::int64_t> counts;
  for (std::size_t r = 0; r < state.k_x(); ++r) {
    const auto& f = state.family(r);
    total += detail::lgamma_pos(static_cast<double>(f.count));
    counts.clear();
    for (const auto& d : f.dishes) counts.push_back(d.count);
    total += family_log_eppf(counts, params[r]);
  }
  return total;
}

double log_eppf(const NestedPartitionState& state, double alpha) {
  std::vector<PyParams> params;
  params.reserve(state.k_x());
  for (const auto& f : state.families()) params.push_back(f.params);
  return log_eppf(state, alpha, params);
}

double log_seq_prob(std::span<const Observation> sequence, double alpha, const std::map<Label, PyParams>& params,
                    const PyParams& fallback) {
  if (!(alpha > 0.0)) throw DomainError("log_seq_prob: alpha must be positive");
  NestedPartitionState state;
  double total = 0.0;
  for (const auto& obs : sequence) {
    const auto px = x_predictive(state, alpha);
    auto r = state.find_family(obs.family);
    double p = 0.0;
    if (r) {
      const auto py = y_predictive(state, *r);
      const auto j = state.find_dish(*r, obs.species);
      p = px.probability_of(*r) * (j ? py.probability_of(*j) : py.new_probability());
    } else {
      p = px.new_probability();
      auto it = params.find(obs.family);
      r = state.add_family(obs.family, it == params.end() ? fallback : it->second);
    }
    if (!(p > 0.0)) throw DomainError("log_seq_prob: observation has zero predictive probability");
    total += std::log(p);
    state.add_to_dish(*r, obs.species);
  }
  return total;
}

}  // namespace epy
