#include "epy/oracles.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <json.hpp>
#include <map>
#include <sstream>

#include "epy/detail/math.hpp"
#include "epy/ebayes.hpp"
#include "epy/error.hpp"
#include "epy/posterior.hpp"
#include "epy/species.hpp"
#include "epy/urn.hpp"

namespace epy {

namespace {

IdentityReport make_report(std::string name, std::string method, bool control, double deviation, double threshold,
                           std::int64_t size, std::string detail = {}) {
  IdentityReport r{std::move(name), std::move(method), control, deviation, threshold, false, size, std::move(detail)};
  r.decide();
  return r;
}

std::string fmt(double v) { return format_number(v); }

// A random nested sequence with per-family parameters, mixing the DP, PY and
// bounded branches. Bounded families get H no smaller than their dish count.
struct RandomCase {
  std::vector<Observation> sequence;
  std::map<Label, PyParams> params;
  double alpha = 1.0;
};

RandomCase random_case(Stream& s, int n_max) {
  RandomCase c;
  const int n = 1 + static_cast<int>(s.below(static_cast<std::uint64_t>(n_max)));
  const int families = 1 + static_cast<int>(s.below(4));
  std::vector<int> dishes(static_cast<std::size_t>(families), 0);
  for (int t = 0; t < n; ++t) {
    const auto f = static_cast<std::size_t>(s.below(static_cast<std::uint64_t>(families)));
    int j = static_cast<int>(s.below(static_cast<std::uint64_t>(dishes[f] + 1)));
    if (j == dishes[f]) ++dishes[f];
    c.sequence.push_back({"F" + std::to_string(f), "S" + std::to_string(f) + "." + std::to_string(j)});
  }
  for (int f = 0; f < families; ++f) {
    const Label x = "F" + std::to_string(f);
    const double u = s.uniform();
    switch (s.below(3)) {
      case 0:
        c.params[x] = PyParams::make(0.0, 0.1 + 5.0 * u);
        break;
      case 1: {
        const double sigma = 0.9 * s.uniform();
        c.params[x] = PyParams::make(sigma, -sigma + 0.05 + 5.0 * u);
        break;
      }
      default: {
        const int H = std::max(2, dishes[static_cast<std::size_t>(f)]) + static_cast<int>(s.below(3));
        const double beta = 0.1 + 5.0 * u;
        c.params[x] = PyParams::make(-beta / H, beta, H);
      }
    }
  }
  c.alpha = 0.1 + 5.0 * s.uniform();
  return c;
}

NestedPartitionState case_state(const RandomCase& c) {
  auto state = state_from_sequence(c.sequence);
  for (std::size_t r = 0; r < state.k_x(); ++r) state.set_params(r, c.params.at(state.family(r).label));
  return state;
}

PyParams scaled_beta(const PyParams& p, double factor) {
  const double beta = p.beta() * factor;
  if (p.bounded()) return PyParams::make(-beta / *p.H(), beta, p.H());
  return PyParams::make(p.sigma(), beta);
}

// All code sequences of lengths 1..n_max. `options(prefix)` is the number of
// admissible codes after a prefix.
void enumerate(int n_max, const std::function<int(const std::vector<int>&)>& options,
               const std::function<void(const std::vector<int>&)>& visit) {
  std::vector<int> seq;
  std::function<void()> rec = [&] {
    if (static_cast<int>(seq.size()) == n_max) return;
    const int k = options(seq);
    for (int c = 0; c < k; ++c) {
      seq.push_back(c);
      visit(seq);
      rec();
      seq.pop_back();
    }
  };
  rec();
}

double log_beta_fn(double a, double b) {
  return detail::lgamma_pos(a) + detail::lgamma_pos(b) - detail::lgamma_pos(a + b);
}

}  // namespace

std::string to_json_line(const IdentityReport& r) {
  nlohmann::json j{{"identity", r.name},
                   {"kind", r.negative_control ? "negative-control" : "identity"},
                   {"method", r.method},
                   {"max_deviation", r.max_deviation},
                   {"threshold", r.threshold},
                   {"pass", r.pass},
                   {"sample_size", r.sample_size}};
  if (!r.detail.empty()) j["detail"] = r.detail;
  return j.dump();
}

std::vector<IdentityReport> check_eppf_consistency(int trials, int n_max, int orderings, std::uint64_t seed) {
  if (n_max < 1 || n_max > 12) throw DomainError("check_eppf_consistency: n_max must lie in [1, 12]");
  Stream s(seed, 0);
  double dev = 0.0, perm_dev = 0.0, control = 0.0;
  int bounded_families = 0;
  for (int t = 0; t < trials; ++t) {
    auto c = random_case(s, n_max);
    const auto state = case_state(c);
    for (const auto& f : state.families()) bounded_families += f.params.bounded();
    const double eppf = log_eppf(state, c.alpha);
    const double seq = log_seq_prob(c.sequence, c.alpha, c.params);
    dev = std::max(dev, std::abs(eppf - seq));
    for (int o = 0; o < orderings; ++o) {
      auto perm = c.sequence;
      for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[s.below(i)]);
      perm_dev = std::max(perm_dev, std::abs(log_seq_prob(perm, c.alpha, c.params) - seq));
    }
    std::map<Label, PyParams> perturbed;
    for (const auto& [x, p] : c.params) perturbed[x] = scaled_beta(p, 1.1);
    control = std::max(control, std::abs(eppf - log_seq_prob(c.sequence, c.alpha, perturbed)));
  }
  const std::string d = "bounded families: " + std::to_string(bounded_families);
  return {make_report("eppf-vs-sequential-urn", "exact-enumeration", false, dev, 1e-12, trials, d),
          make_report("sequential-urn-permutation-invariance", "exact-enumeration", false, perm_dev, 1e-12,
                      static_cast<std::int64_t>(trials) * orderings),
          make_report("eppf-vs-sequential-urn/perturbed-beta", "exact-enumeration", true, control, 1e-12, trials)};
}

namespace {

// Cor. 2 side A: the marginal EDP through the library urn. Atomic P_X on
// labels x_l with P_X(x_l) = alpha_l / alpha; new tables landing on an
// observed label join it.
double cor2_edp_prob(const std::vector<int>& seq, const std::vector<double>& alphas,
                     const std::vector<double>& betas) {
  const std::size_t L = alphas.size();
  double alpha = 0.0;
  for (double a : alphas) alpha += a;
  NestedPartitionState state;
  std::vector<std::pair<std::size_t, Label>> values;  // (component, label) of distinct y
  double p = 1.0;
  for (int code : seq) {
    const std::size_t l = code < static_cast<int>(L) ? static_cast<std::size_t>(code)
                                                     : values[static_cast<std::size_t>(code) - L].first;
    const Label x = "x" + std::to_string(l);
    const auto px = x_predictive(state, alpha);
    auto r = state.find_family(x);
    const double p_x = (r ? px.probability_of(*r) : 0.0) + px.new_probability() * alphas[l] / alpha;
    Label y;
    double p_y;
    if (code < static_cast<int>(L)) {
      y = "c" + std::to_string(l) + "#" + std::to_string(values.size());
      values.emplace_back(l, y);
      p_y = r ? y_predictive(state, *r).new_probability() : y_predictive(state, std::nullopt).new_probability();
    } else {
      y = values[static_cast<std::size_t>(code) - L].second;
      p_y = y_predictive(state, *r).probability_of(*state.find_dish(*r, y));
    }
    p *= p_x * p_y;
    if (!r) r = state.add_family(x, PyParams::make(0.0, betas[l]));
    state.add_to_dish(*r, y);
  }
  return p;
}

// Side B: the DP with the labeled mixture base sum_l alpha_l P_l, in closed form.
double cor2_dp_prob(const std::vector<int>& seq, const std::vector<double>& alphas) {
  const int L = static_cast<int>(alphas.size());
  double alpha = 0.0;
  for (double a : alphas) alpha += a;
  std::vector<double> counts;
  double p = 1.0;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const double denom = alpha + static_cast<double>(i);
    if (seq[i] < L) {
      p *= alphas[static_cast<std::size_t>(seq[i])] / denom;
      counts.push_back(1.0);
    } else {
      auto& c = counts[static_cast<std::size_t>(seq[i] - L)];
      p *= c / denom;
      c += 1.0;
    }
  }
  return p;
}

}  // namespace

std::vector<IdentityReport> check_cor2_collapse(const std::vector<double>& alphas, int n_max) {
  if (alphas.size() < 2) throw DomainError("check_cor2_collapse: need L >= 2");
  if (n_max < 1 || n_max > 6) throw DomainError("check_cor2_collapse: n_max must lie in [1, 6]");
  for (double a : alphas)
    if (!(a > 0.0)) throw DomainError("check_cor2_collapse: alphas must be positive");
  const int L = static_cast<int>(alphas.size());
  std::vector<double> perturbed = alphas;
  for (double& b : perturbed) b += 1.0;
  double dev = 0.0, control = 0.0;
  std::int64_t count = 0;
  enumerate(
      n_max,
      [&](const std::vector<int>& prefix) {
        int distinct = 0;
        for (int c : prefix) distinct += c < L;
        return L + distinct;
      },
      [&](const std::vector<int>& seq) {
        const double pb = cor2_dp_prob(seq, alphas);
        dev = std::max(dev, std::abs(cor2_edp_prob(seq, alphas, alphas) - pb));
        control = std::max(control, std::abs(cor2_edp_prob(seq, alphas, perturbed) - pb));
        ++count;
      });
  std::string a;
  for (double v : alphas) a += (a.empty() ? "" : ",") + fmt(v);
  const std::string d = "alphas (" + a + "), length <= " + std::to_string(n_max);
  return {make_report("cor2-edp-collapses-to-dp", "exact-enumeration", false, dev, 1e-12, count, d),
          make_report("cor2-edp-collapses-to-dp/beta-ne-alpha", "exact-enumeration", true, control, 1e-3, count, d)};
}

namespace {

// Codes: 0 = y0, 1 = new slab label, 2 + j = j-th slab label seen so far.
int slab_labels(const std::vector<int>& seq) {
  int k = 0;
  for (int c : seq) k += c == 1;
  return k;
}

// Outer spike and slab: E[Pi^a (1 - Pi)^(n - a)] times the slab's urn probability.
double outer_spike_slab(const std::vector<int>& seq, double a1, double a2, const PyParams& slab) {
  std::int64_t a = 0;
  std::vector<std::int64_t> counts;
  for (int c : seq) {
    if (c == 0) {
      ++a;
    } else if (c == 1) {
      counts.push_back(1);
    } else {
      ++counts[static_cast<std::size_t>(c - 2)];
    }
  }
  const auto n = static_cast<double>(seq.size());
  double lp = log_beta_fn(a1 + static_cast<double>(a), a2 + n - static_cast<double>(a)) - log_beta_fn(a1, a2);
  if (!counts.empty()) lp += family_log_eppf(counts, slab);
  return std::exp(lp);
}

// Inner spike and slab with sigma = 0 through the library urn: one DP family
// with concentration a1 + a2 whose base puts mass a1 / (a1 + a2) on y0.
double inner_spike_slab(const std::vector<int>& seq, double a1, double a2) {
  const double theta = a1 + a2;
  NestedPartitionState state;
  double p = 1.0;
  std::vector<Label> slab;
  for (int c : seq) {
    std::optional<std::size_t> r = state.k_x() ? std::optional<std::size_t>(0) : std::nullopt;
    const auto py = y_predictive(state, r);
    Label y;
    if (c == 0) {
      y = "y0";
      const auto j = r ? state.find_dish(*r, y) : std::nullopt;
      p *= (j ? py.probability_of(*j) : 0.0) + py.new_probability() * a1 / theta;
    } else if (c == 1) {
      y = "slab#" + std::to_string(slab.size());
      slab.push_back(y);
      p *= py.new_probability() * a2 / theta;
    } else {
      y = slab[static_cast<std::size_t>(c - 2)];
      p *= py.probability_of(*state.find_dish(*r, y));
    }
    if (!r) r = state.add_family("x", PyParams::make(0.0, theta));
    state.add_to_dish(*r, y);
  }
  return p;
}

// PY(sigma, theta) with base p0 delta_y0 + (1 - p0) P_2. Several tables may
// serve y0, so the table arrangement of the y0 draws is summed out.
double contaminated_py(const std::vector<int>& seq, double sigma, double theta, double p0) {
  struct Table {
    int label;  // -1 for y0, else slab label index
    double count;
  };
  std::vector<Table> tables;
  std::function<double(std::size_t)> rec = [&](std::size_t i) -> double {
    if (i == seq.size()) return 1.0;
    const double denom = theta + static_cast<double>(i);
    const double fresh = (theta + static_cast<double>(tables.size()) * sigma) / denom;
    const int c = seq[i];
    double total = 0.0;
    auto sit = [&](std::size_t t, double w) {
      tables[t].count += 1.0;
      total += w * rec(i + 1);
      tables[t].count -= 1.0;
    };
    auto open = [&](int label, double w) {
      tables.push_back({label, 1.0});
      total += w * rec(i + 1);
      tables.pop_back();
    };
    if (c == 0) {
      for (std::size_t t = 0; t < tables.size(); ++t)
        if (tables[t].label == -1) sit(t, (tables[t].count - sigma) / denom);
      open(-1, fresh * p0);
    } else if (c == 1) {
      int next = 0;
      for (const auto& t : tables) next += t.label >= 0;
      open(next, fresh * (1.0 - p0));
    } else {
      for (std::size_t t = 0; t < tables.size(); ++t)
        if (tables[t].label == c - 2) sit(t, (tables[t].count - sigma) / denom);
    }
    return total;
  };
  return rec(0);
}

}  // namespace

std::vector<IdentityReport> check_spike_slab_equivalence(double alpha1, double alpha2, int n_max,
                                                         double slab_sigma) {
  if (!(alpha1 > 0.0 && alpha2 > 0.0)) throw DomainError("check_spike_slab_equivalence: alphas must be positive");
  if (n_max < 1 || n_max > 5) throw DomainError("check_spike_slab_equivalence: n_max must lie in [1, 5]");
  double dev = 0.0, control = 0.0;
  std::int64_t count = 0;
  const auto dp_slab = PyParams::make(0.0, alpha2);
  const auto py_slab = PyParams::make(slab_sigma, alpha2);
  enumerate(
      n_max, [](const std::vector<int>& prefix) { return 2 + slab_labels(prefix); },
      [&](const std::vector<int>& seq) {
        dev = std::max(dev, std::abs(outer_spike_slab(seq, alpha1, alpha2, dp_slab) - inner_spike_slab(seq, alpha1, alpha2)));
        control = std::max(control, std::abs(outer_spike_slab(seq, alpha1, alpha2, py_slab) -
                                             contaminated_py(seq, slab_sigma, alpha1 + alpha2, alpha1 / (alpha1 + alpha2))));
        ++count;
      });
  const std::string d = "alpha1=" + fmt(alpha1) + " alpha2=beta2=" + fmt(alpha2) + ", length <= " + std::to_string(n_max);
  return {make_report("spike-slab-inner-equals-outer", "exact-enumeration", false, dev, 1e-12, count, d),
          make_report("spike-slab-inner-equals-outer/py-slab", "exact-enumeration", true, control, 1e-3, count,
                      "slab sigma=" + fmt(slab_sigma))};
}

namespace {

struct MultiDish {
  std::int64_t families = 0;
  std::int64_t multi = 0;
};

MultiDish multi_dish_frequency(double beta, int trials, int length, Stream& s) {
  EpyModel model;
  model.alpha = 1.0;
  model.default_params = PyParams::make(0.0, beta);
  MultiDish out;
  for (int t = 0; t < trials; ++t) {
    NestedPartitionState state;
    for (int i = 0; i < length; ++i) step(state, model, s);
    for (const auto& f : state.families()) {
      ++out.families;
      out.multi += f.k() >= 2;
    }
  }
  return out;
}

}  // namespace

std::vector<IdentityReport> check_dp_limit(double beta_small, int trials, std::uint64_t seed) {
  if (!(beta_small > 0.0)) throw DomainError("check_dp_limit: beta_small must be positive");
  std::vector<IdentityReport> out;
  // Analytic: new-dish probability in a one-dish family of size n_r.
  double worst = 0.0;
  for (int n_r = 1; n_r <= 20; ++n_r) {
    NestedPartitionState state;
    const auto r = state.add_family("x", PyParams::make(0.0, beta_small));
    state.add_to_dish(r, "y", n_r);
    worst = std::max(worst, y_predictive(state, r).new_probability());
  }
  const double bound = beta_small / (beta_small + 1.0);
  out.push_back(make_report("dp-limit-new-dish-bound", "analytic", false, worst, bound * (1.0 + 1e-15), 20,
                            "bound beta/(beta+1)=" + fmt(bound)));

  const int length = 20;
  auto mc = [&](double beta, int n_trials, std::uint64_t index, bool control) {
    Stream s(seed, index);
    const auto f = multi_dish_frequency(beta, n_trials, length, s);
    const double freq = static_cast<double>(f.multi) / static_cast<double>(f.families);
    const double b = std::min(10.0 * beta, 1.0);
    const double se = std::sqrt(b * (1.0 - b) / static_cast<double>(f.families));
    const double threshold = control ? 0.1 : b + 3.0 * se;
    return make_report(control ? "dp-limit-multi-dish-frequency/beta=1" : "dp-limit-multi-dish-frequency",
                       "monte-carlo", control, freq, threshold, n_trials,
                       "families " + std::to_string(f.families) + ", multi-dish " + std::to_string(f.multi) +
                           ", beta=" + fmt(beta) + ", bound 10*beta=" + fmt(b) + ", se=" + fmt(se));
  };
  out.push_back(mc(beta_small, trials, 1, false));
  out.push_back(mc(1.0, std::max(trials / 10, 100), 2, true));
  return out;
}

std::vector<IdentityReport> check_bounded_clusters(int H, double beta, int trials, int length, std::uint64_t seed) {
  if (H < 2) throw DomainError("check_bounded_clusters: H must be >= 2");
  auto run = [&](const PyParams& params, std::uint64_t index, std::int64_t& at_cap, std::int64_t& nonzero) {
    EpyModel model;
    model.alpha = 1.0;
    model.default_params = params;
    Stream s(seed, index);
    std::int64_t violations = 0;
    for (int t = 0; t < trials; ++t) {
      NestedPartitionState state;
      for (int i = 0; i < length; ++i) {
        const auto o = step(state, model, s);
        const auto r = *state.find_family(o.x);
        const auto k = static_cast<int>(state.family(r).k());
        violations += k > H;
        if (k == H) {
          ++at_cap;
          nonzero += y_predictive(state, r).new_probability() != 0.0;
        }
      }
    }
    return violations;
  };
  std::int64_t at_cap = 0, nonzero = 0, c_cap = 0, c_nonzero = 0;
  const auto v = run(PyParams::make(-beta / H, beta, H), 0, at_cap, nonzero);
  const auto cv = run(PyParams::make(0.0, beta), 1, c_cap, c_nonzero);
  const std::string d = "H=" + std::to_string(H) + " beta=" + fmt(beta) + ", " + std::to_string(trials) + "x" +
                        std::to_string(length) + " draws";
  return {make_report("bounded-clusters-k-le-H", "monte-carlo", false, static_cast<double>(v), 0.0, trials, d),
          make_report("bounded-clusters-zero-new-dish-at-H", "analytic", false, static_cast<double>(nonzero), 0.0,
                      at_cap, "states with k=H: " + std::to_string(at_cap)),
          make_report("bounded-clusters-k-le-H/sigma=0", "monte-carlo", true, static_cast<double>(cv), 0.0, trials, d)};
}

std::vector<IdentityReport> check_moment_measure(int reps, std::uint64_t seed) {
  if (reps < 2) throw DomainError("check_moment_measure: reps must be >= 2");
  EpyModel model;
  model.alpha = 2.0;
  model.base_x = BaseMeasure::atomic({"x1", "x2"}, {0.5, 0.5});
  model.base_y_given_x.emplace("x1", BaseMeasure::atomic({"yB", "yC"}, {0.3, 0.7}));
  model.base_y_given_x.emplace("x2", BaseMeasure::atomic({"yB", "yC"}, {0.1, 0.9}));
  model.params["x1"] = PyParams::make(0.25, 1.0);
  model.params["x2"] = PyParams::make(0.0, 2.0);
  const std::set<Label> xs{"x1", "x2"}, ys{"yB", "yC"}, b{"yB"};
  const double target = 0.5 * 0.3 + 0.5 * 0.1;
  const double wrong = 0.8 * 0.3 + 0.2 * 0.1;
  Stream s(seed, 0);
  double sum = 0.0, sum2 = 0.0, residual = 0.0, full_dev = 0.0;
  for (int i = 0; i < reps; ++i) {
    const auto m = sample_epy_truncated(model, s);
    const double v = m.mass(xs, b);
    sum += v;
    sum2 += v * v;
    const double represented = m.represented_mass();
    residual += 1.0 - represented;
    full_dev = std::max(full_dev, std::abs(m.mass(xs, ys) - represented));
  }
  const double n = reps;
  const double mean = sum / n;
  const double se = std::sqrt(std::max(sum2 / n - mean * mean, 0.0) / (n - 1.0));
  const double threshold = 3.0 * se + residual / n;
  const std::string d = "mean=" + fmt(mean) + " se=" + fmt(se) + " mean residual=" + fmt(residual / n);
  return {make_report("moment-measure-mean", "monte-carlo", false, std::abs(mean - target), threshold, reps,
                      d + " target=" + fmt(target)),
          make_report("moment-measure-full-space", "analytic", false, full_dev, 1e-12, reps),
          make_report("moment-measure-mean/perturbed-base", "monte-carlo", true, std::abs(mean - wrong), threshold,
                      reps, d + " perturbed target=" + fmt(wrong))};
}

std::vector<IdentityReport> check_posterior_consistency(int states, int draws, std::uint64_t seed) {
  std::vector<IdentityReport> out;
  {
    Stream s(seed, 0);
    double dev = 0.0;
    std::int64_t failures = 0;
    for (int t = 0; t < states; ++t) {
      const auto c = random_case(s, 12);
      EpyModel model;
      model.alpha = c.alpha;
      model.params = c.params;
      const auto rep = posterior_predictive_check(model, case_state(c), 1e-12);
      dev = std::max(dev, rep.max_deviation);
      failures += !rep.ok;
    }
    out.push_back(make_report("posterior-dirichlet-means-equal-predictive", "analytic", false, dev, 1e-12, states,
                              "failed states: " + std::to_string(failures)));
  }

  // One (X, Y) draw from each sampled posterior measure.
  const std::vector<CountRecord> records{
      {"F1", "S1", 3}, {"F1", "S2", 2}, {"F2", "S3", 2}, {"F3", "S4", 1}, {"F3", "S5", 1}};
  auto state = state_from_counts(records);
  EpyModel model;
  model.alpha = 1.0;
  model.params["F1"] = PyParams::make(0.25, 1.0);
  model.params["F2"] = PyParams::make(-0.5, 1.5, 3);
  model.params["F3"] = PyParams::make(0.0, 0.5);
  model.default_params = PyParams::make(0.0, 1.0);
  apply_params(state, model);
  // Truncation error is bounded by the residual, well under the 7e-4 s.e. of
  // the rarest outcome at 1e5 draws.
  TruncationPolicy policy;
  policy.residual_tol = 1e-4;
  policy.max_length = 2000;

  // Categories: (r, j) for observed dishes, (r, new), then new family.
  auto expected = [&](double alpha) {
    std::vector<double> p;
    const auto px = x_predictive(state, alpha);
    for (std::size_t r = 0; r < state.k_x(); ++r) {
      const auto py = y_predictive(state, r);
      for (std::size_t j = 0; j < state.family(r).k(); ++j) p.push_back(px.probability_of(r) * py.probability_of(j));
      p.push_back(px.probability_of(r) * py.new_probability());
    }
    p.push_back(px.new_probability());
    return p;
  };
  std::vector<std::size_t> offset;
  std::size_t cats = 0;
  for (const auto& f : state.families()) {
    offset.push_back(cats);
    cats += f.k() + 1;
  }
  std::vector<std::int64_t> freq(cats + 1, 0);
  Stream s(seed, 1);
  for (int i = 0; i < draws; ++i) {
    const auto m = sample_posterior_measure(model, state, s, policy);
    const auto [x, y] = m.draw(s);
    const auto r = state.find_family(x);
    if (!r) {
      ++freq[cats];
      continue;
    }
    const auto j = state.find_dish(*r, y);
    ++freq[offset[*r] + (j ? *j : state.family(*r).k())];
  }
  auto zmax = [&](const std::vector<double>& p) {
    double z = 0.0;
    for (std::size_t c = 0; c < p.size(); ++c) {
      const double se = std::sqrt(p[c] * (1.0 - p[c]) / draws);
      z = std::max(z, std::abs(static_cast<double>(freq[c]) / draws - p[c]) / se);
    }
    return z;
  };
  out.push_back(make_report("posterior-one-step-matches-urn", "monte-carlo", false, zmax(expected(model.alpha)), 4.0,
                            draws, "max |z| over " + std::to_string(cats + 1) + " outcomes"));
  out.push_back(make_report("posterior-one-step-matches-urn/alpha=2", "monte-carlo", true, zmax(expected(2.0)), 4.0,
                            draws, "urn evaluated with alpha 2 instead of 1"));
  return out;
}

std::vector<IdentityReport> check_edp_restriction(std::uint64_t seed) {
  Stream s(seed, 0);
  std::vector<std::vector<std::int64_t>> data{{1}, {3, 1, 1}, {7}};
  data.push_back(simulate_py_counts(PyParams::make(0.0, 3.0), 5000, s));
  data.push_back(simulate_py_counts(PyParams::make(0.0, 40.0), 20000, s));
  const PriorDensities prior;
  double dev = 0.0, control = 0.0;
  std::int64_t count = 0;
  for (const auto& d : data) {
    const FamilyCounts counts(d);
    for (int i = 0; i <= 40; ++i) {
      const double beta = std::pow(10.0, -4.0 + 0.2 * i);
      const double edp = edp_family_objective(beta, counts, prior.beta);
      dev = std::max(dev, std::abs(epy_family_objective(0.0, beta, counts, prior) - edp));
      control = std::max(control, std::abs(epy_family_objective(1e-3, beta, counts, prior) - edp));
      ++count;
    }
  }
  return {make_report("edp-objective-is-epy-at-sigma-0", "analytic", false, dev, 1e-12, count),
          make_report("edp-objective-is-epy-at-sigma-0/sigma=1e-3", "analytic", true, control, 1e-12, count)};
}

IdentityReport check_prediction_coverage(const CoverageOptions& o, std::uint64_t seed) {
  EpyModel truth;
  truth.alpha = o.alpha;
  truth.default_params = PyParams::make(o.sigma, o.beta);
  FittedModel model;
  model.variant = ModelVariant::EPY;
  model.alpha = o.alpha;
  model.default_params = truth.default_params;
  RunConfig config;
  config.grid = o.grid;
  config.reps = o.reps;
  const double lo = (1.0 - o.level) / 2.0, hi = 1.0 - lo;
  config.quantiles = {lo, hi};
  const std::int64_t m_max = o.grid.back();

  std::int64_t covered = 0, total = 0, below = 0, above = 0;
  for (int w = 0; w < o.worlds; ++w) {
    Stream s(seed, static_cast<std::uint64_t>(w));
    const auto seq = simulate_sequence(truth, o.n_train + m_max, s);
    const auto train = state_from_sequence(std::span(seq).first(static_cast<std::size_t>(o.n_train)));
    const auto actual = count_new_in_test(train, std::span(seq).subspan(static_cast<std::size_t>(o.n_train)));
    config.seed = seed ^ (0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(w + 1));
    const auto curve = predict_curve(train, model, config);
    for (std::size_t i = 0; i < o.grid.size(); ++i) {
      const auto truth_ky = static_cast<double>(actual.new_species[static_cast<std::size_t>(o.grid[i] - 1)]);
      const bool in = curve.quantiles_ky.at(lo)[i] <= truth_ky && truth_ky <= curve.quantiles_ky.at(hi)[i];
      covered += in;
      below += truth_ky < curve.quantiles_ky.at(lo)[i];
      above += truth_ky > curve.quantiles_ky.at(hi)[i];
      ++total;
    }
  }
  const double coverage = static_cast<double>(covered) / static_cast<double>(total);
  const double mid = (o.lower + o.upper) / 2.0;
  std::ostringstream d;
  d << "coverage=" << fmt(coverage) << " (" << covered << "/" << total << "), below=" << below
    << " above=" << above << ", accepted [" << fmt(o.lower) << ", " << fmt(o.upper) << "]";
  return make_report("prediction-coverage", "monte-carlo", false, std::abs(coverage - mid), (o.upper - o.lower) / 2.0,
                     o.worlds, d.str());
}

std::vector<IdentityReport> check_eb_recovery(const RecoveryOptions& o, std::uint64_t seed) {
  std::vector<IdentityReport> out;
  const PriorDensities& prior = o.prior;
  std::uint64_t combo = 0;
  for (double sigma : o.sigmas) {
    for (double beta : o.betas) {
      std::vector<double> sh(static_cast<std::size_t>(o.draws)), bh(sh.size());
      std::vector<std::string> errors(sh.size());
      const auto params = PyParams::make(sigma, beta);
#pragma omp parallel for schedule(dynamic)
      for (int d = 0; d < o.draws; ++d) {
        try {
          Stream s(seed, combo * 100000 + static_cast<std::uint64_t>(d));
          const auto counts = simulate_py_counts(params, o.n, s);
          const auto fit = fit_family(counts, prior, ModelVariant::EPY);
          sh[static_cast<std::size_t>(d)] = fit.sigma;
          bh[static_cast<std::size_t>(d)] = fit.beta;
        } catch (const std::exception& e) {
          errors[static_cast<std::size_t>(d)] = e.what();
        }
      }
      for (const auto& e : errors)
        if (!e.empty()) throw ConvergenceError("eb recovery: " + e);
      auto interval = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return std::pair{quantile_sorted(v, 0.025), quantile_sorted(v, 0.975)};
      };
      auto outside = [](double t, std::pair<double, double> iv) {
        return t < iv.first ? iv.first - t : (t > iv.second ? t - iv.second : 0.0);
      };
      const auto is = interval(sh), ib = interval(bh);
      double ms = 0.0, mb = 0.0;
      for (std::size_t i = 0; i < sh.size(); ++i) {
        ms += sh[i] / o.draws;
        mb += bh[i] / o.draws;
      }
      std::ostringstream d;
      d << "sigma interval [" << fmt(is.first) << ", " << fmt(is.second) << "] mean " << fmt(ms) << "; beta interval ["
        << fmt(ib.first) << ", " << fmt(ib.second) << "] mean " << fmt(mb);
      out.push_back(make_report("eb-recovery sigma=" + fmt(sigma) + " beta=" + fmt(beta), "monte-carlo", false,
                                std::max(outside(sigma, is), outside(beta, ib)), 0.0, o.draws, d.str()));
      ++combo;
    }
  }
  return out;
}

std::vector<IdentityReport> run_suite(const std::string& suite, std::uint64_t seed) {
  using Check = std::function<std::vector<IdentityReport>()>;
  std::vector<Check> checks;
  const bool all = suite == "all";
  if (!all && suite != "eppf" && suite != "identities" && suite != "coverage")
    throw DomainError("unknown suite '" + suite + "' (expected all, eppf, identities or coverage)");
  if (all || suite == "eppf") checks.push_back([=] { return check_eppf_consistency(200, 12, 20, seed); });
  if (all || suite == "identities") {
    checks.push_back([=] { return check_cor2_collapse({1.0, 2.0}, 4); });
    checks.push_back([=] { return check_cor2_collapse({0.5, 1.0, 2.5}, 5); });
    checks.push_back([=] { return check_spike_slab_equivalence(1.0, 2.0, 4); });
    checks.push_back([=] { return check_spike_slab_equivalence(0.3, 4.0, 5); });
    checks.push_back([=] { return check_bounded_clusters(5, 1.0, 10000, 100, seed); });
    checks.push_back([=] { return check_bounded_clusters(2, 3.0, 1000, 200, seed + 1); });
    checks.push_back([=] { return check_dp_limit(1e-3, 100000, seed); });
    checks.push_back([=] { return check_moment_measure(10000, seed); });
    checks.push_back([=] { return check_posterior_consistency(100, 100000, seed); });
    checks.push_back([=] { return check_edp_restriction(seed); });
  }
  if (all || suite == "coverage") {
    checks.push_back([=] { return std::vector{check_prediction_coverage({}, seed)}; });
    checks.push_back([=] { return check_eb_recovery({}, seed); });
  }
  std::vector<std::vector<IdentityReport>> results(checks.size());
  std::vector<std::exception_ptr> errors(checks.size());
  const long nc = static_cast<long>(checks.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < nc; ++i) {
    try {
      results[static_cast<std::size_t>(i)] = checks[static_cast<std::size_t>(i)]();
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<IdentityReport> out;
  for (auto& r : results) out.insert(out.end(), r.begin(), r.end());
  return out;
}

}  // namespace epy
