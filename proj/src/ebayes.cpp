#include "epy/ebayes.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>

#include <omp.h>

#include "epy/detail/math.hpp"
#include "epy/error.hpp"

namespace epy {

namespace {

using detail::lgamma_pos;

double xlogy(double x, double y) { return x == 0.0 ? 0.0 : x * std::log(y); }

struct Search1D {
  double x = 0.0;
  double value = 0.0;
  int iterations = 0;
  bool at_lower = false;
  bool at_upper = false;
};

// Grid scan over [lo, hi] followed by golden-section refinement around the
// best grid point, maximizing f. A best grid point on an endpoint is reported
// as a boundary optimum without refinement.
Search1D scan_golden(const std::function<double(double)>& f, double lo, double hi, int points, double tol) {
  points = std::max(points, 3);
  std::vector<double> xs(static_cast<std::size_t>(points)), fs(xs.size());
  std::size_t best = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xs[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    fs[i] = f(xs[i]);
    if (fs[i] > fs[best]) best = i;
  }
  Search1D out;
  out.iterations = points;
  if (best == 0 || best + 1 == xs.size()) {
    out.x = xs[best];
    out.value = fs[best];
    out.at_lower = best == 0;
    out.at_upper = best != 0;
    return out;
  }
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = xs[best - 1], b = xs[best + 1];
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
    ++out.iterations;
  }
  out.x = fc > fd ? c : d;
  out.value = std::max(fc, fd);
  if (fs[best] > out.value) {
    out.x = xs[best];
    out.value = fs[best];
  }
  return out;
}

struct NelderMeadResult {
  std::array<double, 2> x{};
  double value = 0.0;  // maximized objective
  int iterations = 0;
  double diameter = 0.0;
  bool converged = false;
};

// Maximizes f over the box [lo, hi] (coordinates projected into it).
NelderMeadResult nelder_mead(const std::function<double(const std::array<double, 2>&)>& f,
                             std::array<double, 2> start, std::array<double, 2> lo, std::array<double, 2> hi,
                             double step, double tol, int max_iterations) {
  using P = std::array<double, 2>;
  auto project = [&](P p) {
    for (int i = 0; i < 2; ++i) p[i] = std::clamp(p[i], lo[i], hi[i]);
    return p;
  };
  auto cost = [&](const P& p) {
    const double v = f(p);
    return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();
  };
  std::array<P, 3> s{project(start), project({start[0] + step, start[1]}), project({start[0], start[1] + step})};
  if (s[1] == s[0]) s[1] = project({start[0] - step, start[1]});
  if (s[2] == s[0]) s[2] = project({start[0], start[1] - step});
  std::array<double, 3> c{cost(s[0]), cost(s[1]), cost(s[2])};

  auto diameter = [&] {
    double d = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j) d = std::max(d, std::hypot(s[i][0] - s[j][0], s[i][1] - s[j][1]));
    return d;
  };

  NelderMeadResult out;
  int it = 0;
  for (; it < max_iterations; ++it) {
    std::array<int, 3> idx{0, 1, 2};
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return c[a] < c[b]; });
    const int b = idx[0], m = idx[1], w = idx[2];
    if (diameter() < tol) {
      out.converged = true;
      break;
    }
    const P centroid{(s[b][0] + s[m][0]) / 2.0, (s[b][1] + s[m][1]) / 2.0};
    auto along = [&](double t) {
      return project({centroid[0] + t * (s[w][0] - centroid[0]), centroid[1] + t * (s[w][1] - centroid[1])});
    };
    const P r = along(-1.0);
    const double cr = cost(r);
    if (cr < c[b]) {
      const P e = along(-2.0);
      const double ce = cost(e);
      if (ce < cr) {
        s[w] = e;
        c[w] = ce;
      } else {
        s[w] = r;
        c[w] = cr;
      }
      continue;
    }
    if (cr < c[m]) {
      s[w] = r;
      c[w] = cr;
      continue;
    }
    const bool outside = cr < c[w];
    const P k = along(outside ? -0.5 : 0.5);
    const double ck = cost(k);
    if (ck < (outside ? cr : c[w])) {
      s[w] = k;
      c[w] = ck;
      continue;
    }
    for (int i : {m, w}) {
      s[i] = project({s[b][0] + 0.5 * (s[i][0] - s[b][0]), s[b][1] + 0.5 * (s[i][1] - s[b][1])});
      c[i] = cost(s[i]);
    }
  }
  const int best = static_cast<int>(std::min_element(c.begin(), c.end()) - c.begin());
  out.x = s[best];
  out.value = -c[best];
  out.iterations = it;
  out.diameter = diameter();
  return out;
}

double logistic(double u) { return 1.0 / (1.0 + std::exp(-u)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

double GammaPrior::log_kernel(double x) const { return xlogy(shape - 1.0, x) - rate * x; }

double GammaPrior::mode() const { return shape > 1.0 ? (shape - 1.0) / rate : 0.0; }

double BetaPrior::log_kernel(double sigma) const { return xlogy(a - 1.0, sigma) + xlogy(b - 1.0, 1.0 - sigma); }

double BetaPrior::mode() const {
  if (a > 1.0 && b > 1.0) return (a - 1.0) / (a + b - 2.0);
  if (a > 1.0) return 1.0;  // b <= 1: density increases towards 1
  return 0.0;               // a <= 1; the uniform case has no unique mode and takes 0
}

void PriorDensities::validate() const {
  const auto pos = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!pos(alpha.shape) || !pos(alpha.rate) || !pos(sigma.a) || !pos(sigma.b) || !pos(beta.shape) ||
      !pos(beta.rate) || !pos(dp_beta.shape) || !pos(dp_beta.rate))
    throw DomainError("prior shape, rate and Beta parameters must be positive");
}

std::string to_string(ModelVariant v) {
  switch (v) {
    case ModelVariant::DP:
      return "dp";
    case ModelVariant::EDP:
      return "edp";
    case ModelVariant::EPY:
      return "epy";
  }
  return "epy";
}

ModelVariant parse_variant(const std::string& s) {
  if (s == "dp") return ModelVariant::DP;
  if (s == "edp") return ModelVariant::EDP;
  if (s == "epy") return ModelVariant::EPY;
  throw DomainError("unknown model variant '" + s + "' (expected dp, edp or epy)");
}

FamilyCounts::FamilyCounts(std::span<const std::int64_t> dish_counts) {
  std::map<std::int64_t, std::int64_t> h;
  for (auto c : dish_counts) {
    if (c < 1) throw DomainError("dish counts must be positive");
    ++h[c];
    n_ += c;
    ++k_;
  }
  hist_.assign(h.begin(), h.end());
}

double alpha_objective(double alpha, std::int64_t n, std::int64_t k_x, const GammaPrior& prior) {
  return prior.log_kernel(alpha) + static_cast<double>(k_x) * std::log(alpha) + lgamma_pos(alpha) -
         lgamma_pos(alpha + static_cast<double>(n));
}

// The EPY and EDP objectives share their operation order so that the sigma = 0
// restriction reproduces the EDP value bit for bit.
double epy_family_objective(double sigma, double beta, const FamilyCounts& counts, const PriorDensities& prior) {
  double t = prior.beta.log_kernel(beta);
  t += prior.sigma.log_kernel(sigma);
  if (sigma == 0.0) {
    t += static_cast<double>(counts.k() - 1) * std::log(beta);
  } else {
    double s = 0.0;
    for (std::int64_t j = 1; j < counts.k(); ++j) s += std::log(beta + static_cast<double>(j) * sigma);
    t += s;
  }
  t -= log_pochhammer(beta + 1.0, static_cast<double>(counts.n() - 1));
  double d = 0.0;
  for (auto [c, mult] : counts.histogram())
    d += static_cast<double>(mult) * log_pochhammer(1.0 - sigma, static_cast<double>(c - 1));
  return t + d;
}

double edp_family_objective(double beta, const FamilyCounts& counts, const GammaPrior& beta_prior) {
  double t = beta_prior.log_kernel(beta);
  t += static_cast<double>(counts.k() - 1) * std::log(beta);
  t -= lgamma_pos(beta + 1.0 + static_cast<double>(counts.n() - 1)) - lgamma_pos(beta + 1.0);
  double d = 0.0;
  for (auto [c, mult] : counts.histogram())
    d += static_cast<double>(mult) * (lgamma_pos(static_cast<double>(c)) - lgamma_pos(1.0));
  return t + d;
}

AlphaFit fit_alpha(std::int64_t n, std::int64_t k_x, const PriorDensities& prior, const FitOptions& options) {
  if (k_x < 1 || k_x > n) throw DomainError("fit_alpha requires 1 <= k_x <= n");
  auto f = [&](double t) { return alpha_objective(std::exp(t), n, k_x, prior.alpha); };
  const auto r = scan_golden(f, std::log(options.alpha_lo), std::log(options.alpha_hi), options.scan_points,
                             options.tolerance);
  if (r.at_lower || r.at_upper)
    throw ConvergenceError("alpha objective is maximized at the " + std::string(r.at_lower ? "lower" : "upper") +
                           " end of the search bracket (n=" + std::to_string(n) + ", k_x=" + std::to_string(k_x) +
                           ")");
  return {std::exp(r.x), r.value, r.iterations};
}

namespace {

FamilyFit fit_edp(const FamilyCounts& counts, const GammaPrior& beta_prior, const FitOptions& options) {
  auto f = [&](double t) { return edp_family_objective(std::exp(t), counts, beta_prior); };
  const auto r =
      scan_golden(f, std::log(options.beta_lo), std::log(options.beta_hi), options.scan_points, options.tolerance);
  FamilyFit fit;
  fit.sigma = 0.0;
  fit.beta = std::exp(r.x);
  fit.objective = r.value;
  fit.iterations = r.iterations;
  fit.converged_starts = 1;
  fit.tolerance_achieved = options.tolerance;
  fit.sigma_at_boundary = true;
  fit.beta_at_boundary = r.at_lower || r.at_upper;
  return fit;
}

FamilyFit fit_epy(const FamilyCounts& counts, const PriorDensities& prior, const FitOptions& options) {
  const std::array<double, 2> lo{logit(options.sigma_lo), std::log(options.beta_lo)};
  const std::array<double, 2> hi{logit(options.sigma_hi), std::log(options.beta_hi)};
  auto to_params = [&](const std::array<double, 2>& p) {
    return std::pair{std::clamp(logistic(p[0]), options.sigma_lo, options.sigma_hi),
                     std::clamp(std::exp(p[1]), options.beta_lo, options.beta_hi)};
  };
  auto f = [&](const std::array<double, 2>& p) {
    auto [s, b] = to_params(p);
    return epy_family_objective(s, b, counts, prior);
  };

  FamilyFit fit;
  fit.objective = -std::numeric_limits<double>::infinity();
  auto consider = [&](double s, double b) {
    const double v = epy_family_objective(s, b, counts, prior);
    if (v > fit.objective) {
      fit.objective = v;
      fit.sigma = s;
      fit.beta = b;
    }
  };

  double worst_diameter = 0.0;
  for (double s0 : options.sigma_starts) {
    for (double b0 : options.beta_starts) {
      consider(s0, b0);
      const auto r = nelder_mead(f, {logit(s0), std::log(b0)}, lo, hi, 0.5, options.tolerance,
                                 options.max_iterations);
      fit.iterations += r.iterations;
      ++fit.restarts;
      if (r.converged) ++fit.converged_starts;
      worst_diameter = std::max(worst_diameter, r.diameter);
      auto [s, b] = to_params(r.x);
      consider(s, b);
    }
  }
  if (fit.converged_starts == 0)
    throw ConvergenceError("Nelder-Mead did not converge from any start (simplex diameter " +
                           std::to_string(worst_diameter) + " after " + std::to_string(fit.iterations) +
                           " iterations)");

  // The sigma = 0 edge is part of the parameter space and is solved exactly in beta.
  const auto edge = fit_edp(counts, prior.beta, options);
  consider(0.0, edge.beta);
  const auto mode = default_new_family(prior, options);
  consider(mode.sigma, mode.beta);

  fit.tolerance_achieved = worst_diameter;
  fit.sigma_at_boundary = fit.sigma <= options.sigma_lo || fit.sigma >= options.sigma_hi;
  fit.beta_at_boundary = fit.beta <= options.beta_lo * (1.0 + 1e-9) || fit.beta >= options.beta_hi * (1.0 - 1e-9);
  if (fit.sigma <= options.sigma_lo) {
    // Report the edge value exactly.
    const double at_zero = epy_family_objective(0.0, fit.beta, counts, prior);
    if (at_zero >= fit.objective) {
      fit.sigma = 0.0;
      fit.objective = at_zero;
    }
  }
  return fit;
}

}  // namespace

FamilyFit fit_family(std::span<const std::int64_t> dish_counts, const PriorDensities& prior, ModelVariant variant,
                     const FitOptions& options) {
  const FamilyCounts counts(dish_counts);
  if (counts.k() < 1) throw DomainError("fit_family requires at least one dish");
  switch (variant) {
    case ModelVariant::EPY:
      return fit_epy(counts, prior, options);
    case ModelVariant::EDP:
      return fit_edp(counts, prior.beta, options);
    case ModelVariant::DP:
      break;
  }
  throw DomainError("fit_family: DP is fitted by fit_model on the pooled counts");
}

DefaultFamily default_new_family(const PriorDensities& prior, const FitOptions& options) {
  DefaultFamily d;
  d.sigma = prior.sigma.mode();
  d.beta = prior.beta.mode();
  if (d.sigma >= kMaxDiscount) {
    d.sigma = std::min(options.sigma_hi, kMaxDiscount);
    d.clamped = true;
    d.warning = "sigma prior mode is 1; clamped to " + std::to_string(d.sigma);
  }
  if (d.beta <= 0.0) {
    d.beta = options.beta_lo;
    d.clamped = true;
    if (!d.warning.empty()) d.warning += "; ";
    d.warning += "beta prior mode is 0; clamped to admissibility floor " + std::to_string(options.beta_lo);
  }
  return d;
}

std::vector<std::int64_t> pooled_counts(const NestedPartitionState& state) {
  std::vector<std::int64_t> out;
  out.reserve(state.k_y());
  for (const auto& f : state.families())
    for (const auto& d : f.dishes) out.push_back(d.count);
  return out;
}

FitResult fit_model(const NestedPartitionState& state, const PriorDensities& prior, ModelVariant variant,
                    const FitOptions& options) {
  prior.validate();
  if (state.n() == 0) throw DomainError("fit_model requires a nonempty dataset");
  FitResult res;
  res.variant = variant;
  res.default_family = default_new_family(prior, options);
  if (variant == ModelVariant::EDP) res.default_family.sigma = 0.0;
  if (res.default_family.clamped) res.warnings.push_back(res.default_family.warning);

  if (variant == ModelVariant::DP) {
    const auto counts = pooled_counts(state);
    res.labels = {kPooledFamily};
    res.families = {fit_edp(FamilyCounts(counts), prior.dp_beta, options)};
    return res;
  }

  const auto a = fit_alpha(state.n(), static_cast<std::int64_t>(state.k_x()), prior, options);
  res.alpha_hat = a.alpha;
  res.alpha_objective = a.objective;
  res.alpha_iterations = a.iterations;

  const auto& fams = state.families();
  const long nf = static_cast<long>(fams.size());
  res.labels.resize(fams.size());
  res.families.resize(fams.size());
  std::vector<std::string> errors(fams.size());
  const int threads = options.threads > 0 ? options.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (long r = 0; r < nf; ++r) {
    const auto& fam = fams[static_cast<std::size_t>(r)];
    res.labels[static_cast<std::size_t>(r)] = fam.label;
    std::vector<std::int64_t> counts;
    counts.reserve(fam.dishes.size());
    for (const auto& d : fam.dishes) counts.push_back(d.count);
    try {
      res.families[static_cast<std::size_t>(r)] = fit_family(counts, prior, variant, options);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(r)] = e.what();
    }
  }
  for (std::size_t r = 0; r < errors.size(); ++r)
    if (!errors[r].empty()) throw ConvergenceError("family '" + fams[r].label + "': " + errors[r]);
  return res;
}

}  // namespace epy
