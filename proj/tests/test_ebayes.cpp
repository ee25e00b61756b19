#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "epy/detail/math.hpp"
#include "epy/ebayes.hpp"
#include "epy/error.hpp"
#include "epy/species.hpp"

using namespace epy;

TEST_CASE("prior kernels and modes") {
  const PriorDensities p;
  CHECK(p.alpha.mode() == doctest::Approx(100.0));
  CHECK(p.beta.mode() == doctest::Approx(1.0));
  CHECK(p.sigma.mode() == 0.0);
  CHECK(p.sigma.log_kernel(0.0) == 0.0);
  CHECK(std::isfinite(p.sigma.log_kernel(0.5)));
  CHECK(BetaPrior{2, 2}.mode() == doctest::Approx(0.5));
  CHECK(GammaPrior{1, 1}.mode() == 0.0);

  PriorDensities bad;
  bad.beta.rate = 0.0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("default new family") {
  const auto d = default_new_family(PriorDensities{});
  CHECK(d.sigma == 0.0);
  CHECK(d.beta == doctest::Approx(1.0));
  CHECK_FALSE(d.clamped);

  PriorDensities p;
  p.sigma = {2.0, 2.0};
  CHECK(default_new_family(p).sigma == doctest::Approx(0.5));

  p = PriorDensities{};
  p.beta = {1.0, 1.0};
  const auto c = default_new_family(p);
  CHECK(c.clamped);
  CHECK(c.beta == 1e-6);
  CHECK_FALSE(c.warning.empty());
}

TEST_CASE("alpha objective matches a direct evaluation") {
  const PriorDensities p;
  for (double a : {0.01, 1.0, 37.0}) {
    const double direct = (2 - 1) * std::log(a) - 0.01 * a + 7 * std::log(a) + std::lgamma(a) - std::lgamma(a + 50);
    CHECK(alpha_objective(a, 50, 7, p.alpha) == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("fit alpha") {
  const PriorDensities p;
  // grid-scan oracle on alpha in 10^(-4..4)
  auto grid_best = [&](std::int64_t n, std::int64_t k) {
    double best = -INFINITY, arg = 0.0;
    for (int i = 0; i <= 80000; ++i) {
      const double a = std::pow(10.0, -4.0 + i * 1e-4);
      const double v = alpha_objective(a, n, k, p.alpha);
      if (v > best) {
        best = v;
        arg = a;
      }
    }
    return arg;
  };
  const auto small = fit_alpha(100, 1, p);
  CHECK(small.alpha < 1.0);
  CHECK(small.alpha == doctest::Approx(grid_best(100, 1)).epsilon(1e-3));
  const auto mid = fit_alpha(5000, 40, p);
  CHECK(mid.alpha == doctest::Approx(grid_best(5000, 40)).epsilon(1e-3));

  PriorDensities weak;
  weak.alpha = {1.0, 1e-9};
  CHECK(fit_alpha(10, 10, weak).alpha > 1e3);
  CHECK_THROWS_AS(fit_alpha(10, 11, p), DomainError);
  CHECK_THROWS_AS(fit_alpha(10, 0, p), DomainError);

  // objective monotone up to the bracket: boundary reported
  PriorDensities flat;
  flat.alpha = {1.0, 1e-300};
  CHECK_THROWS_AS(fit_alpha(1000, 1000, flat), ConvergenceError);
}

TEST_CASE("family objectives") {
  const PriorDensities p;
  const std::vector<std::int64_t> counts{5, 3, 1, 1};
  const FamilyCounts fc(counts);
  CHECK(fc.n() == 10);
  CHECK(fc.k() == 4);
  // EPY objective from the sequential urn: prior + log of the within-family EPPF
  for (double sigma : {0.0, 0.2, 0.6}) {
    for (double beta : {0.3, 4.0}) {
      double lp = std::log(beta) - beta + 9 * std::log(1 - sigma);
      // sequence: dishes in order of first appearance, all draws of one dish consecutive
      double seq = 0.0;
      int n = 0, k = 0;
      for (auto c : counts) {
        for (std::int64_t t = 0; t < c; ++t) {
          if (t == 0) {
            seq += n == 0 ? 0.0 : std::log((beta + k * sigma) / (beta + n));
            ++k;
          } else {
            seq += std::log((t - sigma) / (beta + n));
          }
          ++n;
        }
      }
      CHECK(epy_family_objective(sigma, beta, fc, p) == doctest::Approx(lp + seq).epsilon(1e-12));
    }
  }
  for (double beta : {1e-3, 0.5, 7.0, 900.0})
    CHECK(epy_family_objective(0.0, beta, fc, p) == edp_family_objective(beta, fc, p.beta));
  // 10^6 observations stay finite
  const std::vector<std::int64_t> big{600000, 300000, 100000};
  CHECK(std::isfinite(epy_family_objective(0.4, 3.0, FamilyCounts(big), p)));
}

TEST_CASE("fit family: single species gives sigma-hat = 0") {
  const PriorDensities p;
  const std::vector<std::int64_t> one{17};
  const auto f = fit_family(one, p, ModelVariant::EPY);
  CHECK(f.sigma == 0.0);
  CHECK(f.sigma_at_boundary);
  const auto e = fit_family(one, p, ModelVariant::EDP);
  CHECK(e.beta == doctest::Approx(f.beta).epsilon(1e-6));
  CHECK_THROWS_AS(fit_family(one, p, ModelVariant::DP), DomainError);
}

TEST_CASE("fit family: objective dominates starts and the prior mode") {
  const PriorDensities p;
  Stream s(4);
  const FitOptions o;
  for (auto params : {PyParams::make(0.3, 1.0), PyParams::make(0.0, 10.0), PyParams::make(0.7, 0.5)}) {
    const auto counts = simulate_py_counts(params, 2000, s);
    const FamilyCounts fc(counts);
    const auto f = fit_family(counts, p, ModelVariant::EPY, o);
    CHECK(PyParams::make(f.sigma, f.beta).sigma() == f.sigma);
    for (double s0 : o.sigma_starts)
      for (double b0 : o.beta_starts) CHECK(f.objective >= epy_family_objective(s0, b0, fc, p));
    CHECK(f.objective >= epy_family_objective(0.0, 1.0, fc, p));
    CHECK(f.objective == epy_family_objective(f.sigma, f.beta, fc, p));
    // local optimality on a small neighbourhood
    for (double ds : {-1e-4, 1e-4})
      for (double db : {-1e-4, 1e-4}) {
        const double sg = std::clamp(f.sigma + ds, 0.0, 0.99);
        CHECK(f.objective >= epy_family_objective(sg, f.beta * (1 + db), fc, p) - 1e-9);
      }
  }
}

TEST_CASE("fit family: sigma recovery on a synthetic PY(0.5, 2) family") {
  Stream s(5);
  const auto counts = simulate_py_counts(PyParams::make(0.5, 2.0), 10000, s);
  const auto f = fit_family(counts, PriorDensities{}, ModelVariant::EPY);
  CHECK(f.sigma > 0.4);
  CHECK(f.sigma < 0.6);
}

TEST_CASE("fit model: EDP data gives sigma-hat near 0") {
  Stream s(6);
  std::vector<double> sig;
  for (int r = 0; r < 15; ++r) {
    const auto counts = simulate_py_counts(PyParams::make(0.0, 3.0), 3000, s);
    sig.push_back(fit_family(counts, PriorDensities{}, ModelVariant::EPY).sigma);
  }
  std::sort(sig.begin(), sig.end());
  CHECK(sig[sig.size() / 2] < 0.05);
}

TEST_CASE("fit model variants") {
  const std::vector<CountRecord> rec{{"A", "a1", 30}, {"A", "a2", 5}, {"A", "a3", 1}, {"B", "b1", 4},
                                     {"B", "b2", 4},  {"C", "c1", 1}, {"C", "c2", 2}};
  const auto state = state_from_counts(rec);
  const PriorDensities p;

  const auto dp = fit_model(state, p, ModelVariant::DP);
  REQUIRE(dp.families.size() == 1u);
  CHECK(dp.labels[0] == kPooledFamily);
  CHECK(dp.alpha_hat == 0.0);
  CHECK(dp.families[0].sigma == 0.0);
  const auto pooled = pooled_counts(state);
  CHECK(dp.families[0].beta == doctest::Approx(fit_family(pooled, {p.alpha, p.sigma, p.dp_beta, p.dp_beta}, ModelVariant::EDP).beta));

  const auto edp = fit_model(state, p, ModelVariant::EDP);
  CHECK(edp.families.size() == 3u);
  for (const auto& f : edp.families) CHECK(f.sigma == 0.0);
  CHECK(edp.alpha_hat == doctest::Approx(fit_alpha(state.n(), 3, p).alpha));

  FitOptions one;
  one.threads = 1;
  const auto epy1 = fit_model(state, p, ModelVariant::EPY, one);
  const auto epyn = fit_model(state, p, ModelVariant::EPY);
  for (std::size_t r = 0; r < 3; ++r) {
    CHECK(epy1.labels[r] == epyn.labels[r]);
    CHECK(epy1.families[r].sigma == epyn.families[r].sigma);
    CHECK(epy1.families[r].beta == epyn.families[r].beta);
  }
  CHECK_THROWS_AS(fit_model(NestedPartitionState{}, p, ModelVariant::EPY), DomainError);
}

TEST_CASE("fit model: one observation sits at the prior modes") {
  const std::vector<CountRecord> rec{{"A", "a", 1}};
  const auto f = fit_model(state_from_counts(rec), PriorDensities{}, ModelVariant::EPY);
  CHECK(f.alpha_hat == doctest::Approx(100.0).epsilon(1e-6));
  CHECK(f.families[0].sigma == 0.0);
  CHECK(f.families[0].beta == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("variant names") {
  CHECK(parse_variant("dp") == ModelVariant::DP);
  CHECK(to_string(ModelVariant::EPY) == "epy");
  CHECK_THROWS_AS(parse_variant("py"), DomainError);
}
