// Acceptance run: one line per criterion, tolerances and runtime limits fixed here.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "epy/ebayes.hpp"
#include "epy/oracles.hpp"
#include "epy/species.hpp"

using namespace epy;

namespace {

constexpr std::uint64_t kSeed = 20240601;

struct Outcome {
  bool pass = true;
  std::string detail;
};

Outcome all_pass(const std::vector<IdentityReport>& reports) {
  Outcome o;
  double worst = 0.0;
  for (const auto& r : reports) {
    if (!r.pass) {
      o.pass = false;
      o.detail += " failed: " + r.name + " (" + r.detail + ");";
    }
    if (!r.negative_control) worst = std::max(worst, r.max_deviation);
  }
  o.detail = std::to_string(reports.size()) + " checks, largest identity statistic " + format_number(worst) + ";" +
             o.detail;
  return o;
}

int failures = 0;

void criterion(const char* id, const char* name, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("error: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char timing[96];
  std::snprintf(timing, sizeof timing, "%.1f s, limit %.0f s", secs, limit_s);
  const bool pass = o.pass && secs < limit_s;
  if (!pass) ++failures;
  std::printf("[%s] %s %s: %s (%s)\n", pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), timing);
  std::fflush(stdout);
}

bool near(double v, double target, double tol) { return std::abs(v - target) <= tol; }

void amazon(const char* path) {
  const auto data = load_csv(path);
  const auto state = data.state();
  const PriorDensities prior;
  criterion("9a", "amazon dp beta", 3600, [&] {
    const auto f = fit_model(state, prior, ModelVariant::DP);
    const double b = f.families.at(0).beta;
    return Outcome{near(b, 765.53, 0.02), "beta_hat " + format_number(b) + " (target 765.53 +- 0.02)"};
  });
  criterion("9b", "amazon alpha and edp beta_7", 3600, [&] {
    const auto edp = fit_model(state, prior, ModelVariant::EDP);
    const auto epy = fit_model(state, prior, ModelVariant::EPY);
    const double b7 = edp.families.at(6).beta;
    const bool ok = near(edp.alpha_hat, 11.34, 0.02) && near(epy.alpha_hat, 11.34, 0.02) && near(b7, 41.19, 0.05);
    return Outcome{ok, "alpha_hat edp " + format_number(edp.alpha_hat) + ", epy " + format_number(epy.alpha_hat) +
                           " (target 11.34 +- 0.02); beta_7 " + format_number(b7) + " (target 41.19 +- 0.05)"};
  });
  criterion("9c", "amazon held-out ordering", 6 * 3600, [&] {
    double mae[3] = {0, 0, 0};
    constexpr int splits = 5;
    for (int s = 0; s < splits; ++s) {
      RunConfig rc;
      rc.n_train = 250000;
      rc.reps = 100;
      rc.seed = kSeed + static_cast<std::uint64_t>(s);
      const auto rep = compare_models(data, rc);
      for (int i = 0; i < 3; ++i) mae[i] += rep.models[static_cast<std::size_t>(i)].mae / splits;
    }
    return Outcome{mae[2] <= mae[1] && mae[1] <= mae[0], "mean MAE dp " + format_number(mae[0]) + ", edp " +
                                                             format_number(mae[1]) + ", epy " + format_number(mae[2])};
  });
}

}  // namespace

int main() {
  criterion("1", "eppf vs sequential urn", 5, [] { return all_pass(check_eppf_consistency(200, 12, 20, kSeed)); });
  criterion("2", "posterior consistency", 30,
            [] { return all_pass(check_posterior_consistency(100, 100000, kSeed)); });
  criterion("3", "collapse to a mixture-base dp", 5, [] { return all_pass(check_cor2_collapse({1.0, 2.0}, 4)); });
  criterion("4", "spike and slab equivalence", 5, [] { return all_pass(check_spike_slab_equivalence(1.0, 2.0, 4)); });
  criterion("5", "bounded clusters", 30, [] { return all_pass(check_bounded_clusters(5, 1.0, 10000, 100, kSeed)); });
  criterion("6", "dp limit", 60, [] { return all_pass(check_dp_limit(1e-3, 100000, kSeed)); });
  criterion("7", "empirical-bayes recovery", 300, [] {
    auto reports = check_eb_recovery({}, kSeed);
    const auto edp = check_edp_restriction(kSeed);
    reports.insert(reports.end(), edp.begin(), edp.end());
    return all_pass(reports);
  });
  {
    // Same draws with near-flat priors, to separate prior shrinkage from estimator error.
    RecoveryOptions flat;
    flat.prior.sigma = {1.0, 1.0};
    flat.prior.beta = {1.0, 1e-9};
    for (const auto& r : check_eb_recovery(flat, kSeed))
      std::printf("[INFO] 7 flat-prior %s: %s, %s\n", r.name.c_str(), r.pass ? "inside" : "outside", r.detail.c_str());
  }
  criterion("8", "band coverage", 900, [] {
    const auto r = check_prediction_coverage({}, kSeed);
    return Outcome{r.pass, r.detail};
  });
  if (const char* path = std::getenv("EPY_AMAZON_CSV"); path && *path)
    amazon(path);
  else
    std::printf("[SKIP] 9 amazon dataset: set EPY_AMAZON_CSV to run\n");
  criterion("10", "thread determinism", 60, [] {
    EpyModel truth;
    truth.alpha = 5.0;
    truth.default_params = PyParams::make(0.4, 2.0);
    const auto data = simulate_dataset(truth, 10000, kSeed);
    FittedModel m;
    m.alpha = truth.alpha;
    m.default_params = truth.default_params;
    RunConfig rc;
    rc.grid = default_grid(10000);
    rc.reps = 1000;
    rc.seed = kSeed;
    rc.threads = 1;
    const auto one = predict_curve(data.state(), m, rc);
    rc.threads = 8;
    const auto eight = predict_curve(data.state(), m, rc);
    return Outcome{one == eight, one == eight ? "1 and 8 threads bit-identical" : "curves differ"};
  });
  std::printf("%s: %d criteria failed\n", failures ? "FAILED" : "OK", failures);
  return failures ? 1 : 0;
}
