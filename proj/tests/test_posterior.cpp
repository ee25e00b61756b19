#include <doctest.h>

#include <cmath>

#include "epy/error.hpp"
#include "epy/posterior.hpp"

using namespace epy;

namespace {

const std::vector<CountRecord> kFig1{
    {"F1", "S1", 3}, {"F1", "S2", 2}, {"F2", "S3", 2}, {"F3", "S4", 1}, {"F3", "S5", 1}};

}  // namespace

TEST_CASE("posterior of the family measure") {
  EpyModel m;
  m.alpha = 1.5;
  const auto empty = posterior_x(m, NestedPartitionState{});
  CHECK(empty.base_atoms.empty());
  CHECK(empty.diffuse_fraction() == 1.0);

  const auto px = posterior_x(m, state_from_counts(kFig1));
  REQUIRE(px.base_atoms.size() == 3u);
  CHECK(px.base_atoms[0].second == 5);
  CHECK(px.base_atoms[1].second == 2);
  CHECK(px.base_atoms[2].second == 2);
  CHECK(px.diffuse_mass == 1.5);
  CHECK(px.total_mass() == doctest::Approx(10.5));

  NestedPartitionState big;
  const auto r = big.add_family("x", PyParams{});
  big.add_to_dish(r, "y", 1000000);
  CHECK(posterior_x(m, big).atom_fraction(0) > 1 - 1e-5);
}

TEST_CASE("posterior of a conditional") {
  EpyModel m;
  m.params["F1"] = PyParams::make(0.5, 1.0);
  m.params["U"] = PyParams::make(0.1, 3.0);
  auto s = state_from_counts(kFig1);
  apply_params(s, m);

  const auto unobserved = posterior_y(m, s, "U");
  CHECK_FALSE(unobserved.observed);
  CHECK(unobserved.prior == PyParams::make(0.1, 3.0));

  const auto p = posterior_y(m, s, "F1");
  REQUIRE(p.dirichlet_params.size() == 3u);
  CHECK(p.dirichlet_params[0] == doctest::Approx(2.0));
  CHECK(p.dirichlet_params[1] == doctest::Approx(2.5));
  CHECK(p.dirichlet_params[2] == doctest::Approx(1.5));
  CHECK(std::get<PyParams>(p.remainder) == PyParams::make(0.5, 2.0));

  NestedPartitionState b;
  const auto r = b.add_family("B", PyParams::make(-0.2, 1.0, 5));
  b.add_to_dish(r, "a", 2);
  b.add_to_dish(r, "b", 1);
  const auto pb = posterior_y(m, b, "B");
  const auto& fin = std::get<FiniteRemainder>(pb.remainder);
  CHECK(fin.components == 3u);
  CHECK(fin.component_param == doctest::Approx(0.2));

  // k = H: W0 has parameter 0 and no remainder components
  NestedPartitionState f;
  const auto r2 = f.add_family("B", PyParams::make(-0.5, 1.0, 2));
  f.add_to_dish(r2, "a", 2);
  f.add_to_dish(r2, "b", 1);
  const auto pf = posterior_y(m, f, "B");
  CHECK(pf.dirichlet_params[0] == 0.0);
  CHECK(std::get<FiniteRemainder>(pf.remainder).components == 0u);
}

TEST_CASE("posterior predictive identities") {
  EpyModel m;
  m.alpha = 0.7;
  m.params["F1"] = PyParams::make(0.3, 2.0);
  m.params["F2"] = PyParams::make(-0.5, 1.5, 3);
  auto s = state_from_counts(kFig1);
  apply_params(s, m);
  const auto rep = posterior_predictive_check(m, s);
  CHECK(rep.ok);
  CHECK(rep.max_deviation <= 1e-12);
  CHECK(posterior_predictive_check(m, NestedPartitionState{}).ok);
}

TEST_CASE("posterior measure weights have Dirichlet means") {
  EpyModel m;
  m.alpha = 1.0;
  m.params["F1"] = PyParams::make(0.25, 1.0);
  auto s = state_from_counts(kFig1);
  apply_params(s, m);
  TruncationPolicy policy;
  policy.residual_tol = 1e-4;
  Stream st(21);
  const int N = 20000;
  double w1 = 0, w1sq = 0, w0 = 0, w0sq = 0;
  for (int i = 0; i < N; ++i) {
    const auto t = sample_posterior_measure(m, s, st, policy);
    const auto& in = t.inner.at("F1");
    double a = 0.0, rest = 0.0;
    for (const auto& at : in.atoms) (at.label == "S1" ? a : rest) += at.weight;
    double s2 = 0.0;
    for (const auto& at : in.atoms)
      if (at.label == "S2") s2 += at.weight;
    const double z = rest - s2 + in.residual;
    w1 += a;
    w1sq += a * a;
    w0 += z;
    w0sq += z * z;
  }
  auto within = [&](double sum, double sq, double expect) {
    const double mean = sum / N;
    const double se = std::sqrt((sq / N - mean * mean) / (N - 1));
    CHECK(std::abs(mean - expect) <= 3 * se + 1e-4);
  };
  within(w1, w1sq, (3 - 0.25) / 6.0);
  within(w0, w0sq, (1 + 2 * 0.25) / 6.0);
}

TEST_CASE("posterior measure on an empty state is a prior draw") {
  EpyModel m;
  m.alpha = 2.0;
  Stream a(3), b(3);
  const auto post = sample_posterior_measure(m, NestedPartitionState{}, a);
  const auto prior = sample_epy_truncated(m, b);
  REQUIRE_FALSE(post.outer.empty());
  CHECK(post.outer[0].weight == prior.outer[0].weight);
}
