#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "epy/error.hpp"
#include "epy/species.hpp"

using namespace epy;

namespace {

std::string data_path(const std::string& name) { return std::string(EPY_TEST_DATA) + "/" + name; }

std::map<std::pair<Label, Label>, std::int64_t> multiset(const SpeciesDataset& d) {
  std::map<std::pair<Label, Label>, std::int64_t> m;
  for (const auto& r : d.records) m[{r.family, r.species}] += r.count;
  return m;
}

}  // namespace

TEST_CASE("csv ingestion") {
  const auto d = load_csv(data_path("small.csv"));
  REQUIRE(d.records.size() == 3u);
  CHECK(d.records[0].species == "Euterpe oleracea");
  CHECK(d.records[0].count == 8580);
  CHECK(d.records[1].species == "Astrocaryum, sp.");
  CHECK(d.warnings.size() == 1u);
  CHECK(d.n() == 8580 + 3 + 12);
  CHECK(d.k_x() == 2u);
  CHECK(d.k_y() == 3u);

  std::istringstream one("family,species,count\nArecaceae,Euterpe oleracea,8572\n");
  CHECK(parse_csv(one).records.at(0).count == 8572);

  CHECK(load_csv(data_path("empty.csv")).n() == 0);
  CHECK_THROWS_AS(load_csv(data_path("zero.csv")), ParseError);
  CHECK_THROWS_AS(load_csv(data_path("badheader.csv")), ParseError);
  CHECK_THROWS_AS(load_csv(data_path("noninteger.csv")), ParseError);
  CHECK_THROWS_AS(load_csv(data_path("missing.csv")), ParseError);
  try {
    load_csv(data_path("zero.csv"));
  } catch (const ParseError& e) {
    CHECK(e.line() == 2u);
  }
  std::istringstream ragged("family,species,count\nF,S\n");
  CHECK_THROWS_AS(parse_csv(ragged), ParseError);
}

TEST_CASE("train/test split") {
  const auto d = load_csv(data_path("fig1.csv"));
  const auto all = split_train_test(d, d.n(), 3);
  CHECK(all.test.empty());
  CHECK(all.train.n() == d.n());

  const std::vector<CountRecord> two{{"F", "a", 3}, {"F", "b", 2}};
  const SpeciesDataset small{two, {}};
  const auto sp = split_train_test(small, 3, 9);
  CHECK(sp.test.size() == 2u);
  auto merged = small;
  merged.records.clear();
  for (const auto& f : sp.train.families())
    for (const auto& dsh : f.dishes) merged.records.push_back({f.label, dsh.label, dsh.count});
  for (const auto& o : sp.test) merged.records.push_back({o.family, o.species, 1});
  CHECK(multiset(merged) == multiset(small));

  const auto a = split_train_test(d, 4, 17), b = split_train_test(d, 4, 17);
  CHECK(a.test == b.test);
  CHECK_THROWS_AS(split_train_test(d, d.n() + 1, 1), DomainError);
  CHECK_THROWS_AS(split_train_test(d, 0, 1), DomainError);
}

TEST_CASE("default grid") {
  const auto g = default_grid(10000);
  CHECK(g.size() <= 20u);
  CHECK(g.front() == 1);
  CHECK(g.back() == 10000);
  CHECK(std::is_sorted(g.begin(), g.end()));
  CHECK(std::adjacent_find(g.begin(), g.end()) == g.end());
  CHECK(default_grid(0) == std::vector<std::int64_t>{0});
}

TEST_CASE("new species in the test sequence") {
  const std::vector<Observation> train_seq{{"F1", "S1"}};
  const auto train = state_from_sequence(train_seq);
  const std::vector<Observation> test{{"F1", "S2"}, {"F1", "S1"}, {"F2", "S3"}};
  const auto c = count_new_in_test(train, test);
  CHECK(c.new_species == std::vector<std::int64_t>{1, 1, 2});
  CHECK(c.new_families == std::vector<std::int64_t>{0, 0, 1});

  const std::vector<Observation> seen{{"F1", "S1"}, {"F1", "S1"}};
  CHECK(count_new_in_test(train, seen).new_species == std::vector<std::int64_t>{0, 0});
  const std::vector<Observation> disjoint{{"G", "a"}, {"G", "b"}, {"G", "a"}, {"H", "c"}};
  CHECK(count_new_in_test(train, disjoint).new_species == std::vector<std::int64_t>{1, 2, 2, 3});
}

TEST_CASE("quantiles are type 7") {
  const std::vector<double> v{1, 2, 3, 4, 5};
  CHECK(quantile_sorted(v, 0.5) == 3.0);
  CHECK(quantile_sorted(v, 0.1) == doctest::Approx(1.4));
  CHECK(quantile_sorted(v, 0.95) == doctest::Approx(4.8));
}

TEST_CASE("predicted curves") {
  const auto d = load_csv(data_path("fig1.csv"));
  FittedModel m;
  m.alpha = 1.0;
  m.families["F1"] = PyParams::make(0.5, 1.0);
  m.default_params = PyParams::make(0.0, 1.0);
  RunConfig rc;
  rc.reps = 300;
  rc.grid = {0};
  const auto zero = predict_curve(d.state(), m, rc);
  CHECK(zero.mean_ky == std::vector<double>{0.0});

  rc.grid = default_grid(500);
  rc.seed = 42;
  const auto c = predict_curve(d.state(), m, rc);
  for (std::size_t i = 0; i < c.grid.size(); ++i) {
    CHECK(c.mean_ky[i] <= static_cast<double>(c.grid[i]));
    CHECK(c.mean_kx[i] <= c.mean_ky[i]);
    CHECK(c.quantiles_ky.at(0.05)[i] <= c.mean_ky[i]);
    CHECK(c.mean_ky[i] <= c.quantiles_ky.at(0.95)[i]);
    if (i) {
      CHECK(c.mean_ky[i] >= c.mean_ky[i - 1]);
      CHECK(c.quantiles_ky.at(0.05)[i] >= c.quantiles_ky.at(0.05)[i - 1]);
    }
  }
  // determinism and thread-count invariance
  CHECK(predict_curve(d.state(), m, rc) == c);
  CHECK(predict_curve_serial(d.state(), m, rc) == c);
  for (int t : {1, 3, 8}) {
    rc.threads = t;
    CHECK(predict_curve(d.state(), m, rc) == c);
  }

  RunConfig bad = rc;
  bad.reps = 0;
  CHECK_THROWS_AS(predict_curve(d.state(), m, bad), DomainError);
  bad = rc;
  bad.quantiles = {1.0};
  CHECK_THROWS_AS(predict_curve(d.state(), m, bad), DomainError);
  bad = rc;
  bad.grid = {5, 5};
  CHECK_THROWS_AS(predict_curve(d.state(), m, bad), DomainError);
}

TEST_CASE("pooled dp prediction") {
  const auto state = load_csv(data_path("fig1.csv")).state();
  FittedModel m;
  m.variant = ModelVariant::DP;
  m.alpha = 0.0;
  m.families[kPooledFamily] = PyParams::make(0.0, 2.0);
  m.default_params = m.families[kPooledFamily];
  const auto pooled = prediction_state(state, m);
  CHECK(pooled.k_x() == 1u);
  CHECK(pooled.k_y() == 5u);
  CHECK(pooled.n() == 9);
  RunConfig rc;
  rc.grid = {1, 10, 100};
  rc.reps = 200;
  const auto c = predict_curve(state, m, rc);
  for (double kx : c.mean_kx) CHECK(kx == 0.0);
  CHECK(c.mean_ky.back() > 0.0);
}

TEST_CASE("curve csv") {
  PredictionCurve c;
  c.grid = {1, 10};
  c.mean_ky = {0.5, 3.25};
  c.mean_kx = {0.0, 1.0};
  c.quantiles_ky[0.05] = {0, 1};
  c.quantiles_ky[0.95] = {1, 6};
  std::ostringstream os;
  write_curve_csv(os, c);
  CHECK(os.str() == "m,mean_ky,mean_kx,q0.05,q0.95\n1,0.5,0,0,1\n10,3.25,1,1,6\n");
}

TEST_CASE("synthetic py counts follow the urn") {
  // expected number of dishes after n draws of a DP(beta): sum beta / (beta + i)
  Stream s(8);
  const double beta = 3.0;
  const int n = 200, reps = 4000;
  double expect = 0.0;
  for (int i = 0; i < n; ++i) expect += beta / (beta + i);
  for (auto p : {PyParams::make(0.0, beta)}) {
    double sum = 0.0, sq = 0.0;
    for (int r = 0; r < reps; ++r) {
      const double k = static_cast<double>(simulate_py_counts(p, n, s).size());
      sum += k;
      sq += k * k;
    }
    const double mean = sum / reps;
    CHECK(std::abs(mean - expect) <= 4 * std::sqrt((sq / reps - mean * mean) / reps));
  }
  // bounded branch never exceeds H; PY(sigma, beta) dish means via the recursion
  // E[k_{i+1}] = E[k_i] + (beta + sigma E[k_i]) / (beta + i)
  for (auto p : {PyParams::make(-0.5, 1.5, 3), PyParams::make(0.4, 1.0)}) {
    double ek = 0.0;
    for (int i = 0; i < n; ++i) ek += p.bounded() ? (1.0 - ek / *p.H()) * p.beta() / (p.beta() + i)
                                                  : (p.beta() + p.sigma() * ek) / (p.beta() + i);
    double sum = 0.0, sq = 0.0;
    for (int r = 0; r < reps; ++r) {
      const auto counts = simulate_py_counts(p, n, s);
      if (p.bounded()) CHECK(counts.size() <= 3u);
      std::int64_t tot = 0;
      for (auto c : counts) tot += c;
      CHECK(tot == n);
      const double k = static_cast<double>(counts.size());
      sum += k;
      sq += k * k;
    }
    const double mean = sum / reps;
    CHECK(std::abs(mean - ek) <= 4 * std::sqrt((sq / reps - mean * mean) / reps) + 1e-9);
  }
}

TEST_CASE("simulated heterogeneous data: EPY beats DP on held-out discoveries") {
  EpyModel truth;
  truth.alpha = 3.0;
  truth.default_params = PyParams::make(0.0, 2.0);
  // alternate strongly heavy-tailed and light families by label order
  Stream s(10);
  std::vector<Observation> seq;
  NestedPartitionState st;
  for (int i = 0; i < 30000; ++i) {
    const auto o = step(st, truth, s);
    if (o.new_family) {
      const auto r = *st.find_family(o.x);
      truth.params[o.x] = r % 2 ? PyParams::make(0.0, 1.0) : PyParams::make(0.6, 5.0);
      st.set_params(r, truth.params[o.x]);
    }
    seq.push_back({o.x, o.y});
  }
  const auto data = dataset_from_sequence(seq);
  RunConfig rc;
  rc.reps = 100;
  rc.n_train = 15000;
  rc.seed = 3;
  const auto rep = compare_models(data, rc);
  REQUIRE(rep.models.size() == 3u);
  CHECK(rep.models[2].mae <= rep.models[0].mae);
  const auto again = compare_models(data, rc);
  CHECK(again.models[2].curve == rep.models[2].curve);
}
