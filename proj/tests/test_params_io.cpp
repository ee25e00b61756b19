#include <doctest.h>

#include "epy/error.hpp"
#include "epy/params_io.hpp"

using namespace epy;

TEST_CASE("params round trip") {
  FittedModel m;
  m.variant = ModelVariant::EPY;
  m.alpha = 11.34;
  m.families["A"] = PyParams::make(0.25, 1.0 / 3.0);
  m.families["B"] = PyParams::make(-0.5, 1.5, 3);
  m.default_params = PyParams::make(0.1, 2.0);
  const auto back = params_from_json(params_to_json(m));
  CHECK(back.variant == m.variant);
  CHECK(back.alpha == m.alpha);
  CHECK(back.families == m.families);
  CHECK(back.default_params == m.default_params);
}

TEST_CASE("dp params carry the pooled family") {
  FittedModel m;
  m.variant = ModelVariant::DP;
  m.alpha = 0.0;
  m.families[kPooledFamily] = PyParams::make(0.0, 765.5);
  m.default_params = m.families[kPooledFamily];
  const auto back = params_from_json(params_to_json(m));
  CHECK(back.variant == ModelVariant::DP);
  CHECK(back.families.at(kPooledFamily).beta() == 765.5);
  CHECK_THROWS_AS(params_from_json(R"({"variant":"dp","alpha":0,"families":[],
      "default":{"sigma":0,"beta":1,"H":null}})"),
                  ParseError);
}

TEST_CASE("malformed params") {
  CHECK_THROWS_AS(params_from_json("{not json"), ParseError);
  CHECK_THROWS_AS(params_from_json(R"({"variant":"epy"})"), ParseError);
  CHECK_THROWS_AS(params_from_json(R"({"variant":"xx","alpha":1,"families":[],
      "default":{"sigma":0,"beta":1,"H":null}})"),
                  ParseError);
  CHECK_THROWS_AS(params_from_json(R"({"variant":"epy","alpha":1,
      "families":[{"label":"A","sigma":0.5,"beta":-1,"H":null}],
      "default":{"sigma":0,"beta":1,"H":null}})"),
                  DomainError);
  CHECK_THROWS_AS(params_from_json(R"({"variant":"epy","alpha":-1,"families":[],
      "default":{"sigma":0,"beta":1,"H":null}})"),
                  DomainError);
  CHECK_THROWS_AS(load_params("/nonexistent/params.json"), ParseError);
}

TEST_CASE("priors json") {
  PriorDensities p;
  p.alpha = {3.0, 0.5};
  p.sigma = {2.0, 5.0};
  const auto back = priors_from_json(priors_to_json(p));
  CHECK(back.alpha.shape == 3.0);
  CHECK(back.alpha.rate == 0.5);
  CHECK(back.sigma.a == 2.0);
  CHECK(back.sigma.b == 5.0);
  CHECK(back.dp_beta.rate == p.dp_beta.rate);

  const auto partial = priors_from_json(R"({"beta":{"shape":4,"rate":2}})");
  CHECK(partial.beta.shape == 4.0);
  CHECK(partial.alpha.shape == PriorDensities{}.alpha.shape);
  CHECK_THROWS_AS(priors_from_json(R"({"beta":{"shape":-1,"rate":2}})"), DomainError);
  CHECK_THROWS_AS(priors_from_json("[1,"), ParseError);
}
