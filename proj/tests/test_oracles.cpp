#include <doctest.h>

#include "epy/oracles.hpp"

using namespace epy;

namespace {

void check_all(const std::vector<IdentityReport>& reports) {
  REQUIRE_FALSE(reports.empty());
  bool has_control = false;
  for (const auto& r : reports) {
    INFO(to_json_line(r));
    CHECK(r.pass);
    has_control = has_control || r.negative_control;
  }
  CHECK(has_control);
}

}  // namespace

TEST_CASE("report decisions") {
  IdentityReport r{"x", "analytic", false, 1e-3, 1e-2, false, 1, ""};
  r.decide();
  CHECK(r.pass);
  r.negative_control = true;
  r.decide();
  CHECK_FALSE(r.pass);
  CHECK(to_json_line(r).find("\"kind\":\"negative-control\"") != std::string::npos);
}

TEST_CASE("light oracle runs") {
  check_all(check_eppf_consistency(50, 8, 3, 1));
  check_all(check_cor2_collapse({1.0, 2.0}, 3));
  check_all(check_spike_slab_equivalence(1.0, 2.0, 3));
  check_all(check_bounded_clusters(3, 1.0, 500, 50, 2));
  check_all(check_dp_limit(1e-3, 5000, 3));
  check_all(check_moment_measure(2000, 4));
  check_all(check_edp_restriction(5));
}

TEST_CASE("unknown suite") { CHECK_THROWS(run_suite("nope", 1)); }
