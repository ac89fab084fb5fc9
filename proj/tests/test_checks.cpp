#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "psearch/checks.hpp"
#include "psearch/losses.hpp"

using namespace psearch;

TEST_CASE("gradient suite passes with the library gradient") {
  const auto r = checks::gradient_suite(1);
  for (const auto& c : r) {
    INFO(c.name << " " << c.detail);
    CHECK(c.passed);
  }
}

TEST_CASE("a sign-flipped anchor gradient is caught") {
  auto flipped = [](const Subgroup& s) {
    Vec g = checks::library_anchor_gradient(s);
    for (double& x : g) x = -x;
    return g;
  };
  const auto r = checks::gradient_suite(1, flipped, 10);
  CHECK_FALSE(r.front().passed);
  CHECK_FALSE(checks::all_passed(r));
}

TEST_CASE("invariant suite passes") {
  const auto r = checks::invariant_suite(2, 1000);
  for (const auto& c : r) {
    INFO(c.name << " " << c.detail);
    CHECK(c.passed);
  }
  std::ostringstream out;
  checks::print_report(out, r);
  CHECK(out.str().find("PASS") != std::string::npos);
}

TEST_CASE("brute-force oracles") {
  const std::vector<std::size_t> ranked{2, 0, 1};
  const std::vector<char> rel{0, 1, 1};
  CHECK(checks::brute_force_ap(ranked, rel) == doctest::Approx((1.0 + 2.0 / 3.0) / 2));
  CHECK(checks::brute_force_topk(ranked, rel, 1));
  const std::vector<char> late{0, 1, 0};
  CHECK_FALSE(checks::brute_force_topk(ranked, late, 2));
  CHECK(checks::brute_force_topk(ranked, late, 3));
}
