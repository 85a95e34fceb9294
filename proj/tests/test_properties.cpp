#include "doctest.h"

#include "spherelift/properties.hpp"

using namespace spherelift;

namespace {

const IcosphereHierarchy& mesh3() {
  static const auto h = build_hierarchy(3);
  return h;
}

}  // namespace

TEST_CASE("pristine operators pass every property") {
  PropertyOptions opts;
  opts.attention_trials = 3;
  const auto report = run_properties(mesh3(), opts);
  CHECK(report.ok());
  // Five per-level checks on levels 1-3 plus the gradient check.
  CHECK(report.results.size() == 16);
  for (const auto& r : report.results) {
    INFO(r.name << " level " << r.level << ": " << r.counterexample);
    CHECK(r.passed);
  }
  CHECK(report.to_json().size() == 16);
}

TEST_CASE("a perturbed predict row sum breaks the vanishing moment") {
  PropertyOptions opts;
  opts.level = 2;
  opts.attention_trials = 0;
  opts.gradient = false;
  opts.perturbed_row_sum = 1.1;
  const auto report = run_properties(mesh3(), opts);
  CHECK_FALSE(report.ok());
  const PropertyResult* vm = nullptr;
  for (const auto& r : report.results)
    if (r.name == "vanishing_moment") vm = &r;
  REQUIRE(vm != nullptr);
  CHECK_FALSE(vm->passed);
  // Constant c gives D = c (1 - s_p (1 + s_u)) with s_u = 1.
  CHECK(vm->value == doctest::Approx(1.2).epsilon(1e-12));
  CHECK(vm->counterexample.find("odd node") != std::string::npos);
  CHECK(report.first_failure()->name == "row_sums");
  // Lifting stays invertible whatever the operators.
  for (const auto& r : report.results)
    if (r.name == "invertibility" || r.name == "idempotence" || r.name == "locality") CHECK(r.passed);
}

TEST_CASE("locality is exactly two hops at level 2") {
  PropertyOptions opts;
  opts.level = 2;
  opts.gradient = false;
  opts.impulses = 1000;
  const auto report = run_properties(mesh3(), opts);
  for (const auto& r : report.results)
    if (r.name == "locality") CHECK(r.value == 2.0);
}

TEST_CASE("invalid property options") {
  PropertyOptions opts;
  opts.level = 4;
  CHECK_THROWS_AS(run_properties(mesh3(), opts), Error);
  CHECK_THROWS_AS(run_properties(build_hierarchy(0), PropertyOptions{}), Error);
}
