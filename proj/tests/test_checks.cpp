#include <doctest.h>

#include "saflow/checks.hpp"

using namespace saflow;

TEST_SUITE("checks") {

TEST_CASE("fast suite passes end to end") {
  auto results = checks::default_suite(false);
  REQUIRE(!results.empty());
  for (const auto& r : results) {
    INFO(r.name, ": ", r.detail);
    CHECK(r.pass);
  }
}

TEST_CASE("tampered gradient is caught and nothing else trips") {
  auto results = checks::default_suite(true);
  std::size_t failed = 0;
  for (const auto& r : results) {
    if (!r.pass) {
      ++failed;
      CHECK(r.name == "gradient_matches_fd");
    }
  }
  CHECK(failed == 1);
}

TEST_CASE("individual checks report details") {
  auto r = checks::adjoint_consistent(7);
  CHECK(r.pass);
  CHECK(!r.detail.empty());
  CHECK(r.name == "adjoint_consistent");
}

}  // TEST_SUITE
