#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <string>

#include <lyaprnn/selfcheck.hpp>

using namespace lyaprnn;

TEST_CASE("the built-in validation suite passes on a healthy build") {
  const auto checks = run_self_checks();
  REQUIRE(checks.size() == 6);
  for (const auto& c : checks) {
    INFO(c.name << ": " << c.detail);
    REQUIRE(c.passed);
    REQUIRE_FALSE(c.name.empty());
    REQUIRE_FALSE(c.detail.empty());
  }
}

TEST_CASE("check names are unique and cover all validation areas") {
  const auto checks = run_self_checks();
  std::set<std::string> names;
  for (const auto& c : checks) names.insert(c.name);
  REQUIRE(names.size() == checks.size());
  REQUIRE(names.count("jacobian-fd-vanilla") == 1);
  REQUIRE(names.count("jacobian-fd-lstm") == 1);
  REQUIRE(names.count("jacobian-fd-gru") == 1);
  REQUIRE(names.count("telescoping-qr") == 1);
  REQUIRE(names.count("volume-identity") == 1);
  REQUIRE(names.count("linear-analytic-spectrum") == 1);
}

TEST_CASE("fault injection fails exactly one named check") {
  const auto checks = run_self_checks(/*inject_fault=*/true);
  int failures = 0;
  for (const auto& c : checks) {
    if (!c.passed) {
      ++failures;
      REQUIRE(c.name == "linear-analytic-spectrum");
    }
  }
  REQUIRE(failures == 1);
}
