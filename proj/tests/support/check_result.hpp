#pragma once

#include <cstdint>
#include <string>

namespace pql3::checks {

// Outcome of a property sweep: how many cases ran, how many failed, and the
// first failure for diagnostics.
struct CheckResult {
  std::uint64_t cases = 0;
  std::uint64_t failures = 0;
  std::string first_failure;
  std::string note;

  void pass() { ++cases; }
  void fail(const std::string& why) {
    ++cases;
    if (failures++ == 0) first_failure = why;
  }
  void expect(bool ok, const std::string& why) { ok ? pass() : fail(why); }
  bool ok() const { return failures == 0 && cases > 0; }
  void merge(const CheckResult& o) {
    cases += o.cases;
    if (o.failures && failures == 0) first_failure = o.first_failure;
    failures += o.failures;
  }
};

}  // namespace pql3::checks
