#include <doctest.h>

#include "relstar/checks.hpp"

using namespace relstar;

TEST_CASE("the full invariant suite passes on a fresh build") {
    const std::vector<CheckResult> results = run_check_suite();
    REQUIRE(results.size() > 10);
    for (const CheckResult& r : results) {
        CAPTURE(r.name);
        CAPTURE(r.detail);
        CHECK(r.pass);
    }
}
