#include <doctest.h>

#include <sstream>

#include "hetreg/verify.hpp"

using namespace hetreg;

TEST_CASE("property registry covers every module") {
    const auto &suite = verify::property_suite();
    CHECK(suite.size() == 30);
    for (const char *module : {"linalg", "gaussian-metrics", "pseudolabel", "autodiff-mlp",
                               "losses", "datasets", "bench-cli"}) {
        const bool present = std::any_of(suite.begin(), suite.end(),
                                         [&](const auto &p) { return p.module == module; });
        CHECK_MESSAGE(present, module);
    }
}

TEST_CASE("filter selects single properties and report formats a line each") {
    const auto results = verify::run_properties("linalg/cholesky-roundtrip");
    REQUIRE(results.size() == 1);
    CHECK(results[0].pass);

    std::ostringstream out;
    const bool ok = verify::report(out, results);
    CHECK(ok);
    CHECK(out.str().find("PASS  linalg/cholesky-roundtrip") != std::string::npos);
}

TEST_CASE("the registry meta-check passes as registered") {
    const auto results = verify::run_properties("registry-complete");
    REQUIRE(results.size() == 1);
    CHECK(results[0].pass);
}

// Mutation guard for the bound-dominance suite: a deliberately broken bound
// (the Frobenius term dropped) must be caught by the same sampling that the
// property uses.
TEST_CASE("bound-dominance sampling rejects a broken bound") {
    std::mt19937_64 rng(1234);
    bool caught = false;
    for (int i = 0; i < 200 && !caught; ++i) {
        const Gaussian a = verify::random_gaussian(4, rng);
        const Gaussian b = verify::random_gaussian(4, rng);
        const double exact = w2_exact(a, b);
        const double broken = squared_distance(a.mean, b.mean); // mean term only
        if (exact > broken + 1e-8 * (1.0 + exact)) caught = true;
    }
    CHECK(caught);
}
