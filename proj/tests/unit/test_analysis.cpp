#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fuselens/analysis.hpp"
#include "fuselens/error.hpp"

using namespace fuselens;

namespace {

// Branch accuracies shared by the tests below.
constexpr double kP0 = 0.6, kP1 = 0.9, kQ0 = 0.8, kQ1 = 0.6;

OperatingPoint at(double rb, double rn) { return {kP0, kP1, kQ0, kQ1, rb, rn}; }

}  // namespace

TEST_CASE("harmonic_mean") {
    CHECK(std::abs(harmonic_mean(82.29, 67.63) - 74.24) <= 0.01);
    CHECK(harmonic_mean(0.6, 0.8) == doctest::Approx(0.68571428571428571429).epsilon(1e-15));
    for (double x : {0.0, 1e-9, 0.37, 1.0, 55.5}) CHECK(harmonic_mean(x, x) == doctest::Approx(x));
    CHECK(harmonic_mean(0.0, 0.0) == 0.0);
    CHECK(harmonic_mean(0.0, 0.7) == 0.0);
    CHECK_THROWS_AS(harmonic_mean(-0.1, 0.5), InvariantError);
}

TEST_CASE("proposition_hmean anchors") {
    const auto best = proposition_hmean(at(1, 0));
    CHECK(best.base_accuracy == doctest::Approx(0.9));
    CHECK(best.novel_accuracy == doctest::Approx(0.8));
    CHECK(best.harmonic_mean == doctest::Approx(0.84705882352941176471).epsilon(1e-15));

    const auto zs = proposition_hmean(at(0, 0));
    CHECK(zs.base_accuracy == doctest::Approx(0.6));
    CHECK(zs.novel_accuracy == doctest::Approx(0.8));
    CHECK(zs.harmonic_mean == doctest::Approx(0.6857142857).epsilon(1e-10));

    const auto fs = proposition_hmean(at(1, 1));
    CHECK(fs.harmonic_mean == doctest::Approx(0.72).epsilon(1e-15));

    CHECK_THROWS_AS(proposition_hmean(at(1.2, 0)), InvariantError);
    CHECK_THROWS_AS(proposition_hmean({-0.1, 0.5, 0.5, 0.5, 0.5, 0.5}), InvariantError);
}

TEST_CASE("harmonic-mean identity holds on every report") {
    for (double rb = 0; rb <= 1.0; rb += 0.05) {
        for (double rn = 0; rn <= 1.0; rn += 0.05) {
            const auto r = proposition_hmean(at(std::min(rb, 1.0), std::min(rn, 1.0)));
            CHECK(std::abs(r.harmonic_mean * (r.base_accuracy + r.novel_accuracy) -
                           2 * r.base_accuracy * r.novel_accuracy) <= 1e-12);
        }
    }
}

TEST_CASE("contour_grid") {
    SUBCASE("corners") {
        const auto g = contour_grid(kP0, kP1, kQ0, kQ1, 2);
        REQUIRE(g.cells.size() == 4);
        CHECK(g.at(0, 0).rb == 0.0);
        CHECK(g.at(1, 0).rb == 1.0);
        CHECK(g.at(1, 0).rn == 0.0);
        CHECK(g.at(1, 0).report.harmonic_mean == doctest::Approx(0.84705882352941176471));
        CHECK(g.at(0, 0).report.harmonic_mean == doctest::Approx(0.6857142857142857));
        CHECK(g.at(1, 1).report.harmonic_mean == doctest::Approx(0.72));
    }
    SUBCASE("constant classifiers") {
        const auto g = contour_grid(0.42, 0.42, 0.42, 0.42, 11);
        for (const auto& c : g.cells) CHECK(c.report.harmonic_mean == doctest::Approx(0.42).epsilon(1e-15));
    }
    SUBCASE("exhaustive scan finds the maximum at (1, 0)") {
        const auto g = contour_grid(kP0, kP1, kQ0, kQ1, 101);
        std::size_t best = 0;
        for (std::size_t i = 1; i < g.cells.size(); ++i) {
            if (g.cells[i].report.harmonic_mean > g.cells[best].report.harmonic_mean) best = i;
        }
        CHECK(g.cells[best].rb == 1.0);
        CHECK(g.cells[best].rn == 0.0);
        CHECK(g.cells[best].report.harmonic_mean == doctest::Approx(0.84705882352941176471));
    }
    SUBCASE("monotone along each axis") {
        // p1 >= p0: non-decreasing in rb; q1 <= q0: non-increasing in rn
        const auto g = contour_grid(kP0, kP1, kQ0, kQ1, 41);
        for (std::size_t i = 0; i < 41; ++i) {
            for (std::size_t j = 0; j < 41; ++j) {
                if (i + 1 < 41) CHECK(g.at(i + 1, j).report.harmonic_mean >= g.at(i, j).report.harmonic_mean);
                if (j + 1 < 41) CHECK(g.at(i, j + 1).report.harmonic_mean <= g.at(i, j).report.harmonic_mean);
            }
        }
    }
    SUBCASE("random-detector diagonal runs from zero-shot H to few-shot H") {
        // continuous and single-peaked; H(0.5) = 2*0.75*0.7/1.45 exceeds both ends
        const auto g = contour_grid(kP0, kP1, kQ0, kQ1, 101);
        CHECK(g.at(0, 0).report.harmonic_mean == doctest::Approx(0.6857142857142857));
        CHECK(g.at(100, 100).report.harmonic_mean == doctest::Approx(0.72));
        CHECK(g.at(50, 50).report.harmonic_mean == doctest::Approx(1.05 / 1.45).epsilon(1e-15));
        int direction_changes = 0;
        double prev_step = 1.0;
        for (std::size_t t = 1; t < 101; ++t) {
            const double step = g.at(t, t).report.harmonic_mean - g.at(t - 1, t - 1).report.harmonic_mean;
            CHECK(std::abs(step) < 0.01);
            if ((step > 0) != (prev_step > 0)) ++direction_changes;
            prev_step = step;
        }
        CHECK(direction_changes == 1);
    }
    CHECK_THROWS_AS(contour_grid(kP0, kP1, kQ0, kQ1, 1), InvariantError);
}

TEST_CASE("monte_carlo_hmean") {
    SUBCASE("degenerate probabilities are exact") {
        for (std::uint64_t seed : {0ull, 1ull, 12345ull}) {
            const auto r = monte_carlo_hmean({0.3, 1.0, 1.0, 0.2, 1.0, 0.0}, 5000, 7000, seed);
            CHECK(r.estimate.base_accuracy == 1.0);
            CHECK(r.estimate.novel_accuracy == 1.0);
            CHECK(r.estimate.harmonic_mean == 1.0);
            CHECK(r.base_routed_few_shot == 5000);
            CHECK(r.novel_routed_few_shot == 0);
        }
    }
    SUBCASE("deterministic given the seed") {
        const auto a = monte_carlo_hmean(at(0.8, 0.3), 20000, 20000, 9);
        const auto b = monte_carlo_hmean(at(0.8, 0.3), 20000, 20000, 9);
        CHECK(a.base_correct == b.base_correct);
        CHECK(a.novel_correct == b.novel_correct);
        CHECK(a.estimate.harmonic_mean == b.estimate.harmonic_mean);
        const auto c = monte_carlo_hmean(at(0.8, 0.3), 20000, 20000, 10);
        CHECK(c.base_correct != a.base_correct);
    }
    SUBCASE("converges to the closed form") {
        const auto closed = proposition_hmean(at(0.8, 0.3));
        for (std::uint64_t seed : {1ull, 2ull}) {
            const auto r = monte_carlo_hmean(at(0.8, 0.3), 1000000, 1000000, seed);
            CHECK(std::abs(r.estimate.base_accuracy - closed.base_accuracy) <= 0.005);
            CHECK(std::abs(r.estimate.novel_accuracy - closed.novel_accuracy) <= 0.005);
            CHECK(std::abs(r.estimate.harmonic_mean - closed.harmonic_mean) <= 0.005);
        }
    }
    CHECK_THROWS_AS(monte_carlo_hmean(at(0.5, 0.5), 0, 10, 1), InvariantError);
}

TEST_CASE("analysis CSV layout") {
    std::ostringstream out;
    write_hmean_csv(out, at(1, 0), proposition_hmean(at(1, 0)));
    CHECK(out.str() == "rb,rn,Pb,Pn,H\n1.0000,0.0000,0.9000,0.8000,0.8471\n");

    std::ostringstream grid;
    write_contour_csv(grid, contour_grid(kP0, kP1, kQ0, kQ1, 2));
    CHECK(grid.str() ==
          "rb,rn,Pb,Pn,H\n"
          "0.0000,0.0000,0.6000,0.8000,0.6857\n"
          "0.0000,1.0000,0.6000,0.6000,0.6000\n"
          "1.0000,0.0000,0.9000,0.8000,0.8471\n"
          "1.0000,1.0000,0.9000,0.6000,0.7200\n");

    std::ostringstream mc;
    write_monte_carlo_csv(mc, monte_carlo_hmean({0.3, 1.0, 1.0, 0.2, 1.0, 0.0}, 10, 20, 5));
    CHECK(mc.str() ==
          "rb,rn,Pb,Pn,H,base_correct,n_base,novel_correct,n_novel,seed,generator\n"
          "1.0000,0.0000,1.0000,1.0000,1.0000,10,10,20,20,5,mt19937_64\n");
}
