#include <cmath>
#include <vector>

#include "cloudmkt/equilibrium.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace cloudmkt;
using testsup::reference_params;

namespace {

// Case-(i) cutoff for uniform costs: the pooled equation reduces to
// a*x^2 + a*p*x - p = 0 with a = rho1/(mu*v1) + rho2/(mu*v2).
double pooled_cutoff_formula(double p, const MarketParams &m) {
    double a = m.rho(1) / m.cost_upper(1) + m.rho(2) / m.cost_upper(2);
    return (-a * p + std::sqrt(a * a * p * p + 4.0 * a * p)) / (2.0 * a);
}

}  // namespace

TEST_CASE("expected payment basics") {
    MarketParams p = reference_params();
    CutoffVector cbar{4.0 / 7.0, 4.0 / 7.0};

    CHECK(expected_payment(0.0, cbar, p) == 0.0);
    // W(4/7) = 1 and w(4/7) = 1/mu, so m = 1 - 4/7 = 3/7.
    CHECK(expected_payment(4.0 / 7.0, cbar, p) == doctest::Approx(3.0 / 7.0).epsilon(1e-9));
    CHECK_THROWS_AS(expected_payment(0.6, cbar, p), OutOfRangeError);
    CHECK_THROWS_AS(expected_payment(-0.1, cbar, p), OutOfRangeError);

    // No participants, no payments.
    CHECK(expected_payment(0.0, {0.0, 0.0}, p) == 0.0);
    CHECK_THROWS_AS(expected_payment(0.1, {0.0, 0.0}, p), OutOfRangeError);
}

TEST_CASE("common threshold on the reference market is 4/7") {
    MarketParams p = reference_params();
    CHECK(solve_common_threshold(p) == doctest::Approx(4.0 / 7.0).epsilon(1e-8));

    // Quadrature-only route lands on the same root.
    testsup::QuadratureOnly quad_model;
    CHECK(solve_common_threshold(p, quad_model) == doctest::Approx(4.0 / 7.0).epsilon(1e-8));
}

TEST_CASE("common threshold limits") {
    // Empty market: w -> 1/mu everywhere, so the threshold -> mu*v2.
    MarketParams thin = testsup::make_uniform(1.0, 2, 2.0, 1e-9, 1.0, 1e-9);
    CHECK(solve_common_threshold(thin) == doctest::Approx(1.0).epsilon(1e-6));

    // More servers lower the load, raising the threshold.
    MarketParams k2 = reference_params();
    MarketParams k4 = testsup::make_uniform(1.0, 4, 2.0, 1.0, 1.0, 1.0);
    CHECK(solve_common_threshold(k4) > solve_common_threshold(k2) + 1e-3);
}

TEST_CASE("inner cutoff properties") {
    MarketParams p = reference_params();
    EquilibriumSolver solver(p);
    double cbar = solver.common_threshold();

    CHECK(solver.inner_cutoff(cbar) == doctest::Approx(cbar).epsilon(1e-8));
    CHECK(solver.inner_cutoff(p.cost_upper(1)) < cbar - 1e-3);
    CHECK_THROWS_AS(solver.inner_cutoff(cbar - 1e-3), OutOfRangeError);

    std::mt19937_64 rng(5);
    for (int i = 0; i < 50; ++i) {
        double x1 = testsup::uniform_in(rng, cbar, p.cost_upper(1));
        double x1b = testsup::uniform_in(rng, x1, p.cost_upper(1));
        CHECK(solver.inner_cutoff(x1b) <= solver.inner_cutoff(x1) + 1e-8);
    }
}

TEST_CASE("spot equilibrium on the reference market is (1.2, 0.4)") {
    MarketParams p = reference_params();
    SpotEquilibrium eq = solve_spot_cutoffs(p);

    CHECK(eq.cutoffs.c1 == doctest::Approx(1.2).epsilon(1e-8));
    CHECK(eq.cutoffs.c2 == doctest::Approx(0.4).epsilon(1e-8));
    CHECK(eq.common_threshold == doctest::Approx(4.0 / 7.0).epsilon(1e-8));
    CHECK(eq.cutoffs.c2 <= eq.common_threshold);
    CHECK(eq.common_threshold <= eq.cutoffs.c1);

    // Both defining equations hold under the oracle integrator.
    CHECK(std::abs(testsup::oracle_W(eq.cutoffs.c1, eq.cutoffs, p) - 2.0) <= 1e-7);
    CHECK(std::abs(testsup::oracle_W(eq.cutoffs.c2, eq.cutoffs, p) - 1.0) <= 1e-7);
}

TEST_CASE("spot equilibrium limits") {
    // Near-equal values collapse the cutoffs onto the common threshold.
    MarketParams close = testsup::make_uniform(1.0, 2, 2.0, 1.0, 2.0 * (1.0 - 1e-6), 1.0);
    SpotEquilibrium eq = solve_spot_cutoffs(close);
    CHECK(std::abs(eq.cutoffs.c1 - eq.common_threshold) <= 1e-4);
    CHECK(std::abs(eq.cutoffs.c2 - eq.common_threshold) <= 1e-4);

    // Empty market: cutoffs head to the support tops.
    MarketParams thin = testsup::make_uniform(1.0, 2, 2.0, 1e-9, 1.0, 1e-9);
    SpotEquilibrium thin_eq = solve_spot_cutoffs(thin);
    CHECK(thin_eq.cutoffs.c1 == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(thin_eq.cutoffs.c2 == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("spot equilibrium equations hold on random markets") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        MarketParams p = testsup::random_market(rng);
        SpotEquilibrium eq = solve_spot_cutoffs(p);
        CHECK(eq.cutoffs.c2 <= eq.common_threshold + 1e-9);
        CHECK(eq.cutoffs.c1 >= eq.common_threshold - 1e-9);
        CHECK(stability_margin(eq.cutoffs, p) < 1.0);
        double r1 = testsup::oracle_W(eq.cutoffs.c1, eq.cutoffs, p) - p.class1.value;
        double r2 = testsup::oracle_W(eq.cutoffs.c2, eq.cutoffs, p) - p.class2.value;
        CHECK(std::abs(r1) <= 1e-6);
        CHECK(std::abs(r2) <= 1e-6);
    }
}

TEST_CASE("quadrature-only route reproduces the closed-form equilibrium") {
    MarketParams p = reference_params();
    testsup::QuadratureOnly quad;
    SpotEquilibrium closed = solve_spot_cutoffs(p);
    SpotEquilibrium by_quad = solve_spot_cutoffs(p, quad);
    CHECK(std::abs(closed.cutoffs.c1 - by_quad.cutoffs.c1) <= 1e-7);
    CHECK(std::abs(closed.cutoffs.c2 - by_quad.cutoffs.c2) <= 1e-7);
    CHECK(std::abs(closed.common_threshold - by_quad.common_threshold) <= 1e-7);
}

TEST_CASE("truncated-exponential market solves end to end") {
    MarketParams p{
        1.0, 2,
        ClassParams{2.0, 1.0, CostDistribution::truncated_exponential(1.0, 2.0)},
        ClassParams{1.0, 1.0, CostDistribution::truncated_exponential(2.0, 1.0)},
    };
    REQUIRE(validate(p).empty());
    EquilibriumSolver solver(p);
    SpotEquilibrium eq = solver.spot_equilibrium();

    CHECK(eq.cutoffs.c2 <= eq.common_threshold + 1e-9);
    CHECK(eq.common_threshold <= eq.cutoffs.c1 + 1e-9);
    CHECK(std::abs(testsup::oracle_W(eq.cutoffs.c1, eq.cutoffs, p) - 2.0) <= 1e-6);
    CHECK(std::abs(testsup::oracle_W(eq.cutoffs.c2, eq.cutoffs, p) - 1.0) <= 1e-6);
    CHECK(audit_participation(eq, p, 128) <= 1e-6);

    HybridEquilibrium mid = solver.hybrid_equilibrium(
        0.5 * (solver.low_price_bound() + solver.high_price_bound()));
    CHECK(mid.case_tag == PriceCase::MidPrice);
    CHECK(audit_participation(mid, p, 128) <= 1e-6);
    CHECK(audit_incentive_compatibility(mid.cutoffs, p, 128) <= 1e-6);
}

TEST_CASE("hybrid equilibrium: low-price case") {
    MarketParams p = reference_params();
    EquilibriumSolver solver(p);

    // Exactly at the boundary price the pooled cutoff is the threshold.
    double p_low = solver.low_price_bound();
    CHECK(p_low == doctest::Approx(3.0 / 7.0).epsilon(1e-8));
    HybridEquilibrium at_bound = solver.hybrid_equilibrium(p_low);
    CHECK(at_bound.case_tag == PriceCase::LowPrice);
    CHECK(at_bound.cutoffs.c1 == doctest::Approx(4.0 / 7.0).epsilon(1e-7));

    HybridEquilibrium eq = solver.hybrid_equilibrium(0.2);
    CHECK(eq.case_tag == PriceCase::LowPrice);
    CHECK(eq.cutoffs.c1 == eq.cutoffs.c2);
    CHECK(eq.cutoffs.c1 == doctest::Approx(pooled_cutoff_formula(0.2, p)).epsilon(1e-8));
    // Both classes split between the channels.
    CHECK_FALSE(eq.payg_intervals[0].empty());
    CHECK_FALSE(eq.payg_intervals[1].empty());
    CHECK(eq.payg_intervals[0].lo == doctest::Approx(eq.cutoffs.c1));
    CHECK(eq.payg_intervals[0].hi == doctest::Approx(1.8));
    CHECK(eq.payg_intervals[1].hi == doctest::Approx(0.8));
}

TEST_CASE("hybrid equilibrium: mid-price case") {
    MarketParams p = reference_params();
    EquilibriumSolver solver(p);
    HybridEquilibrium eq = solver.hybrid_equilibrium(0.6);

    CHECK(eq.case_tag == PriceCase::MidPrice);
    CHECK(eq.cutoffs.c1 > solver.common_threshold());
    CHECK(eq.cutoffs.c2 < solver.common_threshold());
    // Defining equations via the oracle integrator.
    CHECK(std::abs(testsup::oracle_W(eq.cutoffs.c1, eq.cutoffs, p) - (0.6 + eq.cutoffs.c1)) <= 1e-6);
    CHECK(std::abs(testsup::oracle_W(eq.cutoffs.c2, eq.cutoffs, p) - 1.0) <= 1e-6);
    // Class 1 splits; class 2 is priced out of PAYG entirely.
    CHECK_FALSE(eq.payg_intervals[0].empty());
    CHECK(eq.payg_intervals[0].hi == doctest::Approx(1.4));
    CHECK(eq.payg_intervals[1].empty());
    CHECK(p.cost_upper(2) - 0.6 < eq.cutoffs.c2);
}

TEST_CASE("hybrid equilibrium: high-price case") {
    MarketParams p = reference_params();
    EquilibriumSolver solver(p);
    SpotEquilibrium spot = solver.spot_equilibrium();

    HybridEquilibrium eq = solver.hybrid_equilibrium(0.9);
    CHECK(eq.case_tag == PriceCase::HighPrice);
    CHECK(eq.cutoffs.c1 == spot.cutoffs.c1);
    CHECK(eq.cutoffs.c2 == spot.cutoffs.c2);
    CHECK(eq.payg_intervals[0].empty());
    CHECK(eq.payg_intervals[1].empty());
}

TEST_CASE("hybrid equilibrium rejects nonpositive prices") {
    EquilibriumSolver solver(reference_params());
    CHECK_THROWS_AS(solver.hybrid_equilibrium(0.0), InvalidPriceError);
    CHECK_THROWS_AS(solver.hybrid_equilibrium(-1.0), InvalidPriceError);
}

TEST_CASE("hybrid cutoffs vanish as the price goes to zero") {
    EquilibriumSolver solver(reference_params());
    HybridEquilibrium eq = solver.hybrid_equilibrium(1e-8);
    CHECK(eq.cutoffs.c1 <= 1e-3);
    CHECK(solver.hybrid_equilibrium(1e-12).cutoffs.c1 < eq.cutoffs.c1);
    // Everyone at or above the cutoff weakly prefers PAYG.
    CHECK_FALSE(eq.payg_intervals[0].empty());
    CHECK_FALSE(eq.payg_intervals[1].empty());
}

TEST_CASE("case machinery agrees at both price boundaries") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        MarketParams p = testsup::random_market(rng);
        EquilibriumSolver solver(p);
        double p_low = solver.low_price_bound();
        double p_high = solver.high_price_bound();
        SpotEquilibrium spot = solver.spot_equilibrium();

        double pooled = solver.pooled_cutoff(p_low);
        CutoffVector split = solver.split_cutoffs(p_low);
        CHECK(std::abs(pooled - split.c1) <= 1e-6);
        CHECK(std::abs(pooled - split.c2) <= 1e-6);

        CutoffVector at_high = solver.split_cutoffs(p_high);
        CHECK(std::abs(at_high.c1 - spot.cutoffs.c1) <= 1e-6);
        CHECK(std::abs(at_high.c2 - spot.cutoffs.c2) <= 1e-6);
    }
}

TEST_CASE("hybrid comparative statics in the price") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        MarketParams p = testsup::random_market(rng);
        EquilibriumSolver solver(p);

        HybridEquilibrium prev = solver.hybrid_equilibrium(p.cost_upper(1) / 20.0);
        for (int j = 2; j <= 20; ++j) {
            HybridEquilibrium cur = solver.hybrid_equilibrium(p.cost_upper(1) * j / 20.0);
            if (prev.case_tag == cur.case_tag && cur.case_tag == PriceCase::LowPrice) {
                CHECK(cur.cutoffs.c1 >= prev.cutoffs.c1 - 1e-9);
                CHECK(cur.cutoffs.c2 >= prev.cutoffs.c2 - 1e-9);
            }
            if (prev.case_tag == cur.case_tag && cur.case_tag == PriceCase::MidPrice) {
                CHECK(cur.cutoffs.c1 >= prev.cutoffs.c1 - 1e-9);
                CHECK(cur.cutoffs.c2 <= prev.cutoffs.c2 + 1e-9);
                auto served = [&](const CutoffVector &cut) {
                    return p.class1.arrival_rate * p.class1.cost_dist.cdf(cut.c1) +
                           p.class2.arrival_rate * p.class2.cost_dist.cdf(cut.c2);
                };
                CHECK(served(cur.cutoffs) >= served(prev.cutoffs) - 1e-7);
            }
            prev = cur;
        }
    }
}

TEST_CASE("payments increase while waits decrease") {
    std::mt19937_64 rng(29);
    const double delta = 1e-3;
    for (int trial = 0; trial < 50; ++trial) {
        MarketParams p = testsup::random_market(rng);
        CutoffVector cut = testsup::random_stable_cutoffs(rng, p, 0.85);
        double cmax = cut.max_cutoff();
        if (cmax < 10 * delta) continue;
        for (int j = 0; j < 16; ++j) {
            double c = cmax * j / 16.0;
            CHECK(expected_payment(c + delta, cut, p) > expected_payment(c, cut, p));
            CHECK(waiting_time(c + delta, cut, p) <= waiting_time(c, cut, p) + 1e-12);
        }
    }
}

TEST_CASE("incentive audit is clean at equilibrium and catches corruption") {
    MarketParams p = reference_params();
    SpotEquilibrium eq = solve_spot_cutoffs(p);

    CHECK(audit_incentive_compatibility(eq.cutoffs, p, 512) <= 1e-6);
    CHECK(audit_incentive_compatibility({0.0, 0.0}, p, 512) == 0.0);

    // Negative control: halved payments must create profitable deviations.
    const int n = 512;
    double cmax = eq.cutoffs.max_cutoff();
    std::vector<double> costs(n), waits(n), pay(n);
    for (int j = 0; j < n; ++j) {
        costs[j] = cmax * j / (n - 1);
        waits[j] = waiting_time(costs[j], eq.cutoffs, p);
        pay[j] = 0.5 * expected_payment(costs[j], eq.cutoffs, p);
    }
    CHECK(max_deviation_gain(costs, waits, pay) > 1e-3);
}

TEST_CASE("participation audit across regimes") {
    MarketParams p = reference_params();
    EquilibriumSolver solver(p);

    CHECK(audit_participation(solver.spot_equilibrium(), p, 256) <= 1e-6);
    CHECK(audit_participation(solver.hybrid_equilibrium(0.2), p, 256) <= 1e-6);
    CHECK(audit_participation(solver.hybrid_equilibrium(0.6), p, 256) <= 1e-6);
    CHECK(audit_participation(solver.hybrid_equilibrium(0.9), p, 256) <= 1e-6);
    // Near-free PAYG: cutoffs collapse and PAYG weakly dominates above them.
    CHECK(audit_participation(solver.hybrid_equilibrium(1e-8), p, 256) <= 1e-6);

    // Mid-price case: every class-2 cost above its cutoff has negative PAYG
    // payoff, so class 2 stays out of PAYG.
    HybridEquilibrium mid = solver.hybrid_equilibrium(0.6);
    for (double c : {mid.cutoffs.c2 + 0.01, 0.5, 0.9}) {
        CHECK(p.class2.value - (0.6 + c) / p.service_rate < 0.0);
    }
}
