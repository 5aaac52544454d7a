#include <cmath>
#include <sstream>

#include "cloudmkt/revenue.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace cloudmkt;
using testsup::reference_params;

TEST_CASE("PAYG revenue closed form") {
    MarketParams p = reference_params();
    RevenueReport r = revenue_payg(2.0 / 3.0, p);
    CHECK(r.revenue_rate == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(r.payg_by_class[0] == doctest::Approx(2.0 / 3.0 * (2.0 - 2.0 / 3.0) / 2.0));
    CHECK(r.spot_by_class[0] == 0.0);

    CHECK(revenue_payg(2.0, p).revenue_rate == 0.0);   // everyone priced out
    CHECK(revenue_payg(2.5, p).revenue_rate == 0.0);
    CHECK_THROWS_AS(revenue_payg(0.0, p), InvalidPriceError);
    CHECK_THROWS_AS(revenue_payg(-0.5, p), InvalidPriceError);
}

TEST_CASE("PAYG revenue has a kink where class 2 balks") {
    MarketParams p = reference_params();
    const double kink = p.cost_upper(2);  // mu * v2 = 1
    const double h = 1e-5;
    auto R = [&](double price) { return revenue_payg(price, p).revenue_rate; };
    double left = (R(kink) - R(kink - h)) / h;
    double right = (R(kink + h) - R(kink)) / h;
    CHECK(std::abs(left - right) > 0.5);
    CHECK(revenue_payg(kink, p).payg_by_class[1] == doctest::Approx(0.0));
}

TEST_CASE("spot revenue matches a Monte-Carlo oracle") {
    MarketParams p = reference_params();
    EquilibriumSolver solver(p);
    SpotEquilibrium eq = solver.spot_equilibrium();
    RevenueReport r = revenue_spot(solver);

    // Oracle: lambda_i * E[m(C_i) 1{C_i <= c_i}] by direct simulation of the
    // cost draws. Payments come from the oracle integrator tabulated on a
    // dense grid (linear interpolation error is far below the MC noise).
    const int table_n = 4096;
    double cmax = eq.cutoffs.max_cutoff();
    std::vector<double> table(table_n + 1);
    for (int j = 0; j <= table_n; ++j)
        table[j] = testsup::oracle_payment(cmax * j / table_n, eq.cutoffs, p);
    auto payment_at = [&](double c) {
        double u = c / cmax * table_n;
        int j = std::min(static_cast<int>(u), table_n - 1);
        return table[j] + (u - j) * (table[j + 1] - table[j]);
    };

    std::mt19937_64 rng(424242);
    const int n = 1000000;
    for (int i : {1, 2}) {
        double ci = (i == 1) ? eq.cutoffs.c1 : eq.cutoffs.c2;
        double sum = 0.0, sumsq = 0.0;
        for (int t = 0; t < n; ++t) {
            double c = p.cls(i).cost_dist.sample(rng);
            double x = c <= ci ? payment_at(c) : 0.0;
            sum += x;
            sumsq += x * x;
        }
        double mean = sum / n;
        double se = std::sqrt((sumsq / n - mean * mean) / n);
        double got = r.spot_by_class[i - 1] / p.cls(i).arrival_rate;
        CHECK(std::abs(got - mean) <= 3.0 * se);
    }
    CHECK(r.regime == Regime::SpotOnly);
    CHECK_FALSE(r.price.has_value());
}

TEST_CASE("spot revenue vanishes with the arrival rates") {
    MarketParams thin = testsup::make_uniform(1.0, 2, 2.0, 1e-9, 1.0, 1e-9);
    CHECK(revenue_spot(thin).revenue_rate <= 1e-6);
}

TEST_CASE("near-symmetric classes earn in proportion to arrival rates") {
    MarketParams p = testsup::make_uniform(1.0, 2, 2.0, 1.0, 2.0 * (1.0 - 1e-9), 2.0);
    RevenueReport r = revenue_spot(p);
    CHECK(r.spot_by_class[1] / r.spot_by_class[0] == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("hybrid revenue limits") {
    MarketParams p = reference_params();
    EquilibriumSolver solver(p);

    // Tiny price: everyone rides PAYG nearly for free.
    CHECK(revenue_hybrid(1e-6, solver).revenue_rate <= 1e-5);

    // Past the high-price bound the PAYG channel is empty and hybrid revenue
    // is exactly the spot-only revenue.
    double spot_rate = revenue_spot(solver).revenue_rate;
    RevenueReport high = revenue_hybrid(0.9, solver);
    CHECK(high.revenue_rate == doctest::Approx(spot_rate).epsilon(1e-12));
    CHECK(high.payg_by_class[0] == 0.0);
    CHECK(high.payg_by_class[1] == 0.0);

    // Low-price case instance of the fixed-vs-hybrid comparison.
    CHECK(revenue_payg(0.2, p).revenue_rate == doctest::Approx(0.34));
    CHECK(revenue_hybrid(0.2, solver).revenue_rate < 0.34);
}

TEST_CASE("hybrid revenue on the reference market") {
    EquilibriumSolver solver(reference_params());
    // Direct evaluation with the oracle integrator: spot term plus PAYG term.
    HybridEquilibrium eq = solver.hybrid_equilibrium(0.6);
    const MarketParams &p = solver.params();
    double expect = 0.0;
    for (int i : {1, 2}) {
        double ci = (i == 1) ? eq.cutoffs.c1 : eq.cutoffs.c2;
        const CostDistribution &d = p.cls(i).cost_dist;
        expect += p.cls(i).arrival_rate * 0.6 *
                  std::max(0.0, d.cdf(p.cost_upper(i) - 0.6) - d.cdf(ci));
        expect += p.cls(i).arrival_rate *
                  testsup::simpson_kinked(
                      [&](double t) { return testsup::oracle_payment(t, eq.cutoffs, p) * d.pdf(t); },
                      0.0, ci, {eq.cutoffs.c1, eq.cutoffs.c2}, 2000);
    }
    CHECK(revenue_hybrid(0.6, solver).revenue_rate == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("price optimization: PAYG") {
    MarketParams p = reference_params();
    PriceOptimum best = optimize_price(Regime::PaygOnly, p);
    CHECK(best.price == doctest::Approx(2.0 / 3.0).epsilon(1e-6));
    CHECK(best.report.revenue_rate == doctest::Approx(2.0 / 3.0).epsilon(1e-9));

    // Single-class degenerate market: quadratic with maximum at mu*v1/2.
    MarketParams solo = testsup::make_uniform(1.0, 2, 2.0, 1.0, 1.0, 1e-12);
    CHECK(optimize_price(Regime::PaygOnly, solo).price == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("price optimization: hybrid stays below fixed pricing") {
    EquilibriumSolver solver(reference_params());
    PriceOptimum payg = optimize_price(Regime::PaygOnly, solver);
    PriceOptimum hybrid = optimize_price(Regime::Hybrid, solver);
    CHECK(hybrid.report.revenue_rate < payg.report.revenue_rate);
    // The hybrid optimum lands in the mid-price band on this market.
    CHECK(solver.hybrid_equilibrium(hybrid.price).case_tag == PriceCase::MidPrice);
    CHECK(hybrid.report.revenue_rate > revenue_spot(solver).revenue_rate);
    CHECK_THROWS_AS(optimize_price(Regime::SpotOnly, solver), std::invalid_argument);
}

TEST_CASE("hybrid revenue is continuous and nonnegative across case boundaries") {
    EquilibriumSolver solver(reference_params());
    const double eps = 1e-6;
    for (double boundary : {solver.low_price_bound(), solver.high_price_bound()}) {
        double below = revenue_hybrid(boundary - eps, solver).revenue_rate;
        double at = revenue_hybrid(boundary, solver).revenue_rate;
        double above = revenue_hybrid(boundary + eps, solver).revenue_rate;
        CHECK(std::abs(at - below) <= 1e-4);
        CHECK(std::abs(above - at) <= 1e-4);
        CHECK(at >= 0.0);
    }
}

TEST_CASE("study row on the reference market") {
    StudyRow row = study_row(7, reference_params());
    CHECK(row.config_id == 7);
    CHECK(row.p_star_payg == doctest::Approx(2.0 / 3.0).epsilon(1e-6));
    CHECK(row.r_payg == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
    CHECK(row.hybrid_case == PriceCase::MidPrice);
    CHECK(row.ranking_holds);
}

TEST_CASE("ranking study rows are reproducible and consistent") {
    StudySampler sampler;
    std::vector<StudyRow> rows = revenue_ranking_study(8, sampler, 99, 1);
    REQUIRE(rows.size() == 8);
    for (const StudyRow &r : rows) {
        CHECK(r.v1 > r.v2);
        CHECK(r.r_payg > 0.0);
        CHECK(r.r_spot > 0.0);
        CHECK(r.r_hybrid >= r.r_spot - 1e-9);
        CHECK(r.ranking_holds == (r.r_payg > r.r_hybrid));
        // Fixed pricing beats the hybrid whenever the hybrid optimum sits in
        // the low-price band (and empirically everywhere).
        if (r.hybrid_case == PriceCase::LowPrice) CHECK(r.r_payg > r.r_hybrid);
    }

    // Same seed, different thread counts: identical output.
    std::vector<StudyRow> rows4 = revenue_ranking_study(8, sampler, 99, 4);
    std::ostringstream a, b;
    write_study_csv(a, rows);
    write_study_csv(b, rows4);
    CHECK(a.str() == b.str());
    CHECK(a.str().substr(0, a.str().find('\n')) ==
          "config_id,v1,v2,lambda1,lambda2,k,p_star_payg,R_payg,R_spot,"
          "p_star_hybrid,R_hybrid,hybrid_case,ranking_holds");
}

TEST_CASE("study sampler respects its bounds") {
    StudySampler s;
    s.v2_min = 0.8;
    s.v2_max = 0.9;
    s.k_min = 3;
    s.k_max = 3;
    std::mt19937_64 rng(1);
    for (int i = 0; i < 100; ++i) {
        MarketParams p = sample_study_config(s, rng);
        CHECK(p.class2.value >= 0.8);
        CHECK(p.class2.value <= 0.9);
        CHECK(p.num_servers == 3);
        CHECK(validate(p).empty());
    }
}
