#include "cloudmkt/revenue.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "cloudmkt/csv_util.hpp"
#include "cloudmkt/quadrature.hpp"

namespace cloudmkt {

const char *to_string(Regime r) {
    switch (r) {
        case Regime::PaygOnly: return "payg";
        case Regime::SpotOnly: return "spot";
        case Regime::Hybrid: return "hybrid";
    }
    return "?";
}

RevenueReport revenue_payg(double price, const MarketParams &params) {
    if (price <= 0.0) throw InvalidPriceError("PAYG price must be positive");
    RevenueReport rep;
    rep.regime = Regime::PaygOnly;
    rep.price = price;
    for (int i : {1, 2}) {
        const ClassParams &c = params.cls(i);
        double participating = c.cost_dist.cdf(params.cost_upper(i) - price);
        rep.payg_by_class[i - 1] = price / params.service_rate * c.arrival_rate * participating;
    }
    rep.revenue_rate = rep.payg_by_class[0] + rep.payg_by_class[1];
    return rep;
}

namespace {

// lambda_i * integral_0^ci m(t; cutoffs) f_i(t) dt. The payment integrand
// has kinks at both cutoffs, so those become panel boundaries.
double spot_component(int i, const CutoffVector &cut, EquilibriumSolver &solver) {
    double ci = (i == 1) ? cut.c1 : cut.c2;
    if (ci <= 0.0) return 0.0;
    const MarketParams &p = solver.params();
    const CostDistribution &dist = p.cls(i).cost_dist;
    const WaitingTimeModel &model = solver.model();
    double integral = integrate_adaptive(
        [&](double t) {
            double m = solver.integrated_wait(t, cut) - t * model.waiting_time(t, cut, p);
            return m * dist.pdf(t);
        },
        0.0, ci, {cut.c1, cut.c2}, 1e-9);
    return p.cls(i).arrival_rate * integral;
}

}  // namespace

RevenueReport revenue_spot(EquilibriumSolver &solver) {
    SpotEquilibrium eq = solver.spot_equilibrium();
    RevenueReport rep;
    rep.regime = Regime::SpotOnly;
    rep.spot_by_class[0] = spot_component(1, eq.cutoffs, solver);
    rep.spot_by_class[1] = spot_component(2, eq.cutoffs, solver);
    rep.revenue_rate = rep.spot_by_class[0] + rep.spot_by_class[1];
    return rep;
}

RevenueReport revenue_spot(const MarketParams &params, const WaitingTimeModel &model) {
    EquilibriumSolver solver(params, model);
    return revenue_spot(solver);
}

RevenueReport revenue_hybrid(double price, EquilibriumSolver &solver) {
    HybridEquilibrium eq = solver.hybrid_equilibrium(price);
    const MarketParams &p = solver.params();
    RevenueReport rep;
    rep.regime = Regime::Hybrid;
    rep.price = price;
    for (int i : {1, 2}) {
        const ClassParams &c = p.cls(i);
        double ci = (i == 1) ? eq.cutoffs.c1 : eq.cutoffs.c2;
        double share = std::max(0.0, c.cost_dist.cdf(p.cost_upper(i) - price) - c.cost_dist.cdf(ci));
        rep.payg_by_class[i - 1] = price / p.service_rate * c.arrival_rate * share;
        rep.spot_by_class[i - 1] = spot_component(i, eq.cutoffs, solver);
    }
    rep.revenue_rate = rep.payg_by_class[0] + rep.payg_by_class[1] + rep.spot_by_class[0] +
                       rep.spot_by_class[1];
    return rep;
}

RevenueReport revenue_hybrid(double price, const MarketParams &params,
                             const WaitingTimeModel &model) {
    EquilibriumSolver solver(params, model);
    return revenue_hybrid(price, solver);
}

namespace {

template <class F>
double golden_section_max(const F &f, double lo, double hi, double tol) {
    constexpr double kGolden = 0.6180339887498949;
    double a = lo, b = hi;
    double c = b - kGolden * (b - a), d = a + kGolden * (b - a);
    double fc = f(c), fd = f(d);
    for (int i = 0; i < 200 && (b - a) > tol; ++i) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - kGolden * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + kGolden * (b - a);
            fd = f(d);
        }
    }
    return fc > fd ? c : d;
}

}  // namespace

PriceOptimum optimize_price(Regime regime, EquilibriumSolver &solver, int n_grid) {
    if (regime == Regime::SpotOnly)
        throw std::invalid_argument("spot revenue does not depend on a price");
    if (n_grid < 2) throw std::invalid_argument("price grid needs at least 2 points");

    const MarketParams &p = solver.params();
    double p_max = p.cost_upper(1);
    auto value = [&](double price) {
        return regime == Regime::PaygOnly ? revenue_payg(price, p).revenue_rate
                                          : revenue_hybrid(price, solver).revenue_rate;
    };

    // Uniform grid over (0, p_max] plus the prices where the revenue
    // functions change shape: the PAYG kink at mu*v2 and the hybrid case
    // boundaries.
    std::vector<double> grid;
    grid.reserve(n_grid + 3);
    for (int j = 1; j <= n_grid; ++j) grid.push_back(p_max * static_cast<double>(j) / n_grid);
    for (double brk : {p.cost_upper(2), solver.low_price_bound(), solver.high_price_bound()})
        if (brk > 0.0 && brk < p_max) grid.push_back(brk);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    size_t best = 0;
    double best_val = -1.0;
    for (size_t j = 0; j < grid.size(); ++j) {
        double v = value(grid[j]);
        if (v > best_val) {
            best_val = v;
            best = j;
        }
    }

    double lo = best > 0 ? grid[best - 1] : grid[best] * 0.5;
    double hi = best + 1 < grid.size() ? grid[best + 1] : grid[best];
    double refined = golden_section_max(value, lo, hi, 1e-10 * p_max);
    double refined_val = value(refined);

    double p_star = refined_val > best_val ? refined : grid[best];
    PriceOptimum opt;
    opt.price = p_star;
    opt.report = regime == Regime::PaygOnly ? revenue_payg(p_star, p) : revenue_hybrid(p_star, solver);
    return opt;
}

PriceOptimum optimize_price(Regime regime, const MarketParams &params,
                            const WaitingTimeModel &model, int n_grid) {
    EquilibriumSolver solver(params, model);
    return optimize_price(regime, solver, n_grid);
}

namespace {

double uniform01(std::mt19937_64 &rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace

MarketParams sample_study_config(const StudySampler &s, std::mt19937_64 &rng) {
    auto range = [&](double lo, double hi) { return lo + (hi - lo) * uniform01(rng); };
    double v2 = range(s.v2_min, s.v2_max);
    double v1 = v2 * range(s.ratio_min, s.ratio_max);
    double l1 = range(s.lambda_min, s.lambda_max);
    double l2 = range(s.lambda_min, s.lambda_max);
    int k = s.k_min + static_cast<int>(uniform01(rng) * (s.k_max - s.k_min + 1));
    k = std::min(k, s.k_max);
    const double mu = 1.0;
    return MarketParams{
        mu, k,
        ClassParams{v1, l1, CostDistribution::uniform(mu * v1)},
        ClassParams{v2, l2, CostDistribution::uniform(mu * v2)},
    };
}

StudyRow study_row(int config_id, const MarketParams &params) {
    EquilibriumSolver solver(params);
    PriceOptimum payg = optimize_price(Regime::PaygOnly, solver);
    RevenueReport spot = revenue_spot(solver);
    PriceOptimum hybrid = optimize_price(Regime::Hybrid, solver);
    PriceCase tag = solver.hybrid_equilibrium(hybrid.price).case_tag;

    return StudyRow{config_id,
                    params.class1.value,
                    params.class2.value,
                    params.class1.arrival_rate,
                    params.class2.arrival_rate,
                    params.num_servers,
                    payg.price,
                    payg.report.revenue_rate,
                    spot.revenue_rate,
                    hybrid.price,
                    hybrid.report.revenue_rate,
                    tag,
                    payg.report.revenue_rate > hybrid.report.revenue_rate};
}

std::vector<StudyRow> revenue_ranking_study(int n_configs, const StudySampler &sampler,
                                            std::uint64_t seed, int n_threads) {
    if (n_configs < 1) throw std::invalid_argument("study needs at least one configuration");

    std::vector<StudyRow> rows(n_configs);
    auto run_row = [&](int id) {
        std::mt19937_64 rng(mix64(seed + static_cast<std::uint64_t>(id)));
        rows[id] = study_row(id, sample_study_config(sampler, rng));
    };

    if (n_threads <= 0) {
        unsigned hw = std::thread::hardware_concurrency();
        n_threads = static_cast<int>(std::clamp(hw, 1u, 8u));
    }
    n_threads = std::min(n_threads, n_configs);

    if (n_threads == 1) {
        for (int id = 0; id < n_configs; ++id) run_row(id);
        return rows;
    }

    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) {
        pool.emplace_back([&] {
            for (int id = next.fetch_add(1); id < n_configs; id = next.fetch_add(1)) {
                try {
                    run_row(id);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mu);
                    if (!failure) failure = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto &th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
    return rows;
}

void write_study_csv(std::ostream &out, std::span<const StudyRow> rows) {
    out << "config_id,v1,v2,lambda1,lambda2,k,p_star_payg,R_payg,R_spot,"
           "p_star_hybrid,R_hybrid,hybrid_case,ranking_holds\n";
    for (const StudyRow &r : rows) {
        out << r.config_id << ',' << csv::num(r.v1) << ',' << csv::num(r.v2) << ','
            << csv::num(r.lambda1) << ',' << csv::num(r.lambda2) << ',' << r.k << ','
            << csv::num(r.p_star_payg) << ',' << csv::num(r.r_payg) << ',' << csv::num(r.r_spot)
            << ',' << csv::num(r.p_star_hybrid) << ',' << csv::num(r.r_hybrid) << ','
            << to_string(r.hybrid_case) << ',' << csv::flag(r.ranking_holds) << '\n';
    }
}

}  // namespace cloudmkt
