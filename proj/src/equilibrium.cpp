#include "cloudmkt/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace cloudmkt {

const char *to_string(PriceCase c) {
    switch (c) {
        case PriceCase::LowPrice: return "low";
        case PriceCase::MidPrice: return "mid";
        case PriceCase::HighPrice: return "high";
    }
    return "?";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Plain bisection for a nondecreasing residual with f(lo) <= 0 <= f(hi).
// Stops on |f| <= tol; +/-infinity values are legitimate signs (they arise
// when an iterate crosses the stability boundary).
template <class F>
double bisect_increasing(const F &f, double lo, double hi, double tol, int max_iter) {
    double flo = f(lo);
    if (std::abs(flo) <= tol) return lo;
    double fhi = f(hi);
    if (std::abs(fhi) <= tol) return hi;
    if (flo > 0.0 || fhi < 0.0)
        throw SolverError("bisection bracket [" + std::to_string(lo) + ", " + std::to_string(hi) +
                          "] does not enclose a root");
    for (int i = 0; i < max_iter; ++i) {
        double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;  // bracket at floating-point resolution
        double fm = f(mid);
        if (std::abs(fm) <= tol) return mid;
        (fm < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

double expected_payment(double cost, const CutoffVector &cut, const MarketParams &p,
                        const WaitingTimeModel &model) {
    double cmax = cut.max_cutoff();
    if (cost < 0.0 || cost > cmax + 1e-12 * (1.0 + cmax))
        throw OutOfRangeError("payment undefined for cost " + std::to_string(cost) +
                              " outside the participation range [0, " + std::to_string(cmax) + "]");
    cost = std::min(cost, cmax);
    if (cost == 0.0) return 0.0;
    double cumulative = model.has_closed_form_integral(p)
                            ? model.cumulative_wait_closed(cost, cut, p)
                            : cumulative_wait(cost, cut, p, model);
    return cumulative - cost * model.waiting_time(cost, cut, p);
}

EquilibriumSolver::EquilibriumSolver(const MarketParams &params, const WaitingTimeModel &model)
    : params_(params), model_(&model), closed_form_(model.has_closed_form_integral(params)) {
    validate_or_throw(params_);
}

double EquilibriumSolver::integrated_wait(double cost, const CutoffVector &cut) const {
    return closed_form_ ? model_->cumulative_wait_closed(cost, cut, params_)
                        : cumulative_wait(cost, cut, params_, *model_);
}

double EquilibriumSolver::integrated_wait_or_inf(double cost, const CutoffVector &cut) const {
    try {
        return integrated_wait(cost, cut);
    } catch (const UnstableError &) {
        return kInf;
    }
}

double EquilibriumSolver::common_threshold() {
    if (!cbar_) {
        double v2 = params_.class2.value;
        cbar_ = bisect_increasing(
            [&](double x) { return integrated_wait_or_inf(x, {x, x}) - v2; }, 0.0,
            params_.cost_upper(2), kRootTolerance, kMaxBisectIterations);
    }
    return *cbar_;
}

double EquilibriumSolver::inner_cutoff(double high_cutoff) {
    double cbar = common_threshold();
    if (high_cutoff < cbar - 1e-9 * (1.0 + cbar))
        throw OutOfRangeError("inner cutoff requires a class-1 cutoff >= the common threshold");
    high_cutoff = std::max(high_cutoff, cbar);

    if (auto it = inner_cache_.find(high_cutoff); it != inner_cache_.end()) return it->second;

    double root;
    if (params_.rho(1) * params_.class1.cost_dist.cdf(high_cutoff) >= 1.0 - kStabilityEpsilon) {
        // Class 1 alone saturates capacity at this cutoff: waiting times are
        // infinite for any positive class-2 cutoff, so the limiting root is 0.
        root = 0.0;
    } else {
        double v2 = params_.class2.value;
        root = bisect_increasing(
            [&](double x2) { return integrated_wait_or_inf(x2, {high_cutoff, x2}) - v2; }, 0.0,
            cbar, kRootTolerance, kMaxBisectIterations);
    }
    inner_cache_.emplace(high_cutoff, root);
    return root;
}

SpotEquilibrium EquilibriumSolver::spot_equilibrium() {
    if (!spot_) {
        double cbar = common_threshold();
        double v1 = params_.class1.value;
        double c1 = bisect_increasing(
            [&](double x1) {
                return integrated_wait_or_inf(x1, {x1, inner_cutoff(x1)}) - v1;
            },
            cbar, params_.cost_upper(1), kRootTolerance, kMaxBisectIterations);
        spot_ = SpotEquilibrium{{c1, inner_cutoff(c1)}, cbar};
    }
    return *spot_;
}

double EquilibriumSolver::low_price_bound() {
    return params_.cost_upper(2) - common_threshold();
}

double EquilibriumSolver::high_price_bound() {
    return params_.cost_upper(1) - spot_equilibrium().cutoffs.c1;
}

double EquilibriumSolver::pooled_cutoff(double price) {
    if (price <= 0.0) throw InvalidPriceError("PAYG price must be positive");
    double mu = params_.service_rate;
    // (p + x)/mu - integral is decreasing in x; negate for bisect_increasing.
    return bisect_increasing(
        [&](double x) { return integrated_wait_or_inf(x, {x, x}) - (price + x) / mu; }, 0.0,
        common_threshold(), kRootTolerance, kMaxBisectIterations);
}

CutoffVector EquilibriumSolver::split_cutoffs(double price) {
    if (price <= 0.0) throw InvalidPriceError("PAYG price must be positive");
    double mu = params_.service_rate;
    double c1 = bisect_increasing(
        [&](double x1) {
            return integrated_wait_or_inf(x1, {x1, inner_cutoff(x1)}) - (price + x1) / mu;
        },
        common_threshold(), spot_equilibrium().cutoffs.c1, kRootTolerance, kMaxBisectIterations);
    return {c1, inner_cutoff(c1)};
}

HybridEquilibrium EquilibriumSolver::hybrid_equilibrium(double price) {
    if (price <= 0.0) throw InvalidPriceError("PAYG price must be positive");

    HybridEquilibrium eq;
    eq.price = price;
    if (price <= low_price_bound()) {
        double x = pooled_cutoff(price);
        eq.cutoffs = {x, x};
        eq.case_tag = PriceCase::LowPrice;
    } else if (price <= high_price_bound()) {
        eq.cutoffs = split_cutoffs(price);
        eq.case_tag = PriceCase::MidPrice;
    } else {
        eq.cutoffs = spot_equilibrium().cutoffs;
        eq.case_tag = PriceCase::HighPrice;
    }
    // Class i uses PAYG on [c_i(p), mu*v_i - p] when that interval is
    // nonempty; a job indifferent at the cutoff goes to PAYG.
    for (int i : {1, 2}) {
        double lo = (i == 1) ? eq.cutoffs.c1 : eq.cutoffs.c2;
        double hi = params_.cost_upper(i) - price;
        if (lo <= hi) eq.payg_intervals[i - 1] = {lo, hi};
    }
    return eq;
}

double solve_common_threshold(const MarketParams &params, const WaitingTimeModel &model) {
    return EquilibriumSolver(params, model).common_threshold();
}

double solve_inner_cutoff(double high_cutoff, const MarketParams &params,
                          const WaitingTimeModel &model) {
    return EquilibriumSolver(params, model).inner_cutoff(high_cutoff);
}

SpotEquilibrium solve_spot_cutoffs(const MarketParams &params, const WaitingTimeModel &model) {
    return EquilibriumSolver(params, model).spot_equilibrium();
}

HybridEquilibrium solve_hybrid_cutoffs(double price, const MarketParams &params,
                                       const WaitingTimeModel &model) {
    return EquilibriumSolver(params, model).hybrid_equilibrium(price);
}

double max_deviation_gain(std::span<const double> costs, std::span<const double> waits,
                          std::span<const double> payments) {
    double worst = 0.0;
    for (size_t j = 0; j < costs.size(); ++j) {
        double truthful = -costs[j] * waits[j] - payments[j];
        double best = truthful;
        for (size_t r = 0; r < costs.size(); ++r)
            best = std::max(best, -costs[j] * waits[r] - payments[r]);
        worst = std::max(worst, best - truthful);
    }
    return worst;
}

double audit_incentive_compatibility(const CutoffVector &cut, const MarketParams &params,
                                     int grid_size, const WaitingTimeModel &model) {
    double cmax = cut.max_cutoff();
    if (cmax <= 0.0 || grid_size < 2) return 0.0;

    std::vector<double> costs(grid_size), waits(grid_size), payments(grid_size);
    for (int j = 0; j < grid_size; ++j) {
        costs[j] = cmax * static_cast<double>(j) / (grid_size - 1);
        waits[j] = model.waiting_time(costs[j], cut, params);
        payments[j] = expected_payment(costs[j], cut, params, model);
    }
    return max_deviation_gain(costs, waits, payments);
}

namespace {

// Shared worker for the participation audits. For each class, walks a grid
// over the cost support and scores the payoff constraints that define the
// cutoff. `price` is empty for the spot-only system.
double participation_worst(const CutoffVector &cut, std::optional<double> price,
                           const std::array<bool, 2> &payg_active, const MarketParams &params,
                           int grid_size, const WaitingTimeModel &model) {
    double worst = 0.0;
    for (int i : {1, 2}) {
        double v = params.cls(i).value;
        double mu = params.service_rate;
        double ci = (i == 1) ? cut.c1 : cut.c2;
        double top = params.cost_upper(i);

        // Binding condition at the cutoff itself.
        double w_at = cumulative_wait(ci, cut, params, model);
        if (price && payg_active[i - 1])
            worst = std::max(worst, std::abs(w_at - (*price + ci) / mu));
        else if (ci > 0.0)
            worst = std::max(worst, std::abs(v - w_at));

        double tol_c = 1e-9 * (1.0 + top);
        for (int j = 0; j < grid_size; ++j) {
            double c = top * static_cast<double>(j) / (grid_size - 1);
            double cum = cumulative_wait(c, cut, params, model);
            if (c < ci - tol_c) {
                // Participants: nonnegative spot payoff, and strictly better
                // than PAYG when PAYG exists.
                worst = std::max(worst, cum - v);
                if (price) worst = std::max(worst, cum - (*price + c) / mu);
            } else if (c > ci + tol_c) {
                if (price && payg_active[i - 1] && c <= top - *price) {
                    // PAYG range: weakly prefer PAYG, nonnegative payoff.
                    worst = std::max(worst, (*price + c) / mu - cum);
                    worst = std::max(worst, (*price + c) / mu - v);
                } else {
                    // Balk range (or PAYG priced out): spot unattractive.
                    worst = std::max(worst, v - cum);
                    if (price && c <= top - *price)
                        worst = std::max(worst, v - (*price + c) / mu);
                }
            }
        }
    }
    return worst;
}

}  // namespace

double audit_participation(const SpotEquilibrium &eq, const MarketParams &params, int grid_size,
                           const WaitingTimeModel &model) {
    return participation_worst(eq.cutoffs, std::nullopt, {false, false}, params, grid_size, model);
}

double audit_participation(const HybridEquilibrium &eq, const MarketParams &params, int grid_size,
                           const WaitingTimeModel &model) {
    std::array<bool, 2> active = {!eq.payg_intervals[0].empty(), !eq.payg_intervals[1].empty()};
    return participation_worst(eq.cutoffs, eq.price, active, params, grid_size, model);
}

}  // namespace cloudmkt
