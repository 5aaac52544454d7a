#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>

#include "cloudmkt/waiting.hpp"

namespace cloudmkt {

/// Root finders stop when the equation residual is within this tolerance.
inline constexpr double kRootTolerance = 1e-9;
inline constexpr int kMaxBisectIterations = 200;

/// Spot-market-only equilibrium: class-i jobs participate iff cost <= c_i.
struct SpotEquilibrium {
    CutoffVector cutoffs;      // (c1, c2), c1 >= common_threshold >= c2
    double common_threshold;   // root of integral_0^x w(t; x, x) dt = v2
};

/// Which of the three hybrid price bands the PAYG price falls in.
enum class PriceCase { LowPrice, MidPrice, HighPrice };
const char *to_string(PriceCase c);

/// Closed interval of waiting costs that a class sends to PAYG.
struct PaygInterval {
    double lo = 0.0;
    double hi = -1.0;
    bool empty() const { return hi < lo; }
};

/// Equilibrium of the hybrid system at PAYG price p: spot below the cutoff,
/// PAYG on [c_i(p), mu*v_i - p] when that interval is nonempty, balk above.
struct HybridEquilibrium {
    double price;
    CutoffVector cutoffs;
    PriceCase case_tag;
    std::array<PaygInterval, 2> payg_intervals;  // index 0 = class 1
};

/// Expected total payment of a participating spot job with waiting cost c:
///   m(c) = integral_0^c w(t) dt - c * w(c).
/// The payment is pinned down by the waiting-time function alone (any spot
/// pricing rule with m(0) = 0 charges this in equilibrium). Throws
/// OutOfRangeError for c outside [0, max(c1, c2)]: payments are only defined
/// for participants.
double expected_payment(double cost, const CutoffVector &cutoffs, const MarketParams &params,
                        const WaitingTimeModel &model = default_wait_model());

/// Computes equilibrium cutoffs for one market instance.
///
/// All residual functions involved are monotone (the uniqueness proofs are
/// constructive), so every solve is a plain bisection on the stated bracket;
/// loads past the stability boundary evaluate as +infinity, which the
/// bisection handles as an ordinary sign. Results are cached per instance;
/// an instance is cheap to create and not thread-safe.
class EquilibriumSolver {
public:
    explicit EquilibriumSolver(const MarketParams &params,
                               const WaitingTimeModel &model = default_wait_model());

    const MarketParams &params() const { return params_; }
    const WaitingTimeModel &model() const { return *model_; }

    /// integral_0^c w(t; cutoffs) dt via the model's closed form when it has
    /// one, otherwise via adaptive quadrature.
    double integrated_wait(double cost, const CutoffVector &cutoffs) const;

    /// The threshold splitting the hybrid price cases: the unique x with
    /// integral_0^x w(t; x, x) dt = v2.
    double common_threshold();

    /// Given a class-1 cutoff x1 >= common_threshold, the unique class-2
    /// cutoff x2 <= common_threshold with integral_0^x2 w(t; x1, x2) dt = v2.
    /// Decreasing in x1. Throws OutOfRangeError for x1 below the threshold.
    double inner_cutoff(double high_cutoff);

    /// Spot-only cutoffs: the unique pair with integral_0^ci w = v_i.
    SpotEquilibrium spot_equilibrium();

    double low_price_bound();   // mu*v2 - common_threshold
    double high_price_bound();  // mu*v1 - c1_spot

    /// Low-price-case machinery: the pooled cutoff x solving
    /// (p + x)/mu = integral_0^x w(t; x, x) dt. Valid for p <= low bound.
    double pooled_cutoff(double price);

    /// Mid-price-case machinery: the pair (x1, inner_cutoff(x1)) solving
    /// (p + x1)/mu = integral_0^x1 w dt. Valid for p in (low, high] bounds.
    CutoffVector split_cutoffs(double price);

    /// Full three-case equilibrium for a PAYG price p > 0.
    HybridEquilibrium hybrid_equilibrium(double price);

private:
    double integrated_wait_or_inf(double cost, const CutoffVector &cutoffs) const;

    MarketParams params_;
    const WaitingTimeModel *model_;
    bool closed_form_;
    std::optional<double> cbar_;
    std::optional<SpotEquilibrium> spot_;
    std::map<double, double> inner_cache_;
};

// One-shot wrappers around EquilibriumSolver.
double solve_common_threshold(const MarketParams &params,
                              const WaitingTimeModel &model = default_wait_model());
double solve_inner_cutoff(double high_cutoff, const MarketParams &params,
                          const WaitingTimeModel &model = default_wait_model());
SpotEquilibrium solve_spot_cutoffs(const MarketParams &params,
                                   const WaitingTimeModel &model = default_wait_model());
HybridEquilibrium solve_hybrid_cutoffs(double price, const MarketParams &params,
                                       const WaitingTimeModel &model = default_wait_model());

/// Grid kernel behind the incentive audit: given per-grid-point waiting
/// times and payments, the largest gain any true cost can get by reporting a
/// different grid point. Exposed so tests can feed it corrupted payments.
double max_deviation_gain(std::span<const double> costs, std::span<const double> waits,
                          std::span<const double> payments);

/// Brute-force incentive-compatibility audit: best deviation gain over a
/// uniform report grid of grid_size points on [0, max cutoff]. A correct
/// payment rule keeps this at quadrature-noise level (<= 1e-6).
double audit_incentive_compatibility(const CutoffVector &cutoffs, const MarketParams &params,
                                     int grid_size,
                                     const WaitingTimeModel &model = default_wait_model());

/// Grid check of the participation constraints defining the cutoffs (payoff
/// signs below/above each cutoff, channel preference in the hybrid case).
/// Returns the worst violation; evaluates integrals by quadrature so it is
/// independent of the closed-form path the solver may have used.
double audit_participation(const SpotEquilibrium &eq, const MarketParams &params, int grid_size,
                           const WaitingTimeModel &model = default_wait_model());
double audit_participation(const HybridEquilibrium &eq, const MarketParams &params, int grid_size,
                           const WaitingTimeModel &model = default_wait_model());

}  // namespace cloudmkt
