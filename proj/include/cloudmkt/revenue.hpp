#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "cloudmkt/equilibrium.hpp"

namespace cloudmkt {

enum class Regime { PaygOnly, SpotOnly, Hybrid };
const char *to_string(Regime r);

/// Expected revenue per unit time, split by channel and class.
struct RevenueReport {
    Regime regime = Regime::PaygOnly;
    std::optional<double> price;              // empty for SpotOnly
    double revenue_rate = 0.0;                // sum of all components
    std::array<double, 2> payg_by_class{};    // index 0 = class 1
    std::array<double, 2> spot_by_class{};
};

/// PAYG in isolation: R(p) = (p/mu) * sum_i lambda_i F_i(mu*v_i - p).
/// Classes priced out of the market contribute zero.
RevenueReport revenue_payg(double price, const MarketParams &params);

/// Spot market in isolation: per class, lambda_i times the expected payment
/// of a participating job, integrated against the cost density up to the
/// equilibrium cutoff.
RevenueReport revenue_spot(EquilibriumSolver &solver);
RevenueReport revenue_spot(const MarketParams &params,
                           const WaitingTimeModel &model = default_wait_model());

/// Both channels at PAYG price p, at the hybrid equilibrium cutoffs.
RevenueReport revenue_hybrid(double price, EquilibriumSolver &solver);
RevenueReport revenue_hybrid(double price, const MarketParams &params,
                             const WaitingTimeModel &model = default_wait_model());

struct PriceOptimum {
    double price;
    RevenueReport report;
};

inline constexpr int kDefaultPriceGrid = 2048;

/// Maximizes revenue over p in (0, mu*v1]. Scans a uniform grid that always
/// includes the kink prices (mu*v2 and the two hybrid case boundaries), then
/// refines the best bracket by golden section. Deterministic.
/// regime must be PaygOnly or Hybrid.
PriceOptimum optimize_price(Regime regime, EquilibriumSolver &solver,
                            int n_grid = kDefaultPriceGrid);
PriceOptimum optimize_price(Regime regime, const MarketParams &params,
                            const WaitingTimeModel &model = default_wait_model(),
                            int n_grid = kDefaultPriceGrid);

/// Random-configuration generator for the revenue-ranking study. Service
/// rate is fixed at 1 and both cost distributions are uniform; values,
/// arrival rates, and the server count are drawn from these ranges.
struct StudySampler {
    double v2_min = 0.5, v2_max = 2.0;
    double ratio_min = 1.1, ratio_max = 3.0;  // v1 = v2 * ratio
    double lambda_min = 0.2, lambda_max = 3.0;
    int k_min = 1, k_max = 8;
};

MarketParams sample_study_config(const StudySampler &sampler, std::mt19937_64 &rng);

struct StudyRow {
    int config_id;
    double v1, v2, lambda1, lambda2;
    int k;
    double p_star_payg, r_payg;
    double r_spot;
    double p_star_hybrid, r_hybrid;
    PriceCase hybrid_case;   // case of the hybrid optimum
    bool ranking_holds;      // max R_payg > max R_hybrid
};

/// Full regime comparison for one market: optimal PAYG, spot-only revenue,
/// optimal hybrid, and the ranking flag.
StudyRow study_row(int config_id, const MarketParams &params);

/// Samples n random configurations and compares optimal PAYG, spot-only,
/// and optimal hybrid revenue for each. Row i uses an independent RNG
/// stream derived from (seed, i), so results do not depend on thread
/// scheduling; n_threads <= 0 picks a sensible default.
std::vector<StudyRow> revenue_ranking_study(int n_configs, const StudySampler &sampler,
                                            std::uint64_t seed, int n_threads = 0);

void write_study_csv(std::ostream &out, std::span<const StudyRow> rows);

}  // namespace cloudmkt
