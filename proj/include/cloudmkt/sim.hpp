#pragma once

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "cloudmkt/revenue.hpp"

namespace cloudmkt {

/// One simulation run. The spot market is k parallel M/M/1 queues with
/// preemptive-resume priority by bid (first-price); PAYG is an
/// infinite-server channel at `price` per unit time. Arriving jobs follow
/// the cutoff strategy: spot below the class cutoff (bidding the expected
/// payment for their cost), PAYG while the payoff is nonnegative, balk
/// otherwise.
struct SimConfig {
    Regime regime = Regime::SpotOnly;
    double price = 0.0;        // PAYG price; ignored for SpotOnly
    CutoffVector cutoffs;      // spot participation thresholds
    double horizon = 0.0;      // run length in model time units
    double warmup = 0.0;       // statistics discard window; < horizon
    std::uint64_t seed = 1;
    int n_buckets = 20;        // sojourn buckets over [0, max cutoff]
    int n_batches = 32;        // batch-means batches for rate standard errors
    bool debug_checks = false; // per-event priority/work assertions
};

struct BucketStat {
    double lo = 0.0, hi = 0.0, center = 0.0;
    long count = 0;
    double mean_sojourn = 0.0;
    double se_sojourn = 0.0;
};

struct SimStats {
    SimConfig config;

    // Whole-run conservation counters.
    long arrivals = 0;
    long spot_jobs = 0, payg_jobs = 0, balked = 0;
    long spot_completed = 0, payg_completed = 0;
    long in_system_end = 0;

    // Measurement window (warmup, horizon].
    double spot_revenue_rate = 0.0;  // completed spot bids / window
    double payg_revenue_rate = 0.0;  // price * PAYG busy time in window / window
    double spot_rate_se = 0.0, payg_rate_se = 0.0, total_rate_se = 0.0;
    double payg_mean_sojourn = 0.0;  // PAYG jobs arriving after warmup
    long payg_sojourn_count = 0;

    // Spot sojourn times by waiting cost, jobs arriving after warmup.
    std::vector<BucketStat> buckets;

    // Spot service accounting (work-conservation checks).
    double spot_busy_time = 0.0;       // service delivered by spot servers
    double spot_completed_work = 0.0;  // sum of completed jobs' requirements
    double spot_inflight_served = 0.0; // service received by jobs still in system

    double window() const { return config.horizon - config.warmup; }
};

/// Runs the event-driven simulation. Deterministic for a fixed config.
/// Throws UnstableError when the spot load at the cutoffs is >= 1.
SimStats simulate(const MarketParams &params, const SimConfig &config,
                  const WaitingTimeModel &model = default_wait_model());

/// (spot rate, PAYG rate) from a completed run.
std::pair<double, double> measured_revenue(const SimStats &stats);

struct CurveRow {
    double center = 0.0;
    long count = 0;
    double sim_mean = 0.0;
    double model_wait = 0.0;
    double rel_err = 0.0;
    bool sufficient = false;  // count >= min_samples
};

/// Bucket-by-bucket comparison of simulated mean sojourn against the
/// analytic waiting-time curve. Buckets under min_samples are reported but
/// excluded from the max/mean error.
struct CurveReport {
    std::vector<CurveRow> rows;
    double max_rel_err = 0.0;
    double mean_rel_err = 0.0;
    int n_sufficient = 0;
};

CurveReport compare_waiting_curve(const SimStats &stats, const CutoffVector &cutoffs,
                                  const MarketParams &params,
                                  const WaitingTimeModel &model = default_wait_model(),
                                  long min_samples = 500);

/// One `bucket` row per sojourn bucket plus a final `summary` row; see the
/// README for the column list.
void write_sim_csv(std::ostream &out, const SimStats &stats);
void write_curve_csv(std::ostream &out, const CurveReport &report);

}  // namespace cloudmkt
