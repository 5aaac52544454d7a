#include "cloudmkt/sim.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <queue>
#include <stdexcept>

#include "cloudmkt/csv_util.hpp"

namespace cloudmkt {

namespace {

double uniform01(std::mt19937_64 &rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double exp_sample(std::mt19937_64 &rng, double rate) {
    return -std::log1p(-uniform01(rng)) / rate;
}

enum class EventKind : std::uint8_t { Arrival, SpotDone, PaygDone };

struct Event {
    double time;
    std::uint64_t seq;  // deterministic tie-break and staleness token
    EventKind kind;
    int queue = 0;      // SpotDone: queue index
    double payload = 0; // PaygDone: arrival time
};

struct EventAfter {
    bool operator()(const Event &a, const Event &b) const {
        return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
};

struct SpotJob {
    double cost = 0.0;
    double bid = 0.0;
    double arrival_time = 0.0;
    double requirement = 0.0;
    double remaining = 0.0;
    double service_start = 0.0;
    double served = 0.0;
    std::uint64_t arrival_seq = 0;
    bool alive = false;
};

struct WaitEntry {
    double bid;
    std::uint64_t arrival_seq;
    std::uint32_t job;
};

// Highest bid served first; equal bids go to the earlier arrival.
struct WaitOrder {
    bool operator()(const WaitEntry &a, const WaitEntry &b) const {
        return a.bid != b.bid ? a.bid < b.bid : a.arrival_seq > b.arrival_seq;
    }
};

struct QueueState {
    std::priority_queue<WaitEntry, std::vector<WaitEntry>, WaitOrder> waiting;
    bool busy = false;
    std::uint32_t current = 0;
    std::uint64_t completion_seq = 0;
};

struct Accumulators {
    std::vector<double> bucket_sum, bucket_sumsq;
    std::vector<long> bucket_n;
    std::vector<double> batch_spot, batch_payg;
    double spot_bid_sum = 0.0;
    double payg_busy = 0.0;
};

}  // namespace

SimStats simulate(const MarketParams &params, const SimConfig &cfg,
                  const WaitingTimeModel &model) {
    validate_or_throw(params);
    if (!(cfg.horizon > cfg.warmup) || cfg.warmup < 0.0)
        throw OutOfRangeError("simulation requires horizon > warmup >= 0");
    if (cfg.n_buckets < 1 || cfg.n_batches < 2)
        throw OutOfRangeError("simulation requires n_buckets >= 1 and n_batches >= 2");
    bool spot_open = cfg.regime != Regime::PaygOnly;
    if (spot_open && stability_margin(cfg.cutoffs, params) >= 1.0 - kStabilityEpsilon)
        throw UnstableError("spot load at the strategy cutoffs is at or beyond capacity");
    bool payg_open = cfg.regime != Regime::SpotOnly;
    if (payg_open && cfg.price <= 0.0) throw InvalidPriceError("PAYG price must be positive");

    const double mu = params.service_rate;
    const double lambda_total = params.class1.arrival_rate + params.class2.arrival_rate;
    const double p1 = params.class1.arrival_rate / lambda_total;
    const double cmax = cfg.cutoffs.max_cutoff();
    const double window = cfg.horizon - cfg.warmup;
    const double batch_len = window / cfg.n_batches;

    std::mt19937_64 rng(cfg.seed);
    std::priority_queue<Event, std::vector<Event>, EventAfter> events;
    std::uint64_t next_seq = 0;
    auto push = [&](double time, EventKind kind, int queue = 0, double payload = 0.0) {
        std::uint64_t seq = next_seq++;
        events.push(Event{time, seq, kind, queue, payload});
        return seq;
    };

    std::vector<QueueState> queues(params.num_servers);
    std::vector<SpotJob> slab;
    std::vector<std::uint32_t> free_slots;

    SimStats stats;
    stats.config = cfg;
    double payg_sojourn_sum = 0.0;
    long payg_sojourn_n = 0;
    Accumulators acc;
    acc.bucket_sum.assign(cfg.n_buckets, 0.0);
    acc.bucket_sumsq.assign(cfg.n_buckets, 0.0);
    acc.bucket_n.assign(cfg.n_buckets, 0);
    acc.batch_spot.assign(cfg.n_batches, 0.0);
    acc.batch_payg.assign(cfg.n_batches, 0.0);

    auto batch_index = [&](double t) {
        int b = static_cast<int>((t - cfg.warmup) / batch_len);
        return std::clamp(b, 0, cfg.n_batches - 1);
    };

    // Spreads a PAYG service interval across the revenue batches it overlaps.
    auto credit_payg = [&](double from, double to) {
        double lo = std::max(from, cfg.warmup), hi = std::min(to, cfg.horizon);
        if (!(hi > lo)) return;
        acc.payg_busy += hi - lo;
        for (int b = batch_index(lo); b <= batch_index(hi); ++b) {
            double blo = cfg.warmup + b * batch_len;
            double bhi = (b == cfg.n_batches - 1) ? cfg.horizon : blo + batch_len;
            double overlap = std::min(hi, bhi) - std::max(lo, blo);
            if (overlap > 0.0) acc.batch_payg[b] += overlap;
        }
    };

    auto start_service = [&](QueueState &q, std::uint32_t job_idx, double now, int queue_id) {
        SpotJob &job = slab[job_idx];
        if (cfg.debug_checks && !q.waiting.empty()) {
            const WaitEntry &top = q.waiting.top();
            bool ok = job.bid > top.bid || (job.bid == top.bid && job.arrival_seq < top.arrival_seq);
            if (!ok) throw std::logic_error("priority violation: served job is not the max bid");
        }
        job.service_start = now;
        q.busy = true;
        q.current = job_idx;
        q.completion_seq = push(now + job.remaining, EventKind::SpotDone, queue_id);
    };

    auto stop_service = [&](QueueState &q, double now) {
        SpotJob &job = slab[q.current];
        double span = now - job.service_start;
        job.served += span;
        job.remaining -= span;
        stats.spot_busy_time += span;
    };

    push(exp_sample(rng, lambda_total), EventKind::Arrival);

    while (!events.empty()) {
        Event ev = events.top();
        if (ev.time > cfg.horizon) break;
        events.pop();
        const double now = ev.time;

        switch (ev.kind) {
            case EventKind::Arrival: {
                double next_at = now + exp_sample(rng, lambda_total);
                if (next_at <= cfg.horizon) push(next_at, EventKind::Arrival);

                ++stats.arrivals;
                int klass = uniform01(rng) < p1 ? 1 : 2;
                double cost = params.cls(klass).cost_dist.sample(rng);
                double cutoff = klass == 1 ? cfg.cutoffs.c1 : cfg.cutoffs.c2;
                double payg_top = params.cost_upper(klass) - cfg.price;

                // Ties at the cutoff go to PAYG when it exists.
                bool to_spot = spot_open && (payg_open ? cost < cutoff : cost <= cutoff);
                bool to_payg = !to_spot && payg_open && cost <= payg_top;

                if (to_spot) {
                    ++stats.spot_jobs;
                    double req = exp_sample(rng, mu);
                    int queue_id = std::min<int>(params.num_servers - 1,
                                                 static_cast<int>(uniform01(rng) * params.num_servers));
                    double bid = expected_payment(cost, cfg.cutoffs, params, model);

                    std::uint32_t idx;
                    if (!free_slots.empty()) {
                        idx = free_slots.back();
                        free_slots.pop_back();
                    } else {
                        idx = static_cast<std::uint32_t>(slab.size());
                        slab.emplace_back();
                    }
                    slab[idx] = SpotJob{cost, bid, now, req, req, 0.0, 0.0, ev.seq, true};

                    QueueState &q = queues[queue_id];
                    if (!q.busy) {
                        start_service(q, idx, now, queue_id);
                    } else if (bid > slab[q.current].bid) {
                        // Preemptive resume: bank the served work, requeue.
                        stop_service(q, now);
                        SpotJob &cur = slab[q.current];
                        q.waiting.push(WaitEntry{cur.bid, cur.arrival_seq, q.current});
                        start_service(q, idx, now, queue_id);
                    } else {
                        q.waiting.push(WaitEntry{bid, ev.seq, idx});
                    }
                } else if (to_payg) {
                    ++stats.payg_jobs;
                    double req = exp_sample(rng, mu);
                    push(now + req, EventKind::PaygDone, 0, now);
                    credit_payg(now, now + req);
                } else {
                    ++stats.balked;
                }
                break;
            }

            case EventKind::SpotDone: {
                QueueState &q = queues[ev.queue];
                if (!q.busy || ev.seq != q.completion_seq) break;  // cancelled by preemption
                stop_service(q, now);
                SpotJob &job = slab[q.current];
                if (cfg.debug_checks && std::abs(job.served - job.requirement) > 1e-9)
                    throw std::logic_error("work conservation violation at completion");

                ++stats.spot_completed;
                stats.spot_completed_work += job.requirement;
                if (now > cfg.warmup) {
                    acc.spot_bid_sum += job.bid;
                    acc.batch_spot[batch_index(now)] += job.bid;
                }
                if (job.arrival_time > cfg.warmup && cmax > 0.0) {
                    int b = std::min(cfg.n_buckets - 1,
                                     static_cast<int>(job.cost / cmax * cfg.n_buckets));
                    double sojourn = now - job.arrival_time;
                    acc.bucket_sum[b] += sojourn;
                    acc.bucket_sumsq[b] += sojourn * sojourn;
                    ++acc.bucket_n[b];
                }

                job.alive = false;
                free_slots.push_back(q.current);
                q.busy = false;
                if (!q.waiting.empty()) {
                    WaitEntry next = q.waiting.top();
                    q.waiting.pop();
                    start_service(q, next.job, now, ev.queue);
                }
                break;
            }

            case EventKind::PaygDone:
                ++stats.payg_completed;
                if (ev.payload > cfg.warmup) {
                    double sojourn = now - ev.payload;
                    payg_sojourn_sum += sojourn;
                    ++payg_sojourn_n;
                }
                break;
        }
    }

    // Bank partial service of jobs still on a server at the horizon.
    for (auto &q : queues)
        if (q.busy) stop_service(q, cfg.horizon);
    for (const SpotJob &job : slab)
        if (job.alive) stats.spot_inflight_served += job.served;

    stats.in_system_end = (stats.spot_jobs - stats.spot_completed) +
                          (stats.payg_jobs - stats.payg_completed);

    stats.spot_revenue_rate = acc.spot_bid_sum / window;
    stats.payg_revenue_rate = cfg.price * acc.payg_busy / window;
    if (payg_sojourn_n > 0) stats.payg_mean_sojourn = payg_sojourn_sum / payg_sojourn_n;
    stats.payg_sojourn_count = payg_sojourn_n;

    // Batch-means standard errors for the revenue rates.
    auto batch_se = [&](auto value_of_batch) {
        double mean = 0.0;
        for (int b = 0; b < cfg.n_batches; ++b) mean += value_of_batch(b);
        mean /= cfg.n_batches;
        double var = 0.0;
        for (int b = 0; b < cfg.n_batches; ++b) {
            double d = value_of_batch(b) - mean;
            var += d * d;
        }
        var /= (cfg.n_batches - 1);
        return std::sqrt(var / cfg.n_batches);
    };
    double price = cfg.price;
    stats.spot_rate_se = batch_se([&](int b) { return acc.batch_spot[b] / batch_len; });
    stats.payg_rate_se = batch_se([&](int b) { return price * acc.batch_payg[b] / batch_len; });
    stats.total_rate_se =
        batch_se([&](int b) { return (acc.batch_spot[b] + price * acc.batch_payg[b]) / batch_len; });

    stats.buckets.resize(cfg.n_buckets);
    for (int b = 0; b < cfg.n_buckets; ++b) {
        BucketStat &bs = stats.buckets[b];
        bs.lo = cmax * b / cfg.n_buckets;
        bs.hi = cmax * (b + 1) / cfg.n_buckets;
        bs.center = 0.5 * (bs.lo + bs.hi);
        bs.count = acc.bucket_n[b];
        if (bs.count > 0) bs.mean_sojourn = acc.bucket_sum[b] / bs.count;
        if (bs.count > 1) {
            double var = (acc.bucket_sumsq[b] - bs.count * bs.mean_sojourn * bs.mean_sojourn) /
                         (bs.count - 1);
            bs.se_sojourn = std::sqrt(std::max(0.0, var) / bs.count);
        }
    }
    if (cmax <= 0.0) stats.buckets.clear();

    return stats;
}

std::pair<double, double> measured_revenue(const SimStats &stats) {
    return {stats.spot_revenue_rate, stats.payg_revenue_rate};
}

CurveReport compare_waiting_curve(const SimStats &stats, const CutoffVector &cutoffs,
                                  const MarketParams &params, const WaitingTimeModel &model,
                                  long min_samples) {
    CurveReport rep;
    double err_sum = 0.0;
    for (const BucketStat &b : stats.buckets) {
        CurveRow row;
        row.center = b.center;
        row.count = b.count;
        row.sim_mean = b.mean_sojourn;
        row.model_wait = model.waiting_time(b.center, cutoffs, params);
        row.sufficient = b.count >= min_samples;
        if (b.count > 0) row.rel_err = std::abs(b.mean_sojourn - row.model_wait) / row.model_wait;
        if (row.sufficient) {
            rep.max_rel_err = std::max(rep.max_rel_err, row.rel_err);
            err_sum += row.rel_err;
            ++rep.n_sufficient;
        }
        rep.rows.push_back(row);
    }
    if (rep.n_sufficient > 0) rep.mean_rel_err = err_sum / rep.n_sufficient;
    return rep;
}

void write_sim_csv(std::ostream &out, const SimStats &s) {
    out << "row,center,count,mean_sojourn,se_sojourn,spot_rate,se_spot,payg_rate,se_payg,"
           "arrivals,spot_jobs,payg_jobs,balked,spot_completed,payg_completed,in_system_end\n";
    for (const BucketStat &b : s.buckets)
        out << "bucket," << csv::num(b.center) << ',' << b.count << ',' << csv::num(b.mean_sojourn)
            << ',' << csv::num(b.se_sojourn) << ",,,,,,,,,,,\n";
    out << "summary,,,,," << csv::num(s.spot_revenue_rate) << ',' << csv::num(s.spot_rate_se) << ','
        << csv::num(s.payg_revenue_rate) << ',' << csv::num(s.payg_rate_se) << ',' << s.arrivals
        << ',' << s.spot_jobs << ',' << s.payg_jobs << ',' << s.balked << ',' << s.spot_completed
        << ',' << s.payg_completed << ',' << s.in_system_end << '\n';
}

void write_curve_csv(std::ostream &out, const CurveReport &rep) {
    out << "center,count,sim_mean,model_wait,rel_err,sufficient\n";
    for (const CurveRow &r : rep.rows)
        out << csv::num(r.center) << ',' << r.count << ',' << csv::num(r.sim_mean) << ','
            << csv::num(r.model_wait) << ',' << csv::num(r.rel_err) << ',' << csv::flag(r.sufficient)
            << '\n';
}

}  // namespace cloudmkt
