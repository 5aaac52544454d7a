// cloudmkt: equilibrium cutoffs, revenue curves, and simulation for a
// two-class cloud instance market with fixed (PAYG), auction (spot), and
// hybrid pricing.
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cloudmkt/csv_util.hpp"
#include "cloudmkt/equilibrium.hpp"
#include "cloudmkt/model.hpp"
#include "cloudmkt/revenue.hpp"
#include "cloudmkt/sim.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

using cloudmkt::csv::num;

std::ostream &open_out(std::ofstream &file, const std::string &path) {
    if (path.empty()) return std::cout;
    file.open(path);
    if (!file) throw cloudmkt::ConfigError("cannot open output file '" + path + "'");
    return file;
}

struct SolveOpts {
    std::string config, out;
    double price = 0.0;
    bool has_price = false;
};

int run_solve(const SolveOpts &o) {
    cloudmkt::MarketParams params = cloudmkt::load_market_params_file(o.config);
    cloudmkt::EquilibriumSolver solver(params);

    std::vector<std::pair<std::string, std::string>> rows;
    auto add = [&](const std::string &k, const std::string &v) { rows.emplace_back(k, v); };

    cloudmkt::SpotEquilibrium spot = solver.spot_equilibrium();
    add("common_threshold", num(spot.common_threshold));
    add("spot_cutoff_1", num(spot.cutoffs.c1));
    add("spot_cutoff_2", num(spot.cutoffs.c2));
    add("low_price_bound", num(solver.low_price_bound()));
    add("high_price_bound", num(solver.high_price_bound()));

    if (o.has_price) {
        cloudmkt::HybridEquilibrium hy = solver.hybrid_equilibrium(o.price);
        add("price", num(hy.price));
        add("price_case", cloudmkt::to_string(hy.case_tag));
        add("cutoff_1", num(hy.cutoffs.c1));
        add("cutoff_2", num(hy.cutoffs.c2));
        for (int i : {1, 2}) {
            const cloudmkt::PaygInterval &iv = hy.payg_intervals[i - 1];
            std::string key = "payg_interval_" + std::to_string(i);
            add(key + "_lo", iv.empty() ? "" : num(iv.lo));
            add(key + "_hi", iv.empty() ? "" : num(iv.hi));
        }
    }

    for (const auto &[k, v] : rows) std::cout << k << ' ' << v << '\n';
    if (!o.out.empty()) {
        std::ofstream file;
        std::ostream &os = open_out(file, o.out);
        os << "name,value\n";
        for (const auto &[k, v] : rows) os << k << ',' << v << '\n';
    }
    return kExitOk;
}

struct SweepOpts {
    std::string config, out;
    int grid = 256;
};

int run_sweep(const SweepOpts &o) {
    cloudmkt::MarketParams params = cloudmkt::load_market_params_file(o.config);
    cloudmkt::EquilibriumSolver solver(params);
    double spot_rate = cloudmkt::revenue_spot(solver).revenue_rate;

    std::vector<double> grid;
    double p_max = params.cost_upper(1);
    for (int j = 1; j <= o.grid; ++j) grid.push_back(p_max * static_cast<double>(j) / o.grid);
    for (double brk : {params.cost_upper(2), solver.low_price_bound(), solver.high_price_bound()})
        if (brk > 0.0 && brk < p_max) grid.push_back(brk);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    std::ofstream file;
    std::ostream &os = open_out(file, o.out);
    os << "p,R_payg,R_spot,R_hybrid,hybrid_case\n";
    for (double p : grid) {
        cloudmkt::RevenueReport payg = cloudmkt::revenue_payg(p, params);
        cloudmkt::RevenueReport hy = cloudmkt::revenue_hybrid(p, solver);
        cloudmkt::PriceCase tag = solver.hybrid_equilibrium(p).case_tag;
        os << num(p) << ',' << num(payg.revenue_rate) << ',' << num(spot_rate) << ','
           << num(hy.revenue_rate) << ',' << cloudmkt::to_string(tag) << '\n';
    }
    return kExitOk;
}

struct SimulateOpts {
    std::string config, out, curve_out, regime = "spot";
    double price = 0.0;
    bool has_price = false;
    double horizon = 5e5;
    double warmup = -1.0;  // default: 10% of horizon
    std::uint64_t seed = 1;
    int buckets = 20;
};

int run_simulate(const SimulateOpts &o) {
    cloudmkt::MarketParams params = cloudmkt::load_market_params_file(o.config);
    cloudmkt::EquilibriumSolver solver(params);

    cloudmkt::SimConfig cfg;
    cfg.horizon = o.horizon;
    cfg.warmup = o.warmup >= 0.0 ? o.warmup : 0.1 * o.horizon;
    cfg.seed = o.seed;
    cfg.n_buckets = o.buckets;

    if (o.regime == "spot") {
        cfg.regime = cloudmkt::Regime::SpotOnly;
        cfg.cutoffs = solver.spot_equilibrium().cutoffs;
    } else if (o.regime == "hybrid") {
        if (!o.has_price) throw cloudmkt::InvalidPriceError("--price is required for --regime hybrid");
        cfg.regime = cloudmkt::Regime::Hybrid;
        cfg.price = o.price;
        cfg.cutoffs = solver.hybrid_equilibrium(o.price).cutoffs;
    } else if (o.regime == "payg") {
        if (!o.has_price) throw cloudmkt::InvalidPriceError("--price is required for --regime payg");
        cfg.regime = cloudmkt::Regime::PaygOnly;
        cfg.price = o.price;
        cfg.cutoffs = {0.0, 0.0};
    } else {
        throw cloudmkt::ConfigError("unknown regime '" + o.regime + "' (spot, hybrid, or payg)");
    }

    cloudmkt::SimStats stats = cloudmkt::simulate(params, cfg, solver.model());

    std::ofstream file;
    std::ostream &os = open_out(file, o.out);
    cloudmkt::write_sim_csv(os, stats);

    if (!o.out.empty()) {
        std::cout << "regime " << o.regime << "  cutoffs (" << num(cfg.cutoffs.c1) << ", "
                  << num(cfg.cutoffs.c2) << ")\n"
                  << "spot_rate " << num(stats.spot_revenue_rate) << "  payg_rate "
                  << num(stats.payg_revenue_rate) << '\n';
    }
    if (!o.curve_out.empty()) {
        cloudmkt::CurveReport curve =
            cloudmkt::compare_waiting_curve(stats, cfg.cutoffs, params, solver.model());
        std::ofstream cf;
        std::ostream &cs = open_out(cf, o.curve_out);
        cloudmkt::write_curve_csv(cs, curve);
        if (!o.out.empty())
            std::cout << "waiting_curve_max_rel_err " << num(curve.max_rel_err) << " over "
                      << curve.n_sufficient << " buckets\n";
    }
    return kExitOk;
}

struct RankOpts {
    std::string out;
    int n = 100;
    std::uint64_t seed = 1;
    int threads = 0;
    cloudmkt::StudySampler sampler;
};

int run_rank(const RankOpts &o) {
    std::vector<cloudmkt::StudyRow> rows =
        cloudmkt::revenue_ranking_study(o.n, o.sampler, o.seed, o.threads);
    std::ofstream file;
    std::ostream &os = open_out(file, o.out);
    cloudmkt::write_study_csv(os, rows);
    if (!o.out.empty()) {
        int holds = 0;
        for (const auto &r : rows) holds += r.ranking_holds ? 1 : 0;
        std::cout << "ranking_holds " << holds << "/" << rows.size() << '\n';
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"cloud instance pricing: PAYG / spot / hybrid equilibria and simulation"};
    app.require_subcommand(1);

    SolveOpts solve_opts;
    CLI::App *solve = app.add_subcommand("solve", "equilibrium cutoffs and thresholds");
    solve->add_option("--config", solve_opts.config, "market config file")->required();
    solve->add_option("--price", solve_opts.price, "also solve the hybrid system at this PAYG price")
        ->check(CLI::PositiveNumber);
    solve->add_option("--out", solve_opts.out, "write a name,value CSV here");

    SweepOpts sweep_opts;
    CLI::App *sweep = app.add_subcommand("sweep", "revenue curves over a price grid");
    sweep->add_option("--config", sweep_opts.config, "market config file")->required();
    sweep->add_option("--grid", sweep_opts.grid, "number of grid prices")->check(CLI::Range(2, 1 << 20));
    sweep->add_option("--out", sweep_opts.out, "output CSV path (default stdout)");

    SimulateOpts sim_opts;
    CLI::App *sim = app.add_subcommand("simulate", "discrete-event simulation at solved cutoffs");
    sim->add_option("--config", sim_opts.config, "market config file")->required();
    sim->add_option("--regime", sim_opts.regime, "spot | hybrid | payg (default spot)");
    sim->add_option("--price", sim_opts.price, "PAYG price (hybrid/payg regimes)")
        ->check(CLI::PositiveNumber);
    sim->add_option("--horizon", sim_opts.horizon, "run length in model time (default 5e5)")
        ->check(CLI::PositiveNumber);
    sim->add_option("--warmup", sim_opts.warmup, "discard window (default 10% of horizon)");
    sim->add_option("--seed", sim_opts.seed, "RNG seed (default 1)");
    sim->add_option("--buckets", sim_opts.buckets, "sojourn buckets (default 20)")
        ->check(CLI::Range(1, 10000));
    sim->add_option("--out", sim_opts.out, "stats CSV path (default stdout)");
    sim->add_option("--curve-out", sim_opts.curve_out, "waiting-curve comparison CSV path");

    RankOpts rank_opts;
    CLI::App *rank = app.add_subcommand("rank", "revenue-ranking study over random configs");
    rank->add_option("--n", rank_opts.n, "number of configurations (default 100)")
        ->check(CLI::Range(1, 1 << 20));
    rank->add_option("--seed", rank_opts.seed, "RNG seed (default 1)");
    rank->add_option("--threads", rank_opts.threads, "worker threads (default auto)");
    rank->add_option("--out", rank_opts.out, "output CSV path (default stdout)");
    rank->add_option("--v2-min", rank_opts.sampler.v2_min, "sampler: v2 lower bound");
    rank->add_option("--v2-max", rank_opts.sampler.v2_max, "sampler: v2 upper bound");
    rank->add_option("--ratio-min", rank_opts.sampler.ratio_min, "sampler: v1/v2 lower bound");
    rank->add_option("--ratio-max", rank_opts.sampler.ratio_max, "sampler: v1/v2 upper bound");
    rank->add_option("--lambda-min", rank_opts.sampler.lambda_min, "sampler: arrival-rate lower bound");
    rank->add_option("--lambda-max", rank_opts.sampler.lambda_max, "sampler: arrival-rate upper bound");
    rank->add_option("--k-min", rank_opts.sampler.k_min, "sampler: min server count");
    rank->add_option("--k-max", rank_opts.sampler.k_max, "sampler: max server count");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        solve_opts.has_price = solve->count("--price") > 0;
        sim_opts.has_price = sim->count("--price") > 0;
        if (solve->parsed()) return run_solve(solve_opts);
        if (sweep->parsed()) return run_sweep(sweep_opts);
        if (sim->parsed()) return run_simulate(sim_opts);
        if (rank->parsed()) return run_rank(rank_opts);
    } catch (const cloudmkt::InvalidParamsError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const cloudmkt::InvalidPriceError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const cloudmkt::OutOfRangeError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const cloudmkt::ConfigError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const cloudmkt::Error &e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::exception &e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumeric;
    }
    return kExitUsage;
}
