#include "cloudmkt/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace cloudmkt {

CostDistribution CostDistribution::uniform(double upper) {
    return CostDistribution(DistKind::Uniform, upper, 0.0);
}

CostDistribution CostDistribution::truncated_exponential(double rate, double upper) {
    return CostDistribution(DistKind::TruncatedExponential, upper, rate);
}

double CostDistribution::cdf(double c) const {
    if (c <= 0.0) return 0.0;
    if (c >= upper_) return 1.0;
    switch (kind_) {
        case DistKind::Uniform:
            return c / upper_;
        case DistKind::TruncatedExponential:
            return -std::expm1(-rate_ * c) / -std::expm1(-rate_ * upper_);
    }
    return 0.0;
}

double CostDistribution::pdf(double c) const {
    if (c < 0.0 || c > upper_) return 0.0;
    switch (kind_) {
        case DistKind::Uniform:
            return 1.0 / upper_;
        case DistKind::TruncatedExponential:
            return rate_ * std::exp(-rate_ * c) / -std::expm1(-rate_ * upper_);
    }
    return 0.0;
}

double CostDistribution::inverse_cdf(double u) const {
    u = std::clamp(u, 0.0, 1.0);
    switch (kind_) {
        case DistKind::Uniform:
            return u * upper_;
        case DistKind::TruncatedExponential:
            return -std::log1p(u * std::expm1(-rate_ * upper_)) / rate_;
    }
    return 0.0;
}

double CostDistribution::sample(std::mt19937_64 &rng) const {
    // 53-bit uniform in [0, 1); explicit so streams are identical across
    // standard-library implementations.
    double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return inverse_cdf(u);
}

std::vector<std::string> validate(const MarketParams &p) {
    std::vector<std::string> bad;
    auto fmt = [](double x) {
        std::ostringstream os;
        os << x;
        return os.str();
    };

    if (!(p.service_rate > 0.0)) bad.push_back("mu > 0 violated (mu = " + fmt(p.service_rate) + ")");
    if (p.num_servers < 1) bad.push_back("k >= 1 violated (k = " + fmt(p.num_servers) + ")");

    for (int i : {1, 2}) {
        const ClassParams &c = p.cls(i);
        const std::string tag = "class " + std::to_string(i);
        if (!(c.value > 0.0)) bad.push_back(tag + ": v > 0 violated");
        if (!(c.arrival_rate > 0.0)) bad.push_back(tag + ": lambda > 0 violated");
        if (c.cost_dist.kind() == DistKind::TruncatedExponential && !(c.cost_dist.rate() > 0.0))
            bad.push_back(tag + ": truncated-exponential rate > 0 violated");
        if (p.service_rate > 0.0 && c.value > 0.0) {
            double want = p.service_rate * c.value;
            if (std::abs(c.cost_dist.upper() - want) > 1e-12 * std::max(1.0, want))
                bad.push_back(tag + ": cost support mismatch, upper = " + fmt(c.cost_dist.upper()) +
                              " but mu*v = " + fmt(want));
        }
    }
    if (!(p.class1.value > p.class2.value))
        bad.push_back("v1 > v2 violated (v1 = " + fmt(p.class1.value) + ", v2 = " + fmt(p.class2.value) + ")");
    return bad;
}

void validate_or_throw(const MarketParams &params) {
    auto bad = validate(params);
    if (!bad.empty()) throw InvalidParamsError(std::move(bad));
}

namespace {

CostDistribution parse_dist(const std::string &text, double upper, const std::string &key) {
    if (text == "uniform") return CostDistribution::uniform(upper);
    if (text.rfind("texp:", 0) == 0) {
        std::string num = text.substr(5);
        size_t used = 0;
        double rate = 0.0;
        try {
            rate = std::stod(num, &used);
        } catch (const std::exception &) {
            throw ConfigError(key + ": cannot parse rate in '" + text + "'");
        }
        if (used != num.size()) throw ConfigError(key + ": trailing characters in '" + text + "'");
        return CostDistribution::truncated_exponential(rate, upper);
    }
    throw ConfigError(key + ": unknown distribution '" + text + "' (expected uniform or texp:<rate>)");
}

std::string trim(const std::string &s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

MarketParams load_market_params(std::istream &in) {
    static const std::vector<std::string> keys = {"mu", "k",       "v1",      "lambda1",
                                                  "dist1", "v2", "lambda2", "dist2"};
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (std::find(keys.begin(), keys.end(), key) == keys.end())
            throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        if (val.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty value for '" + key + "'");
        if (!kv.emplace(key, val).second)
            throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    for (const auto &k : keys)
        if (!kv.count(k)) throw ConfigError("missing key '" + k + "'");

    auto num = [&](const std::string &key) {
        const std::string &s = kv.at(key);
        size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception &) {
            throw ConfigError(key + ": cannot parse number '" + s + "'");
        }
        if (used != s.size()) throw ConfigError(key + ": trailing characters in '" + s + "'");
        return v;
    };

    double mu = num("mu");
    double kd = num("k");
    if (kd != std::floor(kd)) throw ConfigError("k: expected an integer, got '" + kv.at("k") + "'");
    double v1 = num("v1"), v2 = num("v2");

    MarketParams p{
        mu,
        static_cast<int>(kd),
        ClassParams{v1, num("lambda1"), parse_dist(kv.at("dist1"), mu * v1, "dist1")},
        ClassParams{v2, num("lambda2"), parse_dist(kv.at("dist2"), mu * v2, "dist2")},
    };
    validate_or_throw(p);
    return p;
}

MarketParams load_market_params_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return load_market_params(in);
}

}  // namespace cloudmkt
