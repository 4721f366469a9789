#include "trendlab/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "trendlab/rng.hpp"

namespace trendlab {

namespace fs = std::filesystem;
using nlohmann::json;

double stock_return(double price, double price_next) {
    if (price <= 0.0) {
        throw std::domain_error("stock_return: nonpositive price " + std::to_string(price));
    }
    return (price_next - price) / price;
}

double market_return(const std::vector<double>& day_returns) {
    if (day_returns.empty()) throw std::invalid_argument("market_return: empty day");
    double s = 0.0;
    for (double r : day_returns) s += r;
    return s / static_cast<double>(day_returns.size());
}

MarketThresholds fit_thresholds(std::vector<double> train_market_returns) {
    const std::size_t n = train_market_returns.size();
    if (n < 3) throw std::invalid_argument("fit_thresholds: need at least 3 training days");
    std::sort(train_market_returns.begin(), train_market_returns.end());
    MarketThresholds t;
    t.t_low = train_market_returns[n / 3];
    t.t_high = train_market_returns[2 * n / 3];
    return t;
}

int classify_market(double m, const MarketThresholds& t) {
    if (m < t.t_low) return 0;
    if (m < t.t_high) return 1;
    return 2;
}

std::vector<int> Dataset::days() const {
    std::vector<int> out;
    for (const auto& s : samples) {
        if (out.empty() || out.back() != s.day) out.push_back(s.day);
    }
    return out;
}

std::map<int, double> Dataset::market_return_by_day() const {
    std::map<int, double> out;
    for (const auto& s : samples) out[s.day] = s.m;
    return out;
}

void apply_normalization(Dataset& ds, const NormStats& stats, int window) {
    for (auto& s : ds.samples) {
        for (int f = 0; f < kNumFactors; ++f) {
            const double sd = stats.stddev[f];
            if (sd == 0.0) continue;
            const double mu = stats.mean[f];
            for (int t = 0; t < window; ++t) {
                double& v = s.x[static_cast<std::size_t>(f) * window + t];
                v = (v - mu) / sd;
            }
        }
    }
}

BuiltDataset build_samples(const std::vector<PriceBar>& bars, int window, const DatasetSplit& split) {
    if (window < 1) throw std::invalid_argument("build_samples: window must be positive");

    // bars per stock, keyed by day so gaps are detectable
    std::map<int, std::map<int, const PriceBar*>> by_stock;
    for (const auto& b : bars) by_stock[b.stock_id][b.day] = &b;

    // per-day stock returns over the full cross-section (market return uses every
    // stock with a next-day close, independent of window completeness)
    std::map<int, std::vector<std::pair<int, double>>> returns_by_day;
    for (const auto& [sid, days] : by_stock) {
        for (const auto& [day, bar] : days) {
            auto next = days.find(day + 1);
            if (next == days.end()) continue;
            returns_by_day[day].push_back({sid, stock_return(bar->close, next->second->close)});
        }
    }
    std::map<int, double> market_by_day;
    for (const auto& [day, rets] : returns_by_day) {
        std::vector<double> rs;
        rs.reserve(rets.size());
        for (const auto& [sid, r] : rets) rs.push_back(r);
        market_by_day[day] = market_return(rs);
    }

    BuiltDataset out;
    out.split = split;
    out.train.window = out.valid.window = out.test.window = window;

    // thresholds from training-day market returns only
    std::vector<double> train_mkt;
    for (const auto& [day, m] : market_by_day) {
        if (day >= split.train_first && day <= split.train_last) train_mkt.push_back(m);
    }
    out.thresholds = fit_thresholds(train_mkt);
    out.thresholds.provenance_first_day = split.train_first;
    out.thresholds.provenance_last_day = split.train_last;
    if (out.thresholds.t_low == out.thresholds.t_high) {
        out.warnings.push_back("degenerate market thresholds: t_low == t_high; every day classifies 'up'");
    }

    auto split_of = [&](int day) -> Dataset* {
        if (day >= split.train_first && day <= split.train_last) return &out.train;
        if (day >= split.valid_first && day <= split.valid_last) return &out.valid;
        if (day >= split.test_first && day <= split.test_last) return &out.test;
        return nullptr;
    };

    for (const auto& [day, rets] : returns_by_day) {
        Dataset* target = split_of(day);
        if (!target) continue;
        const double m = market_by_day[day];
        const int y_m = classify_market(m, out.thresholds);
        for (const auto& [sid, r] : rets) {
            const auto& days = by_stock[sid];
            StockSample s;
            s.stock_id = sid;
            s.day = day;
            s.r = r;
            s.m = m;
            s.y_e = excess_return(r, m);
            s.y_m = y_m;
            s.x.resize(static_cast<std::size_t>(kNumFactors) * window);
            bool complete = true;
            for (int t = 0; t < window && complete; ++t) {
                auto it = days.find(day - window + 1 + t);
                if (it == days.end()) {
                    complete = false;
                    break;
                }
                const PriceBar& b = *it->second;
                s.x[static_cast<std::size_t>(kOpen) * window + t] = b.open;
                s.x[static_cast<std::size_t>(kClose) * window + t] = b.close;
                s.x[static_cast<std::size_t>(kHigh) * window + t] = b.high;
                s.x[static_cast<std::size_t>(kLow) * window + t] = b.low;
                s.x[static_cast<std::size_t>(kVolume) * window + t] = b.volume;
                s.x[static_cast<std::size_t>(kVwap) * window + t] = b.vwap;
            }
            if (!complete) {
                ++out.skipped;
                continue;
            }
            target->samples.push_back(std::move(s));
        }
    }

    auto by_day_stock = [](const StockSample& a, const StockSample& b) {
        return a.day != b.day ? a.day < b.day : a.stock_id < b.stock_id;
    };
    std::sort(out.train.samples.begin(), out.train.samples.end(), by_day_stock);
    std::sort(out.valid.samples.begin(), out.valid.samples.end(), by_day_stock);
    std::sort(out.test.samples.begin(), out.test.samples.end(), by_day_stock);

    // per-factor z-score statistics from the training split only
    out.norm.mean.assign(kNumFactors, 0.0);
    out.norm.stddev.assign(kNumFactors, 0.0);
    if (!out.train.samples.empty()) {
        const double cnt = static_cast<double>(out.train.samples.size()) * window;
        for (int f = 0; f < kNumFactors; ++f) {
            double s = 0.0;
            for (const auto& smp : out.train.samples)
                for (int t = 0; t < window; ++t) s += smp.x[static_cast<std::size_t>(f) * window + t];
            out.norm.mean[f] = s / cnt;
            double ss = 0.0;
            for (const auto& smp : out.train.samples)
                for (int t = 0; t < window; ++t) {
                    const double d = smp.x[static_cast<std::size_t>(f) * window + t] - out.norm.mean[f];
                    ss += d * d;
                }
            out.norm.stddev[f] = std::sqrt(ss / cnt);
            if (out.norm.stddev[f] == 0.0) {
                out.warnings.push_back("constant factor " + std::to_string(f) + " left unscaled");
            }
        }
        apply_normalization(out.train, out.norm, window);
        apply_normalization(out.valid, out.norm, window);
        apply_normalization(out.test, out.norm, window);
    }
    return out;
}

std::vector<PriceBar> generate_synthetic_market(const SyntheticParams& p) {
    if (p.n_stocks < 2) throw std::invalid_argument("generate_synthetic_market: need >= 2 stocks");
    if (p.n_days <= 61) throw std::invalid_argument("generate_synthetic_market: need > 61 days");
    if (p.beta_min > p.beta_max || p.sigma_market < 0 || p.sigma_idio < 0) {
        throw std::invalid_argument("generate_synthetic_market: invalid params");
    }

    Rng mkt_rng(sub_seed(p.seed, "synthetic/market"));
    std::vector<double> m(p.n_days, 0.0);  // market log-return factor
    for (int d = 1; d < p.n_days; ++d) {
        m[d] = p.phi_market * m[d - 1] + p.sigma_market * mkt_rng.normal();
    }

    std::vector<PriceBar> bars;
    bars.reserve(static_cast<std::size_t>(p.n_stocks) * p.n_days);
    for (int i = 0; i < p.n_stocks; ++i) {
        Rng rng(sub_seed(p.seed, "synthetic/stock/" + std::to_string(i)));
        const double beta = rng.uniform(p.beta_min, p.beta_max);
        double log_close = std::log(rng.uniform(10.0, 200.0));
        double e = 0.0;  // idiosyncratic excess log-return, AR(1)
        for (int d = 0; d < p.n_days; ++d) {
            if (d > 0) {
                e = p.phi_idio * e + p.sigma_idio * rng.normal();
                log_close += beta * m[d] + e;
            }
            PriceBar b;
            b.stock_id = i;
            b.day = d;
            b.close = std::exp(log_close);
            b.open = b.close * std::exp(p.ohlc_jitter * rng.normal());
            const double hi_spread = std::abs(rng.normal()) * p.ohlc_jitter;
            const double lo_spread = std::abs(rng.normal()) * p.ohlc_jitter;
            b.high = std::max(b.open, b.close) * std::exp(hi_spread);
            b.low = std::min(b.open, b.close) * std::exp(-lo_spread);
            b.vwap = 0.25 * (b.open + b.close + b.high + b.low);  // always inside [low, high]
            b.volume = p.base_volume * std::exp(p.volume_sigma * rng.normal());
            bars.push_back(b);
        }
    }
    return bars;
}

// ---- CSV / JSON --------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::stringstream ss(line);
    while (std::getline(ss, cur, ',')) out.push_back(cur);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

void write_double(std::ostream& os, double v) {
    char buf[32];
    snprintf(buf, sizeof(buf), "%.17g", v);
    os << buf;
}

}  // namespace

void save_bars_csv(const std::string& path, const std::vector<PriceBar>& bars) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << "stock_id,day,open,close,high,low,volume,vwap\n";
    for (const auto& b : bars) {
        os << b.stock_id << ',' << b.day << ',';
        write_double(os, b.open);
        os << ',';
        write_double(os, b.close);
        os << ',';
        write_double(os, b.high);
        os << ',';
        write_double(os, b.low);
        os << ',';
        write_double(os, b.volume);
        os << ',';
        write_double(os, b.vwap);
        os << '\n';
    }
}

std::vector<PriceBar> load_bars_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error(path + ": empty file");
    if (line.rfind("stock_id,day,", 0) != 0) throw std::runtime_error(path + ": unexpected bars header");
    std::vector<PriceBar> bars;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 8) throw std::runtime_error(path + ": malformed row '" + line + "'");
        PriceBar b;
        b.stock_id = std::stoi(f[0]);
        b.day = std::stoi(f[1]);
        b.open = std::stod(f[2]);
        b.close = std::stod(f[3]);
        b.high = std::stod(f[4]);
        b.low = std::stod(f[5]);
        b.volume = std::stod(f[6]);
        b.vwap = std::stod(f[7]);
        bars.push_back(b);
    }
    return bars;
}

void save_samples_csv(const std::string& path, const Dataset& ds) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << "stock_id,day_index";
    const int nfeat = kNumFactors * ds.window;
    for (int i = 0; i < nfeat; ++i) os << ",f" << i;
    os << ",y_e,y_m,r,m\n";
    for (const auto& s : ds.samples) {
        os << s.stock_id << ',' << s.day;
        for (double v : s.x) {
            os << ',';
            write_double(os, v);
        }
        os << ',';
        write_double(os, s.y_e);
        os << ',' << s.y_m << ',';
        write_double(os, s.r);
        os << ',';
        write_double(os, s.m);
        os << '\n';
    }
}

Dataset load_samples_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error(path + ": empty file");
    const auto header = split_csv_line(line);
    if (header.size() < 7 || header[0] != "stock_id" || header[1] != "day_index") {
        throw std::runtime_error(path + ": unexpected samples header");
    }
    const int nfeat = static_cast<int>(header.size()) - 6;
    if (nfeat % kNumFactors != 0) throw std::runtime_error(path + ": feature count not divisible by 6");
    Dataset ds;
    ds.window = nfeat / kNumFactors;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (static_cast<int>(f.size()) != nfeat + 6) {
            throw std::runtime_error(path + ": malformed row starting '" + f[0] + "'");
        }
        StockSample s;
        s.stock_id = std::stoi(f[0]);
        s.day = std::stoi(f[1]);
        s.x.resize(nfeat);
        for (int i = 0; i < nfeat; ++i) s.x[i] = std::stod(f[2 + i]);
        s.y_e = std::stod(f[2 + nfeat]);
        s.y_m = std::stoi(f[3 + nfeat]);
        s.r = std::stod(f[4 + nfeat]);
        s.m = std::stod(f[5 + nfeat]);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

void save_dataset_json(const std::string& path, const BuiltDataset& ds) {
    json j;
    j["window"] = ds.train.window;
    j["factors"] = static_cast<int>(kNumFactors);
    j["thresholds"] = {{"t_low", ds.thresholds.t_low},
                       {"t_high", ds.thresholds.t_high},
                       {"provenance_first_day", ds.thresholds.provenance_first_day},
                       {"provenance_last_day", ds.thresholds.provenance_last_day}};
    j["norm"] = {{"mean", ds.norm.mean}, {"stddev", ds.norm.stddev}};
    j["split"] = {{"train", {ds.split.train_first, ds.split.train_last}},
                  {"valid", {ds.split.valid_first, ds.split.valid_last}},
                  {"test", {ds.split.test_first, ds.split.test_last}}};
    j["counts"] = {{"train", ds.train.samples.size()},
                   {"valid", ds.valid.samples.size()},
                   {"test", ds.test.samples.size()},
                   {"skipped", ds.skipped}};
    j["warnings"] = ds.warnings;
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << j.dump(2) << '\n';
}

void load_dataset_json(const std::string& path, MarketThresholds& thresholds, NormStats& norm,
                       DatasetSplit& split, int& window) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    json j = json::parse(is);
    window = j.at("window").get<int>();
    thresholds.t_low = j.at("thresholds").at("t_low").get<double>();
    thresholds.t_high = j.at("thresholds").at("t_high").get<double>();
    thresholds.provenance_first_day = j.at("thresholds").at("provenance_first_day").get<int>();
    thresholds.provenance_last_day = j.at("thresholds").at("provenance_last_day").get<int>();
    norm.mean = j.at("norm").at("mean").get<std::vector<double>>();
    norm.stddev = j.at("norm").at("stddev").get<std::vector<double>>();
    split.train_first = j.at("split").at("train")[0].get<int>();
    split.train_last = j.at("split").at("train")[1].get<int>();
    split.valid_first = j.at("split").at("valid")[0].get<int>();
    split.valid_last = j.at("split").at("valid")[1].get<int>();
    split.test_first = j.at("split").at("test")[0].get<int>();
    split.test_last = j.at("split").at("test")[1].get<int>();
}

void save_built_dataset(const std::string& dir, const std::vector<PriceBar>& bars,
                        const BuiltDataset& ds) {
    fs::create_directories(dir);
    save_bars_csv(dir + "/bars.csv", bars);
    save_samples_csv(dir + "/samples_train.csv", ds.train);
    save_samples_csv(dir + "/samples_valid.csv", ds.valid);
    save_samples_csv(dir + "/samples_test.csv", ds.test);
    save_dataset_json(dir + "/dataset.json", ds);
}

BuiltDataset load_built_dataset(const std::string& dir) {
    BuiltDataset ds;
    int window = 0;
    load_dataset_json(dir + "/dataset.json", ds.thresholds, ds.norm, ds.split, window);
    ds.train = load_samples_csv(dir + "/samples_train.csv");
    ds.valid = load_samples_csv(dir + "/samples_valid.csv");
    ds.test = load_samples_csv(dir + "/samples_test.csv");
    if (ds.train.window != window) throw std::runtime_error(dir + ": window mismatch vs dataset.json");
    return ds;
}

}  // namespace trendlab
