#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace trendlab {

// Factor order inside the feature matrix, one row per factor.
enum Factor { kOpen = 0, kClose, kHigh, kLow, kVolume, kVwap, kNumFactors };

struct PriceBar {
    int stock_id = 0;
    int day = 0;
    double open = 0, close = 0, high = 0, low = 0, volume = 0, vwap = 0;
};

// One (stock, day) record. Features are factor-major, oldest day first:
// x[f * window + t] = factor f at day (day - window + 1 + t), z-scored per factor.
struct StockSample {
    int stock_id = 0;
    int day = 0;               // label day j; r covers j -> j+1
    std::vector<double> x;     // kNumFactors x window
    double y_e = 0.0;          // excess return r - m
    int y_m = 0;               // market class: 0 down, 1 steady, 2 up
    double r = 0.0;            // raw stock return
    double m = 0.0;            // raw market return
};

struct MarketThresholds {
    double t_low = 0.0;
    double t_high = 0.0;
    int provenance_first_day = 0;  // training-day range the fit used
    int provenance_last_day = 0;
};

// Chronologically ordered, disjoint day ranges (inclusive).
struct DatasetSplit {
    int train_first = 0, train_last = 0;
    int valid_first = 0, valid_last = 0;
    int test_first = 0, test_last = 0;
};

struct NormStats {
    std::vector<double> mean;      // one per factor
    std::vector<double> stddev;    // 0 marks a factor left unscaled
};

struct Dataset {
    int window = 60;
    std::vector<StockSample> samples;  // ordered by (day, stock_id)

    std::vector<int> days() const;     // distinct label days, ascending
    std::map<int, double> market_return_by_day() const;
};

struct BuiltDataset {
    Dataset train, valid, test;
    MarketThresholds thresholds;
    NormStats norm;
    DatasetSplit split;
    int skipped = 0;                   // samples dropped for incomplete history
    std::vector<std::string> warnings;
};

// ---- return and label arithmetic ---------------------------------------------------

// (price_next - price) / price on closing prices
double stock_return(double price, double price_next);

// arithmetic mean of the day's stock returns
double market_return(const std::vector<double>& day_returns);

inline double excess_return(double r, double m) { return r - m; }

// Tertile thresholds from the training-day market-return multiset; class rule is
// m < t_low -> down, t_low <= m < t_high -> steady, m >= t_high -> up.
MarketThresholds fit_thresholds(std::vector<double> train_market_returns);

int classify_market(double m, const MarketThresholds& t);

// ---- dataset construction ----------------------------------------------------------

// Assembles samples with a trailing `window` of factor values and next-day labels.
// Thresholds and normalization statistics are fit on the training split only and
// reused downstream. Samples with incomplete history are skipped and counted.
BuiltDataset build_samples(const std::vector<PriceBar>& bars, int window, const DatasetSplit& split);

// z-score features per factor in place using `stats`; zero-stddev factors are left
// unscaled. Used internally by build_samples and on any later data with saved stats.
void apply_normalization(Dataset& ds, const NormStats& stats, int window);

struct SyntheticParams {
    int n_stocks = 100;
    int n_days = 750;
    std::uint64_t seed = 7;
    double phi_market = 0.2;    // AR(1) coefficient of the market log-return
    double sigma_market = 0.01;
    double phi_idio = 0.35;     // AR(1) coefficient of each stock's excess log-return
    double sigma_idio = 0.01;
    double beta_min = 0.5;      // per-stock market loading range
    double beta_max = 1.5;
    double ohlc_jitter = 0.002; // intraday spread scale; does not touch close-to-close returns
    double volume_sigma = 0.3;
    double base_volume = 1e6;
};

// Log-price factor model: market AR(1) plus per-stock loading and idiosyncratic AR(1).
// Bit-reproducible for a given seed; bars satisfy low <= min(open, close) and
// high >= max(open, close).
std::vector<PriceBar> generate_synthetic_market(const SyntheticParams& params);

// ---- file formats ------------------------------------------------------------------

// bars CSV: header `stock_id,day,open,close,high,low,volume,vwap`
void save_bars_csv(const std::string& path, const std::vector<PriceBar>& bars);
std::vector<PriceBar> load_bars_csv(const std::string& path);

// samples CSV: header `stock_id,day_index,f0..f<N>,y_e,y_m,r,m`
void save_samples_csv(const std::string& path, const Dataset& ds);
Dataset load_samples_csv(const std::string& path);

// thresholds + normalization + split sidecar
void save_dataset_json(const std::string& path, const BuiltDataset& ds);
void load_dataset_json(const std::string& path, MarketThresholds& thresholds, NormStats& norm,
                       DatasetSplit& split, int& window);

// Writes bars.csv, samples_{train,valid,test}.csv and dataset.json into dir.
void save_built_dataset(const std::string& dir, const std::vector<PriceBar>& bars,
                        const BuiltDataset& ds);
BuiltDataset load_built_dataset(const std::string& dir);

}  // namespace trendlab
