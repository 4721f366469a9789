#pragma once

#include <map>
#include <string>
#include <vector>

namespace trendlab {

enum class CostMode { kTurnover, kFull };

struct BacktestConfig {
    int k = 30;
    double cost_rate = 0.004;  // per side
    CostMode cost_mode = CostMode::kTurnover;
};

// One evaluation day: (stock, predicted excess, realized next-day return).
struct DayUniverse {
    struct Entry {
        int stock_id;
        double pred;
        double realized;
    };
    std::vector<Entry> entries;
};

using PredTable = std::map<int, DayUniverse>;  // keyed by prediction day

struct DayRecord {
    int day = 0;
    std::vector<int> selected;
    double gross = 0.0;
    double sell_turnover = 0.0;
    double buy_turnover = 0.0;
    double cost = 0.0;  // fraction of portfolio value lost to costs this day
    double net = 0.0;   // day factor - 1
    double accumulated = 0.0;
    bool liquidation = false;  // terminal full-exit row
};

// Ledger model (turnover mode): trades execute at the start of each day against the
// drifted prior weights, so the day factor is
//   (1 - cost * sell_turnover) * (1 - cost * buy_turnover) * (1 + gross)
// and a final full liquidation sell is appended after the last day. Full mode charges
// a complete rotation (sell 1, buy 1) every day with no terminal row.
struct BacktestLedger {
    BacktestConfig config;
    std::vector<DayRecord> days;
    double final_return = 0.0;  // accumulated return including the terminal row
};

// k highest predictions; ties broken by ascending stock id; clamps to universe size.
std::vector<int> select_topk(std::vector<std::pair<int, double>> preds, int k);

// Throws when a selected stock lacks a realized return (NaN marks missing).
BacktestLedger run_backtest(const BacktestConfig& config, const PredTable& preds);

// Aligned accumulated-return series for plotting plus a final-value table.
struct CurveReport {
    std::vector<int> days;
    std::vector<std::string> names;
    std::vector<std::vector<double>> accumulated;  // one series per name
    std::vector<double> final_values;
};

CurveReport compare_curves(const std::vector<std::pair<std::string, BacktestLedger>>& ledgers);

void save_ledger_csv(const std::string& path, const BacktestLedger& ledger);
void save_curves_csv(const std::string& path, const CurveReport& report);

}  // namespace trendlab
