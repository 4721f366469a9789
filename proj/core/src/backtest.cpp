#include "trendlab/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace trendlab {

std::vector<int> select_topk(std::vector<std::pair<int, double>> preds, int k) {
    if (preds.empty()) throw std::invalid_argument("select_topk: empty universe");
    std::sort(preds.begin(), preds.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    const std::size_t take = std::min<std::size_t>(preds.size(), static_cast<std::size_t>(k));
    std::vector<int> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.push_back(preds[i].first);
    return out;
}

BacktestLedger run_backtest(const BacktestConfig& config, const PredTable& preds) {
    if (config.k < 1) throw std::invalid_argument("run_backtest: k must be >= 1");
    if (config.cost_rate < 0.0 || config.cost_rate >= 1.0) {
        throw std::invalid_argument("run_backtest: cost_rate outside [0, 1)");
    }
    if (preds.empty()) throw std::invalid_argument("run_backtest: no prediction days");

    BacktestLedger ledger;
    ledger.config = config;
    const double c = config.cost_rate;

    std::map<int, double> held;  // drifted post-return weights from the prior day
    double acc = 1.0;

    for (const auto& [day, uni] : preds) {
        std::vector<std::pair<int, double>> ranked;
        std::map<int, double> realized;
        for (const auto& e : uni.entries) {
            ranked.push_back({e.stock_id, e.pred});
            realized[e.stock_id] = e.realized;
        }
        const std::vector<int> selected = select_topk(std::move(ranked), config.k);
        const double w_tgt = 1.0 / static_cast<double>(selected.size());

        double gross = 0.0;
        for (int sid : selected) {
            const double r = realized.at(sid);
            if (std::isnan(r)) {
                throw std::runtime_error("run_backtest: missing realized return for stock " +
                                         std::to_string(sid) + " on day " + std::to_string(day));
            }
            gross += r;
        }
        gross /= static_cast<double>(selected.size());

        double buy = 0.0, sell = 0.0;
        if (config.cost_mode == CostMode::kFull) {
            // complete rotation: buy at the open, sell the whole book at the close
            buy = 1.0;
            sell = 1.0;
        } else {
            for (int sid : selected) {
                const auto it = held.find(sid);
                const double prev = it == held.end() ? 0.0 : it->second;
                if (w_tgt > prev) buy += w_tgt - prev;
            }
            for (const auto& [sid, prev] : held) {
                const bool kept = std::find(selected.begin(), selected.end(), sid) != selected.end();
                const double tgt = kept ? w_tgt : 0.0;
                if (prev > tgt) sell += prev - tgt;
            }
        }

        const double factor = (1.0 - c * sell) * (1.0 - c * buy) * (1.0 + gross);
        acc *= factor;

        DayRecord rec;
        rec.day = day;
        rec.selected = selected;
        rec.gross = gross;
        rec.sell_turnover = sell;
        rec.buy_turnover = buy;
        rec.cost = 1.0 - (1.0 - c * sell) * (1.0 - c * buy);
        rec.net = factor - 1.0;
        rec.accumulated = acc - 1.0;
        ledger.days.push_back(std::move(rec));

        held.clear();
        for (int sid : selected) {
            held[sid] = w_tgt * (1.0 + realized.at(sid)) / (1.0 + gross);
        }
    }

    if (config.cost_mode == CostMode::kTurnover) {
        const double factor = 1.0 - c;  // sell everything
        acc *= factor;
        DayRecord rec;
        rec.day = ledger.days.back().day;
        rec.gross = 0.0;
        rec.sell_turnover = 1.0;
        rec.cost = c;
        rec.net = factor - 1.0;
        rec.accumulated = acc - 1.0;
        rec.liquidation = true;
        ledger.days.push_back(std::move(rec));
    }
    ledger.final_return = acc - 1.0;
    return ledger;
}

CurveReport compare_curves(const std::vector<std::pair<std::string, BacktestLedger>>& ledgers) {
    if (ledgers.empty()) throw std::invalid_argument("compare_curves: nothing to compare");
    CurveReport rep;
    const auto& first = ledgers.front().second;
    for (const auto& d : first.days) {
        if (!d.liquidation) rep.days.push_back(d.day);
    }
    for (const auto& [name, ledger] : ledgers) {
        std::vector<int> days;
        for (const auto& d : ledger.days) {
            if (!d.liquidation) days.push_back(d.day);
        }
        if (days != rep.days) {
            throw std::invalid_argument("compare_curves: day ranges misaligned for '" + name + "'");
        }
        std::vector<double> acc;
        for (const auto& d : ledger.days) {
            if (!d.liquidation) acc.push_back(d.accumulated);
        }
        rep.names.push_back(name);
        rep.accumulated.push_back(std::move(acc));
        rep.final_values.push_back(ledger.final_return);
    }
    return rep;
}

void save_ledger_csv(const std::string& path, const BacktestLedger& ledger) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << "day,event,n_selected,gross,sell_turnover,buy_turnover,cost,net,accumulated\n";
    char buf[256];
    for (const auto& d : ledger.days) {
        snprintf(buf, sizeof(buf), "%d,%s,%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", d.day,
                 d.liquidation ? "liquidation" : "trade", d.selected.size(), d.gross,
                 d.sell_turnover, d.buy_turnover, d.cost, d.net, d.accumulated);
        os << buf;
    }
}

void save_curves_csv(const std::string& path, const CurveReport& rep) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << "day";
    for (const auto& n : rep.names) os << ",acc_" << n;
    os << '\n';
    char buf[32];
    for (std::size_t i = 0; i < rep.days.size(); ++i) {
        os << rep.days[i];
        for (const auto& series : rep.accumulated) {
            snprintf(buf, sizeof(buf), "%.17g", series[i]);
            os << ',' << buf;
        }
        os << '\n';
    }
}

}  // namespace trendlab
