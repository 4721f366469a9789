#include "trendlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace trendlab {

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
    const std::size_t n = x.size();
    if (n < 2) return std::nullopt;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

std::vector<double> average_ranks(std::span<const double> v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
    if (x.size() < 2) return std::nullopt;
    const std::vector<double> rx = average_ranks(x);
    const std::vector<double> ry = average_ranks(y);
    return pearson(rx, ry);
}

DailyEvalResult daily_eval(std::span<const double> preds, std::span<const double> labels,
                           std::span<const int> day_of_sample) {
    if (preds.size() != labels.size() || preds.size() != day_of_sample.size()) {
        throw std::invalid_argument("daily_eval: length mismatch");
    }
    std::map<int, std::vector<std::size_t>> by_day;
    for (std::size_t i = 0; i < preds.size(); ++i) by_day[day_of_sample[i]].push_back(i);

    DailyEvalResult res;
    for (const auto& [day, idx] : by_day) {
        std::vector<double> p, l;
        p.reserve(idx.size());
        l.reserve(idx.size());
        for (std::size_t i : idx) {
            p.push_back(preds[i]);
            l.push_back(labels[i]);
        }
        const auto ic = pearson(p, l);
        const auto ric = spearman(p, l);
        if (!ic || !ric) {
            ++res.excluded;
            continue;
        }
        res.days.push_back({day, *ic, *ric, static_cast<int>(idx.size())});
    }
    for (const auto& d : res.days) {
        res.mean_ic += d.ic;
        res.mean_rank_ic += d.rank_ic;
    }
    if (!res.days.empty()) {
        res.mean_ic /= static_cast<double>(res.days.size());
        res.mean_rank_ic /= static_cast<double>(res.days.size());
    }
    return res;
}

ClassificationEval classification_eval(std::span<const int> pred, std::span<const int> truth) {
    if (pred.size() != truth.size()) throw std::invalid_argument("classification_eval: length mismatch");
    if (pred.empty()) throw std::invalid_argument("classification_eval: empty input");

    long confusion[3][3] = {};
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] < 0 || pred[i] > 2 || truth[i] < 0 || truth[i] > 2) {
            throw std::out_of_range("classification_eval: class outside {0,1,2}");
        }
        ++confusion[truth[i]][pred[i]];
    }

    ClassificationEval ev;
    long correct = 0;
    for (int c = 0; c < 3; ++c) correct += confusion[c][c];
    ev.accuracy = static_cast<double>(correct) / static_cast<double>(pred.size());

    for (int c = 0; c < 3; ++c) {
        long tp = confusion[c][c], fp = 0, fn = 0;
        for (int o = 0; o < 3; ++o) {
            if (o == c) continue;
            fp += confusion[o][c];
            fn += confusion[c][o];
        }
        PerClass& pc = ev.per_class[c];
        pc.support = static_cast<int>(tp + fn);
        pc.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        pc.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        pc.f1 = (pc.precision + pc.recall) > 0.0
                    ? 2.0 * pc.precision * pc.recall / (pc.precision + pc.recall)
                    : 0.0;
        ev.macro_f1 += pc.f1;
    }
    ev.macro_f1 /= 3.0;
    return ev;
}

}  // namespace trendlab
