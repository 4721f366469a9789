#include "trendlab/augment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "trendlab/rng.hpp"

namespace trendlab {

namespace {

std::map<int, std::vector<int>> indices_by_day(const Dataset& ds) {
    std::map<int, std::vector<int>> out;
    for (int i = 0; i < static_cast<int>(ds.samples.size()); ++i) {
        out[ds.samples[i].day].push_back(i);
    }
    return out;
}

}  // namespace

double epsilon_from_quantile(const Dataset& train, double quantile) {
    const auto mkt = train.market_return_by_day();
    std::vector<double> gaps;
    for (auto a = mkt.begin(); a != mkt.end(); ++a) {
        for (auto b = std::next(a); b != mkt.end(); ++b) {
            gaps.push_back(std::abs(a->second - b->second));
        }
    }
    if (gaps.empty()) throw std::invalid_argument("epsilon_from_quantile: fewer than 2 training days");
    std::sort(gaps.begin(), gaps.end());
    const std::size_t idx =
        std::min(gaps.size() - 1, static_cast<std::size_t>(quantile * static_cast<double>(gaps.size())));
    return gaps[idx];
}

AugmentPlan plan_pairs(const Dataset& train, const std::map<int, double>& teacher_day_ic,
                       double epsilon, double hard_quantile, std::size_t n_aug, std::uint64_t seed) {
    if (epsilon <= 0.0) throw std::invalid_argument("plan_pairs: epsilon must be > 0");
    const auto by_day = indices_by_day(train);
    const auto mkt = train.market_return_by_day();

    // hard days: teacher day-IC in the bottom hard_quantile
    std::vector<std::pair<double, int>> ic_sorted;
    for (const auto& [day, ic] : teacher_day_ic) ic_sorted.push_back({ic, day});
    std::sort(ic_sorted.begin(), ic_sorted.end());
    std::vector<int> hard_days;
    const std::size_t n_hard = static_cast<std::size_t>(hard_quantile * static_cast<double>(ic_sorted.size()));
    for (std::size_t i = 0; i < n_hard && i < ic_sorted.size(); ++i) hard_days.push_back(ic_sorted[i].second);
    auto is_hard = [&](int day) {
        return std::find(hard_days.begin(), hard_days.end(), day) != hard_days.end();
    };

    // candidate day pairs within epsilon, oversampling hard-day pairs x2
    struct Cand {
        int p, q, weight;
    };
    std::vector<Cand> cands;
    for (auto a = mkt.begin(); a != mkt.end(); ++a) {
        for (auto b = std::next(a); b != mkt.end(); ++b) {
            if (std::abs(a->second - b->second) > epsilon) continue;
            const int w = (is_hard(a->first) || is_hard(b->first)) ? 2 : 1;
            cands.push_back({a->first, b->first, w});
        }
    }
    if (cands.empty()) {
        throw std::runtime_error("plan_pairs: no day pairs within epsilon=" + std::to_string(epsilon) +
                                 "; increase --aug-epsilon");
    }
    long total_weight = 0;
    for (const auto& c : cands) total_weight += c.weight;

    Rng rng(sub_seed(seed, "augment/plan"));
    AugmentPlan plan;
    plan.epsilon = epsilon;
    plan.target_count = n_aug;

    std::size_t produced = 0;
    while (produced < n_aug) {
        // weighted draw over candidate pairs
        long pick = static_cast<long>(rng.uniform_int(static_cast<std::uint64_t>(total_weight)));
        const Cand* chosen = nullptr;
        for (const auto& c : cands) {
            pick -= c.weight;
            if (pick < 0) {
                chosen = &c;
                break;
            }
        }
        AugmentPlan::Pairing pairing;
        pairing.day_p = chosen->p;
        pairing.day_q = chosen->q;
        std::vector<int> ip = by_day.at(chosen->p);
        std::vector<int> iq = by_day.at(chosen->q);
        rng.shuffle(ip);
        rng.shuffle(iq);
        const std::size_t n = std::min(ip.size(), iq.size());
        // each aligned (p, q) slot yields the sample and its mirror
        const std::size_t take = std::min(n, (n_aug - produced + 1) / 2);
        pairing.idx_p.assign(ip.begin(), ip.begin() + static_cast<std::ptrdiff_t>(take));
        pairing.idx_q.assign(iq.begin(), iq.begin() + static_cast<std::ptrdiff_t>(take));
        produced += 2 * take;
        plan.pairs.push_back(std::move(pairing));
    }
    return plan;
}

std::vector<AugmentedSample> generate(DisentangleModel& model, const AugmentPlan& plan,
                                      const Dataset& train, int batch_size) {
    const ModelConfig& cfg = model.config();
    std::vector<AugmentedSample> out;
    out.reserve(plan.target_count);

    // flatten the plan into (p, q) slots
    std::vector<std::pair<int, int>> slots;
    for (const auto& pairing : plan.pairs) {
        for (std::size_t i = 0; i < pairing.idx_p.size(); ++i) {
            slots.push_back({pairing.idx_p[i], pairing.idx_q[i]});
        }
    }

    for (std::size_t start = 0; start < slots.size() && out.size() < plan.target_count;
         start += static_cast<std::size_t>(batch_size)) {
        const std::size_t stop = std::min(slots.size(), start + static_cast<std::size_t>(batch_size));
        std::vector<const StockSample*> rows_p, rows_q;
        for (std::size_t i = start; i < stop; ++i) {
            rows_p.push_back(&train.samples[slots[i].first]);
            rows_q.push_back(&train.samples[slots[i].second]);
        }
        Batch bp = make_batch(rows_p, cfg.factors, cfg.window);
        Batch bq = make_batch(rows_q, cfg.factors, cfg.window);
        auto enc_p = model.encode(bp.x_steps, Mode::kEval);
        auto enc_q = model.encode(bq.x_steps, Mode::kEval);

        // swapped features, both directions
        auto emit = [&](const Tensor& f_e, const Tensor& f_m,
                        const std::vector<const StockSample*>& donors_e,
                        const std::vector<const StockSample*>& donors_m) {
            const std::vector<Tensor> steps = model.decode(f_e, f_m, cfg.window, Mode::kEval);
            for (std::size_t i = 0; i < donors_e.size(); ++i) {
                if (out.size() >= plan.target_count) return;
                AugmentedSample s;
                s.x.resize(static_cast<std::size_t>(cfg.factors) * cfg.window);
                for (int t = 0; t < cfg.window; ++t) {
                    for (int f = 0; f < cfg.factors; ++f) {
                        s.x[static_cast<std::size_t>(f) * cfg.window + t] =
                            steps[t].at(static_cast<std::int64_t>(i) * cfg.factors + f);
                    }
                }
                s.y_e = donors_e[i]->y_e;
                s.y_m = donors_m[i]->y_m;
                s.p_stock = donors_e[i]->stock_id;
                s.p_day = donors_e[i]->day;
                s.q_stock = donors_m[i]->stock_id;
                s.q_day = donors_m[i]->day;
                out.push_back(std::move(s));
            }
        };
        emit(enc_p.f_e, enc_q.f_m, rows_p, rows_q);  // {x_hat, y_e^p, y_m^q}
        emit(enc_q.f_e, enc_p.f_m, rows_q, rows_p);  // mirrored
    }
    return out;
}

std::vector<AugmentedSample> noise_augment(const Dataset& train, double sigma, std::size_t n_aug,
                                           std::uint64_t seed) {
    if (train.samples.empty()) throw std::invalid_argument("noise_augment: empty training split");
    Rng rng(sub_seed(seed, "augment/noise"));
    std::vector<AugmentedSample> out;
    out.reserve(n_aug);
    for (std::size_t k = 0; k < n_aug; ++k) {
        const StockSample& src =
            train.samples[static_cast<std::size_t>(rng.uniform_int(train.samples.size()))];
        AugmentedSample s;
        s.x.resize(src.x.size());
        for (std::size_t i = 0; i < src.x.size(); ++i) s.x[i] = src.x[i] + sigma * rng.normal();
        s.y_e = src.y_e;
        s.y_m = src.y_m;
        s.p_stock = s.q_stock = src.stock_id;
        s.p_day = s.q_day = src.day;
        out.push_back(std::move(s));
    }
    return out;
}

void save_augmented_csv(const std::string& path, const std::vector<AugmentedSample>& samples,
                        int window) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << "stock_id,day_index";
    for (int i = 0; i < kNumFactors * window; ++i) os << ",f" << i;
    os << ",y_e,y_m,r,m,prov\n";
    char buf[32];
    for (const auto& s : samples) {
        os << s.p_stock << ',' << s.p_day;
        for (double v : s.x) {
            snprintf(buf, sizeof(buf), "%.17g", v);
            os << ',' << buf;
        }
        snprintf(buf, sizeof(buf), "%.17g", s.y_e);
        os << ',' << buf << ',' << s.y_m << ",0,0," << s.p_stock << ':' << s.p_day << '|'
           << s.q_stock << ':' << s.q_day << '\n';
    }
}

}  // namespace trendlab
