#include "trendlab/distill.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "trendlab/metrics.hpp"

namespace trendlab {

namespace {

double bounded_weight(double value, double vmax, double vmin, double bias, const char* what) {
    if (bias < 0.0 || bias > 1.0) throw std::invalid_argument(std::string(what) + ": bias outside [0,1]");
    if (value < vmin || value > vmax) {
        throw std::out_of_range(std::string(what) + ": value " + std::to_string(value) +
                                " outside extrema [" + std::to_string(vmin) + ", " +
                                std::to_string(vmax) + "]");
    }
    if (vmax == vmin) return bias;  // no signal to differentiate
    return bias + (1.0 - bias) * (vmax - value) / (vmax - vmin);
}

}  // namespace

double day_weight(double ic, double ic_max, double ic_min, double beta_day) {
    return bounded_weight(ic, ic_max, ic_min, beta_day, "day_weight");
}

double sample_weight(double mse, double mse_max, double mse_min, double beta_sample) {
    return bounded_weight(mse, mse_max, mse_min, beta_sample, "sample_weight");
}

double knowledge_weight(double wd, double ws, double alpha) {
    if (wd < 0.0 || wd > 1.0 || ws < 0.0 || ws > 1.0 || alpha < 0.0 || alpha > 1.0) {
        throw std::out_of_range("knowledge_weight: inputs outside [0,1]");
    }
    return alpha * wd + (1.0 - alpha) * ws;
}

TeacherTrace build_teacher_trace(DisentangleModel& teacher, const Dataset& train, int batch_size) {
    const int n = static_cast<int>(train.samples.size());
    if (n == 0) throw std::invalid_argument("build_teacher_trace: empty training split");
    const ModelConfig& cfg = teacher.config();

    TeacherTrace tr;
    tr.hidden = cfg.hidden;
    tr.mse.resize(n);
    tr.ce.resize(n);
    tr.ht_e.resize(static_cast<std::size_t>(n) * cfg.hidden);
    tr.ht_m.resize(static_cast<std::size_t>(n) * cfg.hidden);

    std::vector<double> preds(n);
    std::vector<int> pred_class(n);

    for (int start = 0; start < n; start += batch_size) {
        const int stop = std::min(n, start + batch_size);
        std::vector<const StockSample*> rows;
        rows.reserve(stop - start);
        for (int i = start; i < stop; ++i) rows.push_back(&train.samples[i]);
        Batch b = make_batch(rows, cfg.factors, cfg.window);
        EvalOutputs out = teacher.eval_batch(b);
        for (int i = start; i < stop; ++i) {
            const int k = i - start;
            const StockSample& s = train.samples[i];
            preds[i] = out.pre_e[k];
            const double d = out.pre_e[k] - s.y_e;
            tr.mse[i] = d * d;
            const double p = std::max(out.pre_m_probs[static_cast<std::size_t>(k) * 3 + s.y_m], 1e-300);
            tr.ce[i] = -std::log(p);
            int argmax = 0;
            for (int c = 1; c < 3; ++c) {
                if (out.pre_m_probs[static_cast<std::size_t>(k) * 3 + c] >
                    out.pre_m_probs[static_cast<std::size_t>(k) * 3 + argmax])
                    argmax = c;
            }
            pred_class[i] = argmax;
            std::copy_n(out.last_e.begin() + static_cast<std::ptrdiff_t>(k) * cfg.hidden, cfg.hidden,
                        tr.ht_e.begin() + static_cast<std::ptrdiff_t>(i) * cfg.hidden);
            std::copy_n(out.last_m.begin() + static_cast<std::ptrdiff_t>(k) * cfg.hidden, cfg.hidden,
                        tr.ht_m.begin() + static_cast<std::ptrdiff_t>(i) * cfg.hidden);
        }
    }

    // day IC via the shared metrics implementation
    std::vector<double> labels(n);
    std::vector<int> days(n);
    for (int i = 0; i < n; ++i) {
        labels[i] = train.samples[i].y_e;
        days[i] = train.samples[i].day;
    }
    const DailyEvalResult de = daily_eval(preds, labels, days);
    for (const auto& d : de.days) tr.day_ic[d.day] = d.ic;

    // day accuracy
    std::map<int, std::pair<int, int>> acc_count;  // day -> (correct, total)
    for (int i = 0; i < n; ++i) {
        auto& [c, t] = acc_count[days[i]];
        if (pred_class[i] == train.samples[i].y_m) ++c;
        ++t;
    }
    for (const auto& [day, ct] : acc_count) {
        tr.day_acc[day] = static_cast<double>(ct.first) / static_cast<double>(ct.second);
    }

    auto minmax = [](auto begin, auto end, double& lo, double& hi) {
        auto [a, b] = std::minmax_element(begin, end);
        lo = *a;
        hi = *b;
    };
    minmax(tr.mse.begin(), tr.mse.end(), tr.mse_min, tr.mse_max);
    minmax(tr.ce.begin(), tr.ce.end(), tr.ce_min, tr.ce_max);
    if (!tr.day_ic.empty()) {
        tr.ic_min = tr.ic_max = tr.day_ic.begin()->second;
        for (const auto& [day, ic] : tr.day_ic) {
            tr.ic_min = std::min(tr.ic_min, ic);
            tr.ic_max = std::max(tr.ic_max, ic);
        }
    }
    if (!tr.day_acc.empty()) {
        tr.acc_min = tr.acc_max = tr.day_acc.begin()->second;
        for (const auto& [day, a] : tr.day_acc) {
            tr.acc_min = std::min(tr.acc_min, a);
            tr.acc_max = std::max(tr.acc_max, a);
        }
    }
    return tr;
}

DistillWeights compute_weights(const TeacherTrace& tr, const Dataset& train, double beta_day,
                               double beta_sample, double alpha) {
    const int n = static_cast<int>(train.samples.size());
    if (static_cast<int>(tr.mse.size()) != n) {
        throw std::invalid_argument("compute_weights: trace does not match split");
    }
    DistillWeights w;
    w.w_e.resize(n);
    w.w_m.resize(n);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const int day = train.samples[i].day;
        const auto it_ic = tr.day_ic.find(day);
        const double wd_e = it_ic != tr.day_ic.end()
                                ? day_weight(it_ic->second, tr.ic_max, tr.ic_min, beta_day)
                                : beta_day;  // undefined IC: no signal, bias weight
        const double ws_e = sample_weight(tr.mse[i], tr.mse_max, tr.mse_min, beta_sample);
        w.w_e[i] = knowledge_weight(wd_e, ws_e, alpha);

        const auto it_acc = tr.day_acc.find(day);
        const double wd_m = it_acc != tr.day_acc.end()
                                ? day_weight(it_acc->second, tr.acc_max, tr.acc_min, beta_day)
                                : beta_day;
        const double ws_m = sample_weight(tr.ce[i], tr.ce_max, tr.ce_min, beta_sample);
        w.w_m[i] = knowledge_weight(wd_m, ws_m, alpha);
        acc += 0.5 * (w.w_e[i] + w.w_m[i]);
    }
    w.mean_w = acc / static_cast<double>(n);
    return w;
}

Tensor distill_loss(const Tensor& student_last, const Tensor& teacher_last,
                    const std::vector<double>& w) {
    return weighted_row_mse(student_last, teacher_last, w);
}

Tensor static_distill_loss(const Tensor& student_last, const Tensor& teacher_last) {
    return weighted_row_mse(student_last, teacher_last,
                            std::vector<double>(static_cast<std::size_t>(student_last.rows()), 1.0));
}

}  // namespace trendlab
