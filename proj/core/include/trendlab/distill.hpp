#pragma once

#include <map>
#include <vector>

#include "trendlab/data.hpp"
#include "trendlab/model.hpp"

namespace trendlab {

// Frozen evaluation-mode record of a teacher over the training split. Indices are
// positions in the split's sample vector; extrema are taken over that split only.
struct TeacherTrace {
    std::vector<double> mse;           // per-sample excess squared error
    std::vector<double> ce;            // per-sample market cross-entropy
    std::map<int, double> day_ic;      // per-day excess IC (days with defined IC)
    std::map<int, double> day_acc;     // per-day market accuracy
    std::vector<double> ht_e, ht_m;    // n x hidden teacher last-step encoder states
    int hidden = 0;
    double ic_max = 0, ic_min = 0;
    double mse_max = 0, mse_min = 0;
    double acc_max = 0, acc_min = 0;
    double ce_max = 0, ce_min = 0;
};

// Eq. weights: wd = beta_day + (1 - beta_day) * (ic_max - ic) / (ic_max - ic_min).
// Degenerate extrema (max == min) yield the bias, the minimum knowledge weight.
double day_weight(double ic, double ic_max, double ic_min, double beta_day);
double sample_weight(double mse, double mse_max, double mse_min, double beta_sample);
double knowledge_weight(double wd, double ws, double alpha);

struct DistillWeights {
    std::vector<double> w_e;  // excess-encoder weight per sample
    std::vector<double> w_m;  // market-encoder weight per sample
    double mean_w = 0.0;
};

TeacherTrace build_teacher_trace(DisentangleModel& teacher, const Dataset& train, int batch_size);

// Excess branch uses day IC + sample MSE; market branch substitutes day accuracy and
// sample cross-entropy (both treated like their regression counterparts: the fraction
// is (max - value) / (max - min)). Days without a defined IC get the day bias.
DistillWeights compute_weights(const TeacherTrace& trace, const Dataset& train, double beta_day,
                               double beta_sample, double alpha);

// Batch-mean weighted state-matching loss for one encoder; spelled via the fused
// tensor op so the gradient reaches only the student states.
Tensor distill_loss(const Tensor& student_last, const Tensor& teacher_last,
                    const std::vector<double>& w);

// Static ablation: every weight fixed to 1.
Tensor static_distill_loss(const Tensor& student_last, const Tensor& teacher_last);

}  // namespace trendlab
