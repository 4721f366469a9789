#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "trendlab/data.hpp"
#include "trendlab/model.hpp"

namespace trendlab {

// Day pairs with close market returns plus the per-pair sample pairings (positions in
// the training split). Hard days (teacher day-IC in the bottom quantile) are
// oversampled by a fixed factor.
struct AugmentPlan {
    struct Pairing {
        int day_p = 0, day_q = 0;
        std::vector<int> idx_p, idx_q;  // aligned sample indices
    };
    std::vector<Pairing> pairs;
    double epsilon = 0.0;
    std::size_t target_count = 0;
};

struct AugmentedSample {
    std::vector<double> x;  // factors x window, decoder output
    double y_e = 0.0;       // from donor p
    int y_m = 0;            // from donor q
    int p_stock = 0, p_day = 0, q_stock = 0, q_day = 0;
};

// Default epsilon when none is configured: this quantile of all pairwise
// |market return| gaps between training days.
double epsilon_from_quantile(const Dataset& train, double quantile);

// Deterministic under `seed`. Day pairs are drawn from the epsilon-close candidate
// set, with pairs touching a hard day given twice the draw weight; stocks of the two
// days are paired by uniform shuffle. Throws when no candidate pair exists.
AugmentPlan plan_pairs(const Dataset& train, const std::map<int, double>& teacher_day_ic,
                       double epsilon, double hard_quantile, std::size_t n_aug, std::uint64_t seed);

// Decodes {f_E of p, f_M of q} into a new sample {x_hat, y_e of p, y_m of q} plus the
// mirrored sample per pairing; runs in evaluation mode, capped at plan.target_count.
std::vector<AugmentedSample> generate(DisentangleModel& model, const AugmentPlan& plan,
                                      const Dataset& train, int batch_size);

// Ablation baseline: x + N(0, sigma^2) noise, labels copied unchanged.
std::vector<AugmentedSample> noise_augment(const Dataset& train, double sigma, std::size_t n_aug,
                                           std::uint64_t seed);

void save_augmented_csv(const std::string& path, const std::vector<AugmentedSample>& samples,
                        int window);

}  // namespace trendlab
