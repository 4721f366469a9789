#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace trendlab {

// Sample Pearson correlation. nullopt when either input has zero variance or fewer
// than two points; throws on length mismatch.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

// Spearman rank correlation with average ranks for ties.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

// Average ranks (1-based); ties share the mean of their rank range.
std::vector<double> average_ranks(std::span<const double> v);

struct DailyEval {
    int day = 0;
    double ic = 0.0;       // Pearson over the day's cross-section
    double rank_ic = 0.0;  // Spearman
    int n_samples = 0;
};

struct DailyEvalResult {
    std::vector<DailyEval> days;
    int excluded = 0;  // days dropped for <2 samples or zero variance
    double mean_ic = 0.0;
    double mean_rank_ic = 0.0;  // 0 when every day was excluded
};

DailyEvalResult daily_eval(std::span<const double> preds, std::span<const double> labels,
                           std::span<const int> day_of_sample);

struct PerClass {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    int support = 0;
};

struct ClassificationEval {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    std::array<PerClass, 3> per_class{};
};

// Three-class evaluation; precision/recall/F1 fall back to 0 on empty denominators.
ClassificationEval classification_eval(std::span<const int> pred, std::span<const int> truth);

}  // namespace trendlab
