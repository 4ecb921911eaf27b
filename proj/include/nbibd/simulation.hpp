#pragma once

// Monte Carlo comparison of NB1, NB2 and the random baseline.
//
// Each iteration draws one full posters x judges score matrix, lets every
// design pick its observed cells from that shared matrix, fits the random
// judge model and scores the estimates against the true poster scores.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "nbibd/generator.hpp"
#include "nbibd/mixed_model.hpp"

namespace nbibd {

struct SimParams {
    int t = 200;
    int b = 100;
    int k = 5;
    int awards = 30;
    double mu = 80.0;
    double sd_poster = 7.0;
    double sd_judge = 6.0;
    double sd_error = 7.0;
    int iterations = 1000;
    std::uint64_t seed = 1;
    std::vector<GeneratorKind> designs{GeneratorKind::nb1, GeneratorKind::nb2, GeneratorKind::random};
    int threads = 0;  // 0 = hardware concurrency

    static SimParams paper() { return {}; }
    static SimParams appendix555() {
        SimParams p;
        p.sd_poster = p.sd_judge = p.sd_error = 5.0;
        return p;
    }

    void check() const;
};

// Row-major t x b matrix; column j holds the scores judge j would give.
struct ScoreMatrix {
    int t = 0;
    int b = 0;
    std::vector<double> true_scores;
    std::vector<double> values;

    double operator()(int poster, int judge) const { return values[static_cast<std::size_t>(poster) * b + judge]; }
    bool operator==(const ScoreMatrix&) const = default;
};

ScoreMatrix synthesize_scores(const SimParams& params, std::uint64_t iteration_seed);

// The observed cells of `matrix` under `design`: judge j scores the posters of block j.
ScoreTable observe(const Design& design, const ScoreMatrix& matrix);

enum class Metric { win_prop, median_rank_dev, mean_score_dev, mean_se };
inline constexpr std::array<Metric, 4> kAllMetrics{Metric::win_prop, Metric::median_rank_dev, Metric::mean_score_dev,
                                                   Metric::mean_se};
std::string_view to_string(Metric metric);
std::optional<Metric> parse_metric(std::string_view text);

// Fraction of the true top m that the estimates also place in the top m.
double win_proportion(std::span<const double> truth, std::span<const double> estimate, int m);
// Median over the true top m of |estimated rank - true rank|.
double median_rank_deviation(std::span<const double> truth, std::span<const double> estimate, int m);
// Mean over the true top m of |estimate - truth|.
double mean_score_deviation(std::span<const double> truth, std::span<const double> estimate, int m);

struct DesignMetrics {
    GeneratorKind kind = GeneratorKind::nb1;
    double win_prop = 0.0;
    double median_rank_dev = 0.0;
    double mean_score_dev = 0.0;
    double mean_se = 0.0;
    bool disconnected = false;
    bool failed = false;  // SingularFit from the fit, or NB1 ran out of restarts

    double value(Metric metric) const;
    bool operator==(const DesignMetrics&) const = default;
};

struct IterationResult {
    int iteration = 0;
    std::vector<DesignMetrics> designs;  // in SimParams::designs order

    const DesignMetrics* find(GeneratorKind kind) const;
    bool failed() const;
    bool operator==(const IterationResult&) const = default;
};

IterationResult run_iteration(const SimParams& params, int iteration);

struct Summary {
    int n = 0;
    double mean = 0.0;
    double sd = 0.0;
    double min = 0.0;
    double q025 = 0.0;
    double median = 0.0;
    double q975 = 0.0;
    double max = 0.0;
    double ci_lower = 0.0;  // 95% t-interval for the mean
    double ci_upper = 0.0;

    bool operator==(const Summary&) const = default;
};

// Empirical quantile with linear interpolation between order statistics
// (Hyndman-Fan type 7).
double quantile(std::span<const double> sorted, double prob);
Summary summarize(std::span<const double> values);

struct SimStudyReport {
    std::vector<GeneratorKind> designs;
    std::vector<IterationResult> iterations;  // indexed by iteration, failures included
    std::map<GeneratorKind, std::map<Metric, Summary>> per_design;
    std::map<GeneratorKind, int> disconnected;
    int failed_iterations = 0;
};

// Aggregates per-iteration rows. Iterations in which any design failed are
// dropped from every summary so differences stay paired.
SimStudyReport aggregate(std::vector<GeneratorKind> designs, std::vector<IterationResult> iterations);

SimStudyReport run_study(const SimParams& params);

// Paired difference first - second across the retained iterations.
// Throws InputError when either design is absent from the report.
Summary summarize_differences(const SimStudyReport& report, GeneratorKind first, GeneratorKind second, Metric metric);

// Worker count from NBIBD_THREADS (0 or unset = hardware concurrency).
int threads_from_environment();

}  // namespace nbibd
