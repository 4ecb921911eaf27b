#include "nbibd/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

#include <boost/math/distributions/students_t.hpp>

#include "nbibd/errors.hpp"
#include "nbibd/random.hpp"

namespace nbibd {

namespace {

constexpr std::uint64_t kScoresTag = 0x73636f726573ULL;  // "scores"
constexpr std::uint64_t kDesignTag = 0x64657369676eULL;  // "design"

std::uint64_t kind_tag(GeneratorKind kind) {
    switch (kind) {
        case GeneratorKind::nb1: return 1;
        case GeneratorKind::nb2: return 2;
        case GeneratorKind::random: return 3;
    }
    return 0;
}

// Indices of the true top m, best first.
std::vector<int> true_top(std::span<const double> truth, const std::vector<int>& true_rank, int m) {
    std::vector<int> top(m);
    for (int i = 0; i < static_cast<int>(truth.size()); ++i)
        if (true_rank[i] >= 1 && true_rank[i] <= m) top[true_rank[i] - 1] = i;
    return top;
}

void check_metric_args(std::span<const double> truth, std::span<const double> estimate, int m) {
    if (truth.size() != estimate.size()) throw InputError("metric: truth and estimate differ in length");
    if (m < 1 || m > static_cast<int>(truth.size())) throw InputError("metric: awards must lie in [1, t]");
}

}  // namespace

void SimParams::check() const {
    if (t < 2 || k < 2 || k > t || b < 1) throw InputError("simulation needs t >= 2, 2 <= k <= t and b >= 1");
    if (awards < 1 || awards > t) throw InputError("awards must lie in [1, posters]");
    if (sd_poster < 0 || sd_judge < 0 || sd_error < 0) throw InputError("standard deviations must be non-negative");
    if (iterations < 1) throw InputError("iterations must be positive");
    if (designs.empty()) throw InputError("at least one design kind is required");
    if (threads < 0) throw InputError("threads must be non-negative");
}

ScoreMatrix synthesize_scores(const SimParams& params, std::uint64_t iteration_seed) {
    Rng rng(iteration_seed);
    ScoreMatrix out;
    out.t = params.t;
    out.b = params.b;
    out.true_scores.resize(params.t);
    std::vector<double> judge(params.b);
    for (auto& score : out.true_scores) score = params.mu + params.sd_poster * rng.normal();
    for (auto& effect : judge) effect = params.sd_judge * rng.normal();
    out.values.resize(static_cast<std::size_t>(params.t) * params.b);
    for (int i = 0; i < params.t; ++i)
        for (int j = 0; j < params.b; ++j)
            out.values[static_cast<std::size_t>(i) * params.b + j] =
                out.true_scores[i] + judge[j] + params.sd_error * rng.normal();
    return out;
}

ScoreTable observe(const Design& design, const ScoreMatrix& matrix) {
    if (design.t() != matrix.t || design.num_blocks() > matrix.b)
        throw InputError("design does not fit inside the score matrix");
    ScoreTable table{design.t(), design.num_blocks(), {}};
    table.observations.reserve(static_cast<std::size_t>(design.num_blocks()) * design.k());
    for (const Block& block : design.blocks())
        for (int poster : block.poster_ids)
            table.observations.push_back({block.judge_index, poster, matrix(poster, block.judge_index)});
    return table;
}

std::string_view to_string(Metric metric) {
    switch (metric) {
        case Metric::win_prop: return "win_prop";
        case Metric::median_rank_dev: return "median_rank_dev";
        case Metric::mean_score_dev: return "mean_score_dev";
        case Metric::mean_se: return "mean_se";
    }
    return "?";
}

std::optional<Metric> parse_metric(std::string_view text) {
    for (Metric m : kAllMetrics)
        if (to_string(m) == text) return m;
    return std::nullopt;
}

double win_proportion(std::span<const double> truth, std::span<const double> estimate, int m) {
    check_metric_args(truth, estimate, m);
    const auto true_rank = rank_descending(truth);
    const auto est_rank = rank_descending(estimate);
    int hits = 0;
    for (int i : true_top(truth, true_rank, m))
        if (est_rank[i] >= 1 && est_rank[i] <= m) ++hits;
    return static_cast<double>(hits) / m;
}

double median_rank_deviation(std::span<const double> truth, std::span<const double> estimate, int m) {
    check_metric_args(truth, estimate, m);
    const auto true_rank = rank_descending(truth);
    const auto est_rank = rank_descending(estimate);
    std::vector<double> dev;
    for (int i : true_top(truth, true_rank, m)) dev.push_back(std::abs(est_rank[i] - true_rank[i]));
    std::ranges::sort(dev);
    return quantile(dev, 0.5);
}

double mean_score_deviation(std::span<const double> truth, std::span<const double> estimate, int m) {
    check_metric_args(truth, estimate, m);
    const auto true_rank = rank_descending(truth);
    double sum = 0.0;
    for (int i : true_top(truth, true_rank, m)) sum += std::abs(estimate[i] - truth[i]);
    return sum / m;
}

double DesignMetrics::value(Metric metric) const {
    switch (metric) {
        case Metric::win_prop: return win_prop;
        case Metric::median_rank_dev: return median_rank_dev;
        case Metric::mean_score_dev: return mean_score_dev;
        case Metric::mean_se: return mean_se;
    }
    return 0.0;
}

const DesignMetrics* IterationResult::find(GeneratorKind kind) const {
    for (const auto& d : designs)
        if (d.kind == kind) return &d;
    return nullptr;
}

bool IterationResult::failed() const {
    return std::ranges::any_of(designs, [](const DesignMetrics& d) { return d.failed; });
}

IterationResult run_iteration(const SimParams& params, int iteration) {
    params.check();
    const auto index = static_cast<std::uint64_t>(iteration);
    const ScoreMatrix matrix = synthesize_scores(params, derive_seed(params.seed, {index, kScoresTag}));

    IterationResult result;
    result.iteration = iteration;
    for (GeneratorKind kind : params.designs) {
        DesignMetrics metrics;
        metrics.kind = kind;
        DesignConfig config;
        config.t = params.t;
        config.k = params.k;
        config.b = params.b;
        config.seed = derive_seed(params.seed, {index, kDesignTag, kind_tag(kind)});
        try {
            const Design design = generate(config, kind).first;
            metrics.disconnected = !validate(design).connected;
            const FitResult fit = fit_random(design, observe(design, matrix));
            metrics.win_prop = win_proportion(matrix.true_scores, fit.pmm, params.awards);
            metrics.median_rank_dev = median_rank_deviation(matrix.true_scores, fit.pmm, params.awards);
            metrics.mean_score_dev = mean_score_deviation(matrix.true_scores, fit.pmm, params.awards);
            double se_sum = 0.0;
            for (double s : fit.se) se_sum += s;
            metrics.mean_se = se_sum / params.t;
        } catch (const SingularFit&) {
            metrics.failed = true;
        } catch (const Nb1InfeasibleBudget&) {
            metrics.failed = true;
        }
        result.designs.push_back(metrics);
    }
    return result;
}

double quantile(std::span<const double> sorted, double prob) {
    if (sorted.empty()) return std::nan("");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Summary summarize(std::span<const double> values) {
    Summary s;
    s.n = static_cast<int>(values.size());
    if (s.n == 0) {
        s.mean = s.sd = s.min = s.q025 = s.median = s.q975 = s.max = s.ci_lower = s.ci_upper = std::nan("");
        return s;
    }
    std::vector<double> sorted(values.begin(), values.end());
    std::ranges::sort(sorted);
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / s.n;
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = s.n > 1 ? std::sqrt(ss / (s.n - 1)) : 0.0;
    s.min = sorted.front();
    s.max = sorted.back();
    s.q025 = quantile(sorted, 0.025);
    s.median = quantile(sorted, 0.5);
    s.q975 = quantile(sorted, 0.975);
    double half = 0.0;
    if (s.n > 1) {
        const boost::math::students_t dist(s.n - 1);
        half = boost::math::quantile(dist, 0.975) * s.sd / std::sqrt(static_cast<double>(s.n));
    }
    s.ci_lower = s.mean - half;
    s.ci_upper = s.mean + half;
    return s;
}

SimStudyReport aggregate(std::vector<GeneratorKind> designs, std::vector<IterationResult> iterations) {
    SimStudyReport report;
    report.designs = std::move(designs);
    report.iterations = std::move(iterations);
    std::map<GeneratorKind, std::map<Metric, std::vector<double>>> columns;
    for (const auto& it : report.iterations) {
        for (GeneratorKind kind : report.designs) {
            const auto* d = it.find(kind);
            if (d == nullptr) throw InputError("iteration " + std::to_string(it.iteration) + " lacks design " +
                                               std::string(to_string(kind)));
            if (d->disconnected) ++report.disconnected[kind];
        }
        if (it.failed()) {
            ++report.failed_iterations;
            continue;
        }
        for (GeneratorKind kind : report.designs)
            for (Metric metric : kAllMetrics) columns[kind][metric].push_back(it.find(kind)->value(metric));
    }
    for (GeneratorKind kind : report.designs) {
        report.disconnected.try_emplace(kind, 0);
        for (Metric metric : kAllMetrics) report.per_design[kind][metric] = summarize(columns[kind][metric]);
    }
    return report;
}

SimStudyReport run_study(const SimParams& params) {
    params.check();
    std::vector<IterationResult> results(params.iterations);
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto worker = [&] {
        for (int i = next++; i < params.iterations; i = next++) {
            try {
                results[i] = run_iteration(params, i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next = params.iterations;
            }
        }
    };

    int workers = params.threads > 0 ? params.threads : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::clamp(workers, 1, params.iterations);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    if (error) std::rethrow_exception(error);
    return aggregate(params.designs, std::move(results));
}

Summary summarize_differences(const SimStudyReport& report, GeneratorKind first, GeneratorKind second, Metric metric) {
    for (GeneratorKind kind : {first, second})
        if (std::ranges::find(report.designs, kind) == report.designs.end())
            throw InputError("design " + std::string(to_string(kind)) + " is not part of this report");
    std::vector<double> diffs;
    for (const auto& it : report.iterations) {
        if (it.failed()) continue;
        diffs.push_back(it.find(first)->value(metric) - it.find(second)->value(metric));
    }
    return summarize(diffs);
}

int threads_from_environment() {
    const char* env = std::getenv("NBIBD_THREADS");
    if (env == nullptr || *env == '\0') return 0;
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 0) throw InputError("NBIBD_THREADS must be a non-negative integer");
    return static_cast<int>(v);
}

}  // namespace nbibd
