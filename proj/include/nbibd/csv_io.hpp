#pragma once

// CSV codecs for designs, scores, fits, simulation metrics and reports.
// Every parser throws InputError naming the offending line.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nbibd/design.hpp"
#include "nbibd/mixed_model.hpp"
#include "nbibd/simulation.hpp"

namespace nbibd {

// Shortest text that reads back to the same double; NaN is written as NA.
std::string format_double(double value);

// Header: judge_index,faculty,poster_1,...,poster_k. When `t` is absent the
// poster count is taken as the largest id + 1.
Design read_design_csv(std::istream& in, std::optional<int> t = std::nullopt, std::uint64_t seed = 0);
Design read_design_file(const std::filesystem::path& path, std::optional<int> t = std::nullopt,
                        std::uint64_t seed = 0);
void write_design_csv(std::ostream& out, const Design& design);

// Header: judge_index,poster_id,score.
ScoreTable read_scores_csv(std::istream& in, int t, int b);
ScoreTable read_scores_file(const std::filesystem::path& path, int t, int b);
void write_scores_csv(std::ostream& out, const ScoreTable& scores);

// poster_id,pmm,se,rank and the one-row model_kind,grand_mean,var_judge,var_error,converged sidecar.
void write_fit_csv(std::ostream& out, const FitResult& fit);
void write_fit_summary_csv(std::ostream& out, const FitResult& fit);

// One row per (iteration, design).
void write_metrics_csv(std::ostream& out, const std::vector<IterationResult>& iterations);
struct MetricsTable {
    std::vector<GeneratorKind> designs;
    std::vector<IterationResult> iterations;
};
MetricsTable read_metrics_csv(std::istream& in);
MetricsTable read_metrics_file(const std::filesystem::path& path);

// section,subject,metric,n,mean,sd,min,q025,median,q975,max,ci_lower,ci_upper
void write_report_csv(std::ostream& out, const SimStudyReport& report);
// section,subject,metric,bin,lower,upper,count
void write_histogram_csv(std::ostream& out, const SimStudyReport& report, int bins);

// Pairs compared in reports: every (designs[i], designs[j]) with i < j.
std::vector<std::pair<GeneratorKind, GeneratorKind>> design_pairs(const std::vector<GeneratorKind>& designs);

// Writes through a temporary sibling file and renames it into place.
void write_atomically(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body);

}  // namespace nbibd
