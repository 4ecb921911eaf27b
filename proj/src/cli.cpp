#include "nbibd/cli.hpp"

#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "nbibd/csv_io.hpp"
#include "nbibd/errors.hpp"
#include "nbibd/generator.hpp"
#include "nbibd/mixed_model.hpp"
#include "nbibd/simulation.hpp"

namespace nbibd::cli {

namespace {

// Failure that should produce exit code 1 after printing the message.
struct CheckFailed {
    std::string message;
};

GeneratorKind require_kind(const std::string& text) {
    auto kind = parse_generator_kind(text);
    if (!kind) throw InputError("--kind must be nb1, nb2 or random, got '" + text + "'");
    return *kind;
}

std::string flag(bool v) { return v ? "1" : "0"; }

struct GenerateArgs {
    int posters = 0;
    int block_size = 0;
    int judges = 0;
    std::string kind;
    std::uint64_t seed = 0;
    std::string out;
    int max_attempts = 500;
    int restart_budget = 50;
    std::optional<int> faculty_count;
};

struct ExtendArgs {
    std::string design;
    std::optional<int> posters;
    int add = 0;
    std::string kind;
    std::uint64_t seed = 0;
    std::string out;
    int max_attempts = 500;
    int restart_budget = 50;
    std::optional<int> faculty_count;
};

struct ValidateArgs {
    std::string design;
    std::optional<int> posters;
    std::string kind;
};

struct ScoreArgs {
    std::string design;
    std::string scores;
    std::optional<int> posters;
    std::string model = "random";
    std::string out;
    std::string summary;
    double theta_max = 1e4;
};

struct SimulateArgs {
    std::string preset = "paper";
    std::optional<int> iterations;
    std::optional<std::uint64_t> seed;
    std::optional<int> posters;
    std::optional<int> judges;
    std::optional<int> block_size;
    std::optional<int> awards;
    std::optional<double> sd_poster;
    std::optional<double> sd_judge;
    std::optional<double> sd_error;
    std::string designs = "nb1,nb2,random";
    std::string out;
};

struct ReportArgs {
    std::string metrics;
    std::string out;
    int hist_bins = 20;
    std::string hist_out;
};

int do_generate(const GenerateArgs& a) {
    DesignConfig config;
    config.t = a.posters;
    config.k = a.block_size;
    config.b = a.judges;
    config.seed = a.seed;
    config.max_attempts = a.max_attempts;
    config.restart_budget = a.restart_budget;
    config.faculty_count = a.faculty_count;
    const GeneratorKind kind = require_kind(a.kind);
    auto [design, trace] = generate(config, kind);
    write_atomically(a.out, [&](std::ostream& out) { write_design_csv(out, design); });
    std::cout << "generate kind=" << to_string(kind) << " posters=" << design.t() << " block_size=" << design.k()
              << " judges=" << design.num_blocks() << " seed=" << trace.seed_used << " restarts=" << trace.restarts
              << " rejected=" << trace.rejected_blocks << " out=" << a.out << '\n';
    return 0;
}

int do_extend(const ExtendArgs& a) {
    const GeneratorKind kind = require_kind(a.kind);
    Design base = read_design_file(a.design, a.posters, a.seed);
    DesignConfig config = base.config();
    config.max_attempts = a.max_attempts;
    config.restart_budget = a.restart_budget;
    config.faculty_count = a.faculty_count;
    base = Design(config, base.blocks());
    auto [design, trace] = extend(base, a.add, kind);
    write_atomically(a.out, [&](std::ostream& out) { write_design_csv(out, design); });
    std::cout << "extend kind=" << to_string(kind) << " posters=" << design.t() << " from=" << base.num_blocks()
              << " judges=" << design.num_blocks() << " seed=" << trace.seed_used << " restarts=" << trace.restarts
              << " rejected=" << trace.rejected_blocks << " out=" << a.out << '\n';
    return 0;
}

int do_validate(const ValidateArgs& a) {
    const Design design = read_design_file(a.design, a.posters);
    const ValidationReport r = validate(design);
    std::optional<GeneratorKind> kind;
    if (!a.kind.empty()) kind = require_kind(a.kind);

    std::string problem;
    if (!r.covered) problem = "some poster is never reviewed";
    else if (!kind || *kind != GeneratorKind::random) {
        if (!r.connected) problem = "design is not connected";
        else if (!r.all_prefixes_connected) problem = "some prefix of the design is not connected";
        else if (r.replication_spread > 1) problem = "replication differs by more than one";
        else if (kind == GeneratorKind::nb1 && r.max_concurrence > 1) problem = "a pair of posters meets more than once";
    }
    std::cout << "validate judges=" << design.num_blocks() << " posters=" << design.t()
              << " spread=" << r.replication_spread << " max_concurrence=" << r.max_concurrence
              << " connected=" << flag(r.connected) << " all_prefixes_connected=" << flag(r.all_prefixes_connected)
              << " covered=" << flag(r.covered) << " faculty_coverage_ok=" << flag(r.faculty_coverage_ok)
              << " status=" << (problem.empty() ? "ok" : "fail") << '\n';
    if (!problem.empty()) throw CheckFailed{a.design + ": " + problem};
    return 0;
}

int do_score(const ScoreArgs& a) {
    const Design design = read_design_file(a.design, a.posters);
    const ScoreTable scores = read_scores_file(a.scores, design.t(), design.num_blocks());
    FitOptions options;
    options.theta_max = a.theta_max;
    FitResult fit;
    if (a.model == "fixed")
        fit = fit_fixed(design, scores, options);
    else if (a.model == "random")
        fit = fit_random(design, scores, options);
    else
        throw InputError("--model must be fixed or random, got '" + a.model + "'");
    const std::string summary = a.summary.empty() ? a.out + ".summary.csv" : a.summary;
    write_atomically(a.out, [&](std::ostream& out) { write_fit_csv(out, fit); });
    write_atomically(summary, [&](std::ostream& out) { write_fit_summary_csv(out, fit); });
    std::cout << "score model=" << a.model << " posters=" << design.t() << " observations=" << scores.observations.size()
              << " grand_mean=" << format_double(fit.grand_mean)
              << " var_judge=" << (fit.var_judge ? format_double(*fit.var_judge) : "NA")
              << " var_error=" << format_double(fit.var_error) << " converged=" << flag(fit.converged)
              << " out=" << a.out << " summary=" << summary << '\n';
    return 0;
}

int do_simulate(const SimulateArgs& a) {
    SimParams params;
    if (a.preset == "paper")
        params = SimParams::paper();
    else if (a.preset == "appendix555")
        params = SimParams::appendix555();
    else
        throw InputError("--preset must be paper or appendix555, got '" + a.preset + "'");
    if (a.iterations) params.iterations = *a.iterations;
    if (a.seed) params.seed = *a.seed;
    if (a.posters) params.t = *a.posters;
    if (a.judges) params.b = *a.judges;
    if (a.block_size) params.k = *a.block_size;
    if (a.awards) params.awards = *a.awards;
    if (a.sd_poster) params.sd_poster = *a.sd_poster;
    if (a.sd_judge) params.sd_judge = *a.sd_judge;
    if (a.sd_error) params.sd_error = *a.sd_error;
    params.designs.clear();
    std::stringstream list(a.designs);
    for (std::string item; std::getline(list, item, ',');) {
        const auto kind = require_kind(item);
        if (std::ranges::find(params.designs, kind) != params.designs.end())
            throw InputError("--designs lists " + item + " twice");
        params.designs.push_back(kind);
    }
    params.threads = threads_from_environment();
    const SimStudyReport report = run_study(params);
    write_atomically(a.out, [&](std::ostream& out) { write_metrics_csv(out, report.iterations); });
    std::cout << "simulate preset=" << a.preset << " iterations=" << params.iterations << " seed=" << params.seed
              << " failed=" << report.failed_iterations;
    for (GeneratorKind kind : params.designs) std::cout << " disconnected_" << to_string(kind) << '=' << report.disconnected.at(kind);
    std::cout << " out=" << a.out << '\n';
    return 0;
}

int do_report(const ReportArgs& a) {
    auto table = read_metrics_file(a.metrics);
    const SimStudyReport report = aggregate(table.designs, std::move(table.iterations));
    write_atomically(a.out, [&](std::ostream& out) { write_report_csv(out, report); });
    if (!a.hist_out.empty())
        write_atomically(a.hist_out, [&](std::ostream& out) { write_histogram_csv(out, report, a.hist_bins); });
    std::cout << "report iterations=" << report.iterations.size() << " designs=" << report.designs.size()
              << " pairs=" << design_pairs(report.designs).size() << " out=" << a.out;
    if (!a.hist_out.empty()) std::cout << " hist=" << a.hist_out;
    std::cout << '\n';
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"Near-balanced incomplete block designs for judge-to-poster assignment"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* generate_cmd = app.add_subcommand("generate", "Generate a design and write it as CSV");
    generate_cmd->add_option("--posters", gen.posters, "Number of posters")->required();
    generate_cmd->add_option("--block-size", gen.block_size, "Posters per judge")->required();
    generate_cmd->add_option("--judges", gen.judges, "Number of judge assignments")->required();
    generate_cmd->add_option("--kind", gen.kind, "nb1, nb2 or random")->required();
    generate_cmd->add_option("--seed", gen.seed, "Random seed")->required();
    generate_cmd->add_option("--out", gen.out, "Output design CSV")->required();
    generate_cmd->add_option("--max-attempts", gen.max_attempts, "NB1 candidates per judge before restarting")
        ->capture_default_str();
    generate_cmd->add_option("--restart-budget", gen.restart_budget, "NB1 full restarts before giving up")
        ->capture_default_str();
    generate_cmd->add_option("--faculty-count", gen.faculty_count, "Leading assignments flagged faculty (default b_min)");

    ExtendArgs ext;
    auto* extend_cmd = app.add_subcommand("extend", "Append judge assignments to an existing design");
    extend_cmd->add_option("--design", ext.design, "Input design CSV")->required();
    extend_cmd->add_option("--add", ext.add, "Assignments to append")->required();
    extend_cmd->add_option("--kind", ext.kind, "nb1, nb2 or random")->required();
    extend_cmd->add_option("--seed", ext.seed, "Random seed")->required();
    extend_cmd->add_option("--out", ext.out, "Output design CSV")->required();
    extend_cmd->add_option("--posters", ext.posters, "Number of posters (default: largest id + 1)");
    extend_cmd->add_option("--max-attempts", ext.max_attempts)->capture_default_str();
    extend_cmd->add_option("--restart-budget", ext.restart_budget)->capture_default_str();
    extend_cmd->add_option("--faculty-count", ext.faculty_count);

    ValidateArgs val;
    auto* validate_cmd = app.add_subcommand("validate", "Check replication, concurrence and connectivity");
    validate_cmd->add_option("design", val.design, "Design CSV")->required();
    validate_cmd->add_option("--posters", val.posters, "Number of posters (default: largest id + 1)");
    validate_cmd->add_option("--kind", val.kind, "Also enforce the guarantees of nb1, nb2 or random");

    ScoreArgs sc;
    auto* score_cmd = app.add_subcommand("score", "Estimate poster marginal means from judge scores");
    score_cmd->add_option("--design", sc.design, "Design CSV")->required();
    score_cmd->add_option("--scores", sc.scores, "Scores CSV")->required();
    score_cmd->add_option("--model", sc.model, "fixed or random")->capture_default_str();
    score_cmd->add_option("--out", sc.out, "Output fit CSV")->required();
    score_cmd->add_option("--summary", sc.summary, "Output summary CSV (default: <out>.summary.csv)");
    score_cmd->add_option("--posters", sc.posters, "Number of posters (default: largest id + 1)");
    score_cmd->add_option("--theta-max", sc.theta_max, "Upper bound on judge/error variance ratio")
        ->capture_default_str();

    SimulateArgs sim;
    auto* simulate_cmd = app.add_subcommand("simulate", "Monte Carlo comparison of the designs");
    simulate_cmd->add_option("--preset", sim.preset, "paper or appendix555")->capture_default_str();
    simulate_cmd->add_option("--iterations", sim.iterations);
    simulate_cmd->add_option("--seed", sim.seed);
    simulate_cmd->add_option("--posters", sim.posters);
    simulate_cmd->add_option("--judges", sim.judges);
    simulate_cmd->add_option("--block-size", sim.block_size);
    simulate_cmd->add_option("--awards", sim.awards);
    simulate_cmd->add_option("--sd-poster", sim.sd_poster);
    simulate_cmd->add_option("--sd-judge", sim.sd_judge);
    simulate_cmd->add_option("--sd-error", sim.sd_error);
    simulate_cmd->add_option("--designs", sim.designs, "Comma-separated subset of nb1,nb2,random")
        ->capture_default_str();
    simulate_cmd->add_option("--out", sim.out, "Per-iteration metrics CSV")->required();

    ReportArgs rep;
    auto* report_cmd = app.add_subcommand("report", "Summarize a metrics CSV");
    report_cmd->add_option("metrics", rep.metrics, "Metrics CSV from simulate")->required();
    report_cmd->add_option("--out", rep.out, "Summary CSV")->required();
    report_cmd->add_option("--hist-bins", rep.hist_bins)->capture_default_str();
    report_cmd->add_option("--hist-out", rep.hist_out, "Histogram CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (generate_cmd->parsed()) return do_generate(gen);
        if (extend_cmd->parsed()) return do_extend(ext);
        if (validate_cmd->parsed()) return do_validate(val);
        if (score_cmd->parsed()) return do_score(sc);
        if (simulate_cmd->parsed()) return do_simulate(sim);
        if (report_cmd->parsed()) return do_report(rep);
    } catch (const CheckFailed& e) {
        std::cerr << "error: " << e.message << '\n';
        return 1;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const Nb1InfeasibleBudget& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const FitError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

}  // namespace nbibd::cli
