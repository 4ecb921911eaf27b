#include "nbibd/csv_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "nbibd/errors.hpp"

namespace nbibd {

namespace {

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream stream(line);
    while (std::getline(stream, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    for (auto& c : cells) {
        while (!c.empty() && (c.back() == ' ' || c.back() == '\r')) c.pop_back();
        while (!c.empty() && c.front() == ' ') c.erase(c.begin());
    }
    return cells;
}

// Reads the next non-empty line; returns false at end of input.
bool next_row(std::istream& in, std::vector<std::string>& cells, int& line_no) {
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        cells = split_row(line);
        return true;
    }
    return false;
}

[[noreturn]] void fail(int line_no, const std::string& what) {
    throw InputError("line " + std::to_string(line_no) + ": " + what);
}

long long parse_integer(const std::string& text, int line_no, const std::string& column) {
    long long value = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end || text.empty())
        fail(line_no, "column " + column + ": expected an integer, got '" + text + "'");
    return value;
}

double parse_real(const std::string& text, int line_no, const std::string& column) {
    if (text == "NA") return std::nan("");
    double value = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end || text.empty())
        fail(line_no, "column " + column + ": expected a number, got '" + text + "'");
    return value;
}

bool parse_flag(const std::string& text, int line_no, const std::string& column) {
    if (text == "1" || text == "true" || text == "TRUE") return true;
    if (text == "0" || text == "false" || text == "FALSE") return false;
    fail(line_no, "column " + column + ": expected 0/1, got '" + text + "'");
}

void expect_header(const std::vector<std::string>& got, const std::vector<std::string>& want, int line_no) {
    if (got != want) {
        std::string joined;
        for (const auto& w : want) joined += (joined.empty() ? "" : ",") + w;
        fail(line_no, "expected header '" + joined + "'");
    }
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    return in;
}

}  // namespace

std::string format_double(double value) {
    if (std::isnan(value)) return "NA";
    char buffer[64];
    const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
    return std::string(buffer, ptr);
}

Design read_design_csv(std::istream& in, std::optional<int> t, std::uint64_t seed) {
    std::vector<std::string> cells;
    int line_no = 0;
    if (!next_row(in, cells, line_no)) throw InputError("design file is empty");
    if (cells.size() < 4 || cells[0] != "judge_index" || cells[1] != "faculty")
        fail(line_no, "expected header 'judge_index,faculty,poster_1,...,poster_k'");
    const int k = static_cast<int>(cells.size()) - 2;
    for (int c = 0; c < k; ++c)
        if (cells[c + 2] != "poster_" + std::to_string(c + 1))
            fail(line_no, "expected column poster_" + std::to_string(c + 1) + ", got '" + cells[c + 2] + "'");

    std::vector<Block> blocks;
    int max_id = -1;
    while (next_row(in, cells, line_no)) {
        if (static_cast<int>(cells.size()) != k + 2)
            fail(line_no, "expected " + std::to_string(k + 2) + " columns, got " + std::to_string(cells.size()));
        Block block;
        block.judge_index = static_cast<int>(parse_integer(cells[0], line_no, "judge_index"));
        for (const auto& seen : blocks)
            if (seen.judge_index == block.judge_index)
                fail(line_no, "duplicate judge_index " + std::to_string(block.judge_index));
        if (block.judge_index != static_cast<int>(blocks.size()))
            fail(line_no, "judge_index " + std::to_string(block.judge_index) + " out of generation order (expected " +
                              std::to_string(blocks.size()) + ")");
        block.faculty = parse_flag(cells[1], line_no, "faculty");
        for (int c = 0; c < k; ++c) {
            const auto id = parse_integer(cells[c + 2], line_no, "poster_" + std::to_string(c + 1));
            if (id < 0 || (t && id >= *t))
                fail(line_no, "poster id " + std::to_string(id) + " outside [0, " +
                                  (t ? std::to_string(*t) : std::string("inf")) + ")");
            for (int prev : block.poster_ids)
                if (prev == id) fail(line_no, "duplicate poster " + std::to_string(id) + " within judge");
            block.poster_ids.push_back(static_cast<int>(id));
            max_id = std::max(max_id, static_cast<int>(id));
        }
        blocks.push_back(std::move(block));
    }
    if (blocks.empty()) throw InputError("design file has no judge rows");

    DesignConfig config;
    config.t = t.value_or(std::max(max_id + 1, k));
    config.k = k;
    config.seed = seed;
    return Design(config, blocks);
}

Design read_design_file(const std::filesystem::path& path, std::optional<int> t, std::uint64_t seed) {
    auto in = open_input(path);
    try {
        return read_design_csv(in, t, seed);
    } catch (const InputError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

void write_design_csv(std::ostream& out, const Design& design) {
    out << "judge_index,faculty";
    for (int c = 1; c <= design.k(); ++c) out << ",poster_" << c;
    out << '\n';
    for (const Block& block : design.blocks()) {
        out << block.judge_index << ',' << (block.faculty ? 1 : 0);
        for (int id : block.poster_ids) out << ',' << id;
        out << '\n';
    }
}

ScoreTable read_scores_csv(std::istream& in, int t, int b) {
    std::vector<std::string> cells;
    int line_no = 0;
    if (!next_row(in, cells, line_no)) throw InputError("scores file is empty");
    expect_header(cells, {"judge_index", "poster_id", "score"}, line_no);
    ScoreTable table{t, b, {}};
    while (next_row(in, cells, line_no)) {
        if (cells.size() != 3) fail(line_no, "expected 3 columns, got " + std::to_string(cells.size()));
        Observation obs;
        obs.judge = static_cast<int>(parse_integer(cells[0], line_no, "judge_index"));
        obs.poster = static_cast<int>(parse_integer(cells[1], line_no, "poster_id"));
        obs.score = parse_real(cells[2], line_no, "score");
        if (!std::isfinite(obs.score)) fail(line_no, "score must be a finite number");
        table.observations.push_back(obs);
    }
    try {
        table.check();
    } catch (const InputError& e) {
        // row numbers in check() count data rows; the header is line 1
        throw InputError(std::string(e.what()) + " (data rows start at line 2)");
    }
    return table;
}

ScoreTable read_scores_file(const std::filesystem::path& path, int t, int b) {
    auto in = open_input(path);
    try {
        return read_scores_csv(in, t, b);
    } catch (const InputError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

void write_scores_csv(std::ostream& out, const ScoreTable& scores) {
    out << "judge_index,poster_id,score\n";
    for (const auto& obs : scores.observations)
        out << obs.judge << ',' << obs.poster << ',' << format_double(obs.score) << '\n';
}

void write_fit_csv(std::ostream& out, const FitResult& fit) {
    out << "poster_id,pmm,se,rank\n";
    for (std::size_t i = 0; i < fit.pmm.size(); ++i)
        out << i << ',' << format_double(fit.pmm[i]) << ',' << format_double(fit.se[i]) << ','
            << (fit.rank[i] > 0 ? std::to_string(fit.rank[i]) : std::string("NA")) << '\n';
}

void write_fit_summary_csv(std::ostream& out, const FitResult& fit) {
    out << "model_kind,grand_mean,var_judge,var_error,converged\n";
    out << (fit.model_kind == ModelKind::fixed ? "fixed" : "random") << ',' << format_double(fit.grand_mean) << ','
        << (fit.var_judge ? format_double(*fit.var_judge) : std::string("NA")) << ','
        << format_double(fit.var_error) << ',' << (fit.converged ? 1 : 0) << '\n';
}

void write_metrics_csv(std::ostream& out, const std::vector<IterationResult>& iterations) {
    out << "iteration,design,win_prop,median_rank_dev,mean_score_dev,mean_se,disconnected,failed\n";
    for (const auto& it : iterations)
        for (const auto& d : it.designs)
            out << it.iteration << ',' << to_string(d.kind) << ',' << format_double(d.win_prop) << ','
                << format_double(d.median_rank_dev) << ',' << format_double(d.mean_score_dev) << ','
                << format_double(d.mean_se) << ',' << (d.disconnected ? 1 : 0) << ',' << (d.failed ? 1 : 0) << '\n';
}

MetricsTable read_metrics_csv(std::istream& in) {
    std::vector<std::string> cells;
    int line_no = 0;
    if (!next_row(in, cells, line_no)) throw InputError("metrics file is empty");
    expect_header(cells,
                  {"iteration", "design", "win_prop", "median_rank_dev", "mean_score_dev", "mean_se", "disconnected",
                   "failed"},
                  line_no);
    MetricsTable table;
    std::map<int, std::size_t> slot;
    while (next_row(in, cells, line_no)) {
        if (cells.size() != 8) fail(line_no, "expected 8 columns, got " + std::to_string(cells.size()));
        const int iteration = static_cast<int>(parse_integer(cells[0], line_no, "iteration"));
        const auto kind = parse_generator_kind(cells[1]);
        if (!kind) fail(line_no, "unknown design '" + cells[1] + "'");
        DesignMetrics d;
        d.kind = *kind;
        d.win_prop = parse_real(cells[2], line_no, "win_prop");
        d.median_rank_dev = parse_real(cells[3], line_no, "median_rank_dev");
        d.mean_score_dev = parse_real(cells[4], line_no, "mean_score_dev");
        d.mean_se = parse_real(cells[5], line_no, "mean_se");
        d.disconnected = parse_flag(cells[6], line_no, "disconnected");
        d.failed = parse_flag(cells[7], line_no, "failed");

        auto [pos, inserted] = slot.try_emplace(iteration, table.iterations.size());
        if (inserted) table.iterations.push_back(IterationResult{iteration, {}});
        auto& it = table.iterations[pos->second];
        if (it.find(d.kind) != nullptr)
            fail(line_no, "design " + cells[1] + " repeated for iteration " + std::to_string(iteration));
        it.designs.push_back(d);
        if (std::ranges::find(table.designs, d.kind) == table.designs.end()) table.designs.push_back(d.kind);
    }
    if (table.iterations.empty()) throw InputError("metrics file has no rows");
    for (const auto& it : table.iterations)
        if (it.designs.size() != table.designs.size())
            throw InputError("iteration " + std::to_string(it.iteration) + " does not list every design");
    return table;
}

MetricsTable read_metrics_file(const std::filesystem::path& path) {
    auto in = open_input(path);
    try {
        return read_metrics_csv(in);
    } catch (const InputError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

std::vector<std::pair<GeneratorKind, GeneratorKind>> design_pairs(const std::vector<GeneratorKind>& designs) {
    std::vector<std::pair<GeneratorKind, GeneratorKind>> pairs;
    for (std::size_t i = 0; i < designs.size(); ++i)
        for (std::size_t j = i + 1; j < designs.size(); ++j) pairs.emplace_back(designs[i], designs[j]);
    return pairs;
}

namespace {

std::string pair_name(GeneratorKind a, GeneratorKind b) {
    return std::string(to_string(a)) + "-" + std::string(to_string(b));
}

void write_summary_row(std::ostream& out, std::string_view section, const std::string& subject, Metric metric,
                       const Summary& s) {
    out << section << ',' << subject << ',' << to_string(metric) << ',' << s.n << ',' << format_double(s.mean) << ','
        << format_double(s.sd) << ',' << format_double(s.min) << ',' << format_double(s.q025) << ','
        << format_double(s.median) << ',' << format_double(s.q975) << ',' << format_double(s.max) << ','
        << format_double(s.ci_lower) << ',' << format_double(s.ci_upper) << '\n';
}

std::vector<double> metric_column(const SimStudyReport& report, GeneratorKind kind, Metric metric) {
    std::vector<double> values;
    for (const auto& it : report.iterations)
        if (!it.failed()) values.push_back(it.find(kind)->value(metric));
    return values;
}

std::vector<double> difference_column(const SimStudyReport& report, GeneratorKind a, GeneratorKind b,
                                      Metric metric) {
    std::vector<double> values;
    for (const auto& it : report.iterations)
        if (!it.failed()) values.push_back(it.find(a)->value(metric) - it.find(b)->value(metric));
    return values;
}

void write_histogram(std::ostream& out, std::string_view section, const std::string& subject, Metric metric,
                     const std::vector<double>& values, int bins) {
    if (values.empty()) return;
    const auto [lo_it, hi_it] = std::ranges::minmax_element(values);
    const double lo = *lo_it, hi = *hi_it;
    const int nbins = hi > lo ? bins : 1;
    const double width = hi > lo ? (hi - lo) / nbins : 0.0;
    std::vector<int> counts(nbins, 0);
    for (double v : values) {
        int bin = width > 0.0 ? static_cast<int>((v - lo) / width) : 0;
        counts[std::clamp(bin, 0, nbins - 1)]++;
    }
    for (int bin = 0; bin < nbins; ++bin) {
        const double lower = lo + bin * width;
        const double upper = bin + 1 == nbins ? hi : lo + (bin + 1) * width;
        out << section << ',' << subject << ',' << to_string(metric) << ',' << bin << ',' << format_double(lower)
            << ',' << format_double(upper) << ',' << counts[bin] << '\n';
    }
}

}  // namespace

void write_report_csv(std::ostream& out, const SimStudyReport& report) {
    out << "section,subject,metric,n,mean,sd,min,q025,median,q975,max,ci_lower,ci_upper\n";
    for (GeneratorKind kind : report.designs)
        for (Metric metric : kAllMetrics)
            write_summary_row(out, "design", std::string(to_string(kind)), metric, report.per_design.at(kind).at(metric));
    for (const auto& [a, b] : design_pairs(report.designs))
        for (Metric metric : kAllMetrics)
            write_summary_row(out, "difference", pair_name(a, b), metric, summarize_differences(report, a, b, metric));
    const int total = static_cast<int>(report.iterations.size());
    for (GeneratorKind kind : report.designs)
        out << "count," << to_string(kind) << ",disconnected," << total << ',' << report.disconnected.at(kind)
            << ",NA,NA,NA,NA,NA,NA,NA,NA\n";
    out << "count,ALL,failed_iterations," << total << ',' << report.failed_iterations << ",NA,NA,NA,NA,NA,NA,NA,NA\n";
}

void write_histogram_csv(std::ostream& out, const SimStudyReport& report, int bins) {
    if (bins < 1) throw InputError("histogram needs at least one bin");
    out << "section,subject,metric,bin,lower,upper,count\n";
    for (GeneratorKind kind : report.designs)
        for (Metric metric : kAllMetrics)
            write_histogram(out, "design", std::string(to_string(kind)), metric, metric_column(report, kind, metric),
                            bins);
    for (const auto& [a, b] : design_pairs(report.designs))
        for (Metric metric : kAllMetrics)
            write_histogram(out, "difference", pair_name(a, b), metric, difference_column(report, a, b, metric), bins);
}

void write_atomically(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        try {
            body(out);
        } catch (...) {
            out.close();
            std::filesystem::remove(tmp);
            throw;
        }
        out.flush();
        if (!out) {
            out.close();
            std::filesystem::remove(tmp);
            throw std::runtime_error("write to " + tmp.string() + " failed");
        }
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace nbibd
