#include "nbibd/design.hpp"

#include <algorithm>
#include <string>

#include "nbibd/errors.hpp"
#include "nbibd/union_find.hpp"

namespace nbibd {

void DesignConfig::check() const {
    if (t < 2) throw InputError("posters must be at least 2, got " + std::to_string(t));
    if (k < 2 || k > t)
        throw InputError("block size must lie in [2, " + std::to_string(t) + "], got " + std::to_string(k));
    if (b < 1) throw InputError("judges must be at least 1, got " + std::to_string(b));
    if (max_attempts < 1) throw InputError("max attempts must be positive");
    if (restart_budget < 0) throw InputError("restart budget must be non-negative");
    if (faculty_count && *faculty_count < 0) throw InputError("faculty count must be non-negative");
}

int DesignConfig::faculty_blocks() const { return faculty_count.value_or(min_connect_blocks(t, k)); }

int ConcurrenceMatrix::max_off_diagonal() const {
    int best = 0;
    for (int i = 0; i < t_; ++i)
        for (int j = i + 1; j < t_; ++j) best = std::max(best, (*this)(i, j));
    return best;
}

DesignBuilder::DesignBuilder(DesignConfig config)
    : config_(std::move(config)), replication_(config_.t, 0), concurrence_(config_.t) {}

DesignBuilder::DesignBuilder(const Design& design)
    : config_(design.config_),
      blocks_(design.blocks_),
      replication_(design.replication_),
      concurrence_(design.concurrence_) {}

int DesignBuilder::concurrence_if_added(std::span<const int> posters) const {
    int worst = 0;
    for (std::size_t a = 0; a < posters.size(); ++a)
        for (std::size_t c = a + 1; c < posters.size(); ++c)
            worst = std::max(worst, concurrence_(posters[a], posters[c]) + 1);
    return worst;
}

void DesignBuilder::append(std::vector<int> posters, bool faculty) {
    const int judge = num_blocks();
    if (static_cast<int>(posters.size()) != config_.k)
        throw InputError("judge " + std::to_string(judge) + ": expected " + std::to_string(config_.k) +
                         " posters, got " + std::to_string(posters.size()));
    for (std::size_t a = 0; a < posters.size(); ++a) {
        if (posters[a] < 0 || posters[a] >= config_.t)
            throw InputError("judge " + std::to_string(judge) + ": poster id " + std::to_string(posters[a]) +
                             " outside [0, " + std::to_string(config_.t) + ")");
        for (std::size_t c = 0; c < a; ++c)
            if (posters[a] == posters[c])
                throw InputError("judge " + std::to_string(judge) + ": duplicate poster " +
                                 std::to_string(posters[a]));
    }
    for (std::size_t a = 0; a < posters.size(); ++a) {
        ++replication_[posters[a]];
        for (std::size_t c = a + 1; c < posters.size(); ++c) concurrence_.increment(posters[a], posters[c]);
    }
    blocks_.push_back(Block{judge, std::move(posters), faculty});
}

void DesignBuilder::truncate(int n) {
    if (n >= num_blocks()) return;
    std::vector<Block> kept(blocks_.begin(), blocks_.begin() + n);
    blocks_.clear();
    replication_.assign(config_.t, 0);
    concurrence_ = ConcurrenceMatrix(config_.t);
    for (auto& block : kept) append(std::move(block.poster_ids), block.faculty);
}

Design DesignBuilder::build() && {
    Design design;
    config_.b = num_blocks();
    design.config_ = std::move(config_);
    design.blocks_ = std::move(blocks_);
    design.replication_ = std::move(replication_);
    design.concurrence_ = std::move(concurrence_);
    return design;
}

Design::Design(DesignConfig config, const std::vector<Block>& blocks) {
    if (blocks.empty()) throw InputError("design has no blocks");
    config.b = static_cast<int>(blocks.size());
    config.check();
    DesignBuilder builder(std::move(config));
    for (const auto& block : blocks) {
        if (block.judge_index != builder.num_blocks())
            throw InputError("judge_index " + std::to_string(block.judge_index) + " out of generation order (expected " +
                             std::to_string(builder.num_blocks()) + ")");
        builder.append(block.poster_ids, block.faculty);
    }
    *this = std::move(builder).build();
}

Design Design::prefix(int n) const {
    if (n < 1 || n > num_blocks()) throw InputError("prefix length out of range");
    DesignBuilder builder(*this);
    builder.truncate(n);
    return std::move(builder).build();
}

Rational lambda_of(long long r, long long k, long long t) {
    if (t < 2) throw InputError("lambda_of: need at least 2 treatments");
    if (k < 2 || r < 1) throw InputError("lambda_of: need k >= 2 and r >= 1");
    return Rational(r * (k - 1), t - 1);
}

BlockCount required_blocks(long long t, long long r, long long k) {
    if (t < 1 || r < 1 || k < 1) throw InputError("required_blocks: counts must be positive");
    Rational value(t * r, k);
    return {value, value.denominator() == 1};
}

int min_connect_blocks(int t, int k) {
    if (k < 2 || k > t) throw InputError("min_connect_blocks: need 2 <= k <= t");
    return (t + (k - 1) - 1) / (k - 1);
}

int max_faculty_reviews(int t, int k) {
    const int b_min = min_connect_blocks(t, k);
    return (b_min * k + t - 1) / t;
}

Recount recount(const Design& design) {
    Recount out{std::vector<int>(design.t(), 0), ConcurrenceMatrix(design.t())};
    for (const Block& block : design.blocks()) {
        for (int poster : block.poster_ids) ++out.replication[poster];
        for (int i : block.poster_ids)
            for (int j : block.poster_ids)
                if (i < j) out.concurrence.increment(i, j);
    }
    return out;
}

namespace {

// Number of components among reviewed posters after each prefix length; entry n-1 is for prefix n.
std::vector<int> prefix_component_counts(const Design& design) {
    UnionFind sets(design.t());
    std::vector<char> seen(design.t(), 0);
    int components = 0;
    std::vector<int> counts;
    counts.reserve(design.num_blocks());
    for (const Block& block : design.blocks()) {
        for (int poster : block.poster_ids) {
            if (!seen[poster]) {
                seen[poster] = 1;
                ++components;
            }
        }
        for (std::size_t a = 1; a < block.poster_ids.size(); ++a)
            if (sets.unite(block.poster_ids[0], block.poster_ids[a])) --components;
        counts.push_back(components);
    }
    return counts;
}

}  // namespace

bool is_connected(const Design& design, int prefix_len) {
    if (prefix_len < 1 || prefix_len > design.num_blocks())
        throw InputError("is_connected: prefix length must lie in [1, " + std::to_string(design.num_blocks()) + "]");
    return prefix_component_counts(design)[prefix_len - 1] == 1;
}

int replication_spread(std::span<const int> replication, bool reviewed_only) {
    int lo = -1, hi = -1;
    for (int r : replication) {
        if (reviewed_only && r == 0) continue;
        if (lo < 0 || r < lo) lo = r;
        if (hi < 0 || r > hi) hi = r;
    }
    return lo < 0 ? 0 : hi - lo;
}

ValidationReport validate(const Design& design) {
    ValidationReport report;
    const auto counts = recount(design);
    report.replication_spread = replication_spread(counts.replication);
    report.max_concurrence = counts.concurrence.max_off_diagonal();
    report.covered = std::ranges::all_of(counts.replication, [](int r) { return r >= 1; });

    const auto components = prefix_component_counts(design);
    report.all_prefixes_connected = std::ranges::all_of(components, [](int c) { return c == 1; });
    report.connected = report.covered && components.back() == 1;

    const int b_min = min_connect_blocks(design.t(), design.k());
    if (design.num_blocks() < b_min) {
        report.faculty_coverage_ok = true;
    } else {
        std::vector<char> judged_by_faculty(design.t(), 0);
        for (const Block& block : design.blocks())
            if (block.faculty)
                for (int poster : block.poster_ids) judged_by_faculty[poster] = 1;
        report.faculty_coverage_ok = std::ranges::all_of(judged_by_faculty, [](char c) { return c != 0; });
    }
    return report;
}

}  // namespace nbibd
