#pragma once

// Design data model for judge-to-poster assignment, feasibility arithmetic for
// balanced incomplete block designs, and the structural validators.
//
// Vocabulary: posters are treatments (t of them), judges are blocks, and each
// judge reviews k distinct posters. r_i counts the blocks containing poster i,
// lambda_ij the blocks containing both i and j.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <boost/rational.hpp>

namespace nbibd {

using Rational = boost::rational<long long>;

struct DesignConfig {
    int t = 0;                          // posters
    int k = 0;                          // reviews per judge
    int b = 0;                          // judges to generate
    std::uint64_t seed = 0;
    int max_attempts = 500;             // NB1: consecutive rejected candidates before a restart
    int restart_budget = 50;            // NB1: full restarts before giving up
    std::optional<int> faculty_count;   // defaults to b_min

    // Throws InputError when a count is out of range.
    void check() const;
    int faculty_blocks() const;
};

struct Block {
    int judge_index = 0;
    std::vector<int> poster_ids;
    bool faculty = false;

    bool operator==(const Block&) const = default;
};

// Dense symmetric t x t table of pair counts with zero diagonal.
class ConcurrenceMatrix {
public:
    ConcurrenceMatrix() = default;
    explicit ConcurrenceMatrix(int t) : t_(t), counts_(static_cast<std::size_t>(t) * t, 0) {}

    int size() const { return t_; }
    int operator()(int i, int j) const { return counts_[index(i, j)]; }
    void increment(int i, int j) {
        ++counts_[index(i, j)];
        ++counts_[index(j, i)];
    }
    int max_off_diagonal() const;

    bool operator==(const ConcurrenceMatrix&) const = default;

private:
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * t_ + j; }

    int t_ = 0;
    std::vector<std::uint16_t> counts_;
};

class Design;

// Appends blocks one at a time while keeping replication and concurrence
// current. This is the only place the incremental bookkeeping lives.
class DesignBuilder {
public:
    explicit DesignBuilder(DesignConfig config);
    // Continues an existing design; its blocks are kept verbatim.
    explicit DesignBuilder(const Design& design);

    int num_blocks() const { return static_cast<int>(blocks_.size()); }
    const DesignConfig& config() const { return config_; }
    std::span<const int> replication() const { return replication_; }
    const ConcurrenceMatrix& concurrence() const { return concurrence_; }

    // Largest lambda_ij that would result from appending `posters`.
    int concurrence_if_added(std::span<const int> posters) const;

    // Throws InputError on a malformed block (wrong length, duplicates, ids out of range).
    void append(std::vector<int> posters, bool faculty);
    // Drops every block after the first `n`, recomputing the bookkeeping.
    void truncate(int n);

    Design build() &&;

private:
    DesignConfig config_;
    std::vector<Block> blocks_;
    std::vector<int> replication_;
    ConcurrenceMatrix concurrence_;
};

// An ordered sequence of judge blocks. Immutable once built.
class Design {
public:
    // Builds from explicit blocks (e.g. read from a file). config.b is set to blocks.size().
    Design(DesignConfig config, const std::vector<Block>& blocks);

    const DesignConfig& config() const { return config_; }
    int t() const { return config_.t; }
    int k() const { return config_.k; }
    int num_blocks() const { return static_cast<int>(blocks_.size()); }
    const std::vector<Block>& blocks() const { return blocks_; }
    std::span<const int> replication() const { return replication_; }
    const ConcurrenceMatrix& concurrence() const { return concurrence_; }

    Design prefix(int n) const;

    bool operator==(const Design& other) const {
        return blocks_ == other.blocks_ && config_.t == other.config_.t && config_.k == other.config_.k;
    }

private:
    friend class DesignBuilder;
    Design() = default;

    DesignConfig config_;
    std::vector<Block> blocks_;
    std::vector<int> replication_;
    ConcurrenceMatrix concurrence_;
};

struct ValidationReport {
    int replication_spread = 0;   // max r_i - min r_i over all posters
    int max_concurrence = 0;      // max lambda_ij, i != j
    bool connected = false;       // full design: covered and one component
    bool all_prefixes_connected = false;
    bool covered = false;         // every r_i >= 1
    bool faculty_coverage_ok = false;
};

// lambda = r(k-1)/(t-1), exact.
Rational lambda_of(long long r, long long k, long long t);

struct BlockCount {
    Rational value;
    bool integral = false;
};

// b = t r / k, exact, with an integrality flag.
BlockCount required_blocks(long long t, long long r, long long k);

// Smallest integer >= t/(k-1): the number of anchored blocks that covers every poster.
int min_connect_blocks(int t, int k);

// r_f = ceil(b_min k / t), the replication cap during the faculty phase.
int max_faculty_reviews(int t, int k);

struct Recount {
    std::vector<int> replication;
    ConcurrenceMatrix concurrence;
};

// Brute-force recount of r_i and lambda_ij from the blocks alone.
Recount recount(const Design& design);

// Whether the posters reviewed within the first prefix_len blocks form one
// component of the co-occurrence graph. Unreviewed posters are ignored.
bool is_connected(const Design& design, int prefix_len);

// Max minus min of r_i; with reviewed_only, posters with r_i = 0 are skipped.
int replication_spread(std::span<const int> replication, bool reviewed_only = false);

ValidationReport validate(const Design& design);

}  // namespace nbibd
