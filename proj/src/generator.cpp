#include "nbibd/generator.hpp"

#include <algorithm>
#include <cctype>
#include <string>
#include <vector>

#include "nbibd/errors.hpp"
#include "nbibd/random.hpp"

namespace nbibd {

std::string_view to_string(GeneratorKind kind) {
    switch (kind) {
        case GeneratorKind::nb1: return "NB1";
        case GeneratorKind::nb2: return "NB2";
        case GeneratorKind::random: return "RANDOM";
    }
    return "?";
}

std::optional<GeneratorKind> parse_generator_kind(std::string_view text) {
    std::string lower(text);
    std::ranges::transform(lower, lower.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "nb1") return GeneratorKind::nb1;
    if (lower == "nb2") return GeneratorKind::nb2;
    if (lower == "random") return GeneratorKind::random;
    return std::nullopt;
}

namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t kExtendTag = 0x657874656e64ULL;  // "extend"

bool contains(const std::vector<int>& block, int poster) {
    return std::ranges::find(block, poster) != block.end();
}

// Fills `block` up to k posters from the least reviewed stratum upward,
// sampling uniformly within a stratum.
void fill_least_reviewed(std::vector<int>& block, int k, std::span<const int> replication, Rng& rng) {
    const int t = static_cast<int>(replication.size());
    std::vector<int> pool;
    while (static_cast<int>(block.size()) < k) {
        int level = -1;
        for (int i = 0; i < t; ++i)
            if (!contains(block, i) && (level < 0 || replication[i] < level)) level = replication[i];
        pool.clear();
        for (int i = 0; i < t; ++i)
            if (replication[i] == level && !contains(block, i)) pool.push_back(i);
        const std::size_t need = std::min<std::size_t>(k - block.size(), pool.size());
        rng.partial_shuffle(std::span<int>(pool), need);
        block.insert(block.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(need));
    }
}

// Faculty-phase anchor: a reviewed poster drawn with weight r_f - r_i.
int draw_anchor(std::span<const int> replication, int r_f, Rng& rng) {
    const int t = static_cast<int>(replication.size());
    long long total = 0;
    for (int i = 0; i < t; ++i)
        if (replication[i] > 0) total += std::max(0, r_f - replication[i]);
    if (total == 0) {
        // every reviewed poster is at the cap: uniform over reviewed
        std::vector<int> reviewed;
        for (int i = 0; i < t; ++i)
            if (replication[i] > 0) reviewed.push_back(i);
        return reviewed[rng.uniform_index(reviewed.size())];
    }
    long long ticket = static_cast<long long>(rng.uniform_index(static_cast<std::uint64_t>(total)));
    for (int i = 0; i < t; ++i) {
        if (replication[i] == 0) continue;
        ticket -= std::max(0, r_f - replication[i]);
        if (ticket < 0) return i;
    }
    return t - 1;  // unreachable
}

std::vector<int> draw_nb_block(const DesignBuilder& builder, Rng& rng) {
    const auto& cfg = builder.config();
    const int position = builder.num_blocks();
    std::vector<int> block;
    block.reserve(cfg.k);
    if (position > 0 && position < min_connect_blocks(cfg.t, cfg.k))
        block.push_back(draw_anchor(builder.replication(), max_faculty_reviews(cfg.t, cfg.k), rng));
    fill_least_reviewed(block, cfg.k, builder.replication(), rng);
    return block;
}

std::vector<int> draw_random_block(const DesignBuilder& builder, Rng& rng) {
    const auto& cfg = builder.config();
    const auto replication = builder.replication();
    std::vector<int> pool;
    for (int i = 0; i < cfg.t; ++i)
        if (replication[i] == 0) pool.push_back(i);
    std::vector<int> block;
    block.reserve(cfg.k);
    if (!pool.empty()) {
        const std::size_t take = std::min<std::size_t>(cfg.k, pool.size());
        rng.partial_shuffle(std::span<int>(pool), take);
        block.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
        if (static_cast<int>(block.size()) == cfg.k) return block;
        // shortfall: top up uniformly from reviewed posters
        pool.clear();
        for (int i = 0; i < cfg.t; ++i)
            if (replication[i] > 0) pool.push_back(i);
    } else {
        pool.resize(cfg.t);
        for (int i = 0; i < cfg.t; ++i) pool[i] = i;
    }
    const std::size_t need = cfg.k - block.size();
    rng.partial_shuffle(std::span<int>(pool), need);
    block.insert(block.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(need));
    return block;
}

// Grows `builder` until it holds `target` blocks. Blocks before `frozen` are
// never redrawn; an NB1 restart truncates back to `frozen`.
GenerationTrace grow(DesignBuilder& builder, int frozen, int target, GeneratorKind kind, Rng& rng,
                     std::uint64_t seed) {
    const auto& cfg = builder.config();
    const int faculty = cfg.faculty_blocks();
    GenerationTrace trace;
    trace.seed_used = seed;

    if (kind == GeneratorKind::random) {
        while (builder.num_blocks() < target) {
            auto block = draw_random_block(builder, rng);
            builder.append(std::move(block), builder.num_blocks() < faculty);
        }
        return trace;
    }

    for (;;) {
        bool stuck = false;
        while (builder.num_blocks() < target && !stuck) {
            int attempts = 0;
            for (;;) {
                auto block = draw_nb_block(builder, rng);
                if (kind == GeneratorKind::nb1 && builder.concurrence_if_added(block) > 1) {
                    ++trace.rejected_blocks;
                    if (++attempts >= cfg.max_attempts) {
                        stuck = true;
                        break;
                    }
                    continue;
                }
                builder.append(std::move(block), builder.num_blocks() < faculty);
                break;
            }
        }
        if (!stuck) return trace;
        if (trace.restarts >= cfg.restart_budget)
            throw Nb1InfeasibleBudget("NB1 generation exhausted " + std::to_string(cfg.restart_budget) +
                                      " restarts at judge " + std::to_string(builder.num_blocks()) + " (t=" +
                                      std::to_string(cfg.t) + ", k=" + std::to_string(cfg.k) +
                                      "); no lambda <= 1 assignment found");
        ++trace.restarts;
        builder.truncate(frozen);
    }
}

}  // namespace

std::pair<Design, GenerationTrace> generate(const DesignConfig& config, GeneratorKind kind) {
    config.check();
    Rng rng(config.seed);
    DesignBuilder builder(config);
    auto trace = grow(builder, 0, config.b, kind, rng, config.seed);
    return {std::move(builder).build(), trace};
}

Design generate_random_baseline(const DesignConfig& config) {
    return generate(config, GeneratorKind::random).first;
}

std::pair<Design, GenerationTrace> extend(const Design& design, int additional_blocks, GeneratorKind kind) {
    if (additional_blocks < 0) throw InputError("extend: additional blocks must be non-negative");
    const std::uint64_t seed =
        derive_seed(design.config().seed, {kExtendTag, static_cast<std::uint64_t>(design.num_blocks())});
    if (additional_blocks == 0) return {design, GenerationTrace{0, 0, seed}};
    Rng rng(seed);
    DesignBuilder builder(design);
    const int frozen = design.num_blocks();
    auto trace = grow(builder, frozen, frozen + additional_blocks, kind, rng, seed);
    return {std::move(builder).build(), trace};
}

}  // namespace nbibd
