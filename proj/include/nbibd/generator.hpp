#pragma once

// Sequential generation of near-balanced designs.
//
// NB2 anchors each faculty-phase block on an already reviewed poster and fills
// the remaining slots from the least reviewed posters upward, which keeps
// every prefix connected and replication within one. NB1 additionally rejects
// any candidate block that would make a pair of posters meet twice, restarting
// from scratch when a single block keeps failing. RANDOM is the baseline used
// for comparison: unreviewed posters first, then uniform draws.

#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>

#include "nbibd/design.hpp"

namespace nbibd {

enum class GeneratorKind { nb1, nb2, random };

std::string_view to_string(GeneratorKind kind);
std::optional<GeneratorKind> parse_generator_kind(std::string_view text);

struct GenerationTrace {
    int restarts = 0;
    long long rejected_blocks = 0;
    std::uint64_t seed_used = 0;

    bool operator==(const GenerationTrace&) const = default;
};

// Throws Nb1InfeasibleBudget when NB1 exhausts config.restart_budget.
std::pair<Design, GenerationTrace> generate(const DesignConfig& config, GeneratorKind kind);

Design generate_random_baseline(const DesignConfig& config);

// Appends blocks to `design` without touching its existing blocks. The random
// stream is derived from the design's seed and current length, so extending
// is deterministic. An NB1 restart only redraws the appended blocks.
std::pair<Design, GenerationTrace> extend(const Design& design, int additional_blocks, GeneratorKind kind);

}  // namespace nbibd
