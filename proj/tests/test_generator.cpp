#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <vector>

#include "nbibd/design.hpp"
#include "nbibd/errors.hpp"
#include "nbibd/generator.hpp"

using namespace nbibd;

namespace {

DesignConfig competition_config(std::uint64_t seed, int b = 100) {
    DesignConfig c;
    c.t = 200;
    c.k = 5;
    c.b = b;
    c.seed = seed;
    return c;
}

int count_at(std::span<const int> r, int value) {
    return static_cast<int>(std::ranges::count(r, value));
}

// Replays `design` and checks the draw-time rules for every block.
void check_draw_rules(const Design& design) {
    const int b_min = min_connect_blocks(design.t(), design.k());
    std::vector<int> r(design.t(), 0);
    for (const Block& block : design.blocks()) {
        const bool anchored = block.judge_index > 0 && block.judge_index < b_min;
        if (anchored) CHECK(r[block.poster_ids[0]] >= 1);
        for (std::size_t slot = anchored ? 1 : 0; slot < block.poster_ids.size(); ++slot) {
            const int chosen = r[block.poster_ids[slot]];
            for (int i = 0; i < design.t(); ++i)
                if (std::ranges::find(block.poster_ids, i) == block.poster_ids.end()) CHECK(r[i] >= chosen);
        }
        for (int p : block.poster_ids) ++r[p];
    }
}

}  // namespace

TEST_CASE("NB2 at t=200, k=5, b=100: half the posters reviewed three times, half twice") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto [design, trace] = generate(competition_config(seed), GeneratorKind::nb2);
        CHECK(design.num_blocks() == 100);
        CHECK(count_at(design.replication(), 3) == 100);
        CHECK(count_at(design.replication(), 2) == 100);
        CHECK(trace.restarts == 0);
        CHECK(trace.rejected_blocks == 0);
        const auto report = validate(design);
        CHECK(report.replication_spread <= 1);
        CHECK(report.connected);
        CHECK(report.all_prefixes_connected);
        CHECK(report.faculty_coverage_ok);
        check_draw_rules(design);
    }
}

TEST_CASE("NB1 at t=200, k=5, b=100: same replication profile and lambda <= 1") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto [design, trace] = generate(competition_config(seed), GeneratorKind::nb1);
        CHECK(count_at(design.replication(), 3) == 100);
        CHECK(count_at(design.replication(), 2) == 100);
        const auto report = validate(design);
        CHECK(report.max_concurrence <= 1);
        CHECK(report.all_prefixes_connected);
        CHECK(report.connected);
        CHECK(trace.seed_used == seed);
        check_draw_rules(design);
        for (int n = 1; n <= design.num_blocks(); ++n)
            CHECK(replication_spread(design.prefix(n).replication(), true) <= 1);
    }
}

TEST_CASE("t=6, k=5, b=2: block 2 is anchored and always takes the unreviewed poster") {
    // Enumerated outcomes: anchor is one of the 5 reviewed posters (weight 1 each),
    // the lone unreviewed poster fills the r=0 stratum, then 3 of the other 4
    // reviewed posters: 5 * 4 = 20 equally likely blocks.
    DesignConfig c;
    c.t = 6;
    c.k = 5;
    c.b = 2;
    std::map<int, int> anchors;
    std::set<std::pair<int, std::set<int>>> outcomes;  // positions within block 1
    const int runs = 4000;
    for (int s = 0; s < runs; ++s) {
        c.seed = static_cast<std::uint64_t>(s);
        const Design d = generate(c, GeneratorKind::nb2).first;
        const auto& first = d.blocks()[0].poster_ids;
        const auto& second = d.blocks()[1].poster_ids;
        int unreviewed = 0;
        while (std::ranges::find(first, unreviewed) != first.end()) ++unreviewed;
        CHECK(std::ranges::find(first, second[0]) != first.end());
        CHECK(std::ranges::find(second, unreviewed) != second.end());
        const int anchor_rank = static_cast<int>(std::ranges::find(first, second[0]) - first.begin());
        ++anchors[anchor_rank];
        std::set<int> rest;
        for (std::size_t slot = 1; slot < second.size(); ++slot)
            if (second[slot] != unreviewed)
                rest.insert(static_cast<int>(std::ranges::find(first, second[slot]) - first.begin()));
        CHECK(rest.size() == 3);
        CHECK_FALSE(rest.contains(anchor_rank));
        outcomes.insert({anchor_rank, rest});
    }
    CHECK(outcomes.size() == 20);
    CHECK(anchors.size() == 5);
    for (auto [slot, count] : anchors) CHECK(count == doctest::Approx(runs / 5.0).epsilon(0.15));
}

TEST_CASE("generation is deterministic and prefix stable") {
    for (GeneratorKind kind : {GeneratorKind::nb1, GeneratorKind::nb2, GeneratorKind::random}) {
        auto [a, ta] = generate(competition_config(42), kind);
        auto [b, tb] = generate(competition_config(42), kind);
        CHECK(a == b);
        CHECK(ta == tb);
        auto [shorter, ts] = generate(competition_config(42, 60), kind);
        if (ta.restarts == 0 && ts.restarts == 0) CHECK(shorter == a.prefix(60));
    }
    auto [x, tx] = generate(competition_config(1), GeneratorKind::nb2);
    auto [y, ty] = generate(competition_config(2), GeneratorKind::nb2);
    CHECK_FALSE(x == y);
}

TEST_CASE("faculty flag covers the first b_min blocks") {
    const Design d = generate(competition_config(3), GeneratorKind::nb2).first;
    for (const Block& block : d.blocks()) CHECK(block.faculty == (block.judge_index < 50));
    CHECK(validate(d).faculty_coverage_ok);

    DesignConfig fewer = competition_config(3);
    fewer.faculty_count = 10;
    const Design f = generate(fewer, GeneratorKind::nb2).first;
    CHECK(std::ranges::count_if(f.blocks(), [](const Block& b) { return b.faculty; }) == 10);
    CHECK_FALSE(validate(f).faculty_coverage_ok);
}

TEST_CASE("random baseline") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Design d = generate_random_baseline(competition_config(seed));
        CHECK(validate(d).covered);
        CHECK(d.num_blocks() == 100);
    }

    DesignConfig whole;
    whole.t = 5;
    whole.k = 5;
    whole.b = 1;
    const Design single = generate_random_baseline(whole);
    std::vector<int> ids = single.blocks()[0].poster_ids;
    std::ranges::sort(ids);
    CHECK(ids == std::vector<int>{0, 1, 2, 3, 4});

    // 7 posters in blocks of 3: blocks 1-2 take 6 fresh posters, block 3 takes
    // the last fresh one and tops up from reviewed posters
    DesignConfig shortfall;
    shortfall.t = 7;
    shortfall.k = 3;
    shortfall.b = 3;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        shortfall.seed = seed;
        const Design d = generate_random_baseline(shortfall);
        std::set<int> first_two;
        for (int j = 0; j < 2; ++j) first_two.insert(d.blocks()[j].poster_ids.begin(), d.blocks()[j].poster_ids.end());
        CHECK(first_two.size() == 6);
        CHECK(validate(d).covered);
    }
}

TEST_CASE("extend appends without touching the prefix") {
    const Design base = generate(competition_config(11), GeneratorKind::nb2).first;
    auto [longer, trace] = extend(base, 20, GeneratorKind::nb2);
    CHECK(longer.num_blocks() == 120);
    CHECK(longer.prefix(100) == base);
    const auto report = validate(longer);
    CHECK(report.replication_spread <= 1);
    CHECK(report.connected);
    CHECK(report.all_prefixes_connected);

    auto [same, t0] = extend(base, 0, GeneratorKind::nb2);
    CHECK(same == base);

    auto [again, trace2] = extend(base, 20, GeneratorKind::nb2);
    CHECK(again == longer);

    const Design nb1 = generate(competition_config(11), GeneratorKind::nb1).first;
    auto [nb1_longer, t1] = extend(nb1, 15, GeneratorKind::nb1);
    CHECK(nb1_longer.prefix(100) == nb1);
    CHECK(validate(nb1_longer).max_concurrence <= 1);
}

TEST_CASE("NB1 on a saturated instance exhausts its restart budget") {
    // t=5, k=4: any two 4-subsets of 5 posters share 3 posters, so no second block fits
    DesignConfig c;
    c.t = 5;
    c.k = 4;
    c.b = 1;
    c.max_attempts = 20;
    c.restart_budget = 3;
    const Design one = generate(c, GeneratorKind::nb1).first;
    CHECK_THROWS_AS(extend(one, 1, GeneratorKind::nb1), Nb1InfeasibleBudget);
    c.b = 2;
    CHECK_THROWS_AS(generate(c, GeneratorKind::nb1), Nb1InfeasibleBudget);
    CHECK_NOTHROW(generate(c, GeneratorKind::nb2));
}

TEST_CASE("generator kind names") {
    CHECK(parse_generator_kind("nb1") == GeneratorKind::nb1);
    CHECK(parse_generator_kind("NB2") == GeneratorKind::nb2);
    CHECK(parse_generator_kind("Random") == GeneratorKind::random);
    CHECK_FALSE(parse_generator_kind("nb3").has_value());
    CHECK(to_string(GeneratorKind::random) == "RANDOM");
}

TEST_CASE("invalid configurations are rejected") {
    DesignConfig c;
    c.t = 4;
    c.k = 5;
    c.b = 1;
    CHECK_THROWS_AS(generate(c, GeneratorKind::nb2), InputError);
    c.k = 2;
    c.b = 0;
    CHECK_THROWS_AS(generate(c, GeneratorKind::nb2), InputError);
}
