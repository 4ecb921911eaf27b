#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "instances.hpp"
#include "nbibd/errors.hpp"
#include "nbibd/mixed_model.hpp"
#include "nbibd/random.hpp"
#include "oracles.hpp"

using namespace nbibd;

namespace {

Design make_design(int t, int k, const std::vector<std::vector<int>>& rows) {
    std::vector<Block> blocks;
    for (std::size_t j = 0; j < rows.size(); ++j) blocks.push_back({static_cast<int>(j), rows[j], false});
    DesignConfig c;
    c.t = t;
    c.k = k;
    return Design(c, blocks);
}

ScoreTable score_design(const Design& d, std::uint64_t seed, double sd_judge = 3.0, double sd_error = 2.0) {
    Rng rng(seed);
    std::vector<double> poster(d.t()), judge(d.num_blocks());
    for (auto& p : poster) p = 75.0 + 6.0 * rng.normal();
    for (auto& j : judge) j = sd_judge * rng.normal();
    ScoreTable s{d.t(), d.num_blocks(), {}};
    for (const auto& block : d.blocks())
        for (int p : block.poster_ids)
            s.observations.push_back({block.judge_index, p, poster[p] + judge[block.judge_index] + sd_error * rng.normal()});
    return s;
}

std::vector<double> raw_means(const ScoreTable& s) {
    std::vector<double> sum(s.t, 0.0), count(s.t, 0.0);
    for (const auto& o : s.observations) {
        sum[o.poster] += o.score;
        count[o.poster] += 1.0;
    }
    for (int i = 0; i < s.t; ++i) sum[i] /= count[i];
    return sum;
}

Design complete_layout(int t, int b) {
    std::vector<std::vector<int>> rows(b);
    for (auto& row : rows)
        for (int i = 0; i < t; ++i) row.push_back(i);
    return make_design(t, t, rows);
}

const std::vector<std::vector<int>> kTriangle{{0, 1}, {1, 2}, {0, 2}};
const std::vector<std::vector<int>> kAllPairsOfFour{{0, 1}, {2, 3}, {0, 2}, {1, 3}, {0, 3}, {1, 2}};

}  // namespace

TEST_CASE("complete layout: both models reproduce raw poster means") {
    const Design d = complete_layout(4, 6);
    const ScoreTable s = score_design(d, 5);
    const auto means = raw_means(s);
    const FitResult fixed = fit_fixed(d, s);
    const FitResult random = fit_random(d, s);
    for (int i = 0; i < 4; ++i) {
        CHECK(fixed.pmm[i] == doctest::Approx(means[i]).epsilon(1e-12));
        CHECK(std::abs(fixed.pmm[i] - means[i]) < 1e-8);
        CHECK(std::abs(random.pmm[i] - means[i]) < 1e-8);
        CHECK(std::abs(random.pmm[i] - fixed.pmm[i]) < 1e-8);
    }
    CHECK(fixed.model_kind == ModelKind::fixed);
    CHECK_FALSE(fixed.var_judge.has_value());
    CHECK(random.var_judge.has_value());
}

TEST_CASE("disconnected design: fixed model fails, random model still estimates") {
    const Design d = make_design(4, 2, {{0, 1}, {2, 3}, {0, 1}, {2, 3}, {1, 0}});
    const ScoreTable s = score_design(d, 9);
    CHECK_THROWS_AS(fit_fixed(d, s), DisconnectedDesign);
    const FitResult fit = fit_random(d, s);
    for (int i = 0; i < 4; ++i) CHECK(std::isfinite(fit.pmm[i]));

    // each pmm lies inside the observed score range of its component
    auto range_of = [&](std::vector<int> posters) {
        double lo = 1e300, hi = -1e300;
        for (const auto& o : s.observations)
            if (std::ranges::find(posters, o.poster) != posters.end()) {
                lo = std::min(lo, o.score);
                hi = std::max(hi, o.score);
            }
        return std::pair{lo, hi};
    };
    const auto [lo01, hi01] = range_of({0, 1});
    const auto [lo23, hi23] = range_of({2, 3});
    for (int i : {0, 1}) CHECK((fit.pmm[i] >= lo01 && fit.pmm[i] <= hi01));
    for (int i : {2, 3}) CHECK((fit.pmm[i] >= lo23 && fit.pmm[i] <= hi23));
}

TEST_CASE("fixed model matches dense least squares on the indicator expansion") {
    for (const auto& rows : {kTriangle, kAllPairsOfFour}) {
        const int t = rows == kTriangle ? 3 : 4;
        const Design d = make_design(t, 2, rows);
        const ScoreTable s = score_design(d, 21);
        const auto ols = oracle::fixed_ols(s);
        REQUIRE(ols.full_rank);
        const FitResult fit = fit_fixed(d, s);
        for (int i = 0; i < t; ++i) {
            CHECK(std::abs(fit.pmm[i] - ols.pmm[i]) < 1e-9);
            CHECK(std::abs(fit.se[i] - ols.se[i]) < 1e-9);
        }
    }
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto inst = instances::small_random(seed);
        const auto ols = oracle::fixed_ols(inst.scores);
        if (!ols.full_rank) continue;
        if (inst.scores.observations.size() <= static_cast<std::size_t>(inst.scores.t + inst.scores.b - 1)) continue;
        const FitResult fit = fit_fixed(inst.design, inst.scores);
        for (int i = 0; i < inst.scores.t; ++i) {
            CHECK(std::abs(fit.pmm[i] - ols.pmm[i]) < 1e-8);
            CHECK(std::abs(fit.se[i] - ols.se[i]) < 1e-8);
        }
    }
}

TEST_CASE("fixed model residuals sum to zero within judges and posters") {
    DesignConfig c;
    c.t = 30;
    c.k = 4;
    c.b = 25;
    c.seed = 8;
    const Design d = generate(c, GeneratorKind::nb2).first;
    const ScoreTable s = score_design(d, 33);
    const FitResult fit = fit_fixed(d, s);

    // judge effect that zeroes the within-judge residual sum
    std::vector<double> judge(c.b, 0.0);
    for (const auto& o : s.observations) judge[o.judge] += (o.score - fit.pmm[o.poster]) / c.k;
    double judge_sum = 0.0;
    for (double j : judge) judge_sum += j;
    CHECK(std::abs(judge_sum) < 1e-8);

    std::vector<double> by_poster(c.t, 0.0);
    for (const auto& o : s.observations) by_poster[o.poster] += o.score - fit.pmm[o.poster] - judge[o.judge];
    for (double r : by_poster) CHECK(std::abs(r) < 1e-8);
}

TEST_CASE("spectral REML oracle agrees with the dense likelihood") {
    const Design d = make_design(4, 2, kAllPairsOfFour);
    const ScoreTable s = score_design(d, 4);
    const oracle::SpectralReml spectral(s);
    const RemlProfile profile(s);
    for (double theta : {0.0, 0.05, 0.3, 1.0, 2.5, 17.0, 100.0}) {
        const double dense = oracle::dense_reml(s, theta);
        CHECK(spectral(theta) == doctest::Approx(dense).epsilon(1e-10));
        CHECK(profile.criterion(theta) == doctest::Approx(dense).epsilon(1e-10));
    }
}

TEST_CASE("REML on a BIBD matches a fine theta grid") {
    const Design d = make_design(4, 2, kAllPairsOfFour);
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        const ScoreTable s = score_design(d, seed, 4.0, 1.5);
        const oracle::SpectralReml spectral(s);
        const auto best = oracle::grid_search(spectral, 0.0, 100.0, 1e-4);
        FitOptions options;
        options.theta_max = 100.0;
        const FitResult fit = fit_random(d, s, options);
        CHECK(fit.converged);
        CHECK(spectral(fit.theta) >= best.value - 1e-6);
        CHECK(fit.reml_criterion >= best.value - 1e-6);
        const auto gls = oracle::dense_gls(s, best.theta);
        for (int i = 0; i < 4; ++i) CHECK(std::abs(fit.pmm[i] - gls[i]) < 1e-4);
        CHECK(fit.var_judge.value() == doctest::Approx(fit.theta * fit.var_error));
    }
}

TEST_CASE("REML on random small instances matches the theta grid") {
    for (std::uint64_t seed = 100; seed < 110; ++seed) {
        const auto inst = instances::small_random(seed);
        const oracle::SpectralReml spectral(inst.scores);
        const auto best = oracle::grid_search(spectral, 0.0, 100.0, 1e-3);
        FitOptions options;
        options.theta_max = 100.0;
        const FitResult fit = fit_random(inst.design, inst.scores, options);
        CHECK(fit.reml_criterion >= best.value - 1e-6);
        const auto gls = oracle::dense_gls(inst.scores, fit.theta);
        for (int i = 0; i < inst.scores.t; ++i) CHECK(std::abs(fit.pmm[i] - gls[i]) < 1e-8);
    }
}

TEST_CASE("identical judges: theta near zero and pmm near raw means") {
    DesignConfig c;
    c.t = 10;
    c.k = 5;
    c.b = 200;
    c.seed = 3;
    const Design d = generate(c, GeneratorKind::nb2).first;
    const ScoreTable s = score_design(d, 77, 0.0, 2.0);
    const FitResult fit = fit_random(d, s);
    const auto means = raw_means(s);
    CHECK(fit.var_judge.value() < 0.05 * fit.var_error);
    for (int i = 0; i < c.t; ++i) CHECK(std::abs(fit.pmm[i] - means[i]) < 0.25 * fit.se[i]);
}

TEST_CASE("shift and scale equivariance") {
    DesignConfig c;
    c.t = 20;
    c.k = 4;
    c.b = 15;
    c.seed = 12;
    const Design d = generate(c, GeneratorKind::nb1).first;
    const ScoreTable s = score_design(d, 5);
    const FitResult base = fit_random(d, s);

    ScoreTable shifted = s;
    for (auto& o : shifted.observations) o.score += 13.5;
    const FitResult fs = fit_random(d, shifted);
    CHECK(fs.theta == doctest::Approx(base.theta).epsilon(1e-6));
    CHECK(fs.var_error == doctest::Approx(base.var_error).epsilon(1e-6));
    CHECK(fs.rank == base.rank);
    for (int i = 0; i < c.t; ++i) {
        CHECK(fs.pmm[i] == doctest::Approx(base.pmm[i] + 13.5).epsilon(1e-9));
        CHECK(fs.se[i] == doctest::Approx(base.se[i]).epsilon(1e-6));
    }

    ScoreTable scaled = s;
    for (auto& o : scaled.observations) o.score *= 2.5;
    const FitResult fc = fit_random(d, scaled);
    CHECK(fc.var_error == doctest::Approx(base.var_error * 6.25).epsilon(1e-6));
    CHECK(fc.var_judge.value() == doctest::Approx(base.var_judge.value() * 6.25).epsilon(1e-5));
    for (int i = 0; i < c.t; ++i) {
        CHECK(fc.pmm[i] - fc.grand_mean == doctest::Approx(2.5 * (base.pmm[i] - base.grand_mean)).epsilon(1e-6));
        CHECK(fc.se[i] == doctest::Approx(2.5 * base.se[i]).epsilon(1e-6));
    }
}

TEST_CASE("relabeling posters permutes the estimates") {
    DesignConfig c;
    c.t = 12;
    c.k = 3;
    c.b = 14;
    c.seed = 4;
    const Design d = generate(c, GeneratorKind::nb2).first;
    const ScoreTable s = score_design(d, 6);
    std::vector<int> perm(c.t);
    for (int i = 0; i < c.t; ++i) perm[i] = (i * 5 + 3) % c.t;

    std::vector<Block> blocks = d.blocks();
    for (auto& block : blocks)
        for (int& p : block.poster_ids) p = perm[p];
    const Design pd(d.config(), blocks);
    ScoreTable ps = s;
    for (auto& o : ps.observations) o.poster = perm[o.poster];

    for (bool random : {false, true}) {
        const FitResult a = random ? fit_random(d, s) : fit_fixed(d, s);
        const FitResult b = random ? fit_random(pd, ps) : fit_fixed(pd, ps);
        for (int i = 0; i < c.t; ++i) {
            CHECK(b.pmm[perm[i]] == doctest::Approx(a.pmm[i]).epsilon(1e-9));
            CHECK(b.se[perm[i]] == doctest::Approx(a.se[i]).epsilon(1e-7));
            CHECK(b.rank[perm[i]] == a.rank[i]);
        }
    }
}

TEST_CASE("unreviewed posters and missing degrees of freedom") {
    const Design d = make_design(5, 2, {{0, 1}, {1, 2}, {2, 3}, {0, 3}});
    const ScoreTable s = score_design(d, 2);
    CHECK_THROWS_AS(fit_random(d, s), SingularFit);
    FitOptions allow;
    allow.allow_unreviewed = true;
    const FitResult fit = fit_random(d, s, allow);
    CHECK(std::isnan(fit.pmm[4]));
    CHECK(fit.rank[4] == 0);
    std::vector<int> ranks(fit.rank.begin(), fit.rank.begin() + 4);
    std::ranges::sort(ranks);
    CHECK(ranks == std::vector<int>{1, 2, 3, 4});
    CHECK(rank_posters(fit, 4).size() == 4);
    CHECK_THROWS_AS(rank_posters(fit, 5), InputError);

    const Design once = make_design(4, 2, {{0, 1}, {2, 3}});
    CHECK_THROWS_AS(fit_random(once, score_design(once, 1)), SingularFit);
}

TEST_CASE("score table validation") {
    const Design d = make_design(3, 2, kTriangle);
    ScoreTable s = score_design(d, 1);
    s.observations.push_back(s.observations.front());
    CHECK_THROWS_AS(fit_random(d, s), InputError);
    ScoreTable wrong = score_design(d, 1);
    wrong.observations[0].poster = 2;  // judge 0 reviewed posters 0 and 1
    CHECK_THROWS_AS(fit_random(d, wrong), InputError);
}

TEST_CASE("rank_posters orders by pmm with ascending-id ties") {
    FitResult fit;
    fit.pmm = {1.0, 3.0, 2.0};
    CHECK(rank_posters(fit, 2) == std::vector<int>{1, 2});
    fit.pmm = {5.0, 5.0, 5.0};
    CHECK(rank_posters(fit, 2) == std::vector<int>{0, 1});
    CHECK(rank_descending(std::vector<double>{1.0, 3.0, 2.0}) == std::vector<int>{3, 1, 2});
    CHECK(rank_descending(std::vector<double>{2.0, std::nan(""), 2.0}) == std::vector<int>{1, 0, 2});
}

TEST_CASE("constant scores give a zero-variance boundary fit") {
    const Design d = make_design(4, 2, kAllPairsOfFour);
    ScoreTable s{4, 6, {}};
    for (const auto& block : d.blocks())
        for (int p : block.poster_ids) s.observations.push_back({block.judge_index, p, 80.0});
    const FitResult fit = fit_random(d, s);
    CHECK(fit.theta == 0.0);
    CHECK(fit.var_error == 0.0);
    for (double v : fit.pmm) CHECK(v == doctest::Approx(80.0));
    CHECK(fit.rank == std::vector<int>{1, 2, 3, 4});
}
