#include "nbibd/mixed_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_set>

#include <boost/math/tools/minima.hpp>

#include "nbibd/errors.hpp"

namespace nbibd {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kMaxCondition = 1e14;
constexpr int kGridPoints = 160;
constexpr double kGridFloor = 1e-6;

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

}  // namespace

void ScoreTable::check() const {
    if (t < 1 || b < 1) throw InputError("score table needs positive dimensions");
    std::unordered_set<std::int64_t> seen;
    seen.reserve(observations.size() * 2);
    for (std::size_t row = 0; row < observations.size(); ++row) {
        const auto& obs = observations[row];
        if (obs.judge < 0 || obs.judge >= b)
            throw InputError("score row " + std::to_string(row + 1) + ": judge_index " + std::to_string(obs.judge) +
                             " outside [0, " + std::to_string(b) + ")");
        if (obs.poster < 0 || obs.poster >= t)
            throw InputError("score row " + std::to_string(row + 1) + ": poster_id " + std::to_string(obs.poster) +
                             " outside [0, " + std::to_string(t) + ")");
        if (!std::isfinite(obs.score))
            throw InputError("score row " + std::to_string(row + 1) + ": score is not finite");
        if (!seen.insert(static_cast<std::int64_t>(obs.judge) * t + obs.poster).second)
            throw InputError("score row " + std::to_string(row + 1) + ": repeated (judge " +
                             std::to_string(obs.judge) + ", poster " + std::to_string(obs.poster) + ")");
    }
}

void ScoreTable::check_against(const Design& design) const {
    check();
    if (t != design.t())
        throw InputError("score table has " + std::to_string(t) + " posters, design has " + std::to_string(design.t()));
    for (std::size_t row = 0; row < observations.size(); ++row) {
        const auto& obs = observations[row];
        if (obs.judge >= design.num_blocks())
            throw InputError("score row " + std::to_string(row + 1) + ": judge " + std::to_string(obs.judge) +
                             " is not in the design");
        const auto& ids = design.blocks()[obs.judge].poster_ids;
        if (std::ranges::find(ids, obs.poster) == ids.end())
            throw InputError("score row " + std::to_string(row + 1) + ": judge " + std::to_string(obs.judge) +
                             " was not assigned poster " + std::to_string(obs.poster));
    }
}

RemlProfile::RemlProfile(const ScoreTable& scores, bool allow_unreviewed) : t_(scores.t) {
    const auto& obs = scores.observations;
    n_ = static_cast<int>(obs.size());

    replication_.assign(t_, 0);
    poster_mean_.assign(t_, 0.0);
    for (const auto& o : obs) {
        ++replication_[o.poster];
        poster_mean_[o.poster] += o.score;
    }
    for (int i = 0; i < t_; ++i) {
        if (replication_[i] == 0) {
            if (!allow_unreviewed)
                throw SingularFit("poster " + std::to_string(i) + " has no scores; its mean is not estimable");
            poster_mean_[i] = nan();
            continue;
        }
        poster_mean_[i] /= replication_[i];
        ++p_;
    }

    // compact judge indices in ascending id order; judges without scores drop out
    std::vector<int> judge_slot(scores.b, -1);
    std::vector<int> judge_size;
    for (const auto& o : obs) judge_slot[o.judge] = 0;
    int judges = 0;
    for (int j = 0; j < scores.b; ++j)
        if (judge_slot[j] == 0) judge_slot[j] = judges++;
    judge_size.assign(judges, 0);

    poster_judges_.assign(t_, {});
    Eigen::VectorXd g = Eigen::VectorXd::Zero(judges);
    double grand = 0.0;
    for (const auto& o : obs) grand += o.score;
    grand = n_ > 0 ? grand / n_ : 0.0;
    for (const auto& o : obs) {
        const int q = judge_slot[o.judge];
        ++judge_size[q];
        poster_judges_[o.poster].push_back(q);
        const double e = o.score - poster_mean_[o.poster];
        g(q) += e;
        residual_ss_ += e * e;
        total_ss_ += (o.score - grand) * (o.score - grand);
    }
    for (auto& list : poster_judges_) std::ranges::sort(list);

    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(judges, judges);
    for (int q = 0; q < judges; ++q) info(q, q) = judge_size[q];
    for (int i = 0; i < t_; ++i) {
        if (replication_[i] == 0) continue;
        const double w = 1.0 / replication_[i];
        for (int a : poster_judges_[i])
            for (int c : poster_judges_[i]) info(a, c) -= w;
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info);
    if (eig.info() != Eigen::Success) throw SingularFit("eigendecomposition of the judge information matrix failed");
    lambda_ = eig.eigenvalues();
    basis_ = eig.eigenvectors();
    projected_ = basis_.transpose() * g;
    const double tol = 1e-10 * std::max(1.0, lambda_.size() > 0 ? lambda_.maxCoeff() : 0.0);
    for (Eigen::Index l = 0; l < lambda_.size(); ++l) {
        if (lambda_(l) < tol) {
            lambda_(l) = 0.0;
            projected_(l) = 0.0;
        }
    }
}

double RemlProfile::quadratic(double theta) const {
    double q = residual_ss_;
    for (Eigen::Index l = 0; l < lambda_.size(); ++l)
        q -= projected_(l) * projected_(l) * theta / (1.0 + theta * lambda_(l));
    return std::max(q, 0.0);
}

double RemlProfile::log_det(double theta) const {
    double s = 0.0;
    for (Eigen::Index l = 0; l < lambda_.size(); ++l) s += std::log1p(theta * lambda_(l));
    return s;
}

double RemlProfile::criterion(double theta) const {
    const double nu = residual_df();
    if (nu <= 0) throw SingularFit("no residual degrees of freedom");
    return -0.5 * (nu * (1.0 + std::log(kTwoPi * quadratic(theta) / nu)) + log_det(theta));
}

namespace {

// pmm and unscaled variances for judge-space weights w_l, where the judge
// system inverse is basis diag(w) basis'.
void solve_means(const std::vector<int>& replication,
                 const std::vector<double>& poster_mean, const std::vector<std::vector<int>>& poster_judges,
                 const Eigen::MatrixXd& basis, const Eigen::VectorXd& projected, const Eigen::VectorXd& weights,
                 double sigma2, FitResult& fit) {
    const int t = static_cast<int>(replication.size());
    const Eigen::VectorXd blup = basis * weights.cwiseProduct(projected);
    fit.pmm.assign(t, nan());
    fit.se.assign(t, nan());
    Eigen::VectorXd row(basis.cols());
    for (int i = 0; i < t; ++i) {
        if (replication[i] == 0) continue;
        const double r = replication[i];
        double shift = 0.0;
        row.setZero();
        for (int q : poster_judges[i]) {
            shift += blup(q);
            row += basis.row(q).transpose();
        }
        fit.pmm[i] = poster_mean[i] - shift / r;
        const double extra = row.cwiseProduct(row).dot(weights) / (r * r);
        fit.se[i] = std::sqrt(sigma2 * (1.0 / r + extra));
    }
    double sum = 0.0;
    int count = 0;
    for (double v : fit.pmm)
        if (!std::isnan(v)) {
            sum += v;
            ++count;
        }
    fit.grand_mean = count > 0 ? sum / count : nan();
    fit.rank = rank_descending(fit.pmm);
}

}  // namespace

FitResult fit_random(const Design& design, const ScoreTable& scores, const FitOptions& options) {
    scores.check_against(design);
    const RemlProfile profile(scores, options.allow_unreviewed);
    if (profile.residual_df() <= 0)
        throw SingularFit("random-effects fit needs more observations (" + std::to_string(profile.observations()) +
                          ") than poster means (" + std::to_string(profile.parameters()) + ")");

    FitResult fit;
    fit.model_kind = ModelKind::random;
    const double nu = profile.residual_df();
    const double theta_max = std::max(options.theta_max, 0.0);

    double theta = 0.0;
    bool converged = true;
    if (profile.residual_ss_ <= 1e-28 * std::max(1.0, profile.total_ss_) || theta_max == 0.0) {
        // exact fit to poster means: nothing left for the judges to explain
        theta = 0.0;
    } else {
        std::vector<double> grid{0.0};
        const double lo = std::min(kGridFloor, theta_max);
        for (int i = 0; i < kGridPoints; ++i)
            grid.push_back(lo * std::pow(theta_max / lo, static_cast<double>(i) / (kGridPoints - 1)));
        std::size_t best = 0;
        double best_value = profile.criterion(grid[0]);
        for (std::size_t i = 1; i < grid.size(); ++i) {
            const double v = profile.criterion(grid[i]);
            if (v > best_value) {
                best_value = v;
                best = i;
            }
        }
        theta = grid[best];
        const double left = grid[best == 0 ? 0 : best - 1];
        const double right = grid[std::min(best + 1, grid.size() - 1)];
        if (right > left) {
            std::uintmax_t iterations = 200;
            const auto [x, neg] = boost::math::tools::brent_find_minima(
                [&](double th) { return -profile.criterion(th); }, left, right,
                std::numeric_limits<double>::digits / 2, iterations);
            converged = iterations < 200;
            if (-neg >= best_value) theta = x;
        }
    }

    const double sigma2 = profile.quadratic(theta) / nu;
    fit.theta = theta;
    fit.var_error = sigma2;
    fit.var_judge = theta * sigma2;
    fit.converged = converged;
    fit.reml_criterion = profile.quadratic(theta) > 0.0 ? profile.criterion(theta)
                                                         : std::numeric_limits<double>::infinity();

    const Eigen::VectorXd& lambda = profile.lambda_;
    const double lambda_max = lambda.size() > 0 ? lambda.maxCoeff() : 0.0;
    const double lambda_min = lambda.size() > 0 ? lambda.minCoeff() : 0.0;
    fit.condition_number = (1.0 + theta * lambda_max) / (1.0 + theta * lambda_min);
    if (!(fit.condition_number < kMaxCondition))
        throw SingularFit("judge system is numerically singular (condition " + std::to_string(fit.condition_number) +
                          ")");

    Eigen::VectorXd weights(lambda.size());
    for (Eigen::Index l = 0; l < lambda.size(); ++l) weights(l) = theta / (1.0 + theta * lambda(l));
    solve_means(profile.replication_, profile.poster_mean_, profile.poster_judges_, profile.basis_,
                profile.projected_, weights, sigma2, fit);
    return fit;
}

FitResult fit_fixed(const Design& design, const ScoreTable& scores, const FitOptions& options) {
    scores.check_against(design);
    const RemlProfile profile(scores, options.allow_unreviewed);
    const Eigen::VectorXd& lambda = profile.lambda_;

    int null_dims = 0;
    double lambda_min = std::numeric_limits<double>::infinity();
    for (Eigen::Index l = 0; l < lambda.size(); ++l) {
        if (lambda(l) == 0.0)
            ++null_dims;
        else
            lambda_min = std::min(lambda_min, lambda(l));
    }
    if (null_dims > 1)
        throw DisconnectedDesign("judge and poster effects are confounded: the scored design splits into " +
                                 std::to_string(null_dims) + " disconnected groups");

    FitResult fit;
    fit.model_kind = ModelKind::fixed;
    const double lambda_max = lambda.size() > 0 ? lambda.maxCoeff() : 0.0;
    fit.condition_number = std::isfinite(lambda_min) ? lambda_max / lambda_min : 1.0;
    if (!(fit.condition_number < kMaxCondition))
        throw DisconnectedDesign("judge information matrix is numerically singular");

    Eigen::VectorXd weights(lambda.size());
    double explained = 0.0;
    for (Eigen::Index l = 0; l < lambda.size(); ++l) {
        weights(l) = lambda(l) > 0.0 ? 1.0 / lambda(l) : 0.0;
        explained += profile.projected_(l) * profile.projected_(l) * weights(l);
    }
    const int df = profile.observations() - profile.parameters() - std::max<int>(0, static_cast<int>(lambda.size()) - 1);
    const double rss = std::max(0.0, profile.residual_ss_ - explained);
    const double sigma2 = df > 0 ? rss / df : nan();
    fit.var_error = sigma2;
    fit.converged = true;
    solve_means(profile.replication_, profile.poster_mean_, profile.poster_judges_, profile.basis_,
                profile.projected_, weights, sigma2, fit);
    return fit;
}

std::vector<int> rank_descending(std::span<const double> values) {
    std::vector<int> order;
    for (int i = 0; i < static_cast<int>(values.size()); ++i)
        if (!std::isnan(values[i])) order.push_back(i);
    std::ranges::sort(order, [&](int a, int b) {
        if (values[a] != values[b]) return values[a] > values[b];
        return a < b;
    });
    std::vector<int> rank(values.size(), 0);
    for (std::size_t pos = 0; pos < order.size(); ++pos) rank[order[pos]] = static_cast<int>(pos) + 1;
    return rank;
}

std::vector<int> rank_posters(const FitResult& fit, int top_m) {
    std::vector<int> order;
    for (int i = 0; i < static_cast<int>(fit.pmm.size()); ++i)
        if (!std::isnan(fit.pmm[i])) order.push_back(i);
    if (top_m < 0 || top_m > static_cast<int>(order.size()))
        throw InputError("rank_posters: top_m must lie in [0, " + std::to_string(order.size()) + "]");
    std::ranges::sort(order, [&](int a, int b) {
        if (fit.pmm[a] != fit.pmm[b]) return fit.pmm[a] > fit.pmm[b];
        return a < b;
    });
    order.resize(top_m);
    return order;
}

}  // namespace nbibd
