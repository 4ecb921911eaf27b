#pragma once

// Population marginal means of posters under
//
//     score = mu + poster_i + judge_j + error
//
// with judges either fixed (intrablock analysis) or random (mixed model with
// REML variance components). Posters are always fixed; pmm_i = mu + poster_i
// under sum-to-zero poster effects, which is the cell-means parameter of
// poster i.
//
// Both fits work in judge space. Absorbing the poster means leaves the judge
// information matrix A = Z'MZ (M projects out poster means, Z is the judge
// incidence). One symmetric eigendecomposition of A gives every quantity the
// REML profile needs as a sum over eigenvalues, so each criterion evaluation
// costs O(number of judges).

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "nbibd/design.hpp"

namespace nbibd {

struct Observation {
    int judge = 0;
    int poster = 0;
    double score = 0.0;

    bool operator==(const Observation&) const = default;
};

struct ScoreTable {
    int t = 0;  // posters
    int b = 0;  // judges
    std::vector<Observation> observations;

    // Throws InputError on ids out of range or a repeated (judge, poster) pair.
    void check() const;
    // Additionally requires every observation to be an incidence of `design`.
    void check_against(const Design& design) const;
};

enum class ModelKind { fixed, random };

struct FitOptions {
    double theta_max = 1e4;        // upper end of the sigma_J^2 / sigma_e^2 search
    bool allow_unreviewed = false;  // otherwise an unreviewed poster is a SingularFit
};

struct FitResult {
    ModelKind model_kind = ModelKind::random;
    double grand_mean = 0.0;
    std::vector<double> pmm;  // NaN for unreviewed posters
    std::vector<double> se;   // NaN for unreviewed posters
    std::vector<int> rank;    // 1 = best; 0 marks an unreviewed poster
    std::optional<double> var_judge;
    double var_error = 0.0;
    bool converged = false;

    double theta = 0.0;            // var_judge / var_error at the optimum (random model)
    double reml_criterion = 0.0;   // restricted log-likelihood at theta (random model)
    double condition_number = 1.0; // of the judge-space system that was solved
};

// Profiled restricted log-likelihood as a function of theta = sigma_J^2 / sigma_e^2,
//
//   l(theta) = -1/2 [ nu (1 + log(2 pi q(theta) / nu)) + log|I + theta A| ]
//
// with nu = n - p residual degrees of freedom and q(theta) = y'P y the
// generalized residual sum of squares. This is the REML likelihood of error
// contrasts with sigma_e^2 profiled out.
class RemlProfile {
public:
    RemlProfile(const ScoreTable& scores, bool allow_unreviewed = false);

    double criterion(double theta) const;
    double quadratic(double theta) const;
    double log_det(double theta) const;

    int observations() const { return n_; }
    int parameters() const { return p_; }
    int residual_df() const { return n_ - p_; }

    // Judge-information eigenvalues (ascending, clamped at 0).
    const Eigen::VectorXd& eigenvalues() const { return lambda_; }

private:
    friend FitResult fit_random(const Design&, const ScoreTable&, const FitOptions&);
    friend FitResult fit_fixed(const Design&, const ScoreTable&, const FitOptions&);

    int t_ = 0;
    int n_ = 0;
    int p_ = 0;
    std::vector<int> replication_;                   // per poster
    std::vector<double> poster_mean_;                // per poster
    std::vector<std::vector<int>> poster_judges_;    // compact judge indices per poster
    double residual_ss_ = 0.0;                       // y'My
    double total_ss_ = 0.0;                          // sum of squared centred scores
    Eigen::VectorXd lambda_;                         // eigenvalues of A
    Eigen::MatrixXd basis_;                          // eigenvectors of A
    Eigen::VectorXd projected_;                      // basis' Z'My
};

// Intrablock analysis. Throws DisconnectedDesign when judge effects are not
// estimable beyond the sum-to-zero constraint.
FitResult fit_fixed(const Design& design, const ScoreTable& scores, const FitOptions& options = {});

// Mixed model with REML. Does not need a connected design. Throws SingularFit
// when there are no residual degrees of freedom or a poster is unreviewed.
FitResult fit_random(const Design& design, const ScoreTable& scores, const FitOptions& options = {});

// 1-based ranks by descending value, ties by ascending index; NaN entries get 0.
std::vector<int> rank_descending(std::span<const double> values);

// Ids of the top_m posters by pmm (descending, ties by ascending id).
std::vector<int> rank_posters(const FitResult& fit, int top_m);

}  // namespace nbibd
