#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "dbn/core.hpp"

namespace dbn {

class Rng;

/// Sufficient statistics N_{i,xi,k} of one family over all scored transitions.
struct CountTable {
    FamilySpec family;
    std::vector<std::size_t> arities;  // parent arities, family order
    std::size_t child_arity = 0;
    std::vector<std::vector<double>> counts;  // [xi][k]
    std::vector<double> totals;               // [xi]
    double grand_total = 0.0;

    std::size_t configurations() const { return counts.size(); }
};

CountTable count_transitions(const TrajectoryDataset& data, const FamilySpec& family);

/// theta_{xi,k} = N_{xi,k} / N_xi; unseen configurations get the uniform row.
Cpt mle_cpt(const CountTable& counts);

/// Maximum-likelihood tables of the factored binary kernel p(X=1) = theta_dyn * theta_stat.
/// theta_dyn is the frequency of X=1 per dynamic configuration; theta_stat is the frequency of
/// X=1 per static configuration over all T scored transitions of the matching trajectories.
FactoredCpt mle_factored(const TrajectoryDataset& data, const FamilySpec& family);

/// Sum of log p(x | parents) over scored transitions, for any kernel type. Returns -inf when an
/// observed transition has probability zero.
double node_loglik(const TrajectoryDataset& data, const NodeModel& model);
double loglik(const TrajectoryDataset& data, const ParameterSet& params);

/// Same as loglik, but every node must carry a Cpt kernel matching its family in `structure`.
double loglik_cpt(const TrajectoryDataset& data, const DbnStructure& structure, const ParameterSet& params);

// Logistic -------------------------------------------------------------------------------------

/// Rows (1, parent values...) and binary targets of a family's scored transitions.
struct Design {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
};
Design family_design(const TrajectoryDataset& data, const FamilySpec& family);

/// Mean log-likelihood (1/m) sum [y eta - log(1+e^eta)] - ridge * ||beta_{1..}||^2 and its gradient.
double logistic_objective(const Design& design, const Eigen::VectorXd& beta, double ridge, Eigen::VectorXd* grad);

struct LogisticFit {
    Logistic params;
    double loglik = 0.0;  // unpenalized, summed over transitions
    std::size_t iterations = 0;
    bool converged = false;
    bool separable = false;  // divergence guard fired; ridge was raised
    double ridge = 0.0;
};

/// Gradient ascent with backtracking on logistic_objective. Stops when the gradient norm of the
/// mean objective is below 1e-8 or after 10^4 iterations.
LogisticFit fit_logistic(const TrajectoryDataset& data, const FamilySpec& family, double ridge);

// Linear Gaussian ------------------------------------------------------------------------------

struct GaussianFit {
    LinearGaussian params;
    double loglik = 0.0;
    std::size_t rows = 0;
};

inline constexpr double kSigma2Floor = 1e-12;

/// Least squares with a 1e-10 ridge; sigma2 is the mean squared residual (floored at kSigma2Floor
/// for the log-likelihood).
GaussianFit fit_linear_gaussian(const TrajectoryDataset& data, const FamilySpec& family);

// Criteria -------------------------------------------------------------------------------------

enum class Criterion { aic, aicc, bic };

/// Delta = -2 loglik + C with C = 2k (AIC), (N+k)/(N-k-2) (AICc, as published), k log N (BIC).
/// Lower is better.
double information_criterion(double loglik, double k, double n_eff, Criterion kind);

// Bayesian Dirichlet ---------------------------------------------------------------------------

struct DirichletPrior {
    double ess = 1.0;
    /// alpha_k per (configuration, value): ess / (configurations * arity).
    double pseudo_count(std::size_t configurations, std::size_t arity) const;
};

/// log prod_xi Gamma(sum a)/Gamma(sum a + N_xi) prod_k Gamma(a_k + N_k)/Gamma(a_k).
double dirichlet_multinomial_log(const std::vector<std::vector<double>>& counts,
                                 const std::vector<std::vector<double>>& alpha);

double bde_family_score(const CountTable& counts, const DirichletPrior& prior);

struct DirichletPosterior {
    std::vector<std::vector<double>> alpha;  // [xi][k]

    Cpt mean() const;
    Cpt sample(Rng& rng) const;
};

DirichletPosterior dirichlet_posterior(const CountTable& counts, const DirichletPrior& prior);

// BGe ------------------------------------------------------------------------------------------

struct BgeHyper {
    double alpha_mu = 1.0;
    /// Wishart degrees of freedom; unset means family dimension + 2.
    std::optional<double> alpha_w;
    /// Prior precision (inverse scale) of the Wishart, a multiple of the identity unless
    /// `precision` is given with the family dimension.
    double precision_scale = 1.0;
    std::optional<Eigen::MatrixXd> precision;
    std::optional<Eigen::VectorXd> mean;  // prior mean nu, zero by default
};

/// Log marginal likelihood of i.i.d. rows under a normal-Wishart prior
/// mu | W ~ N(nu, (alpha_mu W)^-1), W ~ Wishart(alpha_w, precision^-1).
double normal_wishart_log_marginal(const Eigen::MatrixXd& rows, double alpha_mu, double alpha_w,
                                   const Eigen::MatrixXd& precision, const Eigen::VectorXd& mean);

/// Rows (child, parents...) of a family's scored transitions, continuous data.
Eigen::MatrixXd family_rows(const TrajectoryDataset& data, const FamilySpec& family);

/// log p(child, parents) - log p(parents), each under the (marginalized) family prior.
double bge_family_score(const TrajectoryDataset& data, const FamilySpec& family, const BgeHyper& hyper);

// Decomposable scores --------------------------------------------------------------------------

enum class ScoreKind { ll, aic, aicc, bic, bde, bge };

const char* to_string(ScoreKind kind);
ScoreKind score_kind_from_string(const std::string& name);

struct ScoreOptions {
    DirichletPrior dirichlet;
    BgeHyper bge;
};

/// Free parameter count of a family's kernel: |Xi|(r-1) for discrete data, |parents|+2 for
/// linear Gaussian (intercept, weights, variance).
double family_parameter_count(const TrajectoryDataset& data, const FamilySpec& family);

/// Family contribution to a higher-is-better structure score. Criteria contribute -Delta/2;
/// AICc families with too few transitions score -inf.
double family_score(const TrajectoryDataset& data, const FamilySpec& family, ScoreKind kind,
                    const ScoreOptions& options = {});

/// Thread-safe memo of family scores for one dataset, keyed by (kind, node, sorted parents).
class ScoreCache {
public:
    explicit ScoreCache(ScoreOptions options = {}) : options_(std::move(options)) {}

    double get(const TrajectoryDataset& data, const FamilySpec& family, ScoreKind kind);
    std::size_t size() const;
    std::size_t hits() const;
    std::size_t misses() const;
    const ScoreOptions& options() const { return options_; }

    /// Sorted "node<TAB>parents<TAB>kind<TAB>value" lines, values with 17 significant digits.
    std::string dump() const;

private:
    struct Key {
        ScoreKind kind;
        std::size_t node;
        std::vector<ParentTag> parents;
        friend auto operator<=>(const Key&, const Key&) = default;
    };
    ScoreOptions options_;
    mutable std::shared_mutex mutex_;
    std::map<Key, double> entries_;
    std::atomic<std::size_t> hits_{0};
    std::atomic<std::size_t> misses_{0};
};

double cached_family_score(ScoreCache& cache, const TrajectoryDataset& data, std::size_t node,
                           std::vector<ParentTag> parents, ScoreKind kind);

/// Sum of family scores over all dynamic nodes.
double structure_score(const TrajectoryDataset& data, const DbnStructure& structure, ScoreKind kind,
                       const ScoreOptions& options = {});
double structure_score(ScoreCache& cache, const TrajectoryDataset& data, const DbnStructure& structure,
                       ScoreKind kind);

/// Fits node kernels on a structure: CPT (MLE, or Dirichlet posterior mean when `smoothed`) for
/// discrete data, linear Gaussian for continuous data.
ParameterSet fit_parameters(const TrajectoryDataset& data, const DbnStructure& structure, bool smoothed,
                            const DirichletPrior& prior = {});

}  // namespace dbn
