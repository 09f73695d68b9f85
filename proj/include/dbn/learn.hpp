#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dbn/core.hpp"
#include "dbn/scoring.hpp"

namespace dbn {

/// Cooperative cancellation: learners poll this between moves and outer iterations and throw
/// Error(timeout) once the deadline has passed.
class Deadline {
public:
    Deadline() = default;
    explicit Deadline(std::chrono::steady_clock::duration budget)
        : at_(std::chrono::steady_clock::now() + budget), armed_(true) {}

    bool expired() const { return armed_ && std::chrono::steady_clock::now() >= at_; }
    void check() const {
        if (expired()) fail(ErrorKind::timeout, "learner exceeded its time limit");
    }

private:
    std::chrono::steady_clock::time_point at_{};
    bool armed_ = false;
};

/// Per-class caps on a node's parent count; a zero cap disables the class.
struct ParentLimits {
    std::size_t intra = 2;
    std::size_t inter = 2;
    std::size_t auto_lag = 1;
    std::size_t static_var = 1;
    std::size_t total = 3;
};

struct SearchConfig {
    ScoreKind score = ScoreKind::bic;
    ScoreOptions options;
    ParentLimits limits;
    std::size_t max_lag = 1;  // auto-lag candidates are 2..max_lag
    std::size_t restarts = 1;
    std::size_t move_budget = 10000;
    double random_edge_prob = 0.2;  // initial structures of restarts after the first
    std::uint64_t seed = 0;

    void validate() const;
};

struct TraceEntry {
    std::size_t iteration = 0;
    double score = 0.0;
    double h = 0.0;  // acyclicity residual where applicable
};

struct LearnerReport {
    std::string learner;
    DbnStructure structure;
    std::optional<ParameterSet> params;
    ScoreKind score_kind = ScoreKind::bic;
    double score = 0.0;  // structure_score(data, structure, score_kind)
    std::vector<TraceEntry> trace;
    std::uint64_t seed = 0;
    double wall_ms = 0.0;
    std::size_t iterations = 0;
    bool converged = true;
    double h_residual = 0.0;
    /// Weighted same-slice matrix and lag matrices (lag tau at index tau-1), one-shot learners only.
    std::optional<Eigen::MatrixXd> w;
    std::vector<Eigen::MatrixXd> a;
    std::vector<std::string> notes;
};

// Exact search ---------------------------------------------------------------------------------

inline constexpr std::size_t kExactMaxNodes = 12;

/// Maximizes the decomposable score subject to intra-slice acyclicity. Time-lagged and static
/// parents never close a cycle, so each node's best completion is chosen per intra parent set;
/// the DAG over intra edges is then found by dynamic programming over node subsets.
LearnerReport exact_search(const TrajectoryDataset& data, const SearchConfig& config,
                           const Deadline& deadline = {});

/// Temporal (inter, auto, static) parent candidates of a node under the limits, each list in
/// canonical order; the empty set comes first.
std::vector<std::vector<ParentTag>> temporal_parent_sets(const TrajectoryDataset& data, std::size_t node,
                                                         const ParentLimits& limits, std::size_t max_lag);

// Hill climbing --------------------------------------------------------------------------------

/// Steepest ascent over single-edge moves, best of `restarts` starts (the empty graph first).
LearnerReport hill_climb(const TrajectoryDataset& data, const SearchConfig& config, const Deadline& deadline = {});

/// Every structure one configured move away from `s` (acyclic and within the limits).
std::vector<DbnStructure> neighborhood(const DbnStructure& s, const SearchConfig& config);

// Continuous one-shot ---------------------------------------------------------------------------

struct ContinuousConfig {
    double lambda_w = 0.1;
    double lambda_a = 0.1;
    double w_threshold = 0.01;
    std::size_t max_lag = 1;
    double rho0 = 1.0;
    double rho_growth = 10.0;
    double rho_max = 1e16;
    std::size_t max_outer = 100;
    double h_tol = 1e-8;
    std::size_t max_inner = 5000;
    double inner_tol = 1e-6;  // max-norm of the proximal gradient mapping
    double initial_step = 1.0;
    double backtrack = 0.5;
    ScoreKind score = ScoreKind::bic;  // used for the reported score
    /// Forbidden same-slice edges (source, target).
    std::vector<std::pair<std::size_t, std::size_t>> tabu_edges;

    void validate() const;
};

/// Lagged least-squares SEM with L1 penalties under h_expm(W) = 0, by augmented Lagrangian with a
/// proximal-gradient inner solver. When `inner_trace` is given, one list per outer iteration
/// receives the penalized objective at the start and after every inner step.
LearnerReport continuous_oneshot(const TrajectoryDataset& data, const ContinuousConfig& config,
                                 const Deadline& deadline = {},
                                 std::vector<std::vector<double>>* inner_trace = nullptr);

// Bounded-weight one-shot ----------------------------------------------------------------------

struct BoundedConfig {
    double b_w = 0.1;
    double b_a = 0.1;
    double lambda_w_pos = 1e-3;
    double lambda_w_neg = 1e-3;
    double lambda_a_pos = 1e-3;
    double lambda_a_neg = 1e-3;
    std::size_t max_nodes = 4;
    /// Candidates with |marginal correlation| below this are skipped (0 keeps all).
    double screen = 0.0;
    ScoreKind score = ScoreKind::bic;
    std::vector<std::pair<std::size_t, std::size_t>> tabu_edges;

    void validate() const;
};

/// Exhaustive solution of the sign-split L0 formulation: every active weight satisfies |w| >= b.
/// The objective is the unnormalized squared residual plus per-sign edge penalties.
LearnerReport bounded_oneshot(const TrajectoryDataset& data, const BoundedConfig& config,
                              const Deadline& deadline = {});

/// Sum of squared SEM residuals plus the edge penalties for given W and A_1 (lag 1 only).
double bounded_objective(const TrajectoryDataset& data, const BoundedConfig& config, const Eigen::MatrixXd& w,
                         const Eigen::MatrixXd& a1);

/// min ||t - D u||^2 subject to u >= 0, in Gram form (q = D^T D, c = D^T t). Lawson-Hanson.
Eigen::VectorXd nnls_gram(const Eigen::MatrixXd& q, const Eigen::VectorXd& c);

}  // namespace dbn
