#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dbn/core.hpp"
#include "dbn/learn.hpp"
#include "dbn/scoring.hpp"
#include "dbn/simulate.hpp"

namespace dbn {

// Edge universe --------------------------------------------------------------------------------

enum class EdgeClass { intra, inter, auto_lag, static_var };

const char* to_string(EdgeClass c);

/// One candidate edge of the unrolled transition graph. For auto_lag edges `source` is the lag
/// (2..p; lag 1 is the inter diagonal).
struct Edge {
    EdgeClass kind;
    std::size_t source;
    std::size_t target;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Ordered candidate edges: intra (off-diagonal, row-major), inter (row-major), auto lags
/// (node-major, then lag), static (row-major).
class EdgeUniverse {
public:
    EdgeUniverse(std::size_t n_x, std::size_t n_z, std::size_t p);

    std::size_t n_x() const noexcept { return n_x_; }
    std::size_t n_z() const noexcept { return n_z_; }
    std::size_t p() const noexcept { return p_; }
    std::size_t size() const noexcept { return edges_.size(); }
    const std::vector<Edge>& edges() const noexcept { return edges_; }
    std::optional<std::size_t> index_of(const Edge& e) const;

    /// Membership vector of a structure. A lag-1 auto entry maps to the inter diagonal.
    std::vector<bool> indicator(const DbnStructure& s) const;

private:
    std::size_t n_x_, n_z_, p_;
    std::vector<Edge> edges_;
    std::map<Edge, std::size_t> index_;
};

/// Universe covering both structures (largest lag); dimension error if n_x or n_z differ.
EdgeUniverse common_universe(const DbnStructure& a, const DbnStructure& b);

// SHD ------------------------------------------------------------------------------------------

/// `two`: Hamming distance over the universe, so a reversed intra edge costs 2.
/// `one`: a reversed intra edge costs 1 (the common convention).
enum class ReversalCost { two, one };

std::size_t shd(const DbnStructure& predicted, const DbnStructure& truth, ReversalCost reversal = ReversalCost::two);

// AUROC ----------------------------------------------------------------------------------------

struct AurocResult {
    double value = 0.5;
    bool degenerate = false;  // no positives or no negatives; value is 0.5
};

/// Mann-Whitney estimate of P(score(pos) > score(neg)), ties counted 1/2.
AurocResult auroc(std::span<const double> scores, const std::vector<bool>& truth);

/// Edge scores for a learner's output: |weights| when the report carries weight matrices (edges
/// without a weight fall back to the 0/1 indicator), otherwise the indicator.
std::vector<double> edge_scores(const LearnerReport& report, const EdgeUniverse& universe);

/// AUROC over the whole universe plus one entry per edge class present.
struct AurocBreakdown {
    AurocResult overall;
    std::map<EdgeClass, AurocResult> per_class;
};
AurocBreakdown auroc_breakdown(std::span<const double> scores, const DbnStructure& truth,
                               const EdgeUniverse& universe);

// Temporal split and hold-out likelihood -------------------------------------------------------

struct TemporalSplit {
    TrajectoryDataset train;  // slices 0..boundary
    TrajectoryDataset test;   // all slices; transitions into boundary+1..T are scored
    std::size_t boundary = 0;
};

/// boundary = floor(fraction * T). Requires T >= 3 and 1 <= boundary < T.
TemporalSplit temporal_split(const TrajectoryDataset& data, double fraction = 0.7);

struct HoldoutOptions {
    double fraction = 0.7;
    /// Plain MLE on train: unseen test configurations give -inf. Otherwise discrete parameters are
    /// Dirichlet posterior means.
    bool strict = false;
    DirichletPrior prior;
};

struct HoldoutResult {
    double train_ll = 0.0;
    double test_ll = 0.0;
    std::size_t train_transitions = 0;
    std::size_t test_transitions = 0;
    ParameterSet params;
};

/// Fits parameters for `structure` on split.train and scores both partitions.
HoldoutResult holdout_loglik(const TemporalSplit& split, const DbnStructure& structure,
                             const HoldoutOptions& options = {});

using LearnerFn = std::function<LearnerReport(const TrajectoryDataset&, const Deadline&)>;

/// Splits, learns on the training part, then evaluates as above.
HoldoutResult holdout_loglik(const TrajectoryDataset& data, const LearnerFn& learner,
                             const HoldoutOptions& options = {});

// Benchmark ------------------------------------------------------------------------------------

enum class CellStatus { ok, time_limit, error, out_of_memory };

/// "OK", "TL", "E", "OOM".
const char* to_string(CellStatus s);

struct BenchmarkLearner {
    std::string name;
    /// Runs on the training split; the seed is the cell seed.
    std::function<LearnerReport(const TrajectoryDataset&, const Deadline&, std::uint64_t seed)> run;
};

struct BenchmarkConfig {
    RegimeSpec regime = RegimeSpec::favorable();
    GeneratorConfig generator;
    std::vector<BenchmarkLearner> learners;
    std::size_t replicates = kDefaultReplicates;
    HoldoutOptions holdout;
    ReversalCost reversal = ReversalCost::two;
    double timeout_sec = 0.0;  // per cell; 0 disables
    std::size_t workers = 1;
};

struct CellResult {
    std::string regime;
    RegimeTriple triple{};
    std::string learner;
    std::size_t replicate = 0;
    std::uint64_t seed = 0;
    std::size_t shd = 0;
    double auroc = 0.5;
    double train_ll = 0.0;
    double test_ll = 0.0;
    CellStatus status = CellStatus::ok;
    double wall_ms = 0.0;
    std::string message;
};

struct BenchmarkResult {
    std::string regime;
    std::vector<RegimeTriple> triples;
    std::vector<std::string> learners;
    std::vector<CellResult> cells;  // triple-major, then learner, then replicate
};

/// Runs one cell: split, learn on train, evaluate. Failures become a status.
CellResult run_cell(const BenchmarkConfig& config, const RegimeInstance& instance, const BenchmarkLearner& learner);

BenchmarkResult run_benchmark(const BenchmarkConfig& config);

struct Summary {
    double mean = 0.0;
    double sd = 0.0;  // sample standard deviation (n-1); 0 for a single value
    std::size_t count = 0;
};
Summary summarize(std::span<const double> values);

/// Long-format CSV. With `wall_time` false the wall_ms column holds "NA" so reruns are
/// byte-identical.
std::string benchmark_csv(const BenchmarkResult& result, bool wall_time = true);

/// Aligned text tables (SHD, AUROC, test log-likelihood): one row per learner, one column per
/// triple, cells "mean ± sd" over successful replicates or the failure status.
std::string benchmark_table(const BenchmarkResult& result);

}  // namespace dbn
