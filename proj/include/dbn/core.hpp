#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dbn/error.hpp"

namespace dbn {

/// Dense boolean matrix, row = source, column = target.
class Adjacency {
public:
    Adjacency() = default;
    Adjacency(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0) {}
    static Adjacency square(std::size_t n) { return Adjacency(n, n); }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c] != 0; }
    void set(std::size_t r, std::size_t c, bool v = true) { data_[r * cols_ + c] = v ? 1 : 0; }
    std::size_t count() const;

    friend bool operator==(const Adjacency&, const Adjacency&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::uint8_t> data_;
};

/// Graph superset of a two-slice DBN.
///
/// intra(j, i): X_j(s) -> X_i(s) within a slice.
/// inter(j, i): X_j(s-1) -> X_i(s). The diagonal is the lag-1 self edge.
/// auto_lags[i]: lags tau with X_i(s-tau) -> X_i(s). A lag-1 self edge may be stored either
///   as inter(i, i) or as tau = 1, never both.
/// static_edges(j, i): Z_j -> X_i.
struct DbnStructure {
    std::size_t n_x = 0;
    std::size_t n_z = 0;
    std::size_t p = 1;
    Adjacency intra;
    Adjacency inter;
    std::vector<std::vector<std::size_t>> auto_lags;
    Adjacency static_edges;

    static DbnStructure empty(std::size_t n_x, std::size_t n_z = 0, std::size_t p = 1);

    /// Throws dimension/range/cycle errors when an invariant is broken.
    void validate() const;
    std::size_t edge_count() const;

    friend bool operator==(const DbnStructure&, const DbnStructure&) = default;
};

bool is_acyclic(const Adjacency& intra);

/// Kahn's algorithm with a min-index ready queue; throws CycleError on cyclic input.
std::vector<std::size_t> topological_order(const Adjacency& intra);

struct ParentTag {
    enum class Kind : std::uint8_t { inter = 0, intra = 1, auto_lag = 2, static_var = 3 };
    Kind kind;
    std::size_t index;  // source variable, or the lag for auto_lag

    friend auto operator<=>(const ParentTag&, const ParentTag&) = default;
};

std::string to_string(const ParentTag& tag);

/// A node and its ordered parent list.
struct FamilySpec {
    std::size_t node = 0;
    std::vector<ParentTag> parents;

    /// Smallest child slice whose parents are all observed.
    std::size_t required_lag() const;
    bool has_static() const;

    friend bool operator==(const FamilySpec&, const FamilySpec&) = default;
};

/// Sorts parents into the canonical order (inter, intra, auto, static; ascending inside each
/// class) and rejects duplicates.
FamilySpec make_family(std::size_t node, std::vector<ParentTag> parents);

/// Parents of `node` in canonical order.
FamilySpec parents_of(const DbnStructure& structure, std::size_t node);

/// Per-parent availability when predicting slice `slice`; auto parents reaching before slice 0
/// are unavailable.
std::vector<bool> parent_availability(const FamilySpec& family, std::size_t slice);

/// Mixed-radix little-endian index of a parent configuration.
std::size_t configuration_index(std::span<const std::size_t> values, std::span<const std::size_t> arities);
std::vector<std::size_t> configuration_values(std::size_t index, std::span<const std::size_t> arities);
std::size_t configuration_count(std::span<const std::size_t> arities);

/// N trajectories of T+1 slices over n_x dynamic and n_z static variables.
/// Discrete datasets carry an arity per variable; continuous ones carry none.
class TrajectoryDataset {
public:
    TrajectoryDataset() = default;

    static TrajectoryDataset discrete(std::vector<std::size_t> x_arities, std::vector<std::size_t> z_arities,
                                      std::size_t trajectories, std::size_t steps);
    static TrajectoryDataset continuous(std::size_t n_x, std::size_t n_z, std::size_t trajectories,
                                        std::size_t steps);

    bool is_discrete() const noexcept { return discrete_; }
    std::size_t n_x() const noexcept { return n_x_; }
    std::size_t n_z() const noexcept { return n_z_; }
    std::size_t trajectories() const noexcept { return n_traj_; }
    std::size_t steps() const noexcept { return steps_; }

    const std::vector<std::size_t>& x_arities() const noexcept { return x_arities_; }
    const std::vector<std::size_t>& z_arities() const noexcept { return z_arities_; }

    double x(std::size_t n, std::size_t t, std::size_t v) const { return x_[(n * (steps_ + 1) + t) * n_x_ + v]; }
    double& x(std::size_t n, std::size_t t, std::size_t v) { return x_[(n * (steps_ + 1) + t) * n_x_ + v]; }
    double z(std::size_t n, std::size_t j) const { return z_[n * n_z_ + j]; }
    double& z(std::size_t n, std::size_t j) { return z_[n * n_z_ + j]; }

    /// Transitions into slices below this index are context only and never scored.
    std::size_t first_scored_slice() const noexcept { return first_scored_; }
    void set_first_scored_slice(std::size_t s) { first_scored_ = s; }

    /// Value of parent `tag` of `child` when predicting slice `s` (s >= tag requirement).
    double parent_value(std::size_t n, std::size_t s, std::size_t child, const ParentTag& tag) const;

    /// Arity of a parent variable (discrete datasets only).
    std::size_t parent_arity(std::size_t child, const ParentTag& tag) const;

    /// First slice scored for a family: max(first_scored_slice, family.required_lag()).
    std::size_t first_usable_slice(const FamilySpec& family) const;
    /// Number of scored transitions per trajectory for a family.
    std::size_t usable_per_trajectory(const FamilySpec& family) const;

    /// Slices [0, last] of every trajectory.
    TrajectoryDataset truncated(std::size_t last) const;

    void validate() const;

    friend bool operator==(const TrajectoryDataset&, const TrajectoryDataset&) = default;

private:
    bool discrete_ = false;
    std::size_t n_x_ = 0;
    std::size_t n_z_ = 0;
    std::size_t n_traj_ = 0;
    std::size_t steps_ = 0;
    std::size_t first_scored_ = 1;
    std::vector<std::size_t> x_arities_;
    std::vector<std::size_t> z_arities_;
    std::vector<double> x_;
    std::vector<double> z_;
};

/// Arities of a family's parents, in family order.
std::vector<std::size_t> family_arities(const TrajectoryDataset& data, const FamilySpec& family);

/// Configuration index of the family's parents for transition (n, s).
std::size_t family_configuration(const TrajectoryDataset& data, const FamilySpec& family, std::size_t n,
                                 std::size_t s);

// Transition kernels ------------------------------------------------------------------------

/// Unrestricted multinomial: one probability vector per parent configuration.
struct Cpt {
    std::vector<std::vector<double>> theta;
};

/// Binary child with p(X=1) = theta_dyn[xi_d] * theta_stat[xi_s]. An empty parent class gives a
/// single-entry table equal to 1.
struct FactoredCpt {
    std::vector<double> theta_dyn;
    std::vector<double> theta_stat;
    bool clipped = false;
};

struct NoisyOr {
    double lambda0 = 0.0;
    std::vector<double> lambda;
};

struct Logistic {
    double beta0 = 0.0;
    std::vector<double> beta;
};

struct LinearGaussian {
    double beta0 = 0.0;
    std::vector<double> beta;
    double sigma2 = 1.0;
};

using Kernel = std::variant<Cpt, FactoredCpt, NoisyOr, Logistic, LinearGaussian>;

struct NodeModel {
    FamilySpec family;
    Kernel kernel;
};

struct ParameterSet {
    std::vector<NodeModel> nodes;

    /// Checks kernel sizes against the dataset arities and the numeric invariants
    /// (rows summing to 1, sigma2 > 0, lambdas in [0,1]).
    void validate(const std::vector<std::size_t>& x_arities, const std::vector<std::size_t>& z_arities) const;
};

/// Splits a family into its time-dependent and static parent lists (each in family order).
std::pair<std::vector<ParentTag>, std::vector<ParentTag>> split_dynamic_static(const FamilySpec& family);

}  // namespace dbn
