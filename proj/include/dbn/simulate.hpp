#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dbn/core.hpp"

namespace dbn {

enum class ModelFamily { cpt, factored_cpt, noisy_or, logistic, linear_gaussian };

const char* to_string(ModelFamily family);
ModelFamily model_family_from_string(const std::string& name);
inline bool is_discrete_family(ModelFamily f) { return f != ModelFamily::linear_gaussian; }

struct EdgeProbabilities {
    double intra = 0.0;
    double inter = 0.0;  // includes the lag-1 self edge (inter diagonal)
    double static_edge = 0.0;
    double auto_lag = 0.0;  // lags 2..p
};

struct GeneratorConfig {
    std::size_t n_x = 3;
    std::size_t n_z = 0;
    std::size_t p = 1;
    EdgeProbabilities edge_prob;
    std::size_t max_parents = 5;  // 0 = unlimited
    ModelFamily family = ModelFamily::cpt;

    std::size_t arity = 2;  // dynamic variables (discrete families)
    std::size_t static_arity = 2;

    double dirichlet_alpha = 0.5;
    /// CPT rows are raised to 1/temperature and renormalized; < 1 sharpens.
    double temperature = 1.0;
    /// CPT only: redraw a node's table (up to 200 times) until each parent, flipped with the other
    /// parents held fixed, moves some row by at least this total-variation distance. 0 disables.
    double min_parent_effect = 0.0;

    double weight_lo = 0.5;  // |w| range for Gaussian and logistic weights
    double weight_hi = 2.0;
    double intercept = 0.0;
    double noise_sigma = 1.0;

    double lambda0_lo = 0.05;  // noisy-or leak
    double lambda0_hi = 0.2;
    double lambda_lo = 0.5;
    double lambda_hi = 0.9;

    /// Linear Gaussian only: redraw lag weights until the companion spectral radius is below this
    /// value (0 disables the check).
    double max_transition_radius = 0.0;

    std::uint64_t seed = 0;

    void validate() const;
};

/// Arities for sampled variables; an empty x_arities means continuous data.
struct DomainSpec {
    std::vector<std::size_t> x_arities;
    std::vector<std::size_t> z_arities;

    static DomainSpec of(const GeneratorConfig& config);
    bool discrete() const { return !x_arities.empty(); }
};

struct Truth {
    DbnStructure structure;
    ParameterSet params;
};

Truth sample_random_dbn(const GeneratorConfig& config);

/// Samples N trajectories of T transitions. Each trajectory uses its own substream derived from
/// (seed, trajectory index). Nodes are realized in intra topological order. A lagged parent
/// reaching before slice 0 reads slice 0; such transitions are never scored.
TrajectoryDataset sample_trajectories(const DbnStructure& structure, const ParameterSet& params,
                                      const DomainSpec& domain, std::size_t trajectories, std::size_t steps,
                                      std::uint64_t seed);

/// Probability that X = 1 under a noisy-or kernel.
double noisy_or_kernel(double lambda0, std::span<const double> lambdas, std::span<const double> parent_values);

struct RegimeTriple {
    std::size_t n;
    std::size_t trajectories;
    std::size_t steps;
    friend bool operator==(const RegimeTriple&, const RegimeTriple&) = default;
};

struct RegimeSpec {
    std::string label;  // "favorable", "high_dimensional", or custom
    std::vector<RegimeTriple> triples;

    static RegimeSpec favorable();
    static RegimeSpec high_dimensional();
    static RegimeSpec by_name(const std::string& name);
    void validate() const;
};

inline constexpr std::size_t kDefaultReplicates = 10;

struct RegimeInstance {
    RegimeTriple triple;
    std::size_t replicate;
    std::uint64_t seed;
    Truth truth;
    TrajectoryDataset data;
};

/// Seed used for (triple, replicate) cells of a regime sweep.
std::uint64_t cell_seed(std::uint64_t base, std::size_t triple_index, std::size_t replicate);

/// Generator config for one cell: the template with n_x and seed replaced.
GeneratorConfig cell_config(const GeneratorConfig& tmpl, const RegimeTriple& triple, std::uint64_t seed);

RegimeInstance make_instance(const GeneratorConfig& tmpl, const RegimeTriple& triple, std::size_t triple_index,
                             std::size_t replicate);

std::vector<RegimeInstance> regime_datasets(const RegimeSpec& regime, const GeneratorConfig& tmpl,
                                            std::size_t replicates = kDefaultReplicates);

}  // namespace dbn
