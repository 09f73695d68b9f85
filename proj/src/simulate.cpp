#include "dbn/simulate.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "dbn/rng.hpp"

namespace dbn {

const char* to_string(ModelFamily family) {
    switch (family) {
        case ModelFamily::cpt: return "cpt";
        case ModelFamily::factored_cpt: return "factored_cpt";
        case ModelFamily::noisy_or: return "noisy_or";
        case ModelFamily::logistic: return "logistic";
        case ModelFamily::linear_gaussian: return "linear_gaussian";
    }
    return "?";
}

ModelFamily model_family_from_string(const std::string& name) {
    for (auto f : {ModelFamily::cpt, ModelFamily::factored_cpt, ModelFamily::noisy_or, ModelFamily::logistic,
                   ModelFamily::linear_gaussian})
        if (name == to_string(f)) return f;
    fail(ErrorKind::schema, "unknown model family '" + name + "'");
}

void GeneratorConfig::validate() const {
    for (double pr : {edge_prob.intra, edge_prob.inter, edge_prob.static_edge, edge_prob.auto_lag})
        if (!(pr >= 0.0 && pr <= 1.0)) fail(ErrorKind::range, "edge probabilities must lie in [0,1]");
    if (p < 1) fail(ErrorKind::range, "p must be at least 1");
    if (weight_lo > weight_hi) fail(ErrorKind::range, "weight_lo must not exceed weight_hi");
    if (!(noise_sigma > 0.0)) fail(ErrorKind::range, "noise_sigma must be positive");
    if (!(dirichlet_alpha > 0.0)) fail(ErrorKind::range, "dirichlet_alpha must be positive");
    if (!(temperature > 0.0)) fail(ErrorKind::range, "temperature must be positive");
    if (!(min_parent_effect >= 0.0 && min_parent_effect < 1.0)) fail(ErrorKind::range, "min_parent_effect must lie in [0,1)");
    if (is_discrete_family(family) && arity < 2) fail(ErrorKind::range, "arity must be at least 2");
    if (family != ModelFamily::cpt && is_discrete_family(family) && (arity != 2 || (n_z > 0 && static_arity != 2)))
        fail(ErrorKind::range, std::string(to_string(family)) + " requires binary variables");
    if (lambda0_lo > lambda0_hi || lambda_lo > lambda_hi || lambda0_lo < 0 || lambda0_hi > 1 || lambda_lo < 0 ||
        lambda_hi > 1)
        fail(ErrorKind::range, "noisy-or ranges must be ordered subsets of [0,1]");
}

DomainSpec DomainSpec::of(const GeneratorConfig& c) {
    if (!is_discrete_family(c.family)) return {};
    return {std::vector<std::size_t>(c.n_x, c.arity), std::vector<std::size_t>(c.n_z, c.static_arity)};
}

namespace {

double signed_weight(Rng& rng, double lo, double hi) {
    const double mag = rng.uniform(lo, hi);
    return rng.bernoulli(0.5) ? mag : -mag;
}

std::vector<double> sharpened_row(Rng& rng, std::size_t k, double alpha, double temperature) {
    auto row = rng.dirichlet(k, alpha);
    if (temperature != 1.0) {
        double sum = 0.0;
        for (auto& v : row) sum += (v = std::pow(v, 1.0 / temperature));
        if (sum > 0.0 && std::isfinite(sum)) {
            for (auto& v : row) v /= sum;
        } else {
            const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
            std::fill(row.begin(), row.end(), 0.0);
            row[best] = 1.0;
        }
    }
    // Rows must sum to one to 1e-12; push the rounding residue into the largest entry.
    double sum = 0.0;
    for (double v : row) sum += v;
    auto big = std::max_element(row.begin(), row.end());
    *big += 1.0 - sum;
    return row;
}

std::size_t tag_arity(const DomainSpec& d, std::size_t child, const ParentTag& t) {
    switch (t.kind) {
        case ParentTag::Kind::inter:
        case ParentTag::Kind::intra: return d.x_arities[t.index];
        case ParentTag::Kind::auto_lag: return d.x_arities[child];
        case ParentTag::Kind::static_var: return d.z_arities[t.index];
    }
    return 1;
}

std::size_t tags_configs(const DomainSpec& d, std::size_t child, const std::vector<ParentTag>& tags) {
    std::size_t c = 1;
    for (const auto& t : tags) c *= tag_arity(d, child, t);
    return c;
}

/// Smallest over parents of the largest total-variation change caused by flipping that parent.
double min_parent_effect(const Cpt& cpt, const DomainSpec& d, const FamilySpec& f) {
    std::vector<std::size_t> ar;
    for (const auto& t : f.parents) ar.push_back(tag_arity(d, f.node, t));
    double weakest = 1.0;
    for (std::size_t k = 0; k < ar.size(); ++k) {
        double strongest = 0.0;
        for (std::size_t r = 0; r < cpt.theta.size(); ++r) {
            auto vals = configuration_values(r, ar);
            for (std::size_t v = vals[k] + 1; v < ar[k]; ++v) {
                auto other = vals;
                other[k] = v;
                const auto& a = cpt.theta[r];
                const auto& b = cpt.theta[configuration_index(other, ar)];
                double tv = 0.0;
                for (std::size_t q = 0; q < a.size(); ++q) tv += std::abs(a[q] - b[q]);
                strongest = std::max(strongest, 0.5 * tv);
            }
        }
        weakest = std::min(weakest, strongest);
    }
    return weakest;
}

Kernel draw_kernel(Rng& rng, const GeneratorConfig& c, const DomainSpec& d, const FamilySpec& f) {
    switch (c.family) {
        case ModelFamily::cpt: {
            const std::size_t rows = tags_configs(d, f.node, f.parents);
            Cpt cpt;
            for (int attempt = 0; attempt < 200; ++attempt) {
                cpt.theta.clear();
                for (std::size_t r = 0; r < rows; ++r)
                    cpt.theta.push_back(sharpened_row(rng, d.x_arities[f.node], c.dirichlet_alpha, c.temperature));
                if (c.min_parent_effect <= 0.0 || min_parent_effect(cpt, d, f) >= c.min_parent_effect) break;
            }
            return cpt;
        }
        case ModelFamily::factored_cpt: {
            auto [dyn, stat] = split_dynamic_static(f);
            FactoredCpt fac;
            auto fill = [&](std::vector<double>& table, const std::vector<ParentTag>& tags) {
                if (tags.empty()) {
                    table.assign(1, 1.0);
                    return;
                }
                const std::size_t rows = tags_configs(d, f.node, tags);
                for (std::size_t r = 0; r < rows; ++r)
                    table.push_back(sharpened_row(rng, 2, c.dirichlet_alpha, c.temperature)[1]);
            };
            fill(fac.theta_dyn, dyn);
            fill(fac.theta_stat, stat);
            return fac;
        }
        case ModelFamily::noisy_or: {
            NoisyOr nor;
            nor.lambda0 = rng.uniform(c.lambda0_lo, c.lambda0_hi);
            for (std::size_t k = 0; k < f.parents.size(); ++k) nor.lambda.push_back(rng.uniform(c.lambda_lo, c.lambda_hi));
            return nor;
        }
        case ModelFamily::logistic: {
            Logistic lg;
            lg.beta0 = c.intercept;
            for (std::size_t k = 0; k < f.parents.size(); ++k)
                lg.beta.push_back(signed_weight(rng, c.weight_lo, c.weight_hi));
            return lg;
        }
        case ModelFamily::linear_gaussian: {
            LinearGaussian g;
            g.beta0 = c.intercept;
            g.sigma2 = c.noise_sigma * c.noise_sigma;
            for (std::size_t k = 0; k < f.parents.size(); ++k)
                g.beta.push_back(signed_weight(rng, c.weight_lo, c.weight_hi));
            return g;
        }
    }
    return Cpt{};
}

/// Spectral radius of the lag companion matrix of a linear Gaussian DBN.
double companion_radius(const DbnStructure& s, const ParameterSet& params) {
    const std::size_t n = s.n_x;
    const std::size_t p = s.p;
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n, n);
    std::vector<Eigen::MatrixXd> A(p, Eigen::MatrixXd::Zero(n, n));
    for (const auto& node : params.nodes) {
        const auto& g = std::get<LinearGaussian>(node.kernel);
        const auto i = node.family.node;
        for (std::size_t k = 0; k < node.family.parents.size(); ++k) {
            const auto& t = node.family.parents[k];
            switch (t.kind) {
                case ParentTag::Kind::intra: W(t.index, i) = g.beta[k]; break;
                case ParentTag::Kind::inter: A[0](t.index, i) = g.beta[k]; break;
                case ParentTag::Kind::auto_lag: A[t.index - 1](i, i) = g.beta[k]; break;
                default: break;
            }
        }
    }
    // Row-vector convention: x_s = sum_tau x_{s-tau} A_tau (I - W)^{-1}.
    const Eigen::MatrixXd inv = (Eigen::MatrixXd::Identity(n, n) - W).inverse();
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n * p, n * p);
    for (std::size_t tau = 0; tau < p; ++tau) C.block(0, tau * n, n, n) = (A[tau] * inv).transpose();
    for (std::size_t tau = 1; tau < p; ++tau) C.block(tau * n, (tau - 1) * n, n, n).setIdentity();
    return C.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

Truth sample_random_dbn(const GeneratorConfig& c) {
    c.validate();
    Rng rng(derive_seed(c.seed, 0x5EED));
    Truth truth{DbnStructure::empty(c.n_x, c.n_z, c.p), {}};
    auto& s = truth.structure;

    const auto perm = rng.permutation(c.n_x);
    std::vector<std::size_t> rank(c.n_x);
    for (std::size_t k = 0; k < c.n_x; ++k) rank[perm[k]] = k;
    const std::size_t cap = c.max_parents == 0 ? SIZE_MAX : c.max_parents;

    for (std::size_t i = 0; i < c.n_x; ++i) {
        std::size_t count = 0;
        auto draw = [&](double prob) { return count < cap && rng.bernoulli(prob) && ++count; };
        for (std::size_t j = 0; j < c.n_x; ++j)
            if (rank[j] < rank[i] && draw(c.edge_prob.intra)) s.intra.set(j, i);
        for (std::size_t j = 0; j < c.n_x; ++j)
            if (draw(c.edge_prob.inter)) s.inter.set(j, i);
        for (std::size_t tau = 2; tau <= c.p; ++tau)
            if (draw(c.edge_prob.auto_lag)) s.auto_lags[i].push_back(tau);
        for (std::size_t j = 0; j < c.n_z; ++j)
            if (draw(c.edge_prob.static_edge)) s.static_edges.set(j, i);
    }

    const DomainSpec domain = DomainSpec::of(c);
    auto draw_params = [&] {
        truth.params.nodes.clear();
        for (std::size_t i = 0; i < c.n_x; ++i) {
            auto fam = parents_of(s, i);
            auto kernel = draw_kernel(rng, c, domain, fam);
            truth.params.nodes.push_back({std::move(fam), std::move(kernel)});
        }
    };
    draw_params();
    if (c.family == ModelFamily::linear_gaussian && c.max_transition_radius > 0.0) {
        for (int attempt = 0; attempt < 500 && companion_radius(s, truth.params) >= c.max_transition_radius;
             ++attempt)
            draw_params();
        const double radius = companion_radius(s, truth.params);
        if (radius >= c.max_transition_radius) {
            // Shrink lag weights until stable; rarely needed for sparse graphs.
            for (auto& node : truth.params.nodes) {
                auto& g = std::get<LinearGaussian>(node.kernel);
                for (std::size_t k = 0; k < node.family.parents.size(); ++k)
                    if (node.family.parents[k].kind == ParentTag::Kind::inter ||
                        node.family.parents[k].kind == ParentTag::Kind::auto_lag)
                        g.beta[k] *= 0.99 * c.max_transition_radius / radius;
            }
        }
    }
    return truth;
}

double noisy_or_kernel(double lambda0, std::span<const double> lambdas, std::span<const double> parent_values) {
    if (lambdas.size() != parent_values.size()) fail(ErrorKind::dimension, "one lambda per parent required");
    if (!(lambda0 >= 0.0 && lambda0 <= 1.0)) fail(ErrorKind::range, "lambda0 outside [0,1]");
    double off = 1.0 - lambda0;
    for (std::size_t l = 0; l < lambdas.size(); ++l) {
        if (!(lambdas[l] >= 0.0 && lambdas[l] <= 1.0)) fail(ErrorKind::range, "lambda outside [0,1]");
        off *= std::pow(1.0 - lambdas[l], parent_values[l]);
    }
    return 1.0 - off;
}

namespace {

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

}  // namespace

TrajectoryDataset sample_trajectories(const DbnStructure& s, const ParameterSet& params, const DomainSpec& domain,
                                      std::size_t trajectories, std::size_t steps, std::uint64_t seed) {
    s.validate();
    if (params.nodes.size() != s.n_x) fail(ErrorKind::model, "one node model per dynamic variable required");
    std::vector<const NodeModel*> by_node(s.n_x, nullptr);
    for (const auto& m : params.nodes) {
        if (m.family.node >= s.n_x) fail(ErrorKind::model, "node model index out of range");
        if (!(m.family == parents_of(s, m.family.node)))
            fail(ErrorKind::model, "node model family does not match the structure for node " +
                                       std::to_string(m.family.node));
        by_node[m.family.node] = &m;
    }
    for (auto* m : by_node)
        if (m == nullptr) fail(ErrorKind::model, "missing node model");

    const bool discrete = domain.discrete();
    if (discrete && (domain.x_arities.size() != s.n_x || domain.z_arities.size() != s.n_z))
        fail(ErrorKind::dimension, "domain arities do not match the structure");
    params.validate(domain.x_arities, domain.z_arities);

    TrajectoryDataset data = discrete ? TrajectoryDataset::discrete(domain.x_arities, domain.z_arities, trajectories, steps)
                                      : TrajectoryDataset::continuous(s.n_x, s.n_z, trajectories, steps);
    const auto order = topological_order(s.intra);

    std::vector<std::vector<std::size_t>> arities(s.n_x);
    std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> split_arities(s.n_x);
    if (discrete) {
        for (std::size_t i = 0; i < s.n_x; ++i) {
            const auto& f = by_node[i]->family;
            for (const auto& t : f.parents) {
                const std::size_t a = tag_arity(domain, i, t);
                arities[i].push_back(a);
                (t.kind == ParentTag::Kind::static_var ? split_arities[i].second : split_arities[i].first).push_back(a);
            }
        }
    }

    std::vector<double> pv;
    for (std::size_t n = 0; n < trajectories; ++n) {
        Rng rng(derive_seed(seed, n));
        for (std::size_t j = 0; j < s.n_z; ++j)
            data.z(n, j) = discrete ? static_cast<double>(rng.below(domain.z_arities[j])) : rng.normal();
        for (std::size_t v = 0; v < s.n_x; ++v)
            data.x(n, 0, v) = discrete ? static_cast<double>(rng.below(domain.x_arities[v])) : rng.normal();
        for (std::size_t t = 1; t <= steps; ++t) {
            for (auto i : order) {
                const auto& model = *by_node[i];
                const auto& f = model.family;
                pv.clear();
                for (const auto& tag : f.parents) {
                    if (tag.kind == ParentTag::Kind::auto_lag && tag.index > t)
                        pv.push_back(data.x(n, 0, i));
                    else
                        pv.push_back(data.parent_value(n, t, i, tag));
                }
                double out = 0.0;
                std::visit(
                    [&](const auto& k) {
                        using K = std::decay_t<decltype(k)>;
                        if constexpr (std::is_same_v<K, Cpt>) {
                            std::size_t xi = 0, stride = 1;
                            for (std::size_t q = 0; q < pv.size(); ++q) {
                                xi += static_cast<std::size_t>(pv[q]) * stride;
                                stride *= arities[i][q];
                            }
                            out = static_cast<double>(rng.categorical(k.theta[xi]));
                        } else if constexpr (std::is_same_v<K, FactoredCpt>) {
                            std::size_t xd = 0, sd = 1, xs = 0, ss = 1, qd = 0, qs = 0;
                            for (std::size_t q = 0; q < pv.size(); ++q) {
                                const auto v = static_cast<std::size_t>(pv[q]);
                                if (f.parents[q].kind == ParentTag::Kind::static_var) {
                                    xs += v * ss;
                                    ss *= split_arities[i].second[qs++];
                                } else {
                                    xd += v * sd;
                                    sd *= split_arities[i].first[qd++];
                                }
                            }
                            const double prob = std::clamp(k.theta_dyn[xd] * k.theta_stat[xs], 0.0, 1.0);
                            out = rng.bernoulli(prob) ? 1.0 : 0.0;
                        } else if constexpr (std::is_same_v<K, NoisyOr>) {
                            out = rng.bernoulli(noisy_or_kernel(k.lambda0, k.lambda, pv)) ? 1.0 : 0.0;
                        } else if constexpr (std::is_same_v<K, Logistic>) {
                            double eta = k.beta0;
                            for (std::size_t q = 0; q < pv.size(); ++q) eta += k.beta[q] * pv[q];
                            out = rng.bernoulli(sigmoid(eta)) ? 1.0 : 0.0;
                        } else {
                            double mean = k.beta0;
                            for (std::size_t q = 0; q < pv.size(); ++q) mean += k.beta[q] * pv[q];
                            out = mean + std::sqrt(k.sigma2) * rng.normal();
                        }
                    },
                    model.kernel);
                data.x(n, t, i) = out;
            }
        }
    }
    return data;
}

// Regimes -------------------------------------------------------------------------------------

RegimeSpec RegimeSpec::favorable() {
    return {"favorable", {{3, 30, 10}, {5, 50, 50}, {10, 100, 200}, {20, 400, 400}, {30, 600, 500}}};
}

RegimeSpec RegimeSpec::high_dimensional() {
    return {"high_dimensional", {{3, 5, 10}, {5, 10, 20}, {10, 20, 40}, {20, 40, 50}, {30, 60, 100}}};
}

RegimeSpec RegimeSpec::by_name(const std::string& name) {
    if (name == "favorable") return favorable();
    if (name == "high_dimensional") return high_dimensional();
    fail(ErrorKind::schema, "unknown regime '" + name + "' (expected favorable or high_dimensional)");
}

void RegimeSpec::validate() const {
    for (const auto& t : triples)
        if (t.n == 0 || t.trajectories == 0 || t.steps == 0)
            fail(ErrorKind::range, "regime triples must be positive");
}

std::uint64_t cell_seed(std::uint64_t base, std::size_t triple_index, std::size_t replicate) {
    return derive_seed(base, (static_cast<std::uint64_t>(triple_index) << 32) | replicate);
}

GeneratorConfig cell_config(const GeneratorConfig& tmpl, const RegimeTriple& triple, std::uint64_t seed) {
    GeneratorConfig c = tmpl;
    c.n_x = triple.n;
    c.seed = seed;
    return c;
}

RegimeInstance make_instance(const GeneratorConfig& tmpl, const RegimeTriple& triple, std::size_t triple_index,
                             std::size_t replicate) {
    const auto seed = cell_seed(tmpl.seed, triple_index, replicate);
    const auto config = cell_config(tmpl, triple, seed);
    auto truth = sample_random_dbn(config);
    auto data = sample_trajectories(truth.structure, truth.params, DomainSpec::of(config), triple.trajectories,
                                    triple.steps, derive_seed(seed, 0xDA7A));
    return {triple, replicate, seed, std::move(truth), std::move(data)};
}

std::vector<RegimeInstance> regime_datasets(const RegimeSpec& regime, const GeneratorConfig& tmpl,
                                            std::size_t replicates) {
    regime.validate();
    std::vector<RegimeInstance> out;
    out.reserve(regime.triples.size() * replicates);
    for (std::size_t k = 0; k < regime.triples.size(); ++k)
        for (std::size_t r = 0; r < replicates; ++r) out.push_back(make_instance(tmpl, regime.triples[k], k, r));
    return out;
}

}  // namespace dbn
