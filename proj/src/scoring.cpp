#include "dbn/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numbers>
#include <sstream>

#include "dbn/rng.hpp"

namespace dbn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_discrete(const TrajectoryDataset& data, const char* what) {
    if (!data.is_discrete()) fail(ErrorKind::domain, std::string(what) + " requires a discrete dataset");
}

void require_continuous(const TrajectoryDataset& data, const char* what) {
    if (data.is_discrete()) fail(ErrorKind::domain, std::string(what) + " requires a continuous dataset");
}

void check_family(const TrajectoryDataset& data, const FamilySpec& family) {
    if (family.node >= data.n_x()) fail(ErrorKind::model, "family node out of range");
    for (const auto& t : family.parents) {
        const bool ok = (t.kind == ParentTag::Kind::static_var) ? t.index < data.n_z()
                        : (t.kind == ParentTag::Kind::auto_lag) ? t.index >= 1
                                                                : t.index < data.n_x();
        if (!ok) fail(ErrorKind::model, "parent " + to_string(t) + " does not exist in the dataset");
    }
}

}  // namespace

// Counting ------------------------------------------------------------------------------------

CountTable count_transitions(const TrajectoryDataset& data, const FamilySpec& family) {
    require_discrete(data, "count_transitions");
    check_family(data, family);
    CountTable c;
    c.family = family;
    c.arities = family_arities(data, family);
    c.child_arity = data.x_arities()[family.node];
    const std::size_t configs = configuration_count(c.arities);
    c.counts.assign(configs, std::vector<double>(c.child_arity, 0.0));
    c.totals.assign(configs, 0.0);
    const std::size_t first = data.first_usable_slice(family);
    for (std::size_t n = 0; n < data.trajectories(); ++n) {
        for (std::size_t s = first; s <= data.steps(); ++s) {
            const std::size_t xi = family_configuration(data, family, n, s);
            const auto k = static_cast<std::size_t>(data.x(n, s, family.node));
            c.counts[xi][k] += 1.0;
            c.totals[xi] += 1.0;
            c.grand_total += 1.0;
        }
    }
    return c;
}

Cpt mle_cpt(const CountTable& counts) {
    Cpt cpt;
    cpt.theta.reserve(counts.configurations());
    for (std::size_t xi = 0; xi < counts.configurations(); ++xi) {
        std::vector<double> row(counts.child_arity);
        if (counts.totals[xi] > 0.0) {
            for (std::size_t k = 0; k < row.size(); ++k) row[k] = counts.counts[xi][k] / counts.totals[xi];
        } else {
            std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(row.size()));
        }
        cpt.theta.push_back(std::move(row));
    }
    return cpt;
}

FactoredCpt mle_factored(const TrajectoryDataset& data, const FamilySpec& family) {
    require_discrete(data, "mle_factored");
    check_family(data, family);
    if (data.x_arities()[family.node] != 2) fail(ErrorKind::domain, "factored kernel requires a binary child");
    auto [dyn_tags, stat_tags] = split_dynamic_static(family);
    FactoredCpt out;
    auto ratio = [&](const std::vector<ParentTag>& tags) {
        std::vector<double> table;
        if (tags.empty()) {
            table.assign(1, 1.0);
            return table;
        }
        // Counting over the sub-family uses the full family's usable transitions so that both
        // factors see the same sample.
        FamilySpec sub{family.node, tags};
        const auto arities = family_arities(data, sub);
        std::vector<double> ones(configuration_count(arities), 0.0), total(ones.size(), 0.0);
        const std::size_t first = data.first_usable_slice(family);
        for (std::size_t n = 0; n < data.trajectories(); ++n)
            for (std::size_t s = first; s <= data.steps(); ++s) {
                const std::size_t xi = family_configuration(data, sub, n, s);
                total[xi] += 1.0;
                ones[xi] += data.x(n, s, family.node);
            }
        table.resize(ones.size());
        for (std::size_t xi = 0; xi < ones.size(); ++xi) table[xi] = total[xi] > 0 ? ones[xi] / total[xi] : 0.5;
        return table;
    };
    out.theta_dyn = ratio(dyn_tags);
    out.theta_stat = ratio(stat_tags);
    for (double d : out.theta_dyn)
        for (double s : out.theta_stat)
            if (d * s > 1.0 || d * s < 0.0) out.clipped = true;
    return out;
}

// Log-likelihood ------------------------------------------------------------------------------

namespace {

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

/// log(1 + e^x) without overflow.
double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double safe_log(double p) { return p > 0.0 ? std::log(p) : -kInf; }

}  // namespace

double node_loglik(const TrajectoryDataset& data, const NodeModel& model) {
    const auto& f = model.family;
    check_family(data, f);
    const std::size_t first = data.first_usable_slice(f);
    std::vector<double> pv(f.parents.size());
    std::vector<std::size_t> arities;
    if (data.is_discrete()) arities = family_arities(data, f);
    double total = 0.0;
    for (std::size_t n = 0; n < data.trajectories(); ++n) {
        for (std::size_t s = first; s <= data.steps(); ++s) {
            for (std::size_t q = 0; q < f.parents.size(); ++q) pv[q] = data.parent_value(n, s, f.node, f.parents[q]);
            const double x = data.x(n, s, f.node);
            total += std::visit(
                [&](const auto& k) -> double {
                    using K = std::decay_t<decltype(k)>;
                    if constexpr (std::is_same_v<K, LinearGaussian>) {
                        if (data.is_discrete()) fail(ErrorKind::model, "Gaussian kernel on discrete data");
                        double mean = k.beta0;
                        for (std::size_t q = 0; q < pv.size(); ++q) mean += k.beta[q] * pv[q];
                        const double r = x - mean;
                        return -0.5 * (std::log(2.0 * std::numbers::pi * k.sigma2) + r * r / k.sigma2);
                    } else {
                        if (!data.is_discrete()) fail(ErrorKind::model, "discrete kernel on continuous data");
                        const auto xv = static_cast<std::size_t>(x);
                        if constexpr (std::is_same_v<K, Cpt>) {
                            const std::size_t xi = family_configuration(data, f, n, s);
                            if (xi >= k.theta.size() || xv >= k.theta[xi].size())
                                fail(ErrorKind::model, "CPT lacks configuration " + std::to_string(xi) + " of node " +
                                                           std::to_string(f.node));
                            return safe_log(k.theta[xi][xv]);
                        } else {
                            double p1 = 0.0;
                            if constexpr (std::is_same_v<K, FactoredCpt>) {
                                auto [dyn, stat] = split_dynamic_static(f);
                                const std::size_t xd = family_configuration(data, FamilySpec{f.node, dyn}, n, s);
                                const std::size_t xs = family_configuration(data, FamilySpec{f.node, stat}, n, s);
                                if (xd >= k.theta_dyn.size() || xs >= k.theta_stat.size())
                                    fail(ErrorKind::model, "factored table lacks a configuration");
                                p1 = std::clamp(k.theta_dyn[xd] * k.theta_stat[xs], 0.0, 1.0);
                            } else if constexpr (std::is_same_v<K, NoisyOr>) {
                                double off = 1.0 - k.lambda0;
                                for (std::size_t q = 0; q < pv.size(); ++q) off *= std::pow(1.0 - k.lambda[q], pv[q]);
                                p1 = 1.0 - off;
                            } else {
                                double eta = k.beta0;
                                for (std::size_t q = 0; q < pv.size(); ++q) eta += k.beta[q] * pv[q];
                                return xv == 1 ? -softplus(-eta) : -softplus(eta);
                            }
                            return safe_log(xv == 1 ? p1 : 1.0 - p1);
                        }
                    }
                },
                model.kernel);
        }
    }
    return total;
}

double loglik(const TrajectoryDataset& data, const ParameterSet& params) {
    double total = 0.0;
    for (const auto& m : params.nodes) total += node_loglik(data, m);
    return total;
}

double loglik_cpt(const TrajectoryDataset& data, const DbnStructure& structure, const ParameterSet& params) {
    require_discrete(data, "loglik_cpt");
    if (params.nodes.size() != structure.n_x) fail(ErrorKind::model, "one CPT per node required");
    double total = 0.0;
    for (const auto& m : params.nodes) {
        if (!std::holds_alternative<Cpt>(m.kernel)) fail(ErrorKind::model, "loglik_cpt needs CPT kernels");
        if (!(m.family == parents_of(structure, m.family.node)))
            fail(ErrorKind::model, "CPT family does not match the structure");
        total += node_loglik(data, m);
    }
    return total;
}

// Logistic ------------------------------------------------------------------------------------

Design family_design(const TrajectoryDataset& data, const FamilySpec& family) {
    check_family(data, family);
    const std::size_t first = data.first_usable_slice(family);
    const std::size_t per = data.usable_per_trajectory(family);
    Design d;
    d.x.resize(static_cast<Eigen::Index>(per * data.trajectories()), static_cast<Eigen::Index>(family.parents.size() + 1));
    d.y.resize(d.x.rows());
    Eigen::Index r = 0;
    for (std::size_t n = 0; n < data.trajectories(); ++n)
        for (std::size_t s = first; s <= data.steps(); ++s, ++r) {
            d.x(r, 0) = 1.0;
            for (std::size_t q = 0; q < family.parents.size(); ++q)
                d.x(r, static_cast<Eigen::Index>(q + 1)) = data.parent_value(n, s, family.node, family.parents[q]);
            d.y(r) = data.x(n, s, family.node);
        }
    return d;
}

double logistic_objective(const Design& design, const Eigen::VectorXd& beta, double ridge, Eigen::VectorXd* grad) {
    const Eigen::Index m = design.x.rows();
    const Eigen::VectorXd eta = design.x * beta;
    double value = 0.0;
    Eigen::VectorXd resid(m);
    for (Eigen::Index r = 0; r < m; ++r) {
        value += design.y(r) * eta(r) - softplus(eta(r));
        resid(r) = design.y(r) - sigmoid(eta(r));
    }
    const double scale = m > 0 ? 1.0 / static_cast<double>(m) : 0.0;
    value *= scale;
    const double penalty = beta.tail(beta.size() - 1).squaredNorm();
    value -= ridge * penalty;
    if (grad) {
        *grad = scale * (design.x.transpose() * resid);
        grad->tail(beta.size() - 1) -= 2.0 * ridge * beta.tail(beta.size() - 1);
    }
    return value;
}

namespace {

struct AscentResult {
    Eigen::VectorXd beta;
    std::size_t iterations = 0;
    bool converged = false;
};

AscentResult gradient_ascent(const Design& design, double ridge) {
    constexpr double kGradTol = 1e-8;
    constexpr double kStallTol = 1e-6;
    constexpr std::size_t kMaxIter = 10000;
    AscentResult out;
    out.beta = Eigen::VectorXd::Zero(design.x.cols());
    Eigen::VectorXd g, g_new;
    double f = logistic_objective(design, out.beta, ridge, &g);
    double step = 1.0;
    for (; out.iterations < kMaxIter; ++out.iterations) {
        const double gn2 = g.squaredNorm();
        if (std::sqrt(gn2) < kGradTol) {
            out.converged = true;
            break;
        }
        // Armijo backtracking.
        Eigen::VectorXd trial;
        double f_new;
        for (;;) {
            trial = out.beta + step * g;
            f_new = logistic_objective(design, trial, ridge, &g_new);
            if (f_new >= f + 1e-4 * step * gn2 || step < 1e-20) break;
            step *= 0.5;
        }
        if (f_new < f || step < 1e-20) {
            // No measurable ascent left: the objective is flat to machine precision here.
            out.converged = std::sqrt(gn2) < kStallTol;
            break;
        }
        // Barzilai-Borwein trial step for the next iteration; the objective is concave, so s.y < 0.
        const Eigen::VectorXd s = trial - out.beta;
        const double sy = -s.dot(g_new - g);
        step = sy > 0.0 ? std::clamp(s.squaredNorm() / sy, 1e-10, 1e10) : std::min(step * 2.0, 1e6);
        out.beta = std::move(trial);
        f = f_new;
        g = g_new;
    }
    if (!out.converged && std::sqrt(g.squaredNorm()) < kGradTol) out.converged = true;
    return out;
}

}  // namespace

LogisticFit fit_logistic(const TrajectoryDataset& data, const FamilySpec& family, double ridge) {
    require_discrete(data, "fit_logistic");
    if (data.x_arities()[family.node] != 2) fail(ErrorKind::domain, "logistic fit requires a binary child");
    for (const auto& t : family.parents)
        if (data.parent_arity(family.node, t) != 2) fail(ErrorKind::domain, "logistic fit requires binary parents");
    if (ridge < 0.0) fail(ErrorKind::range, "ridge must be nonnegative");
    const Design design = family_design(data, family);

    constexpr double kDivergence = 30.0;
    constexpr double kFallbackRidge = 1e-4;
    LogisticFit fit;
    fit.ridge = ridge;
    auto run = gradient_ascent(design, ridge);
    if (run.beta.cwiseAbs().maxCoeff() > kDivergence || (!run.converged && ridge == 0.0)) {
        fit.separable = true;
        fit.ridge = std::max(ridge, kFallbackRidge);
        run = gradient_ascent(design, fit.ridge);
    }
    fit.iterations = run.iterations;
    fit.converged = run.converged;
    fit.params.beta0 = run.beta(0);
    fit.params.beta.assign(run.beta.data() + 1, run.beta.data() + run.beta.size());
    fit.loglik = logistic_objective(design, run.beta, 0.0, nullptr) * static_cast<double>(design.x.rows());
    return fit;
}

// Linear Gaussian -----------------------------------------------------------------------------

GaussianFit fit_linear_gaussian(const TrajectoryDataset& data, const FamilySpec& family) {
    require_continuous(data, "fit_linear_gaussian");
    const Design design = family_design(data, family);
    const auto m = design.x.rows();
    const auto d = design.x.cols();
    if (m < d)
        fail(ErrorKind::data, "underdetermined: " + std::to_string(m) + " usable transitions for " +
                                  std::to_string(d) + " coefficients");
    Eigen::MatrixXd gram = design.x.transpose() * design.x;
    gram.diagonal().array() += 1e-10;
    const Eigen::VectorXd beta = gram.ldlt().solve(design.x.transpose() * design.y);
    const double rss = (design.y - design.x * beta).squaredNorm();
    GaussianFit fit;
    fit.rows = static_cast<std::size_t>(m);
    fit.params.beta0 = beta(0);
    fit.params.beta.assign(beta.data() + 1, beta.data() + beta.size());
    fit.params.sigma2 = std::max(rss / static_cast<double>(m), kSigma2Floor);
    fit.loglik = -0.5 * static_cast<double>(m) * (std::log(2.0 * std::numbers::pi * fit.params.sigma2) + 1.0);
    return fit;
}

// Criteria ------------------------------------------------------------------------------------

double information_criterion(double ll, double k, double n_eff, Criterion kind) {
    switch (kind) {
        case Criterion::aic: return -2.0 * ll + 2.0 * k;
        case Criterion::aicc:
            if (n_eff <= k + 2.0) fail(ErrorKind::domain, "AICc needs more than k+2 usable transitions");
            return -2.0 * ll + (n_eff + k) / (n_eff - k - 2.0);
        case Criterion::bic:
            if (n_eff <= 0.0) fail(ErrorKind::domain, "BIC needs at least one usable transition");
            return -2.0 * ll + k * std::log(n_eff);
    }
    return 0.0;
}

// Dirichlet -----------------------------------------------------------------------------------

double DirichletPrior::pseudo_count(std::size_t configurations, std::size_t arity) const {
    return ess / (static_cast<double>(configurations) * static_cast<double>(arity));
}

double dirichlet_multinomial_log(const std::vector<std::vector<double>>& counts,
                                 const std::vector<std::vector<double>>& alpha) {
    if (counts.size() != alpha.size()) fail(ErrorKind::dimension, "counts and pseudo-counts differ in shape");
    double total = 0.0;
    for (std::size_t xi = 0; xi < counts.size(); ++xi) {
        if (counts[xi].size() != alpha[xi].size()) fail(ErrorKind::dimension, "counts and pseudo-counts differ in shape");
        double a_sum = 0.0, n_sum = 0.0;
        for (std::size_t k = 0; k < counts[xi].size(); ++k) {
            const double a = alpha[xi][k];
            if (!(a > 0.0)) fail(ErrorKind::range, "pseudo-counts must be positive");
            a_sum += a;
            n_sum += counts[xi][k];
            if (counts[xi][k] > 0.0) total += std::lgamma(a + counts[xi][k]) - std::lgamma(a);
        }
        if (n_sum > 0.0) total += std::lgamma(a_sum) - std::lgamma(a_sum + n_sum);
    }
    return total;
}

double bde_family_score(const CountTable& counts, const DirichletPrior& prior) {
    const double a = prior.pseudo_count(counts.configurations(), counts.child_arity);
    std::vector<std::vector<double>> alpha(counts.configurations(), std::vector<double>(counts.child_arity, a));
    return dirichlet_multinomial_log(counts.counts, alpha);
}

DirichletPosterior dirichlet_posterior(const CountTable& counts, const DirichletPrior& prior) {
    const double a = prior.pseudo_count(counts.configurations(), counts.child_arity);
    if (!(a > 0.0)) fail(ErrorKind::range, "pseudo-counts must be positive");
    DirichletPosterior post;
    post.alpha = counts.counts;
    for (auto& row : post.alpha)
        for (auto& v : row) v += a;
    return post;
}

Cpt DirichletPosterior::mean() const {
    Cpt cpt;
    for (const auto& row : alpha) {
        double sum = 0.0;
        for (double v : row) sum += v;
        std::vector<double> out(row.size());
        for (std::size_t k = 0; k < row.size(); ++k) out[k] = row[k] / sum;
        cpt.theta.push_back(std::move(out));
    }
    return cpt;
}

Cpt DirichletPosterior::sample(Rng& rng) const {
    Cpt cpt;
    for (const auto& row : alpha) {
        std::vector<double> out(row.size());
        double sum = 0.0;
        for (std::size_t k = 0; k < row.size(); ++k) sum += (out[k] = rng.gamma(row[k]));
        for (auto& v : out) v /= sum;
        cpt.theta.push_back(std::move(out));
    }
    return cpt;
}

// BGe -----------------------------------------------------------------------------------------

namespace {

double log_multivariate_gamma(double a, Eigen::Index dim) {
    double out = 0.25 * static_cast<double>(dim * (dim - 1)) * std::log(std::numbers::pi);
    for (Eigen::Index j = 0; j < dim; ++j) out += std::lgamma(a - 0.5 * static_cast<double>(j));
    return out;
}

double log_det_spd(const Eigen::MatrixXd& m) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) fail(ErrorKind::model, "matrix is not positive definite");
    return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

}  // namespace

double normal_wishart_log_marginal(const Eigen::MatrixXd& rows, double alpha_mu, double alpha_w,
                                   const Eigen::MatrixXd& precision, const Eigen::VectorXd& mean) {
    const Eigen::Index l = rows.cols();
    const auto m = static_cast<double>(rows.rows());
    if (precision.rows() != l || precision.cols() != l || mean.size() != l)
        fail(ErrorKind::dimension, "prior dimension does not match the rows");
    if (!(alpha_mu > 0.0)) fail(ErrorKind::range, "alpha_mu must be positive");
    if (!(alpha_w > static_cast<double>(l) - 1.0)) fail(ErrorKind::range, "alpha_w must exceed dimension - 1");
    if (rows.rows() == 0) return 0.0;
    const Eigen::RowVectorXd xbar = rows.colwise().mean();
    const Eigen::MatrixXd centered = rows.rowwise() - xbar;
    const Eigen::VectorXd diff = mean - xbar.transpose();
    const Eigen::MatrixXd posterior =
        precision + centered.transpose() * centered + (alpha_mu * m / (alpha_mu + m)) * diff * diff.transpose();
    const auto ld = static_cast<double>(l);
    return 0.5 * ld * std::log(alpha_mu / (alpha_mu + m)) - 0.5 * ld * m * std::log(std::numbers::pi) +
           log_multivariate_gamma(0.5 * (alpha_w + m), l) - log_multivariate_gamma(0.5 * alpha_w, l) +
           0.5 * alpha_w * log_det_spd(precision) - 0.5 * (alpha_w + m) * log_det_spd(posterior);
}

Eigen::MatrixXd family_rows(const TrajectoryDataset& data, const FamilySpec& family) {
    require_continuous(data, "family_rows");
    Design d = family_design(data, family);
    Eigen::MatrixXd rows(d.x.rows(), d.x.cols());
    rows.col(0) = d.y;
    rows.rightCols(d.x.cols() - 1) = d.x.rightCols(d.x.cols() - 1);
    return rows;
}

double bge_family_score(const TrajectoryDataset& data, const FamilySpec& family, const BgeHyper& hyper) {
    const Eigen::MatrixXd rows = family_rows(data, family);
    const Eigen::Index dim = rows.cols();
    const double alpha_w = hyper.alpha_w.value_or(static_cast<double>(dim) + 2.0);
    if (static_cast<double>(dim) >= alpha_w + 1.0)
        fail(ErrorKind::range, "family dimension " + std::to_string(dim) + " violates alpha_w > dimension - 1");
    Eigen::MatrixXd precision;
    if (hyper.precision) {
        if (hyper.precision->rows() != dim || hyper.precision->cols() != dim)
            fail(ErrorKind::dimension, "BGe prior precision must match the family dimension");
        precision = *hyper.precision;
    } else {
        precision = hyper.precision_scale * Eigen::MatrixXd::Identity(dim, dim);
    }
    Eigen::VectorXd mean = hyper.mean ? *hyper.mean : Eigen::VectorXd::Zero(dim);
    if (mean.size() != dim) fail(ErrorKind::dimension, "BGe prior mean must match the family dimension");

    const double joint = normal_wishart_log_marginal(rows, hyper.alpha_mu, alpha_w, precision, mean);
    if (dim == 1) return joint;
    // W^-1 is inverse Wishart(alpha_w, T), so the parent block of W^-1 is inverse Wishart with
    // alpha_w - 1 degrees of freedom and the parent block of T.
    const Eigen::Index q = dim - 1;
    const Eigen::MatrixXd parent_precision = precision.bottomRightCorner(q, q);
    const double parents = normal_wishart_log_marginal(rows.rightCols(q), hyper.alpha_mu, alpha_w - 1.0,
                                                       parent_precision, mean.tail(q));
    return joint - parents;
}

// Decomposable scores -------------------------------------------------------------------------

const char* to_string(ScoreKind kind) {
    switch (kind) {
        case ScoreKind::ll: return "ll";
        case ScoreKind::aic: return "aic";
        case ScoreKind::aicc: return "aicc";
        case ScoreKind::bic: return "bic";
        case ScoreKind::bde: return "bde";
        case ScoreKind::bge: return "bge";
    }
    return "?";
}

ScoreKind score_kind_from_string(const std::string& name) {
    std::string lower = name;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    for (auto k : {ScoreKind::ll, ScoreKind::aic, ScoreKind::aicc, ScoreKind::bic, ScoreKind::bde, ScoreKind::bge})
        if (lower == to_string(k)) return k;
    fail(ErrorKind::usage, "unknown score kind '" + name + "' (expected ll, aic, aicc, bic, bde or bge)");
}

double family_parameter_count(const TrajectoryDataset& data, const FamilySpec& family) {
    if (data.is_discrete())
        return static_cast<double>(configuration_count(family_arities(data, family))) *
               static_cast<double>(data.x_arities()[family.node] - 1);
    return static_cast<double>(family.parents.size()) + 2.0;
}

namespace {

double discrete_mle_loglik(const CountTable& c) {
    double ll = 0.0;
    for (std::size_t xi = 0; xi < c.configurations(); ++xi)
        for (double nk : c.counts[xi])
            if (nk > 0.0) ll += nk * std::log(nk / c.totals[xi]);
    return ll;
}

}  // namespace

double family_score(const TrajectoryDataset& data, const FamilySpec& family, ScoreKind kind,
                    const ScoreOptions& options) {
    if (kind == ScoreKind::bde) {
        require_discrete(data, "BDe");
        return bde_family_score(count_transitions(data, family), options.dirichlet);
    }
    if (kind == ScoreKind::bge) {
        require_continuous(data, "BGe");
        return bge_family_score(data, family, options.bge);
    }
    double ll;
    double n_eff;
    if (data.is_discrete()) {
        const auto c = count_transitions(data, family);
        ll = discrete_mle_loglik(c);
        n_eff = c.grand_total;
    } else {
        const auto fit = fit_linear_gaussian(data, family);
        ll = fit.loglik;
        n_eff = static_cast<double>(fit.rows);
    }
    if (kind == ScoreKind::ll) return ll;
    const double k = family_parameter_count(data, family);
    const Criterion crit = kind == ScoreKind::aic ? Criterion::aic : kind == ScoreKind::aicc ? Criterion::aicc : Criterion::bic;
    if (crit == Criterion::aicc && n_eff <= k + 2.0) return -kInf;
    if (crit == Criterion::bic && n_eff <= 0.0) return 0.0;
    return -0.5 * information_criterion(ll, k, n_eff, crit);
}

double ScoreCache::get(const TrajectoryDataset& data, const FamilySpec& family, ScoreKind kind) {
    Key key{kind, family.node, family.parents};
    std::sort(key.parents.begin(), key.parents.end());
    {
        std::shared_lock lock(mutex_);
        if (auto it = entries_.find(key); it != entries_.end()) {
            ++hits_;
            return it->second;
        }
    }
    const double value = family_score(data, FamilySpec{family.node, key.parents}, kind, options_);
    ++misses_;
    std::unique_lock lock(mutex_);
    entries_.insert_or_assign(std::move(key), value);
    return value;
}

std::size_t ScoreCache::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

std::size_t ScoreCache::hits() const { return hits_.load(); }

std::size_t ScoreCache::misses() const { return misses_.load(); }

std::string ScoreCache::dump() const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> lines;
    lines.reserve(entries_.size());
    for (const auto& [key, value] : entries_) {
        std::ostringstream line;
        line << key.node << '\t';
        for (std::size_t q = 0; q < key.parents.size(); ++q) line << (q ? "," : "") << to_string(key.parents[q]);
        line << '\t' << to_string(key.kind) << '\t' << std::setprecision(17) << value;
        lines.push_back(line.str());
    }
    std::sort(lines.begin(), lines.end());
    std::string out;
    for (const auto& l : lines) out += l + '\n';
    return out;
}

double cached_family_score(ScoreCache& cache, const TrajectoryDataset& data, std::size_t node,
                           std::vector<ParentTag> parents, ScoreKind kind) {
    return cache.get(data, make_family(node, std::move(parents)), kind);
}

double structure_score(const TrajectoryDataset& data, const DbnStructure& structure, ScoreKind kind,
                       const ScoreOptions& options) {
    double total = 0.0;
    for (std::size_t i = 0; i < structure.n_x; ++i) total += family_score(data, parents_of(structure, i), kind, options);
    return total;
}

double structure_score(ScoreCache& cache, const TrajectoryDataset& data, const DbnStructure& structure,
                       ScoreKind kind) {
    double total = 0.0;
    for (std::size_t i = 0; i < structure.n_x; ++i) total += cache.get(data, parents_of(structure, i), kind);
    return total;
}

ParameterSet fit_parameters(const TrajectoryDataset& data, const DbnStructure& structure, bool smoothed,
                            const DirichletPrior& prior) {
    ParameterSet params;
    for (std::size_t i = 0; i < structure.n_x; ++i) {
        auto family = parents_of(structure, i);
        if (data.is_discrete()) {
            const auto counts = count_transitions(data, family);
            Cpt cpt = smoothed ? dirichlet_posterior(counts, prior).mean() : mle_cpt(counts);
            params.nodes.push_back({std::move(family), std::move(cpt)});
        } else {
            auto fit = fit_linear_gaussian(data, family);
            params.nodes.push_back({std::move(family), std::move(fit.params)});
        }
    }
    return params;
}

}  // namespace dbn
