// Acceptance gate: one PASS/FAIL line per criterion, tolerances and runtime limits pinned here.
// Usage: dbn_acceptance [--cli <path to dbn>] [name-substring]

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "../brute_force.hpp"
#include "../oracles.hpp"
#include "dbn/acyclicity.hpp"
#include "dbn/eval.hpp"
#include "dbn/experiment.hpp"
#include "dbn/io.hpp"
#include "dbn/learn.hpp"
#include "dbn/rng.hpp"
#include "dbn/scoring.hpp"
#include "dbn/simulate.hpp"

using namespace dbn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

struct Gate {
    std::string name;
    double limit_sec;
    std::function<Outcome()> run;
};

std::string cli_path;

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string ratio(int k, int n) { return std::to_string(k) + "/" + std::to_string(n); }

// BDe ------------------------------------------------------------------------------------------

CountTable binary_table(const std::vector<std::array<int, 2>>& rows) {
    CountTable c;
    c.child_arity = 2;
    for (const auto& r : rows) {
        c.counts.push_back({double(r[0]), double(r[1])});
        c.totals.push_back(double(r[0] + r[1]));
        c.grand_total += r[0] + r[1];
    }
    return c;
}

Outcome bde_vs_quadrature() {
    constexpr double kRel = 1e-9;
    Outcome out;
    double worst = 0.0;
    std::size_t families = 0;
    for (double ess : {1.0, 2.0}) {
        // Configuration terms by quadrature, one per (configurations, N0, N1).
        std::map<std::array<int, 3>, double> term;
        for (int q : {1, 2, 4})
            for (int n0 = 0; n0 <= 4; ++n0)
                for (int n1 = 0; n1 <= 4; ++n1) term[{q, n0, n1}] = oracle::bde_binary_quadrature({{double(n0), double(n1)}}, ess * 1.0 / q);
        auto check = [&](const std::vector<std::array<int, 2>>& rows) {
            const int q = static_cast<int>(rows.size());
            double quad = 0.0;
            for (const auto& r : rows) quad += term.at({q, r[0], r[1]});
            const double closed = bde_family_score(binary_table(rows), {ess});
            const double err = std::abs(closed - quad) / std::max(1.0, std::abs(quad));
            worst = std::max(worst, err);
            ++families;
        };
        std::vector<std::array<int, 2>> cells;
        for (int n0 = 0; n0 <= 4; ++n0)
            for (int n1 = 0; n1 <= 4; ++n1) cells.push_back({n0, n1});
        for (const auto& a : cells) check({a});
        for (const auto& a : cells)
            for (const auto& b : cells) check({a, b});
        for (const auto& a : cells)
            for (const auto& b : cells)
                for (const auto& c : cells)
                    for (const auto& d : cells) check({a, b, c, d});
        // Whole-family quadrature (no shared terms) on the 0- and 1-parent grid.
        for (const auto& a : cells)
            for (const auto& b : cells) {
                const double quad = oracle::bde_binary_quadrature({{double(a[0]), double(a[1])}, {double(b[0]), double(b[1])}}, ess);
                const double closed = bde_family_score(binary_table({a, b}), {ess});
                worst = std::max(worst, std::abs(closed - quad) / std::max(1.0, std::abs(quad)));
            }
    }
    const double twelfth = bde_family_score(binary_table({{1, 2}}), {2.0});
    const double err12 = std::abs(twelfth - std::log(1.0 / 12.0));
    out.pass = worst <= kRel && err12 <= 1e-12;
    out.detail = std::to_string(families) + " families, max rel err " + fmt("%.2e", worst) + " (tol 1e-9); log(1/12) err " +
                 fmt("%.1e", err12) + " (tol 1e-12)";
    return out;
}

// MLE ------------------------------------------------------------------------------------------

/// Maximizer of sum_k n_k log theta_k over the simplex grid with step h (two or three values).
std::vector<double> simplex_grid_mle(const std::vector<double>& n, double h = 1e-3) {
    const int steps = static_cast<int>(std::lround(1.0 / h));
    auto term = [](double c, double t) { return c > 0 ? c * std::log(t) : 0.0; };
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> arg(n.size(), 1.0 / static_cast<double>(n.size()));
    if (n.size() == 2) {
        for (int a = 0; a <= steps; ++a) {
            const double t = a * h, v = term(n[0], t) + term(n[1], 1.0 - t);
            if (v > best) best = v, arg = {t, 1.0 - t};
        }
    } else {
        for (int a = 0; a <= steps; ++a)
            for (int b = 0; a + b <= steps; ++b) {
                const double t0 = a * h, t1 = b * h, t2 = 1.0 - t0 - t1;
                const double v = term(n[0], t0) + term(n[1], t1) + term(n[2], std::max(t2, 0.0));
                if (v > best) best = v, arg = {t0, t1, t2};
            }
    }
    return arg;
}

/// Micro-dataset k: one or two dynamic variables, binary or ternary child, an optional binary
/// static variable, 2 trajectories of 3 to 6 transitions written from a fixed pattern.
TrajectoryDataset micro_dataset(int k) {
    const std::size_t arity = k % 4 == 3 ? 3 : 2;
    const std::size_t n_x = 1 + k % 2;
    const std::size_t steps = 3 + static_cast<std::size_t>(k % 4);
    auto d = TrajectoryDataset::discrete(std::vector<std::size_t>(n_x, arity), {2}, 2, steps);
    for (std::size_t n = 0; n < 2; ++n) {
        d.z(n, 0) = static_cast<double>(n);
        for (std::size_t t = 0; t <= steps; ++t)
            for (std::size_t v = 0; v < n_x; ++v)
                d.x(n, t, v) = static_cast<double>((t * t + 3 * t * (v + 1) + 2 * n + static_cast<std::size_t>(k)) % 7 % arity);
    }
    return d;
}

Outcome mle_vs_grid() {
    constexpr double kTol = 1e-3;
    double worst = 0.0;
    int datasets = 0;
    for (int k = 0; k < 20; ++k, ++datasets) {
        const auto d = micro_dataset(k);
        const std::size_t child = d.n_x() - 1;
        std::vector<ParentTag> parents{{ParentTag::Kind::inter, 0}};
        if (d.n_x() == 2) parents.push_back({ParentTag::Kind::intra, 0});
        const auto fam = make_family(child, parents);
        const auto counts = count_transitions(d, fam);
        const auto cpt = mle_cpt(counts);
        for (std::size_t xi = 0; xi < counts.configurations(); ++xi) {
            if (counts.totals[xi] == 0) continue;
            const auto g = simplex_grid_mle(counts.counts[xi]);
            for (std::size_t v = 0; v < g.size(); ++v) worst = std::max(worst, std::abs(cpt.theta[xi][v] - g[v]));
        }
        if (d.x_arities()[child] != 2) continue;
        // Factored kernel: each factor's Bernoulli likelihood over its own configurations.
        const auto ffam = make_family(child, {{ParentTag::Kind::inter, child}, {ParentTag::Kind::static_var, 0}});
        const auto f = mle_factored(d, ffam);
        std::array<double, 2> dn1{}, dn0{}, sn1{}, sn0{};
        for (std::size_t n = 0; n < d.trajectories(); ++n)
            for (std::size_t t = 1; t <= d.steps(); ++t) {
                const auto prev = static_cast<std::size_t>(d.x(n, t - 1, child));
                const bool one = d.x(n, t, child) == 1.0;
                (one ? dn1 : dn0)[prev] += 1;
                (one ? sn1 : sn0)[static_cast<std::size_t>(d.z(n, 0))] += 1;
            }
        for (std::size_t c = 0; c < 2; ++c) {
            if (dn1[c] + dn0[c] > 0) worst = std::max(worst, std::abs(f.theta_dyn[c] - oracle::bernoulli_grid_mle(dn1[c], dn0[c])));
            if (sn1[c] + sn0[c] > 0) worst = std::max(worst, std::abs(f.theta_stat[c] - oracle::bernoulli_grid_mle(sn1[c], sn0[c])));
        }
    }
    return {worst <= kTol, std::to_string(datasets) + " micro-datasets, max |theta - grid| " + fmt("%.2e", worst) + " (tol 1e-3)"};
}

// BGe ------------------------------------------------------------------------------------------

Outcome bge_vs_integration() {
    constexpr double kRel = 1e-3;
    double worst1 = 0.0, worst2 = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(100 + seed);
        const std::size_t steps = 3 + seed;
        // One node: scalar normal-gamma marginal.
        auto d1 = TrajectoryDataset::continuous(1, 0, 1, steps);
        std::vector<double> x;
        for (std::size_t t = 0; t <= steps; ++t) d1.x(0, t, 0) = 0.7 + 1.3 * rng.normal();
        for (std::size_t t = 1; t <= steps; ++t) x.push_back(d1.x(0, t, 0));
        BgeHyper h1;
        h1.alpha_w = 3.0 + static_cast<double>(seed % 2);
        h1.precision_scale = 0.5 + 0.25 * static_cast<double>(seed);
        const double c1 = bge_family_score(d1, make_family(0, {}), h1);
        const double q1 = oracle::scalar_normal_gamma_log_marginal(x, 1.0, *h1.alpha_w, h1.precision_scale, 0.0);
        worst1 = std::max(worst1, std::abs(c1 - q1) / std::abs(q1));

        // One parent: joint minus parent marginal by quadrature over the Wishart factors.
        auto d2 = TrajectoryDataset::continuous(2, 0, 1, steps + 1);
        for (std::size_t t = 0; t <= steps + 1; ++t) {
            d2.x(0, t, 0) = rng.normal();
            d2.x(0, t, 1) = 0.8 * d2.x(0, t, 0) + 0.6 * rng.normal();
        }
        Eigen::MatrixXd precision(2, 2);
        precision << 1.0 + 0.2 * static_cast<double>(seed), 0.3, 0.3, 0.9;
        BgeHyper h2;
        h2.alpha_w = 4.0;
        h2.precision = precision;
        const auto fam = make_family(1, {{ParentTag::Kind::intra, 0}});
        const double c2 = bge_family_score(d2, fam, h2);
        const double q2 = oracle::normal_wishart_2d_log_conditional_quadrature(family_rows(d2, fam), 1, 1.0, 4.0, precision,
                                                                               Eigen::VectorXd::Zero(2));
        worst2 = std::max(worst2, std::abs(c2 - q2) / std::abs(q2));
    }
    return {worst1 <= kRel && worst2 <= kRel, "5 datasets each; max rel err 1-node " + fmt("%.2e", worst1) + ", 1-parent " +
                                                  fmt("%.2e", worst2) + " (tol 1e-3)"};
}

// Acyclicity -----------------------------------------------------------------------------------

Outcome acyclicity_exactness() {
    int agree = 0;
    for (unsigned bits = 0; bits < 512; ++bits) {
        Eigen::MatrixXd w = Eigen::MatrixXd::Zero(3, 3);
        Adjacency a = Adjacency::square(3);
        bool self = false;
        for (unsigned k = 0; k < 9; ++k)
            if (bits >> k & 1) {
                w(k / 3, k % 3) = 1.0;
                if (k / 3 == k % 3) self = true;
                else a.set(k / 3, k % 3);
            }
        const bool dag = !self && is_acyclic(a);
        agree += ((h_expm(w) < 1e-12) == dag) && ((h_poly(w, 0.1).value < 1e-12) == dag);
    }
    Eigen::MatrixXd cycle = Eigen::MatrixXd::Zero(2, 2);
    cycle(0, 1) = cycle(1, 0) = 1.0;
    const double cyc_err = std::abs(h_expm(cycle) - (std::numbers::e + 1.0 / std::numbers::e - 2.0));

    auto fd = [](const std::function<double(const Eigen::MatrixXd&)>& f, const Eigen::MatrixXd& w) {
        Eigen::MatrixXd g(w.rows(), w.cols());
        const double h = 1e-5;
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) {
                Eigen::MatrixXd up = w, down = w;
                up(r, c) += h;
                down(r, c) -= h;
                g(r, c) = (f(up) - f(down)) / (2 * h);
            }
        return g;
    };
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        Eigen::MatrixXd w(4, 4);
        for (Eigen::Index i = 0; i < 16; ++i) w.data()[i] = 0.5 * rng.normal();
        const Eigen::MatrixXd ge = fd([](const Eigen::MatrixXd& m) { return h_expm(m); }, w);
        const Eigen::MatrixXd gp = fd([](const Eigen::MatrixXd& m) { return h_poly(m, 0.25).value; }, w);
        worst = std::max(worst, (h_expm_grad(w) - ge).norm() / std::max(1.0, ge.norm()));
        worst = std::max(worst, (h_poly(w, 0.25).gradient - gp).norm() / std::max(1.0, gp.norm()));
    }
    return {agree == 512 && cyc_err <= 1e-10 && worst <= 1e-6,
            "supports " + ratio(agree, 512) + "; 2-cycle err " + fmt("%.1e", cyc_err) + " (tol 1e-10); gradient rel err " +
                fmt("%.1e", worst) + " (tol 1e-6)"};
}

// Exact search ---------------------------------------------------------------------------------

Outcome exact_optimality() {
    int equal = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        GeneratorConfig g;
        g.n_x = 3;
        g.n_z = 1;
        g.edge_prob = {0.4, 0.4, 0.4, 0.0};
        g.max_parents = 3;
        g.seed = 3000 + seed;
        const auto t = sample_random_dbn(g);
        const auto data = sample_trajectories(t.structure, t.params, DomainSpec::of(g), 20, 10, derive_seed(g.seed, 7));
        SearchConfig c;
        c.score = seed % 2 ? ScoreKind::bde : ScoreKind::bic;
        c.limits = {2, 2, 1, 1, 3};
        equal += exact_search(data, c).score == oracle::brute_force_optimum(data, c);
    }
    return {equal == 10, ratio(equal, 10) + " datasets with identical optimum (exact equality)"};
}

// Recovery -------------------------------------------------------------------------------------

Outcome recovery_discrete() {
    int ok_hc = 0, ok_ex = 0;
    for (std::uint64_t k = 0; k < 10; ++k) {
        GeneratorConfig g;
        g.n_x = 3;
        g.family = ModelFamily::cpt;
        g.temperature = 1.0;
        g.dirichlet_alpha = 0.5;
        g.min_parent_effect = 0.7;
        g.edge_prob.intra = 0.2;
        g.edge_prob.inter = 0.3;
        g.max_parents = 3;
        g.seed = 1000 + k;
        const auto truth = sample_random_dbn(g);
        const auto data = sample_trajectories(truth.structure, truth.params, DomainSpec::of(g), 30, 10, derive_seed(g.seed, 7));
        SearchConfig hc;
        hc.score = ScoreKind::bic;
        hc.limits.inter = 3;
        hc.limits.total = 3;
        hc.restarts = 5;
        hc.seed = g.seed;
        SearchConfig ex = hc;
        ex.score = ScoreKind::bde;
        ex.options.dirichlet.ess = 1.0;
        ok_hc += shd(hill_climb(data, hc).structure, truth.structure) <= 2;
        ok_ex += shd(exact_search(data, ex).structure, truth.structure) <= 2;
    }
    return {ok_hc >= 8 && ok_ex >= 8, "SHD <= 2: hill_climb(BIC) " + ratio(ok_hc, 10) + ", exact_search(BDe) " +
                                           ratio(ok_ex, 10) + " (need 8/10 each)"};
}

Outcome recovery_continuous() {
    int good = 0, acyclic = 0;
    double lowest = 1.0;
    for (std::uint64_t k = 0; k < 10; ++k) {
        GeneratorConfig g;
        g.n_x = 5;
        g.family = ModelFamily::linear_gaussian;
        g.noise_sigma = 0.5;
        g.weight_lo = 0.5;
        g.weight_hi = 2.0;
        g.edge_prob.intra = 0.2;
        g.edge_prob.inter = 0.2;
        g.max_transition_radius = 0.95;
        g.seed = 1000 + k;
        const auto truth = sample_random_dbn(g);
        const auto data = sample_trajectories(truth.structure, truth.params, DomainSpec::of(g), 50, 50, derive_seed(g.seed, 7));
        ContinuousConfig c;
        c.lambda_w = 0.01;
        c.lambda_a = 0.01;
        const auto r = continuous_oneshot(data, c);
        const EdgeUniverse u(5, 0, 1);
        const double a = auroc_breakdown(edge_scores(r, u), truth.structure, u).overall.value;
        lowest = std::min(lowest, a);
        good += a >= 0.9;
        acyclic += is_acyclic(r.structure.intra);
    }
    return {good >= 8 && acyclic == 10, "AUROC >= 0.9 on " + ratio(good, 10) + " (need 8/10, min " + fmt("%.3f", lowest) +
                                            "); acyclic " + ratio(acyclic, 10)};
}

// Bounded audit --------------------------------------------------------------------------------

/// Two noise roots and a child that is an exact linear function of them (same slice and/or lag 1).
Truth noiseless_instance(std::uint64_t seed) {
    Rng rng(seed);
    auto s = DbnStructure::empty(3, 0, 1);
    const auto perm = rng.permutation(3);
    const std::size_t c = perm[0];
    bool any = false;
    while (!any)
        for (std::size_t r : {perm[1], perm[2]}) {
            if (rng.bernoulli(0.5)) s.intra.set(r, c), any = true;
            if (rng.bernoulli(0.5)) s.inter.set(r, c), any = true;
        }
    Truth t{s, {}};
    for (std::size_t i = 0; i < 3; ++i) {
        const auto fam = parents_of(s, i);
        LinearGaussian g;
        g.sigma2 = fam.parents.empty() ? 1.0 : 1e-24;
        for (std::size_t k = 0; k < fam.parents.size(); ++k) {
            const double m = rng.uniform(0.5, 1.5);
            g.beta.push_back(rng.bernoulli(0.5) ? m : -m);
        }
        t.params.nodes.push_back({fam, g});
    }
    return t;
}

Outcome bounded_audit() {
    constexpr double kB = 0.2;
    int bounded = 0, interior = 0, same = 0;
    for (std::uint64_t k = 0; k < 10; ++k) {
        const auto truth = noiseless_instance(1000 + k);
        const auto data = sample_trajectories(truth.structure, truth.params, DomainSpec{}, 20, 20, derive_seed(1000 + k, 7));
        BoundedConfig bc;
        bc.b_w = bc.b_a = kB;
        bc.lambda_w_pos = bc.lambda_w_neg = bc.lambda_a_pos = bc.lambda_a_neg = 10.0;
        const auto b = bounded_oneshot(data, bc);
        double min_w = std::numeric_limits<double>::infinity();
        auto scan = [&](const Eigen::MatrixXd& m) {
            for (Eigen::Index i = 0; i < m.size(); ++i)
                if (m.data()[i] != 0.0) min_w = std::min(min_w, std::abs(m.data()[i]));
        };
        scan(*b.w);
        for (const auto& a : b.a) scan(a);
        bounded += min_w >= kB;
        if (!(min_w > 1.5 * kB)) continue;
        ++interior;
        ContinuousConfig cc;
        cc.lambda_w = cc.lambda_a = 0.02;
        cc.w_threshold = kB;
        const auto c = continuous_oneshot(data, cc);
        same += b.structure.intra == c.structure.intra && b.structure.inter == c.structure.inter;
    }
    return {bounded == 10 && interior > 0 && same == interior,
            "|w| >= b on " + ratio(bounded, 10) + "; interior instances matching continuous support " + ratio(same, interior)};
}

// Metrics --------------------------------------------------------------------------------------

Outcome metric_suite() {
    std::vector<std::string> failed;
    auto truth = DbnStructure::empty(3);
    truth.intra.set(0, 1);
    truth.inter.set(2, 2);
    auto extra = truth;
    extra.inter.set(0, 2);
    auto reversed = truth;
    reversed.intra = Adjacency::square(3);
    reversed.intra.set(1, 0);
    if (shd(truth, truth) != 0) failed.push_back("shd identity");
    if (shd(extra, truth) != 1) failed.push_back("shd extra edge");
    if (shd(reversed, truth) != 2) failed.push_back("shd reversal");
    const std::vector<double> s{0.9, 0.8, 0.3, 0.1};
    if (std::abs(auroc(s, {true, false, true, false}).value - 0.75) > 1e-15) failed.push_back("auroc 0.75");

    Rng rng(77);
    int splits = 0;
    for (int k = 0; k < 200; ++k) {
        const std::size_t n = 1 + rng.below(6), steps = 3 + rng.below(40);
        auto d = TrajectoryDataset::discrete({2}, {}, n, steps);
        const auto sp = temporal_split(d, 0.7);
        std::size_t scored = 0;
        bool disjoint = true;
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t t = 1; t <= steps; ++t) {
                const bool tr = t >= sp.train.first_scored_slice() && t <= sp.train.steps();
                const bool te = t >= sp.test.first_scored_slice() && t <= sp.test.steps();
                disjoint = disjoint && !(tr && te);
                scored += tr + te;
            }
        splits += disjoint && scored == n * steps;
    }
    if (splits != 200) failed.push_back("temporal split partition " + ratio(splits, 200));
    std::string detail = "shd 0/1/2, auroc 0.75, split partition on 200 random (N,T)";
    for (const auto& f : failed) detail += "; failed: " + f;
    return {failed.empty(), detail};
}

// Determinism ----------------------------------------------------------------------------------

const char* kMiniConfig = R"({
  "seed": 7,
  "regime": {"label": "mini", "triples": [[3, 10, 10]]},
  "generator": {"family": "cpt", "edge_prob": {"intra": 0.2, "inter": 0.3}, "max_parents": 3},
  "learners": [{"name": "exact", "score": "bde"}, {"name": "hillclimb", "restarts": 3}],
  "replicates": 3,
  "record_wall_time": false
})";

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / "dbn_acceptance_determinism";
    fs::remove_all(root);
    fs::create_directories(root);
    write_text(root / "mini.json", kMiniConfig);

    auto library_csv = [] {
        auto c = parse_experiment(kMiniConfig, "mini.json");
        c.generator.seed = c.seed;
        return benchmark_csv(run_benchmark(benchmark_config(c)), c.record_wall_time);
    };
    const std::string a = library_csv(), b = library_csv();
    const auto rows = std::count(a.begin(), a.end(), '\n') - 1;
    bool ok = a == b && rows == 6;
    std::string detail = "library: " + std::string(a == b ? "identical" : "DIFFERENT") + " (" + std::to_string(rows) + " rows)";

    if (!cli_path.empty()) {
        bool cli_ok = true;
        std::string csv[2];
        for (int k = 0; k < 2; ++k) {
            const fs::path out = root / ("run" + std::to_string(k));
            const std::string cmd = "\"" + cli_path + "\" benchmark --config \"" + (root / "mini.json").string() +
                                    "\" --out \"" + out.string() + "\" > \"" + (root / "log.txt").string() + "\" 2>&1";
            cli_ok = cli_ok && std::system(cmd.c_str()) == 0 && fs::exists(out / "results.csv");
            if (cli_ok) csv[k] = read_text(out / "results.csv");
        }
        cli_ok = cli_ok && csv[0] == csv[1] && !csv[0].empty();
        ok = ok && cli_ok && csv[0] == a;
        detail += "; dbn benchmark: " + std::string(cli_ok ? "identical" : "FAILED") +
                  (csv[0] == a ? ", matches library" : ", differs from library");
    } else {
        detail += "; CLI not given";
    }
    fs::remove_all(root);
    return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
    std::string filter;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--cli" && i + 1 < argc) cli_path = argv[++i];
        else filter = arg;
    }
    const std::vector<Gate> criteria{
        {"bde_vs_quadrature", 10, bde_vs_quadrature},
        {"mle_vs_grid", 10, mle_vs_grid},
        {"bge_vs_integration", 60, bge_vs_integration},
        {"acyclicity_exactness", 5, acyclicity_exactness},
        {"exact_search_optimality", 60, exact_optimality},
        {"recovery_discrete", 120, recovery_discrete},
        {"recovery_continuous", 300, recovery_continuous},
        {"bounded_oneshot_audit", 120, bounded_audit},
        {"metric_suite", 5, metric_suite},
        {"end_to_end_determinism", 120, determinism},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        if (!filter.empty() && c.name.find(filter) == std::string::npos) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = sec <= c.limit_sec;
        const bool pass = o.pass && in_time;
        failures += !pass;
        std::printf("%s %-24s %s [%.1fs, limit %.0fs%s]\n", pass ? "PASS" : "FAIL", c.name.c_str(), o.detail.c_str(), sec,
                    c.limit_sec, in_time ? "" : ", exceeded");
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
