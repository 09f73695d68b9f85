#include "dbn/learn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <limits>

#include "dbn/acyclicity.hpp"
#include "dbn/rng.hpp"

namespace dbn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void require_nonempty(const TrajectoryDataset& data) {
    if (data.trajectories() == 0 || data.steps() == 0 || data.n_x() == 0)
        fail(ErrorKind::data, "dataset has no transitions");
}

/// Node u of a subset of all nodes -> bit in the "others of v" mask.
std::uint32_t others_mask(std::uint32_t subset, std::size_t v) {
    const std::uint32_t low = subset & ((1u << v) - 1u);
    const std::uint32_t high = (subset >> (v + 1)) << v;
    return low | high;
}

std::size_t other_node(std::size_t bit, std::size_t v) { return bit < v ? bit : bit + 1; }

/// For each mask C over `bits` positions, the submask S of C preferred by `better` among those
/// with `admissible(S)`. Returns UINT32_MAX when none is admissible.
std::vector<std::uint32_t> best_submasks(std::size_t bits, const std::function<bool(std::uint32_t)>& admissible,
                                         const std::function<bool(std::uint32_t, std::uint32_t)>& better) {
    const std::uint32_t count = 1u << bits;
    std::vector<std::uint32_t> best(count, UINT32_MAX);
    for (std::uint32_t c = 0; c < count; ++c) {
        std::uint32_t pick = admissible(c) ? c : UINT32_MAX;
        for (std::size_t b = 0; b < bits; ++b) {
            if (!(c & (1u << b))) continue;
            const std::uint32_t cand = best[c ^ (1u << b)];
            if (cand == UINT32_MAX) continue;
            if (pick == UINT32_MAX || better(cand, pick)) pick = cand;
        }
        best[c] = pick;
    }
    return best;
}

/// Maximizes sum_v value(v, parents mask of v) over DAGs by dynamic programming over node
/// subsets (sinks removed one at a time). Returns the chosen others-mask per node.
std::vector<std::uint32_t> order_dp(std::size_t n, const std::function<double(std::size_t, std::uint32_t)>& value) {
    const std::uint32_t full = (1u << n) - 1u;
    std::vector<double> best(full + 1u, -kInf);
    std::vector<std::uint8_t> sink(full + 1u, 0);
    best[0] = 0.0;
    for (std::uint32_t u = 1; u <= full; ++u) {
        for (std::size_t v = 0; v < n; ++v) {
            if (!(u & (1u << v))) continue;
            const std::uint32_t rest = u ^ (1u << v);
            const double cand = best[rest] + value(v, others_mask(rest, v));
            if (cand > best[u]) {
                best[u] = cand;
                sink[u] = static_cast<std::uint8_t>(v);
            }
        }
    }
    std::vector<std::uint32_t> chosen(n, 0);
    std::uint32_t u = full;
    while (u) {
        const std::size_t v = sink[u];
        u ^= (1u << v);
        chosen[v] = others_mask(u, v);
    }
    return chosen;
}

void apply_tag(DbnStructure& s, std::size_t node, const ParentTag& t) {
    switch (t.kind) {
        case ParentTag::Kind::inter: s.inter.set(t.index, node); break;
        case ParentTag::Kind::intra: s.intra.set(t.index, node); break;
        case ParentTag::Kind::auto_lag: s.auto_lags[node].push_back(t.index); break;
        case ParentTag::Kind::static_var: s.static_edges.set(t.index, node); break;
    }
}

void sort_lags(DbnStructure& s) {
    for (auto& l : s.auto_lags) std::sort(l.begin(), l.end());
}

}  // namespace

void SearchConfig::validate() const {
    if (move_budget == 0) fail(ErrorKind::range, "move budget must be positive");
    if (restarts == 0) fail(ErrorKind::range, "at least one restart is required");
    if (max_lag < 1) fail(ErrorKind::range, "max_lag must be at least 1");
    if (!(random_edge_prob >= 0.0 && random_edge_prob <= 1.0)) fail(ErrorKind::range, "random_edge_prob outside [0,1]");
}

// Exact search --------------------------------------------------------------------------------

std::vector<std::vector<ParentTag>> temporal_parent_sets(const TrajectoryDataset& data, std::size_t node,
                                                         const ParentLimits& limits, std::size_t max_lag) {
    (void)node;
    std::vector<std::vector<ParentTag>> classes(3);
    for (std::size_t j = 0; j < data.n_x(); ++j) classes[0].push_back({ParentTag::Kind::inter, j});
    for (std::size_t tau = 2; tau <= max_lag; ++tau) classes[1].push_back({ParentTag::Kind::auto_lag, tau});
    for (std::size_t j = 0; j < data.n_z(); ++j) classes[2].push_back({ParentTag::Kind::static_var, j});
    const std::size_t caps[3] = {limits.inter, limits.auto_lag, limits.static_var};

    auto subsets = [](const std::vector<ParentTag>& pool, std::size_t cap) {
        std::vector<std::vector<ParentTag>> out{{}};
        std::function<void(std::size_t, std::vector<ParentTag>&)> rec = [&](std::size_t start, std::vector<ParentTag>& cur) {
            if (cur.size() == cap) return;
            for (std::size_t k = start; k < pool.size(); ++k) {
                cur.push_back(pool[k]);
                out.push_back(cur);
                rec(k + 1, cur);
                cur.pop_back();
            }
        };
        std::vector<ParentTag> cur;
        rec(0, cur);
        return out;
    };
    std::vector<std::vector<ParentTag>> result{{}};
    for (std::size_t c = 0; c < 3; ++c) {
        const auto subs = subsets(classes[c], caps[c]);
        std::vector<std::vector<ParentTag>> next;
        for (const auto& base : result)
            for (const auto& add : subs) {
                if (base.size() + add.size() > limits.total) continue;
                auto merged = base;
                merged.insert(merged.end(), add.begin(), add.end());
                next.push_back(std::move(merged));
            }
        result = std::move(next);
    }
    for (auto& r : result) std::sort(r.begin(), r.end());
    std::sort(result.begin(), result.end());
    return result;
}

LearnerReport exact_search(const TrajectoryDataset& data, const SearchConfig& config, const Deadline& deadline) {
    const auto start = Clock::now();
    config.validate();
    require_nonempty(data);
    const std::size_t n = data.n_x();
    if (n > kExactMaxNodes)
        fail(ErrorKind::size, "exact search supports at most " + std::to_string(kExactMaxNodes) + " dynamic nodes");

    ScoreCache cache(config.options);
    struct Choice {
        double score = -kInf;
        std::vector<ParentTag> parents;
    };
    const std::size_t bits = n - 1;
    const std::uint32_t masks = 1u << bits;
    std::vector<std::vector<Choice>> local(n, std::vector<Choice>(masks));
    std::vector<std::vector<std::uint32_t>> bps(n);

    for (std::size_t i = 0; i < n; ++i) {
        const auto temporal = temporal_parent_sets(data, i, config.limits, config.max_lag);
        for (std::uint32_t mask = 0; mask < masks; ++mask) {
            const auto k = static_cast<std::size_t>(std::popcount(mask));
            if (k > config.limits.intra || k > config.limits.total) continue;
            deadline.check();
            std::vector<ParentTag> intra;
            for (std::size_t b = 0; b < bits; ++b)
                if (mask & (1u << b)) intra.push_back({ParentTag::Kind::intra, other_node(b, i)});
            Choice best;
            for (const auto& t : temporal) {
                if (t.size() + k > config.limits.total) continue;
                auto parents = intra;
                parents.insert(parents.end(), t.begin(), t.end());
                auto family = make_family(i, std::move(parents));
                const double sc = cache.get(data, family, config.score);
                if (sc > best.score || (sc == best.score && !best.parents.empty() && family.parents < best.parents) ||
                    best.score == -kInf) {
                    if (best.score == -kInf && sc == -kInf && !best.parents.empty()) continue;
                    best.score = sc;
                    best.parents = std::move(family.parents);
                }
            }
            local[i][mask] = std::move(best);
        }
        const auto& li = local[i];
        bps[i] = best_submasks(
            bits, [&](std::uint32_t m) { return static_cast<std::size_t>(std::popcount(m)) <= std::min(config.limits.intra, config.limits.total); },
            [&](std::uint32_t a, std::uint32_t b) {
                if (li[a].score != li[b].score) return li[a].score > li[b].score;
                return li[a].parents < li[b].parents;
            });
    }

    const auto chosen = order_dp(n, [&](std::size_t v, std::uint32_t m) { return local[v][bps[v][m]].score; });

    LearnerReport report;
    report.learner = "exact";
    report.structure = DbnStructure::empty(n, data.n_z(), config.max_lag);
    for (std::size_t v = 0; v < n; ++v)
        for (const auto& t : local[v][bps[v][chosen[v]]].parents) apply_tag(report.structure, v, t);
    sort_lags(report.structure);
    report.score_kind = config.score;
    report.score = structure_score(cache, data, report.structure, config.score);
    report.seed = config.seed;
    report.params = fit_parameters(data, report.structure, false);
    report.trace.push_back({0, report.score, 0.0});
    report.wall_ms = elapsed_ms(start);
    return report;
}

// Hill climbing -------------------------------------------------------------------------------

namespace {

struct ClassCounts {
    std::size_t intra = 0, inter = 0, auto_lag = 0, static_var = 0;
    std::size_t total() const { return intra + inter + auto_lag + static_var; }
};

ClassCounts parent_counts(const DbnStructure& s, std::size_t i) {
    ClassCounts c;
    for (std::size_t j = 0; j < s.n_x; ++j) {
        c.intra += s.intra(j, i);
        c.inter += s.inter(j, i);
    }
    c.auto_lag = s.auto_lags[i].size();
    for (std::size_t j = 0; j < s.n_z; ++j) c.static_var += s.static_edges(j, i);
    return c;
}

bool reaches(const Adjacency& g, std::size_t from, std::size_t to) {
    const std::size_t n = g.rows();
    std::vector<bool> seen(n, false);
    std::vector<std::size_t> stack{from};
    seen[from] = true;
    while (!stack.empty()) {
        const std::size_t v = stack.back();
        stack.pop_back();
        if (v == to) return true;
        for (std::size_t w = 0; w < n; ++w)
            if (g(v, w) && !seen[w]) {
                seen[w] = true;
                stack.push_back(w);
            }
    }
    return false;
}

enum class MoveType { add_intra, del_intra, rev_intra, add_inter, del_inter, add_auto, del_auto, add_static, del_static };

struct Move {
    MoveType type;
    std::size_t src;  // source variable, or lag for auto moves
    std::size_t dst;
};

void apply_move(DbnStructure& s, const Move& m) {
    switch (m.type) {
        case MoveType::add_intra: s.intra.set(m.src, m.dst); break;
        case MoveType::del_intra: s.intra.set(m.src, m.dst, false); break;
        case MoveType::rev_intra:
            s.intra.set(m.src, m.dst, false);
            s.intra.set(m.dst, m.src);
            break;
        case MoveType::add_inter: s.inter.set(m.src, m.dst); break;
        case MoveType::del_inter: s.inter.set(m.src, m.dst, false); break;
        case MoveType::add_auto: {
            auto& l = s.auto_lags[m.dst];
            l.insert(std::upper_bound(l.begin(), l.end(), m.src), m.src);
            break;
        }
        case MoveType::del_auto: {
            auto& l = s.auto_lags[m.dst];
            l.erase(std::find(l.begin(), l.end(), m.src));
            break;
        }
        case MoveType::add_static: s.static_edges.set(m.src, m.dst); break;
        case MoveType::del_static: s.static_edges.set(m.src, m.dst, false); break;
    }
}

/// Legal moves in a fixed enumeration order.
std::vector<Move> legal_moves(const DbnStructure& s, const SearchConfig& config) {
    const auto& lim = config.limits;
    std::vector<Move> moves;
    std::vector<ClassCounts> counts(s.n_x);
    for (std::size_t i = 0; i < s.n_x; ++i) counts[i] = parent_counts(s, i);
    auto can_add = [&](std::size_t node, std::size_t have, std::size_t cap) {
        return have < cap && counts[node].total() < lim.total;
    };
    for (std::size_t j = 0; j < s.n_x; ++j)
        for (std::size_t i = 0; i < s.n_x; ++i) {
            if (i == j) continue;
            if (s.intra(j, i)) {
                moves.push_back({MoveType::del_intra, j, i});
                // Reverse: j -> i becomes i -> j; legal when j is not otherwise reachable from i.
                if (can_add(j, counts[j].intra, lim.intra)) {
                    Adjacency g = s.intra;
                    g.set(j, i, false);
                    if (!reaches(g, j, i)) moves.push_back({MoveType::rev_intra, j, i});
                }
            } else if (!s.intra(i, j) && can_add(i, counts[i].intra, lim.intra) && !reaches(s.intra, i, j)) {
                moves.push_back({MoveType::add_intra, j, i});
            }
        }
    for (std::size_t j = 0; j < s.n_x; ++j)
        for (std::size_t i = 0; i < s.n_x; ++i) {
            if (s.inter(j, i))
                moves.push_back({MoveType::del_inter, j, i});
            else if (can_add(i, counts[i].inter, lim.inter) &&
                     !(i == j && !s.auto_lags[i].empty() && s.auto_lags[i].front() == 1))
                moves.push_back({MoveType::add_inter, j, i});
        }
    for (std::size_t i = 0; i < s.n_x; ++i)
        for (std::size_t tau = 2; tau <= config.max_lag; ++tau) {
            const auto& l = s.auto_lags[i];
            if (std::find(l.begin(), l.end(), tau) != l.end())
                moves.push_back({MoveType::del_auto, tau, i});
            else if (can_add(i, counts[i].auto_lag, lim.auto_lag))
                moves.push_back({MoveType::add_auto, tau, i});
        }
    for (std::size_t j = 0; j < s.n_z; ++j)
        for (std::size_t i = 0; i < s.n_x; ++i) {
            if (s.static_edges(j, i))
                moves.push_back({MoveType::del_static, j, i});
            else if (can_add(i, counts[i].static_var, lim.static_var))
                moves.push_back({MoveType::add_static, j, i});
        }
    return moves;
}

DbnStructure random_start(const TrajectoryDataset& data, const SearchConfig& config, std::uint64_t seed) {
    Rng rng(seed);
    DbnStructure s = DbnStructure::empty(data.n_x(), data.n_z(), config.max_lag);
    const auto perm = rng.permutation(s.n_x);
    std::vector<std::size_t> rank(s.n_x);
    for (std::size_t k = 0; k < s.n_x; ++k) rank[perm[k]] = k;
    const auto& lim = config.limits;
    const double pr = config.random_edge_prob;
    for (std::size_t i = 0; i < s.n_x; ++i) {
        ClassCounts c;
        auto take = [&](std::size_t& have, std::size_t cap) {
            if (have >= cap || c.total() >= lim.total || !rng.bernoulli(pr)) return false;
            ++have;
            return true;
        };
        for (std::size_t j = 0; j < s.n_x; ++j)
            if (rank[j] < rank[i] && take(c.intra, lim.intra)) s.intra.set(j, i);
        for (std::size_t j = 0; j < s.n_x; ++j)
            if (take(c.inter, lim.inter)) s.inter.set(j, i);
        for (std::size_t tau = 2; tau <= config.max_lag; ++tau)
            if (take(c.auto_lag, lim.auto_lag)) s.auto_lags[i].push_back(tau);
        for (std::size_t j = 0; j < s.n_z; ++j)
            if (take(c.static_var, lim.static_var)) s.static_edges.set(j, i);
    }
    return s;
}

}  // namespace

std::vector<DbnStructure> neighborhood(const DbnStructure& s, const SearchConfig& config) {
    std::vector<DbnStructure> out;
    for (const auto& m : legal_moves(s, config)) {
        DbnStructure next = s;
        apply_move(next, m);
        out.push_back(std::move(next));
    }
    return out;
}

LearnerReport hill_climb(const TrajectoryDataset& data, const SearchConfig& config, const Deadline& deadline) {
    const auto start = Clock::now();
    config.validate();
    require_nonempty(data);
    ScoreCache cache(config.options);
    constexpr double kMinGain = 1e-9;

    LearnerReport best;
    bool have_best = false;
    std::size_t total_moves = 0;
    for (std::size_t r = 0; r < config.restarts; ++r) {
        DbnStructure s = r == 0 ? DbnStructure::empty(data.n_x(), data.n_z(), config.max_lag)
                                : random_start(data, config, derive_seed(config.seed, r));
        std::vector<double> fam(s.n_x);
        for (std::size_t i = 0; i < s.n_x; ++i) fam[i] = cache.get(data, parents_of(s, i), config.score);
        auto total = [&] {
            double t = 0.0;
            for (double f : fam) t += f;
            return t;
        };
        std::vector<TraceEntry> trace{{0, total(), 0.0}};
        for (std::size_t step = 0; step < config.move_budget; ++step) {
            deadline.check();
            double best_gain = kMinGain;
            std::optional<Move> best_move;
            double nf_dst = 0.0, nf_src = 0.0;
            for (const auto& m : legal_moves(s, config)) {
                DbnStructure next = s;
                apply_move(next, m);
                const double f_dst = cache.get(data, parents_of(next, m.dst), config.score);
                double gain = f_dst - fam[m.dst];
                double f_src = 0.0;
                if (m.type == MoveType::rev_intra) {
                    f_src = cache.get(data, parents_of(next, m.src), config.score);
                    gain += f_src - fam[m.src];
                }
                if (gain > best_gain) {
                    best_gain = gain;
                    best_move = m;
                    nf_dst = f_dst;
                    nf_src = f_src;
                }
            }
            if (!best_move) break;
            apply_move(s, *best_move);
            fam[best_move->dst] = nf_dst;
            if (best_move->type == MoveType::rev_intra) fam[best_move->src] = nf_src;
            ++total_moves;
            trace.push_back({step + 1, total(), 0.0});
        }
        const double score = structure_score(cache, data, s, config.score);
        if (!have_best || score > best.score) {
            have_best = true;
            best.structure = s;
            best.score = score;
            best.trace = std::move(trace);
        }
    }
    best.learner = "hillclimb";
    best.score_kind = config.score;
    best.seed = config.seed;
    best.iterations = total_moves;
    best.params = fit_parameters(data, best.structure, false);
    best.wall_ms = elapsed_ms(start);
    return best;
}

// Continuous one-shot -------------------------------------------------------------------------

void ContinuousConfig::validate() const {
    if (lambda_w < 0 || lambda_a < 0) fail(ErrorKind::range, "L1 strengths must be nonnegative");
    if (!(rho0 > 0)) fail(ErrorKind::range, "rho0 must be positive");
    if (!(rho_growth > 1)) fail(ErrorKind::range, "rho growth factor must exceed 1");
    if (!(h_tol > 0)) fail(ErrorKind::range, "h tolerance must be positive");
    if (!(w_threshold >= 0)) fail(ErrorKind::range, "w_threshold must be nonnegative");
    if (max_lag < 1) fail(ErrorKind::range, "max_lag must be at least 1");
    if (!(initial_step > 0) || !(backtrack > 0 && backtrack < 1)) fail(ErrorKind::range, "invalid line-search settings");
}

namespace {

double soft(double v, double t) { return v > t ? v - t : (v < -t ? v + t : 0.0); }

struct LaggedRows {
    Eigen::MatrixXd x;  // m x n, slice s
    Eigen::MatrixXd y;  // m x (n * lags), blocks for s-1, s-2, ...
};

LaggedRows lagged_rows(const TrajectoryDataset& data, std::size_t lags) {
    const std::size_t n = data.n_x();
    const std::size_t first = std::max(data.first_scored_slice(), lags);
    const std::size_t per = first > data.steps() ? 0 : data.steps() - first + 1;
    LaggedRows out;
    const auto m = static_cast<Eigen::Index>(per * data.trajectories());
    out.x.resize(m, static_cast<Eigen::Index>(n));
    out.y.resize(m, static_cast<Eigen::Index>(n * lags));
    Eigen::Index r = 0;
    for (std::size_t tr = 0; tr < data.trajectories(); ++tr)
        for (std::size_t s = first; s <= data.steps(); ++s, ++r)
            for (std::size_t v = 0; v < n; ++v) {
                out.x(r, static_cast<Eigen::Index>(v)) = data.x(tr, s, v);
                for (std::size_t tau = 1; tau <= lags; ++tau)
                    out.y(r, static_cast<Eigen::Index>((tau - 1) * n + v)) = data.x(tr, s - tau, v);
            }
    return out;
}

}  // namespace

LearnerReport continuous_oneshot(const TrajectoryDataset& data, const ContinuousConfig& config,
                                 const Deadline& deadline, std::vector<std::vector<double>>* inner_trace) {
    const auto start = Clock::now();
    config.validate();
    if (data.is_discrete()) fail(ErrorKind::domain, "continuous one-shot learning requires a continuous dataset");
    require_nonempty(data);
    const auto n = static_cast<Eigen::Index>(data.n_x());
    const auto lags = static_cast<Eigen::Index>(config.max_lag);
    const LaggedRows rows = lagged_rows(data, config.max_lag);
    const auto m = static_cast<double>(rows.x.rows());
    if (rows.x.rows() == 0) fail(ErrorKind::data, "no transitions remain after the lag window");

    // Loss in Gram form over B = [W; A_1; ...; A_L].
    Eigen::MatrixXd z(rows.x.rows(), n + n * lags);
    z << rows.x, rows.y;
    const Eigen::MatrixXd gram = z.transpose() * z / m;
    const Eigen::MatrixXd cross = z.transpose() * rows.x / m;
    const double xx = rows.x.squaredNorm() / (2.0 * m);

    Eigen::MatrixXd fixed_zero = Eigen::MatrixXd::Zero(n, n);  // 1 marks entries of W pinned to 0
    for (Eigen::Index i = 0; i < n; ++i) fixed_zero(i, i) = 1.0;
    for (const auto& [src, dst] : config.tabu_edges) {
        if (static_cast<Eigen::Index>(src) >= n || static_cast<Eigen::Index>(dst) >= n)
            fail(ErrorKind::range, "tabu edge outside the node range");
        fixed_zero(static_cast<Eigen::Index>(src), static_cast<Eigen::Index>(dst)) = 1.0;
    }

    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n + n * lags, n);
    double rho = config.rho0;
    double alpha = 0.0;
    double step = config.initial_step;

    auto smooth = [&](const Eigen::MatrixXd& bb, Eigen::MatrixXd* grad, double* h_out) {
        const double loss = xx - (bb.transpose() * cross).trace() + 0.5 * (bb.transpose() * gram * bb).trace();
        const auto hv = h_expm_value(bb.topRows(n));
        if (h_out) *h_out = hv.value;
        if (grad) {
            *grad = gram * bb - cross;
            grad->topRows(n) += (rho * hv.value + alpha) * hv.gradient;
        }
        return loss + 0.5 * rho * hv.value * hv.value + alpha * hv.value;
    };
    auto l1 = [&](const Eigen::MatrixXd& bb) {
        return config.lambda_w * bb.topRows(n).cwiseAbs().sum() + config.lambda_a * bb.bottomRows(n * lags).cwiseAbs().sum();
    };
    auto prox = [&](const Eigen::MatrixXd& v, double t) {
        Eigen::MatrixXd out(v.rows(), v.cols());
        for (Eigen::Index r = 0; r < v.rows(); ++r)
            for (Eigen::Index c = 0; c < v.cols(); ++c) {
                const bool is_w = r < n;
                if (is_w && fixed_zero(r, c) != 0.0) {
                    out(r, c) = 0.0;
                    continue;
                }
                out(r, c) = soft(v(r, c), t * (is_w ? config.lambda_w : config.lambda_a));
            }
        return out;
    };

    LearnerReport report;
    report.learner = "dynotears";
    report.seed = 0;
    double h = 0.0;
    double h_prev = kInf;
    bool converged = false;
    std::size_t outer = 0;
    for (; outer < config.max_outer; ++outer) {
        deadline.check();
        step = config.initial_step;
        Eigen::MatrixXd grad;
        double f = smooth(b, &grad, nullptr);
        double objective = f + l1(b);
        if (inner_trace) inner_trace->emplace_back(1, objective);
        for (std::size_t it = 0; it < config.max_inner; ++it) {
            Eigen::MatrixXd next;
            double f_next = 0.0;
            for (;;) {
                next = prox(b - step * grad, step);
                const Eigen::MatrixXd diff = next - b;
                f_next = smooth(next, nullptr, nullptr);
                if (!std::isfinite(f_next) && step > 1e-300) {
                    step *= config.backtrack;
                    continue;
                }
                const double bound = f + (grad.cwiseProduct(diff)).sum() + diff.squaredNorm() / (2.0 * step);
                if (f_next <= bound || step < 1e-300) break;
                step *= config.backtrack;
            }
            if (!std::isfinite(f_next))
                fail(ErrorKind::optimizer, "continuous one-shot diverged at outer iteration " + std::to_string(outer));
            // Gradient mapping: first-order optimality measure of the composite problem.
            const double change = (next - b).cwiseAbs().maxCoeff() / step;
            b = std::move(next);
            f = smooth(b, &grad, nullptr);
            objective = f + l1(b);
            if (inner_trace) inner_trace->back().push_back(objective);
            ++report.iterations;
            step = std::min(step / config.backtrack, config.initial_step);
            if (change <= config.inner_tol) break;
        }
        smooth(b, nullptr, &h);
        report.trace.push_back({outer, objective, h});
        if (h <= config.h_tol) {
            converged = true;
            ++outer;
            break;
        }
        alpha += rho * h;
        if (h > 0.25 * h_prev) rho *= config.rho_growth;
        h_prev = h;
        if (rho > config.rho_max) break;
    }

    const Eigen::MatrixXd w = b.topRows(n);
    report.w = w;
    for (Eigen::Index tau = 0; tau < lags; ++tau) report.a.push_back(b.block(n + tau * n, 0, n, n));
    report.converged = converged;
    report.h_residual = h;
    if (!converged) report.notes.push_back("acyclicity tolerance not reached; cycles removed by repair");

    DbnStructure s = DbnStructure::empty(data.n_x(), data.n_z(), config.max_lag);
    s.intra = threshold_and_repair(w, config.w_threshold);
    bool dropped = false;
    for (Eigen::Index tau = 0; tau < lags; ++tau) {
        const auto& a = report.a[static_cast<std::size_t>(tau)];
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index i = 0; i < n; ++i) {
                const double v = a(j, i);
                if (v == 0.0 || std::abs(v) < config.w_threshold) continue;
                if (tau == 0)
                    s.inter.set(static_cast<std::size_t>(j), static_cast<std::size_t>(i));
                else if (i == j)
                    s.auto_lags[static_cast<std::size_t>(i)].push_back(static_cast<std::size_t>(tau + 1));
                else
                    dropped = true;
            }
    }
    if (dropped) report.notes.push_back("cross-variable lag weights beyond lag 1 kept in the weight matrices only");
    report.structure = std::move(s);
    report.params = fit_parameters(data, report.structure, false);
    report.score_kind = config.score;
    report.score = structure_score(data, report.structure, config.score);
    report.wall_ms = elapsed_ms(start);
    return report;
}

// Bounded one-shot ----------------------------------------------------------------------------

void BoundedConfig::validate() const {
    if (!(b_w > 0) || !(b_a > 0)) fail(ErrorKind::range, "weight bounds must be positive");
    for (double l : {lambda_w_pos, lambda_w_neg, lambda_a_pos, lambda_a_neg})
        if (l < 0) fail(ErrorKind::range, "edge penalties must be nonnegative");
    if (screen < 0 || screen > 1) fail(ErrorKind::range, "screen must lie in [0,1]");
}

Eigen::VectorXd nnls_gram(const Eigen::MatrixXd& q, const Eigen::VectorXd& c) {
    const Eigen::Index k = c.size();
    Eigen::VectorXd u = Eigen::VectorXd::Zero(k);
    if (k == 0) return u;
    const double scale = std::max(1.0, q.diagonal().cwiseAbs().maxCoeff());
    const double tol = 1e-12 * scale;
    std::vector<bool> passive(static_cast<std::size_t>(k), false);
    auto solve_passive = [&] {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index j = 0; j < k; ++j)
            if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
        const auto p = static_cast<Eigen::Index>(idx.size());
        Eigen::MatrixXd qp(p, p);
        Eigen::VectorXd cp(p);
        for (Eigen::Index a = 0; a < p; ++a) {
            cp(a) = c(idx[static_cast<std::size_t>(a)]);
            for (Eigen::Index b = 0; b < p; ++b) qp(a, b) = q(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
            qp(a, a) += 1e-12 * scale;
        }
        const Eigen::VectorXd zp = qp.ldlt().solve(cp);
        Eigen::VectorXd z = Eigen::VectorXd::Zero(k);
        for (Eigen::Index a = 0; a < p; ++a) z(idx[static_cast<std::size_t>(a)]) = zp(a);
        return z;
    };
    for (Eigen::Index outer = 0; outer < 3 * k + 3; ++outer) {
        const Eigen::VectorXd grad = c - q * u;
        Eigen::Index pick = -1;
        double most = tol;
        for (Eigen::Index j = 0; j < k; ++j)
            if (!passive[static_cast<std::size_t>(j)] && grad(j) > most) {
                most = grad(j);
                pick = j;
            }
        if (pick < 0) break;
        passive[static_cast<std::size_t>(pick)] = true;
        for (Eigen::Index inner = 0; inner < 3 * k + 3; ++inner) {
            const Eigen::VectorXd z = solve_passive();
            bool feasible = true;
            for (Eigen::Index j = 0; j < k; ++j)
                if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) feasible = false;
            if (feasible) {
                u = z;
                break;
            }
            double step = 1.0;
            for (Eigen::Index j = 0; j < k; ++j)
                if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) step = std::min(step, u(j) / (u(j) - z(j)));
            u += step * (z - u);
            for (Eigen::Index j = 0; j < k; ++j)
                if (passive[static_cast<std::size_t>(j)] && u(j) <= tol) {
                    passive[static_cast<std::size_t>(j)] = false;
                    u(j) = 0.0;
                }
        }
    }
    return u;
}

double bounded_objective(const TrajectoryDataset& data, const BoundedConfig& config, const Eigen::MatrixXd& w,
                         const Eigen::MatrixXd& a1) {
    const LaggedRows rows = lagged_rows(data, 1);
    const Eigen::MatrixXd resid = rows.x - rows.x * w - rows.y * a1;
    double total = resid.squaredNorm();
    for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c) {
            if (w(r, c) > 0) total += config.lambda_w_pos;
            if (w(r, c) < 0) total += config.lambda_w_neg;
            if (a1(r, c) > 0) total += config.lambda_a_pos;
            if (a1(r, c) < 0) total += config.lambda_a_neg;
        }
    return total;
}

LearnerReport bounded_oneshot(const TrajectoryDataset& data, const BoundedConfig& config, const Deadline& deadline) {
    const auto start = Clock::now();
    config.validate();
    if (data.is_discrete()) fail(ErrorKind::domain, "bounded one-shot learning requires a continuous dataset");
    require_nonempty(data);
    const std::size_t n = data.n_x();
    if (n > config.max_nodes)
        fail(ErrorKind::size, "bounded one-shot supports at most " + std::to_string(config.max_nodes) + " nodes");
    const LaggedRows rows = lagged_rows(data, 1);
    if (rows.x.rows() == 0) fail(ErrorKind::data, "no transitions remain after the lag window");
    const auto ni = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd z(rows.x.rows(), 2 * ni);
    z << rows.x, rows.y;
    const Eigen::MatrixXd gram = z.transpose() * z;
    const Eigen::MatrixXd cross = z.transpose() * rows.x;

    std::vector<std::vector<bool>> tabu(n, std::vector<bool>(n, false));
    for (const auto& [src, dst] : config.tabu_edges) {
        if (src >= n || dst >= n) fail(ErrorKind::range, "tabu edge outside the node range");
        tabu[src][dst] = true;
    }
    auto screened = [&](Eigen::Index col, Eigen::Index child) {
        if (config.screen <= 0.0) return false;
        const double denom = std::sqrt(gram(col, col) * gram(child, child));
        return denom <= 0.0 || std::abs(cross(col, child)) / denom < config.screen;
    };

    struct Local {
        double cost = kInf;
        double l1 = kInf;
        std::vector<std::pair<Eigen::Index, double>> weights;  // (column of z, weight)
    };
    const std::size_t bits = n - 1;
    std::vector<std::vector<Local>> local(n, std::vector<Local>(1u << bits));
    std::vector<std::vector<std::uint32_t>> bps(n);

    for (std::size_t i = 0; i < n; ++i) {
        const auto child = static_cast<Eigen::Index>(i);
        const double xx = gram(child, child);
        for (std::uint32_t smask = 0; smask < (1u << bits); ++smask) {
            deadline.check();
            std::vector<Eigen::Index> intra_cols;
            bool allowed = true;
            for (std::size_t bit = 0; bit < bits; ++bit)
                if (smask & (1u << bit)) {
                    const std::size_t j = other_node(bit, i);
                    if (tabu[j][i] || screened(static_cast<Eigen::Index>(j), child)) allowed = false;
                    intra_cols.push_back(static_cast<Eigen::Index>(j));
                }
            if (!allowed) continue;
            Local best;
            for (std::uint32_t pmask = 0; pmask < (1u << n); ++pmask) {
                std::vector<Eigen::Index> cols = intra_cols;
                bool ok = true;
                for (std::size_t j = 0; j < n; ++j)
                    if (pmask & (1u << j)) {
                        const Eigen::Index col = ni + static_cast<Eigen::Index>(j);
                        if (screened(col, child)) ok = false;
                        cols.push_back(col);
                    }
                if (!ok) continue;
                const auto k = static_cast<Eigen::Index>(cols.size());
                Eigen::MatrixXd gsub(k, k);
                Eigen::VectorXd csub(k), bound(k);
                for (Eigen::Index a = 0; a < k; ++a) {
                    csub(a) = cross(cols[static_cast<std::size_t>(a)], child);
                    bound(a) = cols[static_cast<std::size_t>(a)] < ni ? config.b_w : config.b_a;
                    for (Eigen::Index bb = 0; bb < k; ++bb)
                        gsub(a, bb) = gram(cols[static_cast<std::size_t>(a)], cols[static_cast<std::size_t>(bb)]);
                }
                for (std::uint32_t signs = 0; signs < (1u << k); ++signs) {
                    Eigen::VectorXd sg(k);
                    for (Eigen::Index a = 0; a < k; ++a) sg(a) = (signs & (1u << a)) ? -1.0 : 1.0;
                    const Eigen::VectorXd offset = sg.cwiseProduct(bound);
                    const Eigen::MatrixXd q = sg.asDiagonal() * gsub * sg.asDiagonal();
                    const Eigen::VectorXd c = sg.cwiseProduct(csub - gsub * offset);
                    const Eigen::VectorXd u = nnls_gram(q, c);
                    const Eigen::VectorXd wv = sg.cwiseProduct(bound + u);
                    const double rss = std::max(0.0, xx - 2.0 * wv.dot(csub) + wv.dot(gsub * wv));
                    double cost = rss;
                    for (Eigen::Index a = 0; a < k; ++a) {
                        const bool is_w = cols[static_cast<std::size_t>(a)] < ni;
                        cost += is_w ? (sg(a) > 0 ? config.lambda_w_pos : config.lambda_w_neg)
                                     : (sg(a) > 0 ? config.lambda_a_pos : config.lambda_a_neg);
                    }
                    const double l1 = wv.cwiseAbs().sum();
                    const double tol = 1e-9 * std::max(1.0, std::abs(cost));
                    if (cost < best.cost - tol || (std::abs(cost - best.cost) <= tol && l1 < best.l1)) {
                        best.cost = cost;
                        best.l1 = l1;
                        best.weights.clear();
                        for (Eigen::Index a = 0; a < k; ++a) best.weights.emplace_back(cols[static_cast<std::size_t>(a)], wv(a));
                    }
                }
            }
            local[i][smask] = std::move(best);
        }
        const auto& li = local[i];
        bps[i] = best_submasks(
            bits, [&](std::uint32_t m) { return li[m].cost < kInf; },
            [&](std::uint32_t a, std::uint32_t b) {
                const double tol = 1e-9 * std::max(1.0, std::abs(li[b].cost));
                if (std::abs(li[a].cost - li[b].cost) > tol) return li[a].cost < li[b].cost;
                return li[a].l1 < li[b].l1;
            });
    }

    const auto chosen = order_dp(n, [&](std::size_t v, std::uint32_t m) { return -local[v][bps[v][m]].cost; });

    LearnerReport report;
    report.learner = "bounded";
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(ni, ni), a1 = Eigen::MatrixXd::Zero(ni, ni);
    DbnStructure s = DbnStructure::empty(n, data.n_z(), 1);
    ParameterSet params;
    double objective = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
        const auto& pick = local[v][bps[v][chosen[v]]];
        objective += pick.cost;
        for (const auto& [col, weight] : pick.weights) {
            if (col < ni) {
                w(col, static_cast<Eigen::Index>(v)) = weight;
                s.intra.set(static_cast<std::size_t>(col), v);
            } else {
                a1(col - ni, static_cast<Eigen::Index>(v)) = weight;
                s.inter.set(static_cast<std::size_t>(col - ni), v);
            }
        }
    }
    const Eigen::MatrixXd resid = rows.x - rows.x * w - rows.y * a1;
    for (std::size_t v = 0; v < n; ++v) {
        NodeModel model{parents_of(s, v), LinearGaussian{}};
        auto& g = std::get<LinearGaussian>(model.kernel);
        for (const auto& t : model.family.parents)
            g.beta.push_back(t.kind == ParentTag::Kind::intra ? w(static_cast<Eigen::Index>(t.index), static_cast<Eigen::Index>(v))
                                                              : a1(static_cast<Eigen::Index>(t.index), static_cast<Eigen::Index>(v)));
        g.sigma2 = std::max(resid.col(static_cast<Eigen::Index>(v)).squaredNorm() / static_cast<double>(rows.x.rows()), kSigma2Floor);
        params.nodes.push_back(std::move(model));
    }
    report.structure = std::move(s);
    report.params = std::move(params);
    report.w = w;
    report.a = {a1};
    report.trace.push_back({0, objective, 0.0});
    report.score_kind = config.score;
    report.score = structure_score(data, report.structure, config.score);
    report.wall_ms = elapsed_ms(start);
    return report;
}

}  // namespace dbn
