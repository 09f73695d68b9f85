#include "dbn/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <atomic>
#include <mutex>
#include <new>
#include <sstream>
#include <thread>

#include "dbn/rng.hpp"

namespace dbn {

const char* to_string(EdgeClass c) {
    switch (c) {
        case EdgeClass::intra: return "intra";
        case EdgeClass::inter: return "inter";
        case EdgeClass::auto_lag: return "auto";
        case EdgeClass::static_var: return "static";
    }
    return "?";
}

EdgeUniverse::EdgeUniverse(std::size_t n_x, std::size_t n_z, std::size_t p) : n_x_(n_x), n_z_(n_z), p_(p) {
    for (std::size_t j = 0; j < n_x; ++j)
        for (std::size_t i = 0; i < n_x; ++i)
            if (i != j) edges_.push_back({EdgeClass::intra, j, i});
    for (std::size_t j = 0; j < n_x; ++j)
        for (std::size_t i = 0; i < n_x; ++i) edges_.push_back({EdgeClass::inter, j, i});
    for (std::size_t i = 0; i < n_x; ++i)
        for (std::size_t tau = 2; tau <= p; ++tau) edges_.push_back({EdgeClass::auto_lag, tau, i});
    for (std::size_t j = 0; j < n_z; ++j)
        for (std::size_t i = 0; i < n_x; ++i) edges_.push_back({EdgeClass::static_var, j, i});
    for (std::size_t k = 0; k < edges_.size(); ++k) index_.emplace(edges_[k], k);
}

std::optional<std::size_t> EdgeUniverse::index_of(const Edge& e) const {
    const auto it = index_.find(e);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::vector<bool> EdgeUniverse::indicator(const DbnStructure& s) const {
    if (s.n_x != n_x_ || s.n_z != n_z_) fail(ErrorKind::dimension, "structure does not match the edge universe");
    std::vector<bool> out(edges_.size(), false);
    auto mark = [&](const Edge& e) {
        const auto k = index_of(e);
        if (!k) fail(ErrorKind::dimension, "edge outside the universe (lag exceeds p)");
        out[*k] = true;
    };
    for (std::size_t j = 0; j < n_x_; ++j)
        for (std::size_t i = 0; i < n_x_; ++i) {
            if (s.intra(j, i) && i != j) mark({EdgeClass::intra, j, i});
            if (s.inter(j, i)) mark({EdgeClass::inter, j, i});
        }
    for (std::size_t i = 0; i < n_x_; ++i)
        for (std::size_t tau : s.auto_lags[i]) {
            if (tau == 1)
                mark({EdgeClass::inter, i, i});
            else
                mark({EdgeClass::auto_lag, tau, i});
        }
    for (std::size_t j = 0; j < n_z_; ++j)
        for (std::size_t i = 0; i < n_x_; ++i)
            if (s.static_edges(j, i)) mark({EdgeClass::static_var, j, i});
    return out;
}

EdgeUniverse common_universe(const DbnStructure& a, const DbnStructure& b) {
    if (a.n_x != b.n_x || a.n_z != b.n_z) fail(ErrorKind::dimension, "structures have different variable counts");
    return EdgeUniverse(a.n_x, a.n_z, std::max(a.p, b.p));
}

std::size_t shd(const DbnStructure& predicted, const DbnStructure& truth, ReversalCost reversal) {
    const EdgeUniverse u = common_universe(predicted, truth);
    const auto a = u.indicator(predicted);
    const auto b = u.indicator(truth);
    std::size_t d = 0;
    for (std::size_t k = 0; k < a.size(); ++k) d += a[k] != b[k];
    if (reversal == ReversalCost::one) {
        // Count each reversed intra pair once instead of twice.
        for (std::size_t j = 0; j < truth.n_x; ++j)
            for (std::size_t i = j + 1; i < truth.n_x; ++i) {
                const bool p_ji = predicted.intra(j, i), p_ij = predicted.intra(i, j);
                const bool t_ji = truth.intra(j, i), t_ij = truth.intra(i, j);
                if ((p_ji && !p_ij && t_ij && !t_ji) || (p_ij && !p_ji && t_ji && !t_ij)) --d;
            }
    }
    return d;
}

AurocResult auroc(std::span<const double> scores, const std::vector<bool>& truth) {
    if (scores.size() != truth.size()) fail(ErrorKind::dimension, "score and truth vectors differ in length");
    std::vector<std::size_t> order(scores.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // Rank-sum with midranks for ties.
    double rank_sum = 0.0;
    std::size_t pos = 0, neg = 0;
    for (std::size_t k = 0; k < order.size();) {
        std::size_t e = k;
        while (e < order.size() && scores[order[e]] == scores[order[k]]) ++e;
        const double mid = 0.5 * static_cast<double>(k + 1 + e);
        for (std::size_t q = k; q < e; ++q) {
            if (truth[order[q]]) {
                rank_sum += mid;
                ++pos;
            } else {
                ++neg;
            }
        }
        k = e;
    }
    if (pos == 0 || neg == 0) return {0.5, true};
    const double p = static_cast<double>(pos), n = static_cast<double>(neg);
    return {(rank_sum - p * (p + 1.0) / 2.0) / (p * n), false};
}

std::vector<double> edge_scores(const LearnerReport& report, const EdgeUniverse& universe) {
    const auto ind = universe.indicator(report.structure);
    std::vector<double> out(ind.size());
    for (std::size_t k = 0; k < ind.size(); ++k) out[k] = ind[k] ? 1.0 : 0.0;
    if (!report.w) return out;
    const auto& w = *report.w;
    for (std::size_t k = 0; k < universe.size(); ++k) {
        const Edge& e = universe.edges()[k];
        const auto src = static_cast<Eigen::Index>(e.source), dst = static_cast<Eigen::Index>(e.target);
        switch (e.kind) {
            case EdgeClass::intra:
                if (src < w.rows() && dst < w.cols()) out[k] = std::abs(w(src, dst));
                break;
            case EdgeClass::inter:
                if (!report.a.empty()) out[k] = std::abs(report.a[0](src, dst));
                break;
            case EdgeClass::auto_lag:
                if (e.source <= report.a.size()) out[k] = std::abs(report.a[e.source - 1](dst, dst));
                break;
            case EdgeClass::static_var: break;
        }
    }
    return out;
}

AurocBreakdown auroc_breakdown(std::span<const double> scores, const DbnStructure& truth, const EdgeUniverse& universe) {
    const auto t = universe.indicator(truth);
    AurocBreakdown out;
    out.overall = auroc(scores, t);
    for (EdgeClass c : {EdgeClass::intra, EdgeClass::inter, EdgeClass::auto_lag, EdgeClass::static_var}) {
        std::vector<double> s;
        std::vector<bool> lab;
        for (std::size_t k = 0; k < universe.size(); ++k)
            if (universe.edges()[k].kind == c) {
                s.push_back(scores[k]);
                lab.push_back(t[k]);
            }
        if (!s.empty()) out.per_class[c] = auroc(s, lab);
    }
    return out;
}

TemporalSplit temporal_split(const TrajectoryDataset& data, double fraction) {
    if (data.steps() < 3) fail(ErrorKind::split, "temporal split needs T >= 3");
    if (!(fraction > 0.0 && fraction <= 1.0)) fail(ErrorKind::split, "split fraction must lie in (0, 1]");
    const auto boundary = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(data.steps()) + 1e-9));
    if (boundary >= data.steps()) fail(ErrorKind::split, "split leaves no test transitions");
    if (boundary < data.first_scored_slice()) fail(ErrorKind::split, "split leaves no training transitions");
    TemporalSplit out;
    out.boundary = boundary;
    out.train = data.truncated(boundary);
    out.test = data;
    out.test.set_first_scored_slice(boundary + 1);
    return out;
}

namespace {

std::size_t scored_transitions(const TrajectoryDataset& d) {
    if (d.first_scored_slice() > d.steps()) return 0;
    return d.trajectories() * (d.steps() - d.first_scored_slice() + 1);
}

}  // namespace

HoldoutResult holdout_loglik(const TemporalSplit& split, const DbnStructure& structure, const HoldoutOptions& options) {
    HoldoutResult out;
    out.params = fit_parameters(split.train, structure, !options.strict, options.prior);
    out.train_ll = loglik(split.train, out.params);
    out.test_ll = loglik(split.test, out.params);
    out.train_transitions = scored_transitions(split.train);
    out.test_transitions = scored_transitions(split.test);
    return out;
}

HoldoutResult holdout_loglik(const TrajectoryDataset& data, const LearnerFn& learner, const HoldoutOptions& options) {
    const auto split = temporal_split(data, options.fraction);
    const auto report = learner(split.train, Deadline{});
    return holdout_loglik(split, report.structure, options);
}

// Benchmark ------------------------------------------------------------------------------------

const char* to_string(CellStatus s) {
    switch (s) {
        case CellStatus::ok: return "OK";
        case CellStatus::time_limit: return "TL";
        case CellStatus::error: return "E";
        case CellStatus::out_of_memory: return "OOM";
    }
    return "?";
}

CellResult run_cell(const BenchmarkConfig& config, const RegimeInstance& instance, const BenchmarkLearner& learner) {
    CellResult cell;
    cell.regime = config.regime.label;
    cell.triple = instance.triple;
    cell.learner = learner.name;
    cell.replicate = instance.replicate;
    cell.seed = instance.seed;
    const auto start = std::chrono::steady_clock::now();
    try {
        const Deadline deadline = config.timeout_sec > 0
                                      ? Deadline(std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                            std::chrono::duration<double>(config.timeout_sec)))
                                      : Deadline{};
        const auto split = temporal_split(instance.data, config.holdout.fraction);
        const auto report = learner.run(split.train, deadline, instance.seed);
        deadline.check();
        const EdgeUniverse universe = common_universe(report.structure, instance.truth.structure);
        cell.shd = shd(report.structure, instance.truth.structure, config.reversal);
        const auto scores = edge_scores(report, universe);
        cell.auroc = auroc(scores, universe.indicator(instance.truth.structure)).value;
        const auto ho = holdout_loglik(split, report.structure, config.holdout);
        cell.train_ll = ho.train_ll;
        cell.test_ll = ho.test_ll;
    } catch (const Error& e) {
        cell.status = e.kind() == ErrorKind::timeout ? CellStatus::time_limit : CellStatus::error;
        cell.message = e.what();
    } catch (const std::bad_alloc&) {
        cell.status = CellStatus::out_of_memory;
        cell.message = "out of memory";
    } catch (const std::exception& e) {
        cell.status = CellStatus::error;
        cell.message = e.what();
    }
    cell.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return cell;
}

BenchmarkResult run_benchmark(const BenchmarkConfig& config) {
    config.regime.validate();
    if (config.learners.empty()) fail(ErrorKind::usage, "benchmark needs at least one learner");
    if (config.replicates == 0) fail(ErrorKind::range, "benchmark needs at least one replicate");
    BenchmarkResult result;
    result.regime = config.regime.label;
    result.triples = config.regime.triples;
    for (const auto& l : config.learners) result.learners.push_back(l.name);

    const std::size_t n_triples = config.regime.triples.size();
    const std::size_t n_learners = config.learners.size();
    const std::size_t reps = config.replicates;
    const std::size_t total = n_triples * n_learners * reps;
    result.cells.resize(total);

    // Instances are generated once per (triple, replicate) and shared read-only by all learners.
    std::vector<std::optional<RegimeInstance>> instances(n_triples * reps);
    std::vector<std::once_flag> made(n_triples * reps);
    auto instance = [&](std::size_t t, std::size_t r) -> const RegimeInstance& {
        const std::size_t k = t * reps + r;
        std::call_once(made[k], [&] { instances[k] = make_instance(config.generator, config.regime.triples[t], t, r); });
        return *instances[k];
    };

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t job = next.fetch_add(1);
            if (job >= total) return;
            const std::size_t t = job / (n_learners * reps);
            const std::size_t l = (job / reps) % n_learners;
            const std::size_t r = job % reps;
            try {
                result.cells[job] = run_cell(config, instance(t, r), config.learners[l]);
            } catch (const std::exception& e) {
                // Instance generation failed; record against the cell.
                CellResult c;
                c.regime = config.regime.label;
                c.triple = config.regime.triples[t];
                c.learner = config.learners[l].name;
                c.replicate = r;
                c.seed = cell_seed(config.generator.seed, t, r);
                c.status = dynamic_cast<const std::bad_alloc*>(&e) ? CellStatus::out_of_memory : CellStatus::error;
                c.message = e.what();
                result.cells[job] = std::move(c);
            }
        }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(config.workers, total));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return result;
}

Summary summarize(std::span<const double> values) {
    Summary s;
    s.count = values.size();
    if (values.empty()) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return s;
}

namespace {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::string fixed(double v, int digits) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

}  // namespace

std::string benchmark_csv(const BenchmarkResult& result, bool wall_time) {
    std::ostringstream os;
    os << "regime,n,N,T,learner,replicate,seed,shd,auroc,train_ll,test_ll,status,wall_ms\n";
    for (const auto& c : result.cells) {
        const bool ok = c.status == CellStatus::ok;
        os << c.regime << ',' << c.triple.n << ',' << c.triple.trajectories << ',' << c.triple.steps << ','
           << c.learner << ',' << c.replicate << ',' << c.seed << ',' << (ok ? std::to_string(c.shd) : "NA") << ','
           << (ok ? format_double(c.auroc) : "NA") << ',' << (ok ? format_double(c.train_ll) : "NA") << ','
           << (ok ? format_double(c.test_ll) : "NA") << ',' << to_string(c.status) << ','
           << (wall_time ? fixed(c.wall_ms, 3) : "NA") << '\n';
    }
    return os.str();
}

std::string benchmark_table(const BenchmarkResult& result) {
    bool partial = false;
    struct Metric {
        const char* title;
        int digits;
        double (*get)(const CellResult&);
    };
    const Metric metrics[] = {
        {"SHD", 1, [](const CellResult& c) { return static_cast<double>(c.shd); }},
        {"AUROC", 3, [](const CellResult& c) { return c.auroc; }},
        {"Test log-likelihood", 1, [](const CellResult& c) { return c.test_ll; }},
    };
    std::ostringstream os;
    for (const auto& m : metrics) {
        std::vector<std::vector<std::string>> rows;
        std::vector<std::string> header{"learner"};
        for (const auto& t : result.triples)
            header.push_back("(" + std::to_string(t.n) + "," + std::to_string(t.trajectories) + "," +
                             std::to_string(t.steps) + ")");
        rows.push_back(header);
        for (const auto& l : result.learners) {
            std::vector<std::string> row{l};
            for (const auto& t : result.triples) {
                std::vector<double> vals;
                std::map<CellStatus, std::size_t> failures;
                for (const auto& c : result.cells) {
                    if (c.learner != l || !(c.triple == t)) continue;
                    if (c.status == CellStatus::ok)
                        vals.push_back(m.get(c));
                    else
                        ++failures[c.status];
                }
                if (vals.empty()) {
                    CellStatus worst = CellStatus::error;
                    std::size_t most = 0;
                    for (const auto& [s, k] : failures)
                        if (k > most) {
                            worst = s;
                            most = k;
                        }
                    row.push_back(to_string(worst));
                } else {
                    const auto s = summarize(vals);
                    std::string cell = fixed(s.mean, m.digits) + " ± " + fixed(s.sd, m.digits);
                    if (!failures.empty()) {
                        cell += "*";
                        partial = true;
                    }
                    row.push_back(cell);
                }
            }
            rows.push_back(std::move(row));
        }
        // Column widths in code points (the ± sign is two bytes).
        auto width = [](const std::string& s) {
            std::size_t w = 0;
            for (unsigned char ch : s) w += (ch & 0xC0) != 0x80;
            return w;
        };
        std::vector<std::size_t> widths(header.size(), 0);
        for (const auto& r : rows)
            for (std::size_t k = 0; k < r.size(); ++k) widths[k] = std::max(widths[k], width(r[k]));
        os << m.title << " (" << result.regime << ")\n";
        for (const auto& r : rows) {
            for (std::size_t k = 0; k < r.size(); ++k) {
                const std::size_t pad = widths[k] - width(r[k]);
                if (k == 0)
                    os << r[k] << std::string(pad, ' ');
                else
                    os << "  " << std::string(pad, ' ') << r[k];
            }
            os << '\n';
        }
        os << '\n';
    }
    if (partial) os << "* some replicates failed; statistics over the successful ones\n";
    return os.str();
}

}  // namespace dbn
