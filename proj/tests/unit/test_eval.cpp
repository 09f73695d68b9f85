#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <thread>

#include "dbn/eval.hpp"
#include "dbn/rng.hpp"
#include "support.hpp"

using namespace dbn;
using testing::adjacency;
using testing::error_kind;

namespace {

DbnStructure random_structure(std::size_t n_x, std::size_t n_z, std::size_t p, Rng& rng) {
    auto s = DbnStructure::empty(n_x, n_z, p);
    for (std::size_t j = 0; j < n_x; ++j)
        for (std::size_t i = j + 1; i < n_x; ++i)
            if (rng.uniform() < 0.4) s.intra.set(j, i);
    for (std::size_t j = 0; j < n_x; ++j)
        for (std::size_t i = 0; i < n_x; ++i)
            if (rng.uniform() < 0.3) s.inter.set(j, i);
    for (std::size_t i = 0; i < n_x; ++i)
        for (std::size_t tau = 2; tau <= p; ++tau)
            if (rng.uniform() < 0.3) s.auto_lags[i].push_back(tau);
    for (std::size_t j = 0; j < n_z; ++j)
        for (std::size_t i = 0; i < n_x; ++i)
            if (rng.uniform() < 0.3) s.static_edges.set(j, i);
    return s;
}

TrajectoryDataset uniform_binary(std::size_t n_x, std::size_t n, std::size_t steps, std::uint64_t seed) {
    auto d = TrajectoryDataset::discrete(std::vector<std::size_t>(n_x, 2), {}, n, steps);
    Rng rng(seed);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t t = 0; t <= steps; ++t)
            for (std::size_t v = 0; v < n_x; ++v) d.x(a, t, v) = rng.uniform() < 0.5 ? 1 : 0;
    return d;
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("shd on hand cases") {
    auto truth = DbnStructure::empty(3);
    truth.intra = adjacency(3, {{0, 1}});
    truth.inter = adjacency(3, {{2, 2}});
    CHECK(shd(truth, truth) == 0);

    auto extra = truth;
    extra.inter.set(0, 2);
    CHECK(shd(extra, truth) == 1);

    auto reversed = truth;
    reversed.intra = adjacency(3, {{1, 0}});
    CHECK(shd(reversed, truth) == 2);
    CHECK(shd(reversed, truth, ReversalCost::one) == 1);

    auto missing = DbnStructure::empty(3);
    CHECK(shd(missing, truth) == 2);

    CHECK(error_kind([&] { shd(DbnStructure::empty(2), truth); }) == ErrorKind::dimension);
}

TEST_CASE("shd counts lag-1 auto edges on the inter diagonal and covers higher lags") {
    auto a = DbnStructure::empty(2, 0, 3);
    auto b = DbnStructure::empty(2, 0, 3);
    a.inter.set(1, 1);
    b.auto_lags[1] = {1};
    CHECK(shd(a, b) == 0);
    b.auto_lags[1] = {3};
    CHECK(shd(a, b) == 2);
    auto short_lag = DbnStructure::empty(2, 0, 1);
    CHECK(shd(short_lag, b) == 1);
}

TEST_CASE("shd is a metric") {
    Rng rng(11);
    for (int k = 0; k < 200; ++k) {
        const auto a = random_structure(4, 1, 2, rng);
        const auto b = random_structure(4, 1, 2, rng);
        const auto c = random_structure(4, 1, 2, rng);
        CHECK(shd(a, b) == shd(b, a));
        CHECK((shd(a, b) == 0) == (a == b));
        CHECK(shd(a, c) <= shd(a, b) + shd(b, c));
        CHECK(shd(a, b, ReversalCost::one) <= shd(a, b));
    }
}

TEST_CASE("auroc hand cases") {
    const std::vector<double> s{0.9, 0.8, 0.3, 0.1};
    const std::vector<bool> t{true, false, true, false};
    CHECK(auroc(s, t).value == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(!auroc(s, t).degenerate);

    const std::vector<double> perfect{0.9, 0.8, 0.3, 0.1};
    CHECK(auroc(perfect, {true, true, false, false}).value == 1.0);
    CHECK(auroc(perfect, {false, false, true, true}).value == 0.0);

    const std::vector<double> flat(5, 0.4);
    CHECK(auroc(flat, {true, false, true, false, false}).value == 0.5);

    const auto deg = auroc(s, {true, true, true, true});
    CHECK(deg.degenerate);
    CHECK(deg.value == 0.5);
    CHECK(auroc(s, {false, false, false, false}).degenerate);
}

TEST_CASE("auroc matches pair counting and ignores monotone transforms") {
    Rng rng(4);
    for (int k = 0; k < 100; ++k) {
        const std::size_t n = 3 + rng.below(20);
        std::vector<double> s(n);
        std::vector<bool> t(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = std::round(rng.uniform() * 5.0) / 5.0;  // coarse values give ties
            t[i] = rng.uniform() < 0.4;
        }
        double concordant = 0.0, pairs = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (t[i] && !t[j]) {
                    pairs += 1.0;
                    concordant += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
                }
        const auto r = auroc(s, t);
        if (pairs == 0.0) {
            CHECK(r.degenerate);
            continue;
        }
        CHECK(r.value == doctest::Approx(concordant / pairs).epsilon(1e-14));
        std::vector<double> transformed(n);
        for (std::size_t i = 0; i < n; ++i) transformed[i] = std::exp(3.0 * s[i]) - 7.0;
        CHECK(auroc(transformed, t).value == doctest::Approx(r.value).epsilon(1e-14));
        CHECK(r.value >= 0.0);
        CHECK(r.value <= 1.0);
    }
}

TEST_CASE("edge universe and edge scores") {
    const EdgeUniverse u(2, 1, 3);
    // intra 2 + inter 4 + auto 2 * 2 + static 2
    CHECK(u.size() == 12);
    CHECK(u.edges().front().kind == EdgeClass::intra);
    CHECK(u.index_of({EdgeClass::intra, 0, 0}) == std::nullopt);
    auto s = DbnStructure::empty(2, 1, 3);
    s.intra.set(0, 1);
    s.auto_lags[0] = {1, 3};
    const auto ind = u.indicator(s);
    CHECK(std::count(ind.begin(), ind.end(), true) == 3);
    CHECK(ind[*u.index_of({EdgeClass::inter, 0, 0})]);

    LearnerReport r;
    r.structure = DbnStructure::empty(2, 0, 1);
    r.structure.intra.set(1, 0);
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(2, 2);
    w(1, 0) = -0.7;
    r.w = w;
    r.a = {Eigen::MatrixXd::Constant(2, 2, 0.2)};
    const EdgeUniverse u1(2, 0, 1);
    const auto sc = edge_scores(r, u1);
    CHECK(sc[*u1.index_of({EdgeClass::intra, 1, 0})] == doctest::Approx(0.7));
    CHECK(sc[*u1.index_of({EdgeClass::intra, 0, 1})] == 0.0);
    CHECK(sc[*u1.index_of({EdgeClass::inter, 1, 1})] == doctest::Approx(0.2));

    auto truth = DbnStructure::empty(2, 0, 1);
    truth.intra.set(1, 0);
    const auto br = auroc_breakdown(sc, truth, u1);
    CHECK(br.per_class.at(EdgeClass::intra).value == 1.0);
    CHECK(br.per_class.at(EdgeClass::inter).degenerate);
}

TEST_CASE("temporal split index arithmetic") {
    const auto d = uniform_binary(2, 3, 10, 1);
    const auto sp = temporal_split(d, 0.7);
    CHECK(sp.boundary == 7);
    CHECK(sp.train.steps() == 7);
    CHECK(sp.train.first_scored_slice() == 1);
    CHECK(sp.test.steps() == 10);
    CHECK(sp.test.first_scored_slice() == 8);
    CHECK(error_kind([&] { temporal_split(d, 1.0); }) == ErrorKind::split);
    CHECK(error_kind([&] { temporal_split(uniform_binary(1, 1, 2, 1), 0.7); }) == ErrorKind::split);
}

TEST_CASE("temporal split partitions transitions") {
    Rng rng(21);
    for (int k = 0; k < 200; ++k) {
        const std::size_t n = 1 + rng.below(5);
        const std::size_t steps = 3 + rng.below(30);
        const double fraction = 0.05 + 0.9 * rng.uniform();
        const auto d = uniform_binary(1, n, steps, static_cast<std::uint64_t>(k));
        const auto boundary = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(steps)));
        if (boundary < 1 || boundary >= steps) {
            CHECK(error_kind([&] { temporal_split(d, fraction); }) == ErrorKind::split);
            continue;
        }
        const auto sp = temporal_split(d, fraction);
        CHECK(sp.boundary == boundary);
        std::size_t scored = 0;
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t t = 1; t <= steps; ++t) {
                const bool in_train = t >= sp.train.first_scored_slice() && t <= sp.train.steps();
                const bool in_test = t >= sp.test.first_scored_slice() && t <= sp.test.steps();
                CHECK(in_train != in_test);
                scored += in_train + in_test;
                if (in_train) CHECK(sp.train.x(a, t, 0) == d.x(a, t, 0));
                if (in_test) CHECK(sp.test.x(a, t, 0) == d.x(a, t, 0));
            }
        CHECK(scored == n * steps);
    }
}

TEST_CASE("holdout of the true model on deterministic data is zero") {
    std::vector<std::vector<int>> rows;
    for (int t = 0; t <= 20; ++t) rows.push_back({t % 2, (t + 1) % 2});
    const auto d = testing::binary_series(rows);
    auto s = DbnStructure::empty(2);
    s.inter = adjacency(2, {{0, 0}, {1, 1}});
    HoldoutOptions o;
    o.strict = true;
    const auto r = holdout_loglik(temporal_split(d), s, o);
    CHECK(r.train_ll == 0.0);
    CHECK(r.test_ll == 0.0);
    CHECK(r.train_transitions == 14);
    CHECK(r.test_transitions == 6);
}

TEST_CASE("holdout of the empty graph on uniform data") {
    const std::size_t n_x = 3;
    const auto d = uniform_binary(n_x, 100, 20, 5);
    const auto r = holdout_loglik(temporal_split(d), DbnStructure::empty(n_x));
    const auto m = static_cast<double>(r.test_transitions);
    CHECK(r.test_transitions == 600);
    const double expected = -m * static_cast<double>(n_x) * std::log(2.0);
    // The fitted marginals are within a few hundredths of 1/2, so each term differs from -log 2
    // by well under 0.01 in expectation; 3 sd of the sum is below 0.05 * sqrt(M n).
    CHECK(std::abs(r.test_ll - expected) < 0.05 * std::sqrt(m * n_x) + 0.01 * m * n_x);
}

TEST_CASE("training fit beats test fit for an overparameterized model") {
    double gap = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto d = uniform_binary(3, 4, 20, 100 + seed);
        auto s = DbnStructure::empty(3);
        for (std::size_t j = 0; j < 3; ++j)
            for (std::size_t i = 0; i < 3; ++i) s.inter.set(j, i);
        s.intra = adjacency(3, {{0, 1}, {0, 2}, {1, 2}});
        const auto r = holdout_loglik(temporal_split(d), s);
        gap += r.train_ll / static_cast<double>(r.train_transitions) -
               r.test_ll / static_cast<double>(r.test_transitions);
    }
    CHECK(gap > 0.0);
}

TEST_CASE("strict holdout gives -inf for unseen configurations") {
    std::vector<std::vector<int>> rows;
    for (int t = 0; t < 10; ++t) rows.push_back({0});
    rows.push_back({1});
    const auto d = testing::binary_series(rows);
    auto s = DbnStructure::empty(1);
    s.inter.set(0, 0);
    HoldoutOptions strict;
    strict.strict = true;
    CHECK(std::isinf(holdout_loglik(temporal_split(d), s, strict).test_ll));
    CHECK(std::isfinite(holdout_loglik(temporal_split(d), s).test_ll));
}

TEST_CASE("holdout with a learner refits on the training part") {
    const auto d = uniform_binary(2, 10, 10, 3);
    std::size_t seen_steps = 0;
    const auto r = holdout_loglik(d, [&](const TrajectoryDataset& train, const Deadline&) {
        seen_steps = train.steps();
        LearnerReport rep;
        rep.structure = DbnStructure::empty(2);
        return rep;
    });
    CHECK(seen_steps == 7);
    CHECK(r.test_transitions == 30);
}

TEST_CASE("summarize") {
    const std::vector<double> v{-10.0, -12.0, -14.0};
    const auto s = summarize(v);
    CHECK(s.mean == doctest::Approx(-12.0));
    CHECK(s.sd == doctest::Approx(2.0));
    CHECK(s.count == 3);
    const std::vector<double> one{4.0};
    CHECK(summarize(one).sd == 0.0);
}

TEST_CASE("benchmark grid, statuses and tables") {
    BenchmarkConfig c;
    c.regime = {"tiny", {{3, 5, 6}, {3, 8, 6}}};
    c.generator.edge_prob = {0.3, 0.3, 0.0, 0.0};
    c.replicates = 3;
    c.learners.push_back({"exact", [](const TrajectoryDataset& d, const Deadline& dl, std::uint64_t) {
                              return exact_search(d, SearchConfig{}, dl);
                          }});
    c.learners.push_back({"hillclimb", [](const TrajectoryDataset& d, const Deadline& dl, std::uint64_t seed) {
                              SearchConfig s;
                              s.seed = seed;
                              return hill_climb(d, s, dl);
                          }});
    const auto r = run_benchmark(c);
    CHECK(r.cells.size() == 12);
    CHECK(line_count(benchmark_csv(r)) == 13);
    CHECK(benchmark_csv(r).rfind("regime,n,N,T,learner,replicate,seed,shd,auroc,train_ll,test_ll,status,wall_ms\n", 0) ==
          0);
    for (const auto& cell : r.cells) {
        CHECK(cell.status == CellStatus::ok);
        CHECK(cell.auroc >= 0.0);
        CHECK(cell.auroc <= 1.0);
    }
    CHECK(benchmark_csv(r, false) == benchmark_csv(run_benchmark(c), false));
    c.workers = 3;
    CHECK(benchmark_csv(r, false) == benchmark_csv(run_benchmark(c), false));

    BenchmarkConfig slow = c;
    slow.timeout_sec = 0.01;
    slow.learners = {{"sleepy", [](const TrajectoryDataset&, const Deadline& dl, std::uint64_t) -> LearnerReport {
                          for (;;) {
                              dl.check();
                              std::this_thread::sleep_for(std::chrono::milliseconds(2));
                          }
                      }},
                     {"broken", [](const TrajectoryDataset&, const Deadline&, std::uint64_t) -> LearnerReport {
                          fail(ErrorKind::optimizer, "nope");
                      }}};
    slow.replicates = 1;
    const auto sr = run_benchmark(slow);
    CHECK(sr.cells.size() == 4);
    for (const auto& cell : sr.cells)
        CHECK(cell.status == (cell.learner == "sleepy" ? CellStatus::time_limit : CellStatus::error));
    const auto table = benchmark_table(sr);
    CHECK(table.find("TL") != std::string::npos);
    CHECK(table.find("E") != std::string::npos);
}

TEST_CASE("regime defaults") {
    CHECK(RegimeSpec::favorable().triples.size() == 5);
    CHECK(BenchmarkConfig{}.replicates == 10);
    CHECK(to_string(CellStatus::time_limit) == std::string("TL"));
    CHECK(to_string(CellStatus::out_of_memory) == std::string("OOM"));
}
