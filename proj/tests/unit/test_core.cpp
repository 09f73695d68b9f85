#include "doctest.h"

#include <algorithm>

#include "dbn/core.hpp"
#include "dbn/rng.hpp"
#include "support.hpp"

using namespace dbn;
using testing::adjacency;
using testing::error_kind;

TEST_CASE("is_acyclic on small graphs") {
    CHECK(is_acyclic(Adjacency::square(3)));
    CHECK_FALSE(is_acyclic(adjacency(2, {{0, 1}, {1, 0}})));
    CHECK_FALSE(is_acyclic(adjacency(3, {{0, 1}, {1, 2}, {2, 0}})));
    CHECK(is_acyclic(adjacency(3, {{0, 1}, {1, 2}, {0, 2}})));
    CHECK(error_kind([] { is_acyclic(Adjacency(2, 3)); }) == ErrorKind::dimension);
}

TEST_CASE("topological_order breaks ties by index") {
    CHECK(topological_order(adjacency(2, {{1, 0}})) == std::vector<std::size_t>{1, 0});
    CHECK(topological_order(Adjacency::square(3)) == std::vector<std::size_t>{0, 1, 2});
    CHECK(topological_order(adjacency(3, {{0, 2}, {1, 2}})) == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("topological_order reports a cycle") {
    try {
        topological_order(adjacency(4, {{0, 1}, {1, 2}, {2, 1}, {2, 3}}));
        FAIL("expected a cycle error");
    } catch (const CycleError& e) {
        CHECK(e.kind() == ErrorKind::cycle);
        auto c = e.cycle();
        std::sort(c.begin(), c.end());
        CHECK(c == std::vector<std::size_t>{1, 2});
    }
}

TEST_CASE("topological_order succeeds exactly on acyclic graphs") {
    Rng rng(11);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 1 + rng.below(6);
        Adjacency a = Adjacency::square(n);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < n; ++c)
                if (r != c && rng.bernoulli(0.3)) a.set(r, c);
        bool ordered = true;
        std::vector<std::size_t> order;
        try {
            order = topological_order(a);
        } catch (const CycleError&) {
            ordered = false;
        }
        REQUIRE(ordered == is_acyclic(a));
        if (ordered) {
            std::vector<std::size_t> pos(n);
            for (std::size_t k = 0; k < n; ++k) pos[order[k]] = k;
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t c = 0; c < n; ++c)
                    if (a(r, c)) CHECK(pos[r] < pos[c]);
        }
    }
}

TEST_CASE("configuration_index is little-endian mixed radix") {
    const std::vector<std::size_t> a22{2, 2}, a23{2, 3};
    CHECK(configuration_index(std::vector<std::size_t>{0, 0}, a22) == 0);
    CHECK(configuration_index(std::vector<std::size_t>{1, 0}, a22) == 1);
    CHECK(configuration_index(std::vector<std::size_t>{1, 2}, a23) == 5);
    CHECK(error_kind([&] { configuration_index(std::vector<std::size_t>{2, 0}, a22); }) == ErrorKind::range);
    CHECK(configuration_count(a23) == 6);
}

TEST_CASE("configuration_values inverts configuration_index") {
    const std::vector<std::vector<std::size_t>> shapes{{2}, {3, 4}, {2, 2, 2, 2}, {10, 10, 10, 10}, {7, 3, 5, 2, 3}};
    for (const auto& arities : shapes) {
        const auto total = configuration_count(arities);
        REQUIRE(total <= 10000);
        for (std::size_t k = 0; k < total; ++k) {
            const auto v = configuration_values(k, arities);
            REQUIRE(configuration_index(v, arities) == k);
        }
    }
}

TEST_CASE("parents_of uses the canonical order") {
    auto s = DbnStructure::empty(3, 1, 3);
    s.inter.set(0, 0);
    s.inter.set(1, 0);
    auto f = parents_of(s, 0);
    CHECK(f.parents == std::vector<ParentTag>{{ParentTag::Kind::inter, 0}, {ParentTag::Kind::inter, 1}});

    s = DbnStructure::empty(3, 1, 3);
    s.static_edges.set(0, 2);
    CHECK(parents_of(s, 2).parents == std::vector<ParentTag>{{ParentTag::Kind::static_var, 0}});

    s = DbnStructure::empty(3, 1, 3);
    s.auto_lags[1] = {1, 3};
    s.intra.set(2, 1);
    s.inter.set(0, 1);
    s.static_edges.set(0, 1);
    f = parents_of(s, 1);
    const std::vector<ParentTag> expected{{ParentTag::Kind::inter, 0},
                                          {ParentTag::Kind::intra, 2},
                                          {ParentTag::Kind::auto_lag, 1},
                                          {ParentTag::Kind::auto_lag, 3},
                                          {ParentTag::Kind::static_var, 0}};
    CHECK(f.parents == expected);
    CHECK(f.required_lag() == 3);
    CHECK(parents_of(s, 1) == f);
}

TEST_CASE("auto parents reaching before slice 0 are unavailable") {
    const auto f = make_family(0, {{ParentTag::Kind::auto_lag, 3}, {ParentTag::Kind::inter, 1}});
    CHECK(parent_availability(f, 1) == std::vector<bool>{true, false});
    CHECK(parent_availability(f, 3) == std::vector<bool>{true, true});
}

TEST_CASE("make_family rejects duplicate parents") {
    CHECK(error_kind([] {
              make_family(0, {{ParentTag::Kind::inter, 1}, {ParentTag::Kind::inter, 1}});
          }) == ErrorKind::model);
}

TEST_CASE("structure validation") {
    auto s = DbnStructure::empty(2, 0, 2);
    s.validate();
    s.intra.set(0, 0);
    CHECK(error_kind([&] { s.validate(); }) == ErrorKind::range);
    s = DbnStructure::empty(2, 0, 2);
    s.auto_lags[0] = {3};
    CHECK(error_kind([&] { s.validate(); }) == ErrorKind::range);
    s = DbnStructure::empty(2, 0, 2);
    s.inter.set(1, 1);
    s.auto_lags[1] = {1};
    CHECK(error_kind([&] { s.validate(); }) == ErrorKind::range);
    s = DbnStructure::empty(2, 0, 2);
    s.intra = adjacency(2, {{0, 1}, {1, 0}});
    CHECK(error_kind([&] { s.validate(); }) == ErrorKind::cycle);
}

TEST_CASE("drop rule: scored slices start at the family's largest lag") {
    auto d = TrajectoryDataset::discrete({2, 2}, {}, 2, 5);
    const auto lag3 = make_family(0, {{ParentTag::Kind::auto_lag, 3}});
    CHECK(d.first_usable_slice(lag3) == 3);
    CHECK(d.usable_per_trajectory(lag3) == 3);
    CHECK(d.usable_per_trajectory(make_family(0, {})) == 5);
    d.set_first_scored_slice(4);
    CHECK(d.usable_per_trajectory(lag3) == 2);
}

TEST_CASE("parent_value reads the right slice") {
    auto d = TrajectoryDataset::discrete({3, 3}, {2}, 1, 3);
    for (std::size_t t = 0; t <= 3; ++t) {
        d.x(0, t, 0) = static_cast<double>(t % 3);
        d.x(0, t, 1) = static_cast<double>((t + 1) % 3);
    }
    d.z(0, 0) = 1;
    CHECK(d.parent_value(0, 2, 0, {ParentTag::Kind::inter, 1}) == 2.0);  // X_1(1)
    CHECK(d.parent_value(0, 2, 0, {ParentTag::Kind::intra, 1}) == 0.0);  // X_1(2)
    CHECK(d.parent_value(0, 3, 1, {ParentTag::Kind::auto_lag, 2}) == 2.0);  // X_1(1)
    CHECK(d.parent_value(0, 3, 1, {ParentTag::Kind::static_var, 0}) == 1.0);
}

TEST_CASE("dataset validation rejects out-of-range categories") {
    auto d = TrajectoryDataset::discrete({2}, {}, 1, 2);
    d.validate();
    d.x(0, 1, 0) = 2;
    CHECK(error_kind([&] { d.validate(); }) == ErrorKind::data);
}

TEST_CASE("parameter validation") {
    ParameterSet p;
    p.nodes.push_back({make_family(0, {}), Cpt{{{0.5, 0.4}}}});
    CHECK(error_kind([&] { p.validate({2}, {}); }) == ErrorKind::model);
    p.nodes[0].kernel = Cpt{{{0.25, 0.75}}};
    p.validate({2}, {});
    p.nodes[0].kernel = LinearGaussian{0.0, {}, 0.0};
    CHECK_THROWS_AS(p.validate({}, {}), Error);
    p.nodes[0].kernel = NoisyOr{1.5, {}};
    CHECK_THROWS_AS(p.validate({2}, {}), Error);
}
