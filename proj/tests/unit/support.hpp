#pragma once

#include <initializer_list>
#include <utility>
#include <vector>

#include "dbn/core.hpp"
#include "dbn/error.hpp"

namespace testing {

using dbn::Adjacency;
using dbn::DbnStructure;
using dbn::TrajectoryDataset;

inline Adjacency adjacency(std::size_t n, std::initializer_list<std::pair<std::size_t, std::size_t>> edges) {
    Adjacency a = Adjacency::square(n);
    for (auto [r, c] : edges) a.set(r, c);
    return a;
}

/// Binary single-trajectory dataset from rows of slice values.
inline TrajectoryDataset binary_series(const std::vector<std::vector<int>>& slices) {
    const std::size_t n_x = slices.front().size();
    auto d = TrajectoryDataset::discrete(std::vector<std::size_t>(n_x, 2), {}, 1, slices.size() - 1);
    for (std::size_t t = 0; t < slices.size(); ++t)
        for (std::size_t v = 0; v < n_x; ++v) d.x(0, t, v) = slices[t][v];
    return d;
}

template <class F>
dbn::ErrorKind error_kind(F&& f) {
    try {
        f();
    } catch (const dbn::Error& e) {
        return e.kind();
    }
    throw std::runtime_error("expected a dbn::Error");
}

}  // namespace testing
