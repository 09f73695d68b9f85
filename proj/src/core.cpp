#include "dbn/core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <sstream>

namespace dbn {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::dimension: return "dimension error";
        case ErrorKind::cycle: return "cycle error";
        case ErrorKind::range: return "range error";
        case ErrorKind::domain: return "domain error";
        case ErrorKind::model: return "model error";
        case ErrorKind::data: return "data error";
        case ErrorKind::size: return "size error";
        case ErrorKind::optimizer: return "optimizer error";
        case ErrorKind::split: return "split error";
        case ErrorKind::schema: return "schema error";
        case ErrorKind::io: return "io error";
        case ErrorKind::usage: return "usage error";
        case ErrorKind::timeout: return "time limit exceeded";
    }
    return "error";
}

std::size_t Adjacency::count() const {
    return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

// Structure -----------------------------------------------------------------------------------

DbnStructure DbnStructure::empty(std::size_t n_x, std::size_t n_z, std::size_t p) {
    DbnStructure s;
    s.n_x = n_x;
    s.n_z = n_z;
    s.p = p;
    s.intra = Adjacency::square(n_x);
    s.inter = Adjacency::square(n_x);
    s.auto_lags.assign(n_x, {});
    s.static_edges = Adjacency(n_z, n_x);
    return s;
}

void DbnStructure::validate() const {
    if (p < 1) fail(ErrorKind::range, "maximum lag p must be at least 1");
    if (intra.rows() != n_x || intra.cols() != n_x) fail(ErrorKind::dimension, "intra must be n_x x n_x");
    if (inter.rows() != n_x || inter.cols() != n_x) fail(ErrorKind::dimension, "inter must be n_x x n_x");
    if (static_edges.rows() != n_z || static_edges.cols() != n_x)
        fail(ErrorKind::dimension, "static_edges must be n_z x n_x");
    if (auto_lags.size() != n_x) fail(ErrorKind::dimension, "auto_lags must have one entry per dynamic node");
    for (std::size_t i = 0; i < n_x; ++i) {
        if (intra(i, i)) fail(ErrorKind::range, "intra self-loop on node " + std::to_string(i));
        const auto& lags = auto_lags[i];
        for (std::size_t k = 0; k < lags.size(); ++k) {
            if (lags[k] < 1 || lags[k] > p)
                fail(ErrorKind::range, "auto lag " + std::to_string(lags[k]) + " outside 1..p on node " +
                                           std::to_string(i));
            if (k > 0 && lags[k] <= lags[k - 1])
                fail(ErrorKind::range, "auto lags must be strictly ascending on node " + std::to_string(i));
        }
        if (inter(i, i) && !lags.empty() && lags.front() == 1)
            fail(ErrorKind::range, "lag-1 self edge stored twice (inter diagonal and auto lag 1) on node " +
                                       std::to_string(i));
    }
    if (!is_acyclic(intra)) (void)topological_order(intra);  // throws with the cycle
}

std::size_t DbnStructure::edge_count() const {
    std::size_t lags = 0;
    for (const auto& l : auto_lags) lags += l.size();
    return intra.count() + inter.count() + static_edges.count() + lags;
}

bool is_acyclic(const Adjacency& intra) {
    if (intra.rows() != intra.cols()) fail(ErrorKind::dimension, "adjacency must be square");
    const std::size_t n = intra.rows();
    enum Color : std::uint8_t { white, grey, black };
    std::vector<Color> color(n, white);
    // Iterative DFS: stack of (node, next child to visit).
    std::vector<std::pair<std::size_t, std::size_t>> stack;
    for (std::size_t root = 0; root < n; ++root) {
        if (color[root] != white) continue;
        stack.emplace_back(root, 0);
        color[root] = grey;
        while (!stack.empty()) {
            auto& [v, next] = stack.back();
            if (next == n) {
                color[v] = black;
                stack.pop_back();
                continue;
            }
            const std::size_t w = next++;
            if (!intra(v, w)) continue;
            if (color[w] == grey) return false;
            if (color[w] == white) {
                color[w] = grey;
                stack.emplace_back(w, 0);
            }
        }
    }
    return true;
}

namespace {

std::vector<std::size_t> find_cycle(const Adjacency& g, const std::vector<bool>& candidate) {
    // Every candidate node has an in-edge from another candidate; walk backwards until repeat.
    const std::size_t n = g.rows();
    std::size_t start = 0;
    while (!candidate[start]) ++start;
    std::vector<std::size_t> seen_at(n, n);
    std::vector<std::size_t> walk;
    std::size_t v = start;
    while (seen_at[v] == n) {
        seen_at[v] = walk.size();
        walk.push_back(v);
        std::size_t u = 0;
        while (!(candidate[u] && g(u, v))) ++u;
        v = u;
    }
    std::vector<std::size_t> cycle(walk.begin() + static_cast<std::ptrdiff_t>(seen_at[v]), walk.end());
    std::reverse(cycle.begin(), cycle.end());
    return cycle;
}

}  // namespace

std::vector<std::size_t> topological_order(const Adjacency& intra) {
    if (intra.rows() != intra.cols()) fail(ErrorKind::dimension, "adjacency must be square");
    const std::size_t n = intra.rows();
    std::vector<std::size_t> indegree(n, 0);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i)
            if (intra(j, i)) ++indegree[i];
    std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
    for (std::size_t i = 0; i < n; ++i)
        if (indegree[i] == 0) ready.push(i);
    std::vector<std::size_t> order;
    order.reserve(n);
    while (!ready.empty()) {
        const std::size_t v = ready.top();
        ready.pop();
        order.push_back(v);
        for (std::size_t i = 0; i < n; ++i)
            if (intra(v, i) && --indegree[i] == 0) ready.push(i);
    }
    if (order.size() != n) {
        std::vector<bool> remaining(n, false);
        for (std::size_t i = 0; i < n; ++i) remaining[i] = indegree[i] > 0;
        auto cycle = find_cycle(intra, remaining);
        std::ostringstream msg;
        msg << "intra-slice graph has a cycle:";
        for (auto c : cycle) msg << ' ' << c;
        throw CycleError(std::move(cycle), msg.str());
    }
    return order;
}

// Families ------------------------------------------------------------------------------------

std::string to_string(const ParentTag& tag) {
    switch (tag.kind) {
        case ParentTag::Kind::inter: return "inter(" + std::to_string(tag.index) + ")";
        case ParentTag::Kind::intra: return "intra(" + std::to_string(tag.index) + ")";
        case ParentTag::Kind::auto_lag: return "auto(" + std::to_string(tag.index) + ")";
        case ParentTag::Kind::static_var: return "static(" + std::to_string(tag.index) + ")";
    }
    return "?";
}

std::size_t FamilySpec::required_lag() const {
    std::size_t lag = 1;
    for (const auto& t : parents)
        if (t.kind == ParentTag::Kind::auto_lag) lag = std::max(lag, t.index);
    return lag;
}

bool FamilySpec::has_static() const {
    return std::any_of(parents.begin(), parents.end(),
                       [](const ParentTag& t) { return t.kind == ParentTag::Kind::static_var; });
}

FamilySpec make_family(std::size_t node, std::vector<ParentTag> parents) {
    std::sort(parents.begin(), parents.end());
    if (std::adjacent_find(parents.begin(), parents.end()) != parents.end())
        fail(ErrorKind::model, "duplicate parent tag in family of node " + std::to_string(node));
    for (const auto& t : parents)
        if (t.kind == ParentTag::Kind::intra && t.index == node)
            fail(ErrorKind::model, "node cannot be its own same-slice parent");
    return FamilySpec{node, std::move(parents)};
}

FamilySpec parents_of(const DbnStructure& s, std::size_t node) {
    FamilySpec f;
    f.node = node;
    for (std::size_t j = 0; j < s.n_x; ++j)
        if (s.inter(j, node)) f.parents.push_back({ParentTag::Kind::inter, j});
    for (std::size_t j = 0; j < s.n_x; ++j)
        if (s.intra(j, node)) f.parents.push_back({ParentTag::Kind::intra, j});
    for (auto tau : s.auto_lags[node]) f.parents.push_back({ParentTag::Kind::auto_lag, tau});
    for (std::size_t j = 0; j < s.n_z; ++j)
        if (s.static_edges(j, node)) f.parents.push_back({ParentTag::Kind::static_var, j});
    return f;
}

std::vector<bool> parent_availability(const FamilySpec& family, std::size_t slice) {
    std::vector<bool> out;
    out.reserve(family.parents.size());
    for (const auto& t : family.parents) {
        switch (t.kind) {
            case ParentTag::Kind::inter: out.push_back(slice >= 1); break;
            case ParentTag::Kind::auto_lag: out.push_back(slice >= t.index); break;
            default: out.push_back(true);
        }
    }
    return out;
}

std::size_t configuration_index(std::span<const std::size_t> values, std::span<const std::size_t> arities) {
    if (values.size() != arities.size()) fail(ErrorKind::dimension, "values and arities differ in length");
    std::size_t index = 0;
    std::size_t stride = 1;
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (values[k] >= arities[k])
            fail(ErrorKind::range, "value " + std::to_string(values[k]) + " out of range for arity " +
                                       std::to_string(arities[k]));
        index += values[k] * stride;
        stride *= arities[k];
    }
    return index;
}

std::vector<std::size_t> configuration_values(std::size_t index, std::span<const std::size_t> arities) {
    if (index >= configuration_count(arities)) fail(ErrorKind::range, "configuration index out of range");
    std::vector<std::size_t> values(arities.size());
    for (std::size_t k = 0; k < arities.size(); ++k) {
        values[k] = index % arities[k];
        index /= arities[k];
    }
    return values;
}

std::size_t configuration_count(std::span<const std::size_t> arities) {
    std::size_t total = 1;
    for (auto a : arities) total *= a;
    return total;
}

// Dataset -------------------------------------------------------------------------------------

TrajectoryDataset TrajectoryDataset::discrete(std::vector<std::size_t> x_arities, std::vector<std::size_t> z_arities,
                                              std::size_t trajectories, std::size_t steps) {
    TrajectoryDataset d;
    d.discrete_ = true;
    d.n_x_ = x_arities.size();
    d.n_z_ = z_arities.size();
    d.n_traj_ = trajectories;
    d.steps_ = steps;
    d.x_arities_ = std::move(x_arities);
    d.z_arities_ = std::move(z_arities);
    for (auto a : d.x_arities_)
        if (a < 1) fail(ErrorKind::range, "arity must be at least 1");
    for (auto a : d.z_arities_)
        if (a < 1) fail(ErrorKind::range, "arity must be at least 1");
    d.x_.assign(trajectories * (steps + 1) * d.n_x_, 0.0);
    d.z_.assign(trajectories * d.n_z_, 0.0);
    return d;
}

TrajectoryDataset TrajectoryDataset::continuous(std::size_t n_x, std::size_t n_z, std::size_t trajectories,
                                                std::size_t steps) {
    TrajectoryDataset d;
    d.discrete_ = false;
    d.n_x_ = n_x;
    d.n_z_ = n_z;
    d.n_traj_ = trajectories;
    d.steps_ = steps;
    d.x_.assign(trajectories * (steps + 1) * n_x, 0.0);
    d.z_.assign(trajectories * n_z, 0.0);
    return d;
}

double TrajectoryDataset::parent_value(std::size_t n, std::size_t s, std::size_t child, const ParentTag& tag) const {
    switch (tag.kind) {
        case ParentTag::Kind::inter: return x(n, s - 1, tag.index);
        case ParentTag::Kind::intra: return x(n, s, tag.index);
        case ParentTag::Kind::auto_lag: return x(n, s - tag.index, child);
        case ParentTag::Kind::static_var: return z(n, tag.index);
    }
    return 0.0;
}

std::size_t TrajectoryDataset::parent_arity(std::size_t child, const ParentTag& tag) const {
    if (!discrete_) fail(ErrorKind::domain, "arity requested on a continuous dataset");
    switch (tag.kind) {
        case ParentTag::Kind::inter:
        case ParentTag::Kind::intra: return x_arities_.at(tag.index);
        case ParentTag::Kind::auto_lag: return x_arities_.at(child);
        case ParentTag::Kind::static_var: return z_arities_.at(tag.index);
    }
    return 1;
}

std::size_t TrajectoryDataset::first_usable_slice(const FamilySpec& family) const {
    return std::max(first_scored_, family.required_lag());
}

std::size_t TrajectoryDataset::usable_per_trajectory(const FamilySpec& family) const {
    const std::size_t first = first_usable_slice(family);
    return first > steps_ ? 0 : steps_ - first + 1;
}

TrajectoryDataset TrajectoryDataset::truncated(std::size_t last) const {
    if (last > steps_) fail(ErrorKind::range, "truncation beyond the trajectory length");
    TrajectoryDataset d = discrete_ ? discrete(x_arities_, z_arities_, n_traj_, last)
                                    : continuous(n_x_, n_z_, n_traj_, last);
    d.first_scored_ = first_scored_;
    for (std::size_t n = 0; n < n_traj_; ++n) {
        for (std::size_t t = 0; t <= last; ++t)
            for (std::size_t v = 0; v < n_x_; ++v) d.x(n, t, v) = x(n, t, v);
        for (std::size_t j = 0; j < n_z_; ++j) d.z(n, j) = z(n, j);
    }
    return d;
}

void TrajectoryDataset::validate() const {
    if (x_.size() != n_traj_ * (steps_ + 1) * n_x_) fail(ErrorKind::data, "trajectory storage has the wrong size");
    if (z_.size() != n_traj_ * n_z_) fail(ErrorKind::data, "static storage has the wrong size");
    auto check = [](double v, std::size_t arity, const char* what) {
        if (!std::isfinite(v) || v < 0 || v != std::floor(v) || static_cast<std::size_t>(v) >= arity)
            fail(ErrorKind::data, std::string(what) + " value " + std::to_string(v) + " outside 0.." +
                                      std::to_string(arity - 1));
    };
    if (discrete_) {
        for (std::size_t i = 0; i < x_.size(); ++i) check(x_[i], x_arities_[i % n_x_], "dynamic");
        for (std::size_t i = 0; i < z_.size(); ++i) check(z_[i], z_arities_[i % n_z_], "static");
    } else {
        for (double v : x_)
            if (!std::isfinite(v)) fail(ErrorKind::data, "non-finite dynamic value");
        for (double v : z_)
            if (!std::isfinite(v)) fail(ErrorKind::data, "non-finite static value");
    }
}

std::vector<std::size_t> family_arities(const TrajectoryDataset& data, const FamilySpec& family) {
    std::vector<std::size_t> arities;
    arities.reserve(family.parents.size());
    for (const auto& t : family.parents) arities.push_back(data.parent_arity(family.node, t));
    return arities;
}

std::size_t family_configuration(const TrajectoryDataset& data, const FamilySpec& family, std::size_t n,
                                 std::size_t s) {
    std::size_t index = 0;
    std::size_t stride = 1;
    for (const auto& t : family.parents) {
        const auto v = static_cast<std::size_t>(data.parent_value(n, s, family.node, t));
        index += v * stride;
        stride *= data.parent_arity(family.node, t);
    }
    return index;
}

// Parameters ----------------------------------------------------------------------------------

std::pair<std::vector<ParentTag>, std::vector<ParentTag>> split_dynamic_static(const FamilySpec& family) {
    std::vector<ParentTag> dyn, stat;
    for (const auto& t : family.parents) (t.kind == ParentTag::Kind::static_var ? stat : dyn).push_back(t);
    return {dyn, stat};
}

namespace {

std::size_t arity_of(const std::vector<std::size_t>& xa, const std::vector<std::size_t>& za, std::size_t child,
                     const ParentTag& t) {
    switch (t.kind) {
        case ParentTag::Kind::inter:
        case ParentTag::Kind::intra: return xa.at(t.index);
        case ParentTag::Kind::auto_lag: return xa.at(child);
        case ParentTag::Kind::static_var: return za.at(t.index);
    }
    return 1;
}

std::size_t configs_of(const std::vector<std::size_t>& xa, const std::vector<std::size_t>& za, std::size_t child,
                       const std::vector<ParentTag>& tags) {
    std::size_t total = 1;
    for (const auto& t : tags) total *= arity_of(xa, za, child, t);
    return total;
}

void check_probability(double v, const std::string& where) {
    if (!(v >= 0.0 && v <= 1.0)) fail(ErrorKind::model, "probability outside [0,1] in " + where);
}

}  // namespace

void ParameterSet::validate(const std::vector<std::size_t>& xa, const std::vector<std::size_t>& za) const {
    const bool discrete = !xa.empty();
    for (const auto& node : nodes) {
        const auto& f = node.family;
        const std::string where = "node " + std::to_string(f.node);
        if (const auto* cpt = std::get_if<Cpt>(&node.kernel)) {
            if (!discrete) fail(ErrorKind::model, "CPT kernel on continuous data at " + where);
            if (cpt->theta.size() != configs_of(xa, za, f.node, f.parents))
                fail(ErrorKind::model, "CPT row count does not match the family at " + where);
            for (const auto& row : cpt->theta) {
                if (row.size() != xa.at(f.node)) fail(ErrorKind::model, "CPT row width != child arity at " + where);
                double sum = 0.0;
                for (double v : row) {
                    check_probability(v, where);
                    sum += v;
                }
                if (std::abs(sum - 1.0) > 1e-12) fail(ErrorKind::model, "CPT row does not sum to 1 at " + where);
            }
        } else if (const auto* fac = std::get_if<FactoredCpt>(&node.kernel)) {
            auto [dyn, stat] = split_dynamic_static(f);
            if (!discrete || xa.at(f.node) != 2) fail(ErrorKind::model, "factored kernel needs a binary child at " + where);
            if (fac->theta_dyn.size() != configs_of(xa, za, f.node, dyn) ||
                fac->theta_stat.size() != configs_of(xa, za, f.node, stat))
                fail(ErrorKind::model, "factored tables do not match the family at " + where);
            for (double v : fac->theta_dyn) check_probability(v, where);
            for (double v : fac->theta_stat) check_probability(v, where);
        } else if (const auto* nor = std::get_if<NoisyOr>(&node.kernel)) {
            if (!discrete || xa.at(f.node) != 2) fail(ErrorKind::model, "noisy-or needs a binary child at " + where);
            if (nor->lambda.size() != f.parents.size()) fail(ErrorKind::model, "noisy-or lambda count at " + where);
            check_probability(nor->lambda0, where);
            for (double v : nor->lambda) check_probability(v, where);
        } else if (const auto* lg = std::get_if<Logistic>(&node.kernel)) {
            if (!discrete || xa.at(f.node) != 2) fail(ErrorKind::model, "logistic needs a binary child at " + where);
            if (lg->beta.size() != f.parents.size()) fail(ErrorKind::model, "logistic beta count at " + where);
        } else if (const auto* gauss = std::get_if<LinearGaussian>(&node.kernel)) {
            if (discrete) fail(ErrorKind::model, "linear Gaussian kernel on discrete data at " + where);
            if (gauss->beta.size() != f.parents.size()) fail(ErrorKind::model, "Gaussian beta count at " + where);
            if (!(gauss->sigma2 > 0.0)) fail(ErrorKind::model, "sigma2 must be positive at " + where);
        }
    }
}

}  // namespace dbn
