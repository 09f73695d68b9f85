#include "dbn/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <set>

#include "dbn/io.hpp"

namespace dbn {

const std::vector<std::string>& learner_names() {
    static const std::vector<std::string> names{"exact", "hillclimb", "dynotears", "bounded"};
    return names;
}

LearnerSpec learner_spec(const std::string& name) {
    const auto& names = learner_names();
    if (std::find(names.begin(), names.end(), name) == names.end()) {
        std::string list;
        for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
        fail(ErrorKind::usage, "unknown learner '" + name + "' (valid: " + list + ")");
    }
    LearnerSpec s;
    s.name = name;
    s.label = name;
    return s;
}

LearnerReport run_learner(const LearnerSpec& spec, const TrajectoryDataset& data, const Deadline& deadline,
                          std::uint64_t seed) {
    if (spec.name == "exact") {
        auto c = spec.search;
        c.seed = seed;
        return exact_search(data, c, deadline);
    }
    if (spec.name == "hillclimb") {
        auto c = spec.search;
        c.seed = seed;
        auto r = hill_climb(data, c, deadline);
        return r;
    }
    if (spec.name == "dynotears") {
        auto r = continuous_oneshot(data, spec.continuous, deadline);
        r.seed = seed;
        return r;
    }
    if (spec.name == "bounded") {
        auto r = bounded_oneshot(data, spec.bounded, deadline);
        r.seed = seed;
        return r;
    }
    (void)learner_spec(spec.name);  // raises the usage error
    return {};
}

// JSON positions -------------------------------------------------------------------------------

namespace {

class PositionScanner {
public:
    explicit PositionScanner(const std::string& text) : s_(text) {}

    std::map<std::string, std::size_t> run() {
        skip();
        if (pos_ < s_.size()) value("");
        return std::move(lines_);
    }

private:
    const std::string& s_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::map<std::string, std::size_t> lines_;

    void advance() {
        if (s_[pos_] == '\n') ++line_;
        ++pos_;
    }
    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) advance();
    }
    static std::string escape(const std::string& key) {
        std::string out;
        for (char c : key) {
            if (c == '~')
                out += "~0";
            else if (c == '/')
                out += "~1";
            else
                out += c;
        }
        return out;
    }
    std::string string_token() {
        std::string out;
        advance();  // opening quote
        while (pos_ < s_.size() && s_[pos_] != '"') {
            if (s_[pos_] == '\\' && pos_ + 1 < s_.size()) advance();
            out += s_[pos_];
            advance();
        }
        if (pos_ < s_.size()) advance();
        return out;
    }
    void value(const std::string& path) {
        skip();
        if (pos_ >= s_.size()) return;
        if (!lines_.count(path)) lines_[path] = line_;
        const char c = s_[pos_];
        if (c == '{') {
            advance();
            skip();
            while (pos_ < s_.size() && s_[pos_] != '}') {
                if (s_[pos_] != '"') return;  // malformed; the real parser reports it
                const std::size_t key_line = line_;
                const std::string key = string_token();
                const std::string child = path + "/" + escape(key);
                lines_[child] = key_line;
                skip();
                if (pos_ < s_.size() && s_[pos_] == ':') advance();
                value(child);
                skip();
                if (pos_ < s_.size() && s_[pos_] == ',') advance();
                skip();
            }
            if (pos_ < s_.size()) advance();
        } else if (c == '[') {
            advance();
            skip();
            std::size_t k = 0;
            while (pos_ < s_.size() && s_[pos_] != ']') {
                value(path + "/" + std::to_string(k++));
                skip();
                if (pos_ < s_.size() && s_[pos_] == ',') advance();
                skip();
            }
            if (pos_ < s_.size()) advance();
        } else if (c == '"') {
            string_token();
        } else {
            while (pos_ < s_.size() && !std::strchr(",]}", s_[pos_]) && !std::isspace(static_cast<unsigned char>(s_[pos_])))
                advance();
        }
    }
};

/// A JSON object being validated, with its pointer for error positions.
class Node {
public:
    Node(const nlohmann::json& j, std::string path, const std::map<std::string, std::size_t>& lines,
         const std::string& source)
        : j_(j), path_(std::move(path)), lines_(lines), source_(source) {}

    [[noreturn]] void error(const std::string& key, const std::string& message) const {
        std::size_t line = 1;
        auto it = lines_.find(key.empty() ? path_ : path_ + "/" + key);
        if (it == lines_.end()) it = lines_.find(path_);
        if (it != lines_.end()) line = it->second;
        fail(ErrorKind::schema, source_ + ":" + std::to_string(line) + ": " + message);
    }

    std::string where(const std::string& key) const { return (path_.empty() ? "" : path_) + "/" + key; }

    void expect_object() const {
        if (!j_.is_object()) error("", "expected an object at '" + (path_.empty() ? std::string("/") : path_) + "'");
    }

    void allow(std::initializer_list<const char*> keys) const {
        expect_object();
        for (const auto& [k, v] : j_.items()) {
            (void)v;
            bool ok = false;
            for (const char* a : keys) ok = ok || k == a;
            if (!ok) {
                std::string list;
                for (const char* a : keys) list += (list.empty() ? "" : ", ") + std::string(a);
                error(k, "unknown key '" + k + "' in '" + (path_.empty() ? std::string("/") : path_) +
                             "' (allowed: " + list + ")");
            }
        }
    }

    bool has(const char* key) const { return j_.contains(key); }

    void require(const char* key) const {
        if (!has(key)) error("", "missing required field '" + where(key) + "'");
    }

    Node child(const char* key) const { return Node(j_.at(key), where(key), lines_, source_); }
    Node element(std::size_t k) const {
        return Node(j_.at(k), path_ + "/" + std::to_string(k), lines_, source_);
    }
    const nlohmann::json& raw() const { return j_; }
    const nlohmann::json& raw(const char* key) const { return j_.at(key); }

    double real(const char* key, double fallback) const {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_number()) error(key, "field '" + where(key) + "' must be a number");
        return v.get<double>();
    }
    std::size_t count(const char* key, std::size_t fallback) const {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_number_integer() || v.get<long long>() < 0)
            error(key, "field '" + where(key) + "' must be a nonnegative integer");
        return v.get<std::size_t>();
    }
    std::uint64_t seed(const char* key, std::uint64_t fallback) const {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
            error(key, "field '" + where(key) + "' must be a nonnegative integer");
        return v.get<std::uint64_t>();
    }
    bool flag(const char* key, bool fallback) const {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_boolean()) error(key, "field '" + where(key) + "' must be true or false");
        return v.get<bool>();
    }
    std::string text(const char* key, const std::string& fallback) const {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_string()) error(key, "field '" + where(key) + "' must be a string");
        return v.get<std::string>();
    }

    /// Runs `f`, re-raising library errors at this key's line.
    template <class F>
    auto guarded(const char* key, F&& f) const {
        try {
            return f();
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::schema && std::string(e.what()).rfind(source_, 0) == 0) throw;
            error(key, e.what());
        }
    }

private:
    const nlohmann::json& j_;
    std::string path_;
    const std::map<std::string, std::size_t>& lines_;
    const std::string& source_;
};

std::vector<std::pair<std::size_t, std::size_t>> edge_list(const Node& n, const char* key) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    if (!n.has(key)) return out;
    const auto& v = n.raw(key);
    if (!v.is_array()) n.error(key, "field '" + n.where(key) + "' must be a list of [source, target] pairs");
    for (const auto& e : v) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_number_unsigned() || !e[1].is_number_unsigned())
            n.error(key, "field '" + n.where(key) + "' must be a list of [source, target] pairs");
        out.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
    }
    return out;
}

LearnerSpec parse_single_learner(const Node& n) {
    n.require("name");
    const std::string name = n.text("name", "");
    LearnerSpec s = n.guarded("name", [&] { return learner_spec(name); });
    s.label = n.text("label", name);
    auto score = [&](ScoreKind fallback) {
        return n.has("score") ? n.guarded("score", [&] { return score_kind_from_string(n.text("score", "")); }) : fallback;
    };
    if (name == "exact" || name == "hillclimb") {
        n.allow({"name", "label", "score", "ess", "bge_alpha_mu", "bge_alpha_w", "bge_precision_scale", "max_lag",
                 "max_parents", "restarts", "move_budget", "random_edge_prob"});
        auto& c = s.search;
        c.score = score(name == "exact" ? ScoreKind::bde : ScoreKind::bic);
        c.options.dirichlet.ess = n.real("ess", c.options.dirichlet.ess);
        c.options.bge.alpha_mu = n.real("bge_alpha_mu", c.options.bge.alpha_mu);
        if (n.has("bge_alpha_w")) c.options.bge.alpha_w = n.real("bge_alpha_w", 0.0);
        c.options.bge.precision_scale = n.real("bge_precision_scale", c.options.bge.precision_scale);
        c.max_lag = n.count("max_lag", c.max_lag);
        c.restarts = n.count("restarts", c.restarts);
        c.move_budget = n.count("move_budget", c.move_budget);
        c.random_edge_prob = n.real("random_edge_prob", c.random_edge_prob);
        if (n.has("max_parents")) {
            const Node m = n.child("max_parents");
            m.allow({"intra", "inter", "auto", "static", "total"});
            c.limits.intra = m.count("intra", c.limits.intra);
            c.limits.inter = m.count("inter", c.limits.inter);
            c.limits.auto_lag = m.count("auto", c.limits.auto_lag);
            c.limits.static_var = m.count("static", c.limits.static_var);
            c.limits.total = m.count("total", c.limits.total);
        }
        n.guarded("name", [&] {
            c.validate();
            return 0;
        });
    } else if (name == "dynotears") {
        n.allow({"name", "label", "score", "lambda_w", "lambda_a", "w_threshold", "max_lag", "rho0", "rho_growth",
                 "rho_max", "max_outer", "h_tol", "max_inner", "inner_tol", "tabu_edges"});
        auto& c = s.continuous;
        c.score = score(ScoreKind::bic);
        c.lambda_w = n.real("lambda_w", c.lambda_w);
        c.lambda_a = n.real("lambda_a", c.lambda_a);
        c.w_threshold = n.real("w_threshold", c.w_threshold);
        c.max_lag = n.count("max_lag", c.max_lag);
        c.rho0 = n.real("rho0", c.rho0);
        c.rho_growth = n.real("rho_growth", c.rho_growth);
        c.rho_max = n.real("rho_max", c.rho_max);
        c.max_outer = n.count("max_outer", c.max_outer);
        c.h_tol = n.real("h_tol", c.h_tol);
        c.max_inner = n.count("max_inner", c.max_inner);
        c.inner_tol = n.real("inner_tol", c.inner_tol);
        c.tabu_edges = edge_list(n, "tabu_edges");
        n.guarded("name", [&] {
            c.validate();
            return 0;
        });
    } else {
        n.allow({"name", "label", "score", "b_w", "b_a", "lambda_w_pos", "lambda_w_neg", "lambda_a_pos", "lambda_a_neg",
                 "max_nodes", "screen", "tabu_edges"});
        auto& c = s.bounded;
        c.score = score(ScoreKind::bic);
        c.b_w = n.real("b_w", c.b_w);
        c.b_a = n.real("b_a", c.b_a);
        c.lambda_w_pos = n.real("lambda_w_pos", c.lambda_w_pos);
        c.lambda_w_neg = n.real("lambda_w_neg", c.lambda_w_neg);
        c.lambda_a_pos = n.real("lambda_a_pos", c.lambda_a_pos);
        c.lambda_a_neg = n.real("lambda_a_neg", c.lambda_a_neg);
        c.max_nodes = n.count("max_nodes", c.max_nodes);
        c.screen = n.real("screen", c.screen);
        c.tabu_edges = edge_list(n, "tabu_edges");
        n.guarded("name", [&] {
            c.validate();
            return 0;
        });
    }
    return s;
}

/// Expands numeric arrays into a grid of single-valued learner documents.
std::vector<LearnerSpec> parse_learner(const Node& n, const std::map<std::string, std::size_t>& lines,
                                       const std::string& source) {
    n.expect_object();
    std::vector<std::string> grid_keys;
    for (const auto& [k, v] : n.raw().items())
        if (k != "tabu_edges" && v.is_array()) {
            if (v.empty()) n.error(k, "grid '" + n.where(k) + "' is empty");
            for (const auto& e : v)
                if (!e.is_number()) n.error(k, "grid '" + n.where(k) + "' must hold numbers");
            grid_keys.push_back(k);
        }
    if (grid_keys.empty()) return {parse_single_learner(n)};

    std::vector<LearnerSpec> out;
    std::vector<std::size_t> pick(grid_keys.size(), 0);
    for (;;) {
        nlohmann::json doc = n.raw();
        std::string suffix;
        for (std::size_t g = 0; g < grid_keys.size(); ++g) {
            const auto& v = n.raw(grid_keys[g].c_str())[pick[g]];
            doc[grid_keys[g]] = v;
            suffix += (suffix.empty() ? "" : ",") + grid_keys[g] + "=" + v.dump();
        }
        const bool has_label = doc.contains("label");
        // Errors still point at the original learner entry.
        auto spec = parse_single_learner(Node(doc, "", lines, source));
        spec.label = (has_label ? doc["label"].get<std::string>() : spec.name) + "[" + suffix + "]";
        out.push_back(std::move(spec));
        std::size_t g = 0;
        while (g < grid_keys.size() && ++pick[g] == n.raw(grid_keys[g].c_str()).size()) pick[g++] = 0;
        if (g == grid_keys.size()) break;
    }
    return out;
}

GeneratorConfig parse_generator(const Node& n) {
    n.allow({"family", "n_z", "p", "edge_prob", "max_parents", "arity", "static_arity", "dirichlet_alpha",
             "temperature", "min_parent_effect", "weight_lo", "weight_hi", "intercept", "noise_sigma", "lambda0_lo",
             "lambda0_hi", "lambda_lo", "lambda_hi", "max_transition_radius"});
    GeneratorConfig g;
    if (n.has("family")) g.family = n.guarded("family", [&] { return model_family_from_string(n.text("family", "")); });
    g.n_z = n.count("n_z", g.n_z);
    g.p = n.count("p", g.p);
    if (n.has("edge_prob")) {
        const Node e = n.child("edge_prob");
        e.allow({"intra", "inter", "static", "auto"});
        g.edge_prob.intra = e.real("intra", g.edge_prob.intra);
        g.edge_prob.inter = e.real("inter", g.edge_prob.inter);
        g.edge_prob.static_edge = e.real("static", g.edge_prob.static_edge);
        g.edge_prob.auto_lag = e.real("auto", g.edge_prob.auto_lag);
    }
    g.max_parents = n.count("max_parents", g.max_parents);
    g.arity = n.count("arity", g.arity);
    g.static_arity = n.count("static_arity", g.static_arity);
    g.dirichlet_alpha = n.real("dirichlet_alpha", g.dirichlet_alpha);
    g.temperature = n.real("temperature", g.temperature);
    g.min_parent_effect = n.real("min_parent_effect", g.min_parent_effect);
    g.weight_lo = n.real("weight_lo", g.weight_lo);
    g.weight_hi = n.real("weight_hi", g.weight_hi);
    g.intercept = n.real("intercept", g.intercept);
    g.noise_sigma = n.real("noise_sigma", g.noise_sigma);
    g.lambda0_lo = n.real("lambda0_lo", g.lambda0_lo);
    g.lambda0_hi = n.real("lambda0_hi", g.lambda0_hi);
    g.lambda_lo = n.real("lambda_lo", g.lambda_lo);
    g.lambda_hi = n.real("lambda_hi", g.lambda_hi);
    g.max_transition_radius = n.real("max_transition_radius", g.max_transition_radius);
    n.guarded("", [&] {
        g.validate();
        return 0;
    });
    return g;
}

RegimeSpec parse_regime(const Node& parent) {
    const auto& v = parent.raw("regime");
    if (v.is_string()) return parent.guarded("regime", [&] { return RegimeSpec::by_name(v.get<std::string>()); });
    const Node n = parent.child("regime");
    n.allow({"label", "triples"});
    n.require("triples");
    RegimeSpec r;
    r.label = n.text("label", "custom");
    const auto& t = n.raw("triples");
    if (!t.is_array() || t.empty()) n.error("triples", "field '" + n.where("triples") + "' must be a nonempty list");
    for (const auto& e : t) {
        if (!e.is_array() || e.size() != 3 || !e[0].is_number_unsigned() || !e[1].is_number_unsigned() ||
            !e[2].is_number_unsigned())
            n.error("triples", "each triple must be [n, N, T] with positive integers");
        r.triples.push_back({e[0].get<std::size_t>(), e[1].get<std::size_t>(), e[2].get<std::size_t>()});
    }
    n.guarded("triples", [&] {
        r.validate();
        return 0;
    });
    return r;
}

}  // namespace

LearnerSpec parse_learner_document(const std::string& text, const std::string& source) {
    const auto j = parse_json(text, source);
    const auto lines = json_pointer_lines(text);
    return parse_single_learner(Node(j, "", lines, source));
}

GeneratorConfig parse_generator_document(const std::string& text, const std::string& source) {
    const auto j = parse_json(text, source);
    const auto lines = json_pointer_lines(text);
    return parse_generator(Node(j, "", lines, source));
}

std::map<std::string, std::size_t> json_pointer_lines(const std::string& text) { return PositionScanner(text).run(); }

ExperimentConfig parse_experiment(const std::string& text, const std::string& source) {
    const auto j = parse_json(text, source);
    const auto lines = json_pointer_lines(text);
    const Node root(j, "", lines, source);
    root.allow({"seed", "output_dir", "regime", "generator", "learners", "replicates", "timeout_sec", "workers",
                "split_fraction", "strict_loglik", "smoothing_ess", "reversal_cost", "record_wall_time"});
    root.require("regime");
    root.require("generator");
    root.require("learners");

    ExperimentConfig c;
    c.seed = root.seed("seed", c.seed);
    c.output_dir = root.text("output_dir", c.output_dir);
    c.regime = parse_regime(root);
    c.generator = parse_generator(root.child("generator"));
    c.generator.seed = c.seed;
    const auto& learners = root.raw("learners");
    if (!learners.is_array() || learners.empty())
        root.error("learners", "field '/learners' must be a nonempty list");
    const Node ln = root.child("learners");
    for (std::size_t k = 0; k < learners.size(); ++k)
        for (auto& s : parse_learner(ln.element(k), lines, source)) c.learners.push_back(std::move(s));
    std::set<std::string> labels;
    for (const auto& s : c.learners)
        if (!labels.insert(s.label).second) root.error("learners", "duplicate learner label '" + s.label + "'");
    c.replicates = root.count("replicates", c.replicates);
    if (c.replicates == 0) root.error("replicates", "replicates must be positive");
    c.timeout_sec = root.real("timeout_sec", c.timeout_sec);
    if (c.timeout_sec < 0) root.error("timeout_sec", "timeout_sec must be nonnegative");
    c.workers = root.count("workers", c.workers);
    if (c.workers == 0) root.error("workers", "workers must be positive");
    c.holdout.fraction = root.real("split_fraction", c.holdout.fraction);
    if (!(c.holdout.fraction > 0.0 && c.holdout.fraction < 1.0))
        root.error("split_fraction", "split_fraction must lie in (0, 1)");
    c.holdout.strict = root.flag("strict_loglik", c.holdout.strict);
    c.holdout.prior.ess = root.real("smoothing_ess", c.holdout.prior.ess);
    const std::size_t rev = root.count("reversal_cost", 2);
    if (rev != 1 && rev != 2) root.error("reversal_cost", "reversal_cost must be 1 or 2");
    c.reversal = rev == 1 ? ReversalCost::one : ReversalCost::two;
    c.record_wall_time = root.flag("record_wall_time", c.record_wall_time);

    // Learners that need continuous data cannot run on a discrete generator, and vice versa.
    const bool continuous = c.generator.family == ModelFamily::linear_gaussian;
    for (std::size_t k = 0; k < c.learners.size(); ++k) {
        const auto& s = c.learners[k];
        if (!continuous && (s.name == "dynotears" || s.name == "bounded"))
            root.error("learners", "learner '" + s.label + "' needs continuous data but the generator family is " +
                                       to_string(c.generator.family));
    }
    return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
    return parse_experiment(read_text(path), path.string());
}

BenchmarkConfig benchmark_config(const ExperimentConfig& c) {
    BenchmarkConfig b;
    b.regime = c.regime;
    b.generator = c.generator;
    b.generator.seed = c.seed;
    b.replicates = c.replicates;
    b.holdout = c.holdout;
    b.reversal = c.reversal;
    b.timeout_sec = c.timeout_sec;
    b.workers = c.workers;
    for (const auto& s : c.learners)
        b.learners.push_back({s.label, [s](const TrajectoryDataset& d, const Deadline& dl, std::uint64_t seed) {
                                  return run_learner(s, d, dl, seed);
                              }});
    return b;
}

}  // namespace dbn
