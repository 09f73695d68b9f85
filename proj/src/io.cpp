#include "dbn/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "dbn/scoring.hpp"

namespace dbn {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    if (s == "nan" || s == "NaN") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const char* begin = s.data();
    if (!s.empty() && s[0] == '+') ++begin;
    const auto res = std::from_chars(begin, s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail(ErrorKind::data, "not a number: '" + s + "'");
    return v;
}

namespace {

Json number(double v) {
    if (std::isfinite(v)) return v;
    return format_double(v);
}

Json matrix_json(const Adjacency& a) {
    Json rows = Json::array();
    for (std::size_t r = 0; r < a.rows(); ++r) {
        Json row = Json::array();
        for (std::size_t c = 0; c < a.cols(); ++c) row.push_back(a(r, c) ? 1 : 0);
        rows.push_back(std::move(row));
    }
    return rows;
}

Adjacency matrix_from_json(const nlohmann::json& j, std::size_t rows, std::size_t cols, const char* name) {
    if (!j.is_array() || j.size() != rows)
        fail(ErrorKind::schema, std::string(name) + " must be an array of " + std::to_string(rows) + " rows");
    Adjacency a(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        if (!j[r].is_array() || j[r].size() != cols)
            fail(ErrorKind::schema, std::string(name) + " row " + std::to_string(r) + " must have " +
                                        std::to_string(cols) + " entries");
        for (std::size_t c = 0; c < cols; ++c) {
            const auto& v = j[r][c];
            if (v.is_boolean())
                a.set(r, c, v.get<bool>());
            else if (v.is_number_integer() && (v.get<int>() == 0 || v.get<int>() == 1))
                a.set(r, c, v.get<int>() == 1);
            else
                fail(ErrorKind::schema, std::string(name) + " entries must be 0/1");
        }
    }
    return a;
}

const nlohmann::json& field(const nlohmann::json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) fail(ErrorKind::schema, std::string("missing field '") + key + "'");
    return j.at(key);
}

std::size_t count_field(const nlohmann::json& j, const char* key) {
    const auto& v = field(j, key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
        fail(ErrorKind::schema, std::string("field '") + key + "' must be a nonnegative integer");
    return v.get<std::size_t>();
}

double real(const nlohmann::json& v) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) return parse_double(v.get<std::string>());
    fail(ErrorKind::schema, "expected a number");
}

std::vector<double> reals(const nlohmann::json& v) {
    if (!v.is_array()) fail(ErrorKind::schema, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) out.push_back(real(e));
    return out;
}

const char* kind_name(ParentTag::Kind k) {
    switch (k) {
        case ParentTag::Kind::inter: return "inter";
        case ParentTag::Kind::intra: return "intra";
        case ParentTag::Kind::auto_lag: return "auto";
        case ParentTag::Kind::static_var: return "static";
    }
    return "?";
}

ParentTag::Kind kind_from_name(const std::string& s) {
    if (s == "inter") return ParentTag::Kind::inter;
    if (s == "intra") return ParentTag::Kind::intra;
    if (s == "auto") return ParentTag::Kind::auto_lag;
    if (s == "static") return ParentTag::Kind::static_var;
    fail(ErrorKind::schema, "unknown parent kind '" + s + "'");
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r' && ch != ' ') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

std::size_t parse_index(const std::string& s, std::size_t line, const char* what) {
    std::size_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        fail(ErrorKind::data, "line " + std::to_string(line) + ": " + what + " '" + s + "' is not an index");
    return v;
}

std::string value_text(const TrajectoryDataset& d, double v) {
    if (d.is_discrete()) return std::to_string(static_cast<long long>(v));
    return format_double(v);
}

}  // namespace

Json structure_to_json(const DbnStructure& s) {
    Json j;
    j["n_x"] = s.n_x;
    j["n_z"] = s.n_z;
    j["p"] = s.p;
    j["intra"] = matrix_json(s.intra);
    j["inter"] = matrix_json(s.inter);
    Json lags = Json::array();
    for (const auto& l : s.auto_lags) lags.push_back(l);
    j["auto_lags"] = std::move(lags);
    j["static_edges"] = matrix_json(s.static_edges);
    return j;
}

DbnStructure structure_from_json(const nlohmann::json& j) {
    const std::size_t n_x = count_field(j, "n_x");
    const std::size_t n_z = j.contains("n_z") ? count_field(j, "n_z") : 0;
    const std::size_t p = j.contains("p") ? count_field(j, "p") : 1;
    DbnStructure s = DbnStructure::empty(n_x, n_z, p);
    if (j.contains("intra")) s.intra = matrix_from_json(j.at("intra"), n_x, n_x, "intra");
    if (j.contains("inter")) s.inter = matrix_from_json(j.at("inter"), n_x, n_x, "inter");
    if (j.contains("static_edges")) s.static_edges = matrix_from_json(j.at("static_edges"), n_z, n_x, "static_edges");
    if (j.contains("auto_lags")) {
        const auto& l = j.at("auto_lags");
        if (!l.is_array() || l.size() != n_x) fail(ErrorKind::schema, "auto_lags must hold one list per node");
        for (std::size_t i = 0; i < n_x; ++i) {
            if (!l[i].is_array()) fail(ErrorKind::schema, "auto_lags entries must be arrays");
            for (const auto& v : l[i]) {
                if (!v.is_number_integer()) fail(ErrorKind::schema, "auto lags must be integers");
                s.auto_lags[i].push_back(v.get<std::size_t>());
            }
        }
    }
    for (const auto& [key, value] : j.items()) {
        (void)value;
        static const char* known[] = {"n_x", "n_z", "p", "intra", "inter", "auto_lags", "static_edges"};
        if (std::find(std::begin(known), std::end(known), key) == std::end(known))
            fail(ErrorKind::schema, "unknown structure field '" + key + "'");
    }
    s.validate();
    return s;
}

Json params_to_json(const ParameterSet& params) {
    Json nodes = Json::array();
    for (const auto& m : params.nodes) {
        Json n;
        n["node"] = m.family.node;
        Json parents = Json::array();
        for (const auto& t : m.family.parents) parents.push_back(Json{{"kind", kind_name(t.kind)}, {"index", t.index}});
        n["parents"] = std::move(parents);
        std::visit(
            [&](const auto& k) {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, Cpt>) {
                    n["kernel"] = "cpt";
                    n["theta"] = k.theta;
                } else if constexpr (std::is_same_v<K, FactoredCpt>) {
                    n["kernel"] = "factored_cpt";
                    n["theta_dyn"] = k.theta_dyn;
                    n["theta_stat"] = k.theta_stat;
                    n["clipped"] = k.clipped;
                } else if constexpr (std::is_same_v<K, NoisyOr>) {
                    n["kernel"] = "noisy_or";
                    n["lambda0"] = k.lambda0;
                    n["lambda"] = k.lambda;
                } else if constexpr (std::is_same_v<K, Logistic>) {
                    n["kernel"] = "logistic";
                    n["beta0"] = k.beta0;
                    n["beta"] = k.beta;
                } else {
                    n["kernel"] = "linear_gaussian";
                    n["beta0"] = k.beta0;
                    n["beta"] = k.beta;
                    n["sigma2"] = k.sigma2;
                }
            },
            m.kernel);
        nodes.push_back(std::move(n));
    }
    return Json{{"nodes", std::move(nodes)}};
}

ParameterSet params_from_json(const nlohmann::json& j) {
    ParameterSet out;
    const auto& nodes = field(j, "nodes");
    if (!nodes.is_array()) fail(ErrorKind::schema, "nodes must be an array");
    for (const auto& n : nodes) {
        std::vector<ParentTag> parents;
        for (const auto& t : field(n, "parents"))
            parents.push_back({kind_from_name(field(t, "kind").get<std::string>()), count_field(t, "index")});
        NodeModel m{make_family(count_field(n, "node"), std::move(parents)), Cpt{}};
        const auto kernel = field(n, "kernel").get<std::string>();
        if (kernel == "cpt") {
            Cpt c;
            for (const auto& row : field(n, "theta")) c.theta.push_back(reals(row));
            m.kernel = std::move(c);
        } else if (kernel == "factored_cpt") {
            m.kernel = FactoredCpt{reals(field(n, "theta_dyn")), reals(field(n, "theta_stat")),
                                   n.contains("clipped") && n.at("clipped").get<bool>()};
        } else if (kernel == "noisy_or") {
            m.kernel = NoisyOr{real(field(n, "lambda0")), reals(field(n, "lambda"))};
        } else if (kernel == "logistic") {
            m.kernel = Logistic{real(field(n, "beta0")), reals(field(n, "beta"))};
        } else if (kernel == "linear_gaussian") {
            m.kernel = LinearGaussian{real(field(n, "beta0")), reals(field(n, "beta")), real(field(n, "sigma2"))};
        } else {
            fail(ErrorKind::schema, "unknown kernel '" + kernel + "'");
        }
        out.nodes.push_back(std::move(m));
    }
    return out;
}

Json report_to_json(const LearnerReport& r) {
    Json j;
    j["learner"] = r.learner;
    j["structure"] = structure_to_json(r.structure);
    j["score_kind"] = to_string(r.score_kind);
    j["score"] = number(r.score);
    j["seed"] = r.seed;
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    j["h_residual"] = number(r.h_residual);
    Json trace = Json::array();
    for (const auto& t : r.trace) trace.push_back(Json{{"iteration", t.iteration}, {"score", number(t.score)}, {"h", number(t.h)}});
    j["trace"] = std::move(trace);
    auto mat = [](const Eigen::MatrixXd& m) {
        Json rows = Json::array();
        for (Eigen::Index a = 0; a < m.rows(); ++a) {
            Json row = Json::array();
            for (Eigen::Index b = 0; b < m.cols(); ++b) row.push_back(m(a, b));
            rows.push_back(std::move(row));
        }
        return rows;
    };
    if (r.w) {
        j["w"] = mat(*r.w);
        Json a = Json::array();
        for (const auto& m : r.a) a.push_back(mat(m));
        j["a"] = std::move(a);
    }
    if (r.params) j["params"] = params_to_json(*r.params);
    j["notes"] = r.notes;
    return j;
}

LearnerReport report_from_json(const nlohmann::json& j) {
    LearnerReport r;
    r.learner = field(j, "learner").get<std::string>();
    r.structure = structure_from_json(field(j, "structure"));
    if (j.contains("score_kind")) r.score_kind = score_kind_from_string(j["score_kind"].get<std::string>());
    if (j.contains("score")) r.score = real(j["score"]);
    if (j.contains("seed")) r.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("iterations")) r.iterations = j["iterations"].get<std::size_t>();
    if (j.contains("converged")) r.converged = j["converged"].get<bool>();
    if (j.contains("h_residual")) r.h_residual = real(j["h_residual"]);
    if (j.contains("trace"))
        for (const auto& e : j["trace"])
            r.trace.push_back({field(e, "iteration").get<std::size_t>(), real(field(e, "score")), real(field(e, "h"))});
    auto mat = [](const nlohmann::json& rows) {
        if (!rows.is_array()) fail(ErrorKind::schema, "weight matrix must be an array of rows");
        const auto m = static_cast<Eigen::Index>(rows.size());
        const auto n = m == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(rows[0].size());
        Eigen::MatrixXd out(m, n);
        for (Eigen::Index a = 0; a < m; ++a) {
            const auto row = reals(rows[a]);
            if (static_cast<Eigen::Index>(row.size()) != n) fail(ErrorKind::schema, "ragged weight matrix");
            for (Eigen::Index b = 0; b < n; ++b) out(a, b) = row[b];
        }
        return out;
    };
    if (j.contains("w")) {
        r.w = mat(j["w"]);
        if (j.contains("a"))
            for (const auto& m : j["a"]) r.a.push_back(mat(m));
    }
    if (j.contains("params")) r.params = params_from_json(j["params"]);
    if (j.contains("notes")) r.notes = j["notes"].get<std::vector<std::string>>();
    return r;
}

// Datasets -------------------------------------------------------------------------------------

std::string dataset_csv(const TrajectoryDataset& d) {
    std::string out = "traj,t";
    for (std::size_t v = 0; v < d.n_x(); ++v) out += ",x" + std::to_string(v + 1);
    out += '\n';
    for (std::size_t n = 0; n < d.trajectories(); ++n)
        for (std::size_t t = 0; t <= d.steps(); ++t) {
            out += std::to_string(n) + ',' + std::to_string(t);
            for (std::size_t v = 0; v < d.n_x(); ++v) out += ',' + value_text(d, d.x(n, t, v));
            out += '\n';
        }
    return out;
}

std::string static_csv(const TrajectoryDataset& d) {
    if (d.n_z() == 0) return {};
    std::string out = "traj";
    for (std::size_t j = 0; j < d.n_z(); ++j) out += ",z" + std::to_string(j + 1);
    out += '\n';
    for (std::size_t n = 0; n < d.trajectories(); ++n) {
        out += std::to_string(n);
        for (std::size_t j = 0; j < d.n_z(); ++j) out += ',' + value_text(d, d.z(n, j));
        out += '\n';
    }
    return out;
}

Json dataset_meta(const TrajectoryDataset& d) {
    Json j;
    j["domain"] = d.is_discrete() ? "discrete" : "continuous";
    j["n_x"] = d.n_x();
    j["n_z"] = d.n_z();
    j["trajectories"] = d.trajectories();
    j["steps"] = d.steps();
    if (d.is_discrete()) {
        j["x_arities"] = d.x_arities();
        j["z_arities"] = d.z_arities();
    }
    return j;
}

TrajectoryDataset parse_dataset(const std::string& data_text, const std::string& static_text,
                                const nlohmann::json& meta) {
    const auto rows = lines(data_text);
    if (rows.empty()) fail(ErrorKind::data, "data.csv is empty");
    const auto header = split(rows[0]);
    if (header.size() < 3 || header[0] != "traj" || header[1] != "t")
        fail(ErrorKind::data, "line 1: header must be traj,t,x1..xn");
    const std::size_t n_x = header.size() - 2;

    // Collect values first; dimensions follow from the indices.
    std::size_t n_traj = 0, steps = 0;
    std::vector<std::vector<std::string>> cells;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        auto c = split(rows[r]);
        if (c.size() != header.size())
            fail(ErrorKind::data, "line " + std::to_string(r + 1) + ": expected " + std::to_string(header.size()) +
                                      " fields, found " + std::to_string(c.size()));
        n_traj = std::max(n_traj, parse_index(c[0], r + 1, "trajectory") + 1);
        steps = std::max(steps, parse_index(c[1], r + 1, "time") );
        cells.push_back(std::move(c));
    }
    if (cells.size() != n_traj * (steps + 1))
        fail(ErrorKind::data, "data.csv must hold every (traj, t) pair exactly once: expected " +
                                  std::to_string(n_traj * (steps + 1)) + " rows, found " + std::to_string(cells.size()));

    std::vector<std::vector<std::string>> zcells;
    std::size_t n_z = 0;
    const auto zrows = lines(static_text);
    if (!zrows.empty()) {
        const auto zh = split(zrows[0]);
        if (zh.empty() || zh[0] != "traj") fail(ErrorKind::data, "static.csv line 1: header must be traj,z1..zm");
        n_z = zh.size() - 1;
        for (std::size_t r = 1; r < zrows.size(); ++r) {
            auto c = split(zrows[r]);
            if (c.size() != zh.size())
                fail(ErrorKind::data, "static.csv line " + std::to_string(r + 1) + ": wrong field count");
            zcells.push_back(std::move(c));
        }
        if (zcells.size() != n_traj) fail(ErrorKind::data, "static.csv must hold one row per trajectory");
    }

    const bool discrete = meta.is_object() && meta.contains("domain") && meta.at("domain") == "discrete";
    TrajectoryDataset d;
    if (discrete) {
        std::vector<std::size_t> xa, za;
        if (meta.contains("x_arities")) xa = meta.at("x_arities").get<std::vector<std::size_t>>();
        if (meta.contains("z_arities")) za = meta.at("z_arities").get<std::vector<std::size_t>>();
        if (xa.empty()) {
            xa.assign(n_x, 0);
            for (const auto& c : cells)
                for (std::size_t v = 0; v < n_x; ++v)
                    xa[v] = std::max(xa[v], static_cast<std::size_t>(parse_double(c[v + 2])) + 1);
        }
        if (za.empty() && n_z > 0) {
            za.assign(n_z, 0);
            for (const auto& c : zcells)
                for (std::size_t j = 0; j < n_z; ++j)
                    za[j] = std::max(za[j], static_cast<std::size_t>(parse_double(c[j + 1])) + 1);
        }
        if (xa.size() != n_x || za.size() != n_z) fail(ErrorKind::data, "meta.json arities do not match the CSV columns");
        d = TrajectoryDataset::discrete(xa, za, n_traj, steps);
    } else {
        d = TrajectoryDataset::continuous(n_x, n_z, n_traj, steps);
    }
    std::vector<bool> seen(n_traj * (steps + 1), false);
    for (std::size_t r = 0; r < cells.size(); ++r) {
        const auto& c = cells[r];
        const std::size_t n = parse_index(c[0], r + 2, "trajectory"), t = parse_index(c[1], r + 2, "time");
        if (seen[n * (steps + 1) + t])
            fail(ErrorKind::data, "line " + std::to_string(r + 2) + ": duplicate row for traj " + c[0] + ", t " + c[1]);
        seen[n * (steps + 1) + t] = true;
        for (std::size_t v = 0; v < n_x; ++v) {
            try {
                d.x(n, t, v) = parse_double(c[v + 2]);
            } catch (const Error&) {
                fail(ErrorKind::data, "line " + std::to_string(r + 2) + ": bad value '" + c[v + 2] + "'");
            }
        }
    }
    std::vector<bool> zseen(n_traj, false);
    for (std::size_t r = 0; r < zcells.size(); ++r) {
        const std::size_t n = parse_index(zcells[r][0], r + 2, "trajectory");
        if (n >= n_traj || zseen[n]) fail(ErrorKind::data, "static.csv line " + std::to_string(r + 2) + ": bad trajectory id");
        zseen[n] = true;
        for (std::size_t j = 0; j < n_z; ++j) d.z(n, j) = parse_double(zcells[r][j + 1]);
    }
    d.validate();
    return d;
}

void write_dataset(const std::filesystem::path& dir, const TrajectoryDataset& data) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(ErrorKind::io, "cannot create directory " + dir.string() + ": " + ec.message());
    write_text(dir / "data.csv", dataset_csv(data));
    write_text(dir / "meta.json", dataset_meta(data).dump(2) + "\n");
    if (data.n_z() > 0) write_text(dir / "static.csv", static_csv(data));
}

TrajectoryDataset read_dataset(const std::filesystem::path& path) {
    std::filesystem::path dir = path, data_file = path;
    if (std::filesystem::is_directory(path))
        data_file = path / "data.csv";
    else
        dir = path.parent_path();
    const std::string data_text = read_text(data_file);
    std::string static_text;
    if (std::filesystem::exists(dir / "static.csv")) static_text = read_text(dir / "static.csv");
    nlohmann::json meta;
    if (std::filesystem::exists(dir / "meta.json"))
        meta = parse_json(read_text(dir / "meta.json"), (dir / "meta.json").string());
    return parse_dataset(data_text, static_text, meta);
}

// Files ----------------------------------------------------------------------------------------

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot read " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot write " + path.string());
    out << content;
    if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

std::string content_hash(const std::string& content) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : content) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

nlohmann::json parse_json(const std::string& text, const std::string& source) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        // Translate the byte offset into line and column.
        std::size_t line = 1, col = 1;
        for (std::size_t k = 0; k + 1 < e.byte && k < text.size(); ++k) {
            if (text[k] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        fail(ErrorKind::schema, source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": invalid JSON");
    }
}

}  // namespace dbn
