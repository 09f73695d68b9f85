#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <chrono>
#include <optional>

#include "dbn/acyclicity.hpp"
#include "dbn/eval.hpp"
#include "dbn/experiment.hpp"
#include "dbn/io.hpp"
#include "dbn/learn.hpp"
#include "dbn/rng.hpp"
#include "dbn/scoring.hpp"
#include "dbn/simulate.hpp"

namespace py = pybind11;
using namespace dbn;

namespace {

using Array3 = py::array_t<double, py::array::c_style | py::array::forcecast>;

TrajectoryDataset from_arrays(Array3 x, std::optional<Array3> z, std::optional<std::vector<std::size_t>> x_arities,
                              std::optional<std::vector<std::size_t>> z_arities) {
    if (x.ndim() != 3) fail(ErrorKind::dimension, "x must have shape (trajectories, steps + 1, n_x)");
    const auto n = static_cast<std::size_t>(x.shape(0));
    const auto slices = static_cast<std::size_t>(x.shape(1));
    const auto n_x = static_cast<std::size_t>(x.shape(2));
    if (slices < 1) fail(ErrorKind::dimension, "x needs at least one slice");
    std::size_t n_z = 0;
    if (z) {
        if (z->ndim() != 2 || static_cast<std::size_t>(z->shape(0)) != n)
            fail(ErrorKind::dimension, "z must have shape (trajectories, n_z)");
        n_z = static_cast<std::size_t>(z->shape(1));
    }
    TrajectoryDataset d;
    if (x_arities) {
        if (x_arities->size() != n_x) fail(ErrorKind::dimension, "one arity per dynamic variable is required");
        std::vector<std::size_t> za = z_arities.value_or(std::vector<std::size_t>(n_z, 2));
        if (za.size() != n_z) fail(ErrorKind::dimension, "one arity per static variable is required");
        d = TrajectoryDataset::discrete(*x_arities, za, n, slices - 1);
    } else {
        d = TrajectoryDataset::continuous(n_x, n_z, n, slices - 1);
    }
    const auto xv = x.unchecked<3>();
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t t = 0; t < slices; ++t)
            for (std::size_t v = 0; v < n_x; ++v)
                d.x(a, t, v) = xv(static_cast<py::ssize_t>(a), static_cast<py::ssize_t>(t), static_cast<py::ssize_t>(v));
    if (z) {
        const auto zv = z->unchecked<2>();
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t j = 0; j < n_z; ++j) d.z(a, j) = zv(static_cast<py::ssize_t>(a), static_cast<py::ssize_t>(j));
    }
    d.validate();
    return d;
}

py::array_t<double> x_array(const TrajectoryDataset& d) {
    py::array_t<double> out({d.trajectories(), d.steps() + 1, d.n_x()});
    auto v = out.mutable_unchecked<3>();
    for (std::size_t a = 0; a < d.trajectories(); ++a)
        for (std::size_t t = 0; t <= d.steps(); ++t)
            for (std::size_t k = 0; k < d.n_x(); ++k)
                v(static_cast<py::ssize_t>(a), static_cast<py::ssize_t>(t), static_cast<py::ssize_t>(k)) = d.x(a, t, k);
    return out;
}

py::array_t<double> z_array(const TrajectoryDataset& d) {
    py::array_t<double> out({d.trajectories(), d.n_z()});
    auto v = out.mutable_unchecked<2>();
    for (std::size_t a = 0; a < d.trajectories(); ++a)
        for (std::size_t j = 0; j < d.n_z(); ++j) v(static_cast<py::ssize_t>(a), static_cast<py::ssize_t>(j)) = d.z(a, j);
    return out;
}

DbnStructure structure_of(const std::string& text) { return structure_from_json(parse_json(text, "<structure>")); }

ParentTag parent_tag(const std::string& kind, std::size_t index) {
    if (kind == "inter") return {ParentTag::Kind::inter, index};
    if (kind == "intra") return {ParentTag::Kind::intra, index};
    if (kind == "auto") return {ParentTag::Kind::auto_lag, index};
    if (kind == "static") return {ParentTag::Kind::static_var, index};
    fail(ErrorKind::usage, "parent kind must be inter, intra, auto or static, got '" + kind + "'");
}

ScoreOptions score_options(double ess) {
    ScoreOptions o;
    o.dirichlet.ess = ess;
    return o;
}

Deadline deadline_for(double timeout_sec) {
    if (timeout_sec <= 0) return {};
    return Deadline(std::chrono::duration_cast<std::chrono::steady_clock::duration>(std::chrono::duration<double>(timeout_sec)));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Dynamic Bayesian network structure and parameter learning";

    static py::exception<Error> dbn_error(m, "DbnError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            // kind is the bare name: "schema", "cycle", ...
            std::string kind = to_string(e.kind());
            if (const auto sp = kind.find(' '); sp != std::string::npos) kind.resize(sp);
            py::object err = py::handle(dbn_error.ptr())(e.what());
            err.attr("kind") = kind;
            PyErr_SetObject(dbn_error.ptr(), err.ptr());
        }
    });

    py::class_<TrajectoryDataset>(m, "Dataset")
        .def_static("discrete", [](Array3 x, std::vector<std::size_t> arities, std::optional<Array3> z,
                                   std::optional<std::vector<std::size_t>> z_arities) {
                        return from_arrays(x, z, arities, z_arities);
                    },
                    py::arg("x"), py::arg("arities"), py::arg("z") = py::none(), py::arg("z_arities") = py::none())
        .def_static("continuous", [](Array3 x, std::optional<Array3> z) { return from_arrays(x, z, std::nullopt, std::nullopt); },
                    py::arg("x"), py::arg("z") = py::none())
        .def_static("read", [](const std::string& path) { return read_dataset(path); }, py::arg("path"))
        .def("write", [](const TrajectoryDataset& d, const std::string& dir) { write_dataset(dir, d); }, py::arg("dir"))
        .def_property_readonly("is_discrete", &TrajectoryDataset::is_discrete)
        .def_property_readonly("n_x", &TrajectoryDataset::n_x)
        .def_property_readonly("n_z", &TrajectoryDataset::n_z)
        .def_property_readonly("trajectories", &TrajectoryDataset::trajectories)
        .def_property_readonly("steps", &TrajectoryDataset::steps)
        .def_property_readonly("x_arities", &TrajectoryDataset::x_arities)
        .def_property_readonly("z_arities", &TrajectoryDataset::z_arities)
        .def_property_readonly("x", &x_array)
        .def_property_readonly("z", &z_array)
        .def("csv", [](const TrajectoryDataset& d) { return dataset_csv(d); })
        .def("__repr__", [](const TrajectoryDataset& d) {
            return "<Dataset " + std::string(d.is_discrete() ? "discrete" : "continuous") + " n_x=" +
                   std::to_string(d.n_x()) + " n_z=" + std::to_string(d.n_z()) + " N=" + std::to_string(d.trajectories()) +
                   " T=" + std::to_string(d.steps()) + ">";
        });

    m.def(
        "sample",
        [](const std::string& generator, std::size_t n_x, std::size_t trajectories, std::size_t steps, std::uint64_t seed) {
            GeneratorConfig g = parse_generator_document(generator);
            g.n_x = n_x;
            g.seed = seed;
            const Truth t = sample_random_dbn(g);
            auto data = sample_trajectories(t.structure, t.params, DomainSpec::of(g), trajectories, steps, derive_seed(seed, 0xDA7A));
            return py::make_tuple(structure_to_json(t.structure).dump(), params_to_json(t.params).dump(), std::move(data));
        },
        py::arg("generator"), py::arg("n_x"), py::arg("trajectories"), py::arg("steps"), py::arg("seed"),
        "Random DBN from a generator JSON object; returns (structure JSON, parameter JSON, Dataset).");

    m.def(
        "learn",
        [](const TrajectoryDataset& data, const std::string& learner, std::uint64_t seed, double timeout_sec) {
            const LearnerSpec spec = parse_learner_document(learner, "<learner>");
            LearnerReport r;
            {
                py::gil_scoped_release release;
                r = run_learner(spec, data, deadline_for(timeout_sec), seed);
            }
            return report_to_json(r).dump();
        },
        py::arg("data"), py::arg("learner"), py::arg("seed") = 0, py::arg("timeout_sec") = 0.0,
        "Runs a learner given as a JSON object with a \"name\" field; returns the report JSON.");

    m.def(
        "structure_score",
        [](const TrajectoryDataset& data, const std::string& structure, const std::string& kind, double ess) {
            return structure_score(data, structure_of(structure), score_kind_from_string(kind), score_options(ess));
        },
        py::arg("data"), py::arg("structure"), py::arg("kind") = "bic", py::arg("ess") = 1.0);

    m.def(
        "family_score",
        [](const TrajectoryDataset& data, std::size_t node, const std::vector<std::pair<std::string, std::size_t>>& parents,
           const std::string& kind, double ess) {
            std::vector<ParentTag> tags;
            for (const auto& [k, i] : parents) tags.push_back(parent_tag(k, i));
            return family_score(data, make_family(node, tags), score_kind_from_string(kind), score_options(ess));
        },
        py::arg("data"), py::arg("node"), py::arg("parents"), py::arg("kind") = "bde", py::arg("ess") = 1.0);

    m.def(
        "fit_parameters",
        [](const TrajectoryDataset& data, const std::string& structure, bool smoothed, double ess) {
            DirichletPrior prior;
            prior.ess = ess;
            return params_to_json(fit_parameters(data, structure_of(structure), smoothed, prior)).dump();
        },
        py::arg("data"), py::arg("structure"), py::arg("smoothed") = false, py::arg("ess") = 1.0);

    m.def(
        "loglik",
        [](const TrajectoryDataset& data, const std::string& params) {
            return loglik(data, params_from_json(parse_json(params, "<params>")));
        },
        py::arg("data"), py::arg("params"));

    m.def(
        "shd",
        [](const std::string& predicted, const std::string& truth, int reversal_cost) {
            if (reversal_cost != 1 && reversal_cost != 2) fail(ErrorKind::usage, "reversal_cost must be 1 or 2");
            return shd(structure_of(predicted), structure_of(truth), reversal_cost == 1 ? ReversalCost::one : ReversalCost::two);
        },
        py::arg("predicted"), py::arg("truth"), py::arg("reversal_cost") = 2);

    m.def(
        "auroc",
        [](const std::vector<double>& scores, const std::vector<bool>& truth) {
            if (scores.size() != truth.size()) fail(ErrorKind::dimension, "scores and truth differ in length");
            const auto r = auroc(scores, truth);
            return py::make_tuple(r.value, r.degenerate);
        },
        py::arg("scores"), py::arg("truth"), "Returns (value, degenerate).");

    m.def(
        "report_auroc",
        [](const std::string& report, const std::string& truth) {
            const auto rep = report_from_json(parse_json(report, "<report>"));
            const auto t = structure_of(truth);
            const auto u = common_universe(rep.structure, t);
            const auto r = auroc_breakdown(edge_scores(rep, u), t, u).overall;
            return py::make_tuple(r.value, r.degenerate);
        },
        py::arg("report"), py::arg("truth"), "AUROC of a learner report against a truth structure.");

    m.def("h_expm", [](const Eigen::MatrixXd& w) { return h_expm(w); }, py::arg("w"));
    m.def("h_expm_grad", [](const Eigen::MatrixXd& w) { return h_expm_grad(w); }, py::arg("w"));
    m.def(
        "h_poly",
        [](const Eigen::MatrixXd& w, double mu) {
            auto v = h_poly(w, mu);
            return py::make_tuple(v.value, v.gradient);
        },
        py::arg("w"), py::arg("mu"));
    m.def(
        "threshold_and_repair",
        [](const Eigen::MatrixXd& w, double threshold) {
            const Adjacency a = threshold_and_repair(w, threshold);
            Eigen::MatrixXi out(a.rows(), a.cols());
            for (std::size_t r = 0; r < a.rows(); ++r)
                for (std::size_t c = 0; c < a.cols(); ++c)
                    out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = a(r, c) ? 1 : 0;
            return out;
        },
        py::arg("w"), py::arg("threshold"));

    m.def(
        "holdout",
        [](const TrajectoryDataset& data, const std::string& structure, double fraction, bool strict, double ess) {
            HoldoutOptions o;
            o.fraction = fraction;
            o.strict = strict;
            o.prior.ess = ess;
            const auto r = holdout_loglik(temporal_split(data, fraction), structure_of(structure), o);
            py::dict d;
            d["train_ll"] = r.train_ll;
            d["test_ll"] = r.test_ll;
            d["train_transitions"] = r.train_transitions;
            d["test_transitions"] = r.test_transitions;
            return d;
        },
        py::arg("data"), py::arg("structure"), py::arg("fraction") = 0.7, py::arg("strict") = false, py::arg("ess") = 1.0);

    m.def(
        "benchmark",
        [](const std::string& config) {
            auto c = parse_experiment(config, "<config>");
            c.generator.seed = c.seed;
            BenchmarkResult r;
            {
                py::gil_scoped_release release;
                r = run_benchmark(benchmark_config(c));
            }
            return py::make_tuple(benchmark_csv(r, c.record_wall_time), benchmark_table(r));
        },
        py::arg("config"), "Runs an experiment document; returns (CSV text, table text).");
}
