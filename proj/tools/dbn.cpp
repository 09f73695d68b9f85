#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "dbn/eval.hpp"
#include "dbn/experiment.hpp"
#include "dbn/io.hpp"
#include "dbn/learn.hpp"
#include "dbn/scoring.hpp"
#include "dbn/simulate.hpp"

namespace fs = std::filesystem;
using namespace dbn;

namespace {

// Stable process exit codes, documented in the README.
int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::usage: return 2;
        case ErrorKind::data: return 3;
        case ErrorKind::model: return 4;
        case ErrorKind::optimizer: return 5;
        case ErrorKind::io: return 6;
        case ErrorKind::schema: return 7;
        case ErrorKind::dimension: return 8;
        case ErrorKind::cycle: return 9;
        case ErrorKind::range: return 10;
        case ErrorKind::domain: return 11;
        case ErrorKind::size: return 12;
        case ErrorKind::split: return 13;
        case ErrorKind::timeout: return 14;
    }
    return 1;
}

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<std::size_t> workers;
    std::optional<double> timeout_sec;
    bool strict_loglik = false;

    std::string data;
    std::string learner;
    std::vector<std::string> sets;
    std::string truth;
    std::string report;
    std::string structure;
    std::string params;
    std::optional<std::size_t> node;
    std::string parents;
    std::string score = "bde";
    double ess = 1.0;
    std::size_t reversal_cost = 2;
};

ExperimentConfig load_config(const Options& o) {
    if (o.config.empty()) fail(ErrorKind::usage, "--config is required");
    auto c = load_experiment(o.config);
    if (o.seed) c.seed = *o.seed;
    c.generator.seed = c.seed;
    if (!o.out.empty()) c.output_dir = o.out;
    if (o.workers) {
        if (*o.workers == 0) fail(ErrorKind::usage, "--workers must be positive");
        c.workers = *o.workers;
    }
    if (o.timeout_sec) c.timeout_sec = *o.timeout_sec;
    if (o.strict_loglik) c.holdout.strict = true;
    return c;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

/// Writes to `path`, or to stdout when the path is empty.
void emit(const std::string& path, const std::string& content) {
    if (path.empty())
        std::cout << content;
    else
        write_text(path, content);
}

std::string cell_dir(const RegimeInstance& inst) {
    std::ostringstream s;
    s << "n" << inst.triple.n << "_N" << inst.triple.trajectories << "_T" << inst.triple.steps << "/rep"
      << inst.replicate;
    return s.str();
}

int cmd_generate(const Options& o) {
    const auto c = load_config(o);
    const fs::path root = fs::path(c.output_dir) / c.regime.label;
    std::string manifest = "path\tseed\tdata_hash\ttruth_hash\n";
    for (const auto& inst : regime_datasets(c.regime, c.generator, c.replicates)) {
        const auto rel = cell_dir(inst);
        const auto dir = root / rel;
        const auto truth = dump(structure_to_json(inst.truth.structure));
        write_dataset(dir, inst.data);
        write_text(dir / "truth.json", truth);
        write_text(dir / "params.json", dump(params_to_json(inst.truth.params)));
        manifest += rel + "\t" + std::to_string(inst.seed) + "\t" + content_hash(dataset_csv(inst.data)) + "\t" +
                    content_hash(truth) + "\n";
    }
    write_text(root / "manifest.tsv", manifest);
    std::cout << manifest;
    return 0;
}

/// Learner document from --learner, an optional --config file, and --set key=value overrides.
LearnerSpec learner_from_options(const Options& o) {
    if (o.learner.empty()) fail(ErrorKind::usage, "--learner is required");
    (void)learner_spec(o.learner);  // usage error listing valid names
    if (!o.config.empty() && o.sets.empty()) {
        const auto text = read_text(o.config);
        auto j = parse_json(text, o.config);
        if (j.is_object() && (!j.contains("name") || j["name"] == o.learner)) {
            if (!j.contains("name")) {
                j["name"] = o.learner;
                return parse_learner_document(j.dump(2), o.config);
            }
            return parse_learner_document(text, o.config);
        }
    }
    nlohmann::ordered_json doc = nlohmann::ordered_json::object();
    if (!o.config.empty()) doc = nlohmann::ordered_json::parse(read_text(o.config));
    doc["name"] = o.learner;
    for (const auto& kv : o.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) fail(ErrorKind::usage, "--set expects key=value, got '" + kv + "'");
        // Dotted keys address nested objects: max_parents.total=2.
        auto* slot = &doc;
        std::string key = kv.substr(0, eq);
        for (auto dot = key.find('.'); dot != std::string::npos; dot = key.find('.')) {
            slot = &(*slot)[key.substr(0, dot)];
            if (!slot->is_object()) *slot = nlohmann::ordered_json::object();
            key = key.substr(dot + 1);
        }
        const auto value = kv.substr(eq + 1);
        try {
            (*slot)[key] = nlohmann::ordered_json::parse(value);
        } catch (const nlohmann::json::exception&) {
            (*slot)[key] = value;
        }
    }
    return parse_learner_document(doc.dump(2), "--set");
}

int cmd_learn(const Options& o) {
    if (o.data.empty()) fail(ErrorKind::usage, "--data is required");
    const auto spec = learner_from_options(o);
    const auto data = read_dataset(o.data);
    Deadline deadline;
    if (o.timeout_sec && *o.timeout_sec > 0)
        deadline = Deadline(std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(*o.timeout_sec)));
    const auto report = run_learner(spec, data, deadline, o.seed.value_or(0));
    emit(o.out, dump(report_to_json(report)));
    return 0;
}

ReversalCost reversal(std::size_t cost) {
    if (cost != 1 && cost != 2) fail(ErrorKind::usage, "--reversal-cost must be 1 or 2");
    return cost == 1 ? ReversalCost::one : ReversalCost::two;
}

int cmd_eval(const Options& o) {
    if (o.truth.empty() || o.report.empty()) fail(ErrorKind::usage, "--truth and --report are required");
    const auto truth = structure_from_json(parse_json(read_text(o.truth), o.truth));
    const auto report = report_from_json(parse_json(read_text(o.report), o.report));
    const auto universe = common_universe(report.structure, truth);
    const auto scores = edge_scores(report, universe);
    const auto br = auroc_breakdown(scores, truth, universe);

    Json j;
    j["shd"] = shd(report.structure, truth, reversal(o.reversal_cost));
    j["auroc"] = br.overall.value;
    j["auroc_degenerate"] = br.overall.degenerate;
    Json per = Json::object();
    for (const auto& [cls, r] : br.per_class)
        per[to_string(cls)] = Json{{"auroc", r.value}, {"degenerate", r.degenerate}};
    j["auroc_by_class"] = std::move(per);
    if (!o.data.empty()) {
        HoldoutOptions h;
        h.strict = o.strict_loglik;
        const auto data = read_dataset(o.data);
        const auto r = holdout_loglik(temporal_split(data, h.fraction), report.structure, h);
        j["train_ll"] = std::isfinite(r.train_ll) ? Json(r.train_ll) : Json(format_double(r.train_ll));
        j["test_ll"] = std::isfinite(r.test_ll) ? Json(r.test_ll) : Json(format_double(r.test_ll));
        j["train_transitions"] = r.train_transitions;
        j["test_transitions"] = r.test_transitions;
    }
    emit(o.out.empty() ? "" : o.out, dump(j));
    return 0;
}

int cmd_benchmark(const Options& o) {
    const auto c = load_config(o);
    const auto result = run_benchmark(benchmark_config(c));
    const auto csv = benchmark_csv(result, c.record_wall_time);
    const auto table = benchmark_table(result);
    const fs::path dir(c.output_dir);
    write_text(dir / "results.csv", csv);
    write_text(dir / "table.txt", table);
    std::cout << table;
    return 0;
}

std::vector<ParentTag> parse_parents(const std::string& text) {
    std::vector<ParentTag> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find(',', pos);
        if (end == std::string::npos) end = text.size();
        const auto item = text.substr(pos, end - pos);
        pos = end + 1;
        if (item.empty()) continue;
        const auto open = item.find('(');
        if (open == std::string::npos || item.back() != ')')
            fail(ErrorKind::usage, "parent '" + item + "' must look like inter(0), intra(1), auto(2) or static(0)");
        const auto kind = item.substr(0, open);
        const auto idx_text = item.substr(open + 1, item.size() - open - 2);
        std::size_t idx = 0;
        try {
            std::size_t used = 0;
            idx = std::stoul(idx_text, &used);
            if (used != idx_text.size()) throw std::invalid_argument(idx_text);
        } catch (const std::exception&) {
            fail(ErrorKind::usage, "bad index in parent '" + item + "'");
        }
        ParentTag::Kind k;
        if (kind == "inter")
            k = ParentTag::Kind::inter;
        else if (kind == "intra")
            k = ParentTag::Kind::intra;
        else if (kind == "auto")
            k = ParentTag::Kind::auto_lag;
        else if (kind == "static")
            k = ParentTag::Kind::static_var;
        else
            fail(ErrorKind::usage, "unknown parent kind '" + kind + "'");
        out.push_back({k, idx});
    }
    return out;
}

int cmd_score(const Options& o) {
    if (o.data.empty()) fail(ErrorKind::usage, "--data is required");
    const auto data = read_dataset(o.data);
    const auto kind = score_kind_from_string(o.score);
    ScoreOptions opts;
    opts.dirichlet.ess = o.ess;
    ScoreCache cache(opts);
    if (!o.structure.empty()) {
        const auto s = structure_from_json(parse_json(read_text(o.structure), o.structure));
        const double total = structure_score(cache, data, s, kind);
        std::ostringstream line;
        line << "total\t\t" << to_string(kind) << '\t' << std::setprecision(17) << total << '\n';
        std::cout << cache.dump() << line.str();
        return 0;
    }
    if (!o.node) fail(ErrorKind::usage, "give --structure, or --node with optional --parents");
    if (*o.node >= data.n_x()) fail(ErrorKind::range, "--node is out of range");
    cache.get(data, make_family(*o.node, parse_parents(o.parents)), kind);
    std::cout << cache.dump();
    return 0;
}

int cmd_check(const Options& o) {
    bool any = false;
    std::optional<TrajectoryDataset> data;
    if (!o.config.empty()) {
        const auto c = load_experiment(o.config);
        std::cout << "config: ok (" << c.learners.size() << " learners, " << c.regime.triples.size()
                  << " triples, " << c.replicates << " replicates)\n";
        any = true;
    }
    if (!o.data.empty()) {
        data = read_dataset(o.data);
        data->validate();
        std::cout << "data: ok (" << (data->is_discrete() ? "discrete" : "continuous") << ", n_x=" << data->n_x()
                  << ", n_z=" << data->n_z() << ", N=" << data->trajectories() << ", T=" << data->steps() << ")\n";
        any = true;
    }
    if (!o.structure.empty()) {
        const auto s = structure_from_json(parse_json(read_text(o.structure), o.structure));
        if (data && (s.n_x != data->n_x() || s.n_z != data->n_z()))
            fail(ErrorKind::dimension, "structure and data disagree on the number of variables");
        std::cout << "structure: ok (" << s.edge_count() << " edges)\n";
        any = true;
    }
    if (!o.params.empty()) {
        const auto p = params_from_json(parse_json(read_text(o.params), o.params));
        if (data) p.validate(data->x_arities(), data->z_arities());
        std::cout << "params: ok (" << p.nodes.size() << " nodes)\n";
        any = true;
    }
    if (!any) fail(ErrorKind::usage, "nothing to check: give --config, --data, --structure or --params");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dynamic Bayesian network structure learning"};
    app.require_subcommand(1);
    Options o;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "Experiment (or learner) JSON");
        sub->add_option("--seed", o.seed, "Seed override");
        sub->add_option("--out", o.out, "Output directory or file");
        sub->add_option("--workers", o.workers, "Worker threads for benchmark cells");
        sub->add_option("--timeout-sec", o.timeout_sec, "Per-cell (or per-run) time limit; 0 disables");
        sub->add_flag("--strict-loglik", o.strict_loglik, "Plain MLE on train; unseen test configurations give -inf");
    };

    auto* gen = app.add_subcommand("generate", "Sample truth structures, parameters and datasets");
    add_common(gen);
    auto* learn = app.add_subcommand("learn", "Run a learner on a dataset and write its report");
    add_common(learn);
    learn->add_option("--data", o.data, "Dataset directory or data.csv");
    learn->add_option("--learner", o.learner, "exact, hillclimb, dynotears or bounded");
    learn->add_option("--set", o.sets, "Hyperparameter override key=value (repeatable)");
    auto* ev = app.add_subcommand("eval", "SHD, AUROC and hold-out log-likelihood of a report");
    add_common(ev);
    ev->add_option("--truth", o.truth, "Truth structure JSON");
    ev->add_option("--report", o.report, "Learner report JSON");
    ev->add_option("--data", o.data, "Dataset for the hold-out log-likelihood");
    ev->add_option("--reversal-cost", o.reversal_cost, "Cost of a reversed intra edge (1 or 2)");
    auto* bench = app.add_subcommand("benchmark", "Run the regime x learner x replicate sweep");
    add_common(bench);
    auto* score = app.add_subcommand("score", "Family scores of a structure or a single family");
    add_common(score);
    score->add_option("--data", o.data, "Dataset directory or data.csv");
    score->add_option("--structure", o.structure, "Structure JSON");
    score->add_option("--node", o.node, "Child node (0-based)");
    score->add_option("--parents", o.parents, "Parents, e.g. inter(0),intra(2),auto(2),static(0)");
    score->add_option("--score", o.score, "ll, aic, aicc, bic, bde or bge");
    score->add_option("--ess", o.ess, "Equivalent sample size for bde");
    auto* check = app.add_subcommand("check", "Validate a config, dataset, structure or parameter file");
    add_common(check);
    check->add_option("--data", o.data, "Dataset directory or data.csv");
    check->add_option("--structure", o.structure, "Structure JSON");
    check->add_option("--params", o.params, "Parameter JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed()) return cmd_generate(o);
        if (learn->parsed()) return cmd_learn(o);
        if (ev->parsed()) return cmd_eval(o);
        if (bench->parsed()) return cmd_benchmark(o);
        if (score->parsed()) return cmd_score(o);
        if (check->parsed()) return cmd_check(o);
    } catch (const Error& e) {
        std::cerr << "dbn: " << to_string(e.kind()) << ": " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "dbn: schema error: " << e.what() << "\n";
        return exit_code(ErrorKind::schema);
    } catch (const std::exception& e) {
        std::cerr << "dbn: error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
