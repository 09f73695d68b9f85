#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "dbn/eval.hpp"
#include "dbn/learn.hpp"
#include "dbn/simulate.hpp"

namespace dbn {

/// Valid learner names, in the order they are listed in messages.
const std::vector<std::string>& learner_names();

struct LearnerSpec {
    std::string name;   // exact, hillclimb, dynotears, bounded
    std::string label;  // column label in tables; defaults to the name
    SearchConfig search;
    ContinuousConfig continuous;
    BoundedConfig bounded;
};

/// Defaults for a named learner; usage error listing the valid names otherwise.
LearnerSpec learner_spec(const std::string& name);

/// One learner object ({"name": ..., hyperparameters}) without grid expansion.
LearnerSpec parse_learner_document(const std::string& text, const std::string& source = "<learner>");

/// A generator object ({"family": ..., ...}) as in the "generator" field of an experiment.
GeneratorConfig parse_generator_document(const std::string& text, const std::string& source = "<generator>");

/// Runs the learner. The seed overrides the configured one for seeded learners.
LearnerReport run_learner(const LearnerSpec& spec, const TrajectoryDataset& data, const Deadline& deadline,
                          std::uint64_t seed);

struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::string output_dir = "out";
    RegimeSpec regime;
    GeneratorConfig generator;
    std::vector<LearnerSpec> learners;
    std::size_t replicates = kDefaultReplicates;
    double timeout_sec = 0.0;
    std::size_t workers = 1;
    HoldoutOptions holdout;
    ReversalCost reversal = ReversalCost::two;
    bool record_wall_time = true;
};

/// Line of each JSON pointer ("/learners/0/name") in `text`: the line of the key for object
/// members, of the value for array elements. "" maps to the document start.
std::map<std::string, std::size_t> json_pointer_lines(const std::string& text);

/// Parses and validates an experiment document. Unknown keys, missing required fields
/// (regime, generator, learners), and wrong types raise schema errors of the form
/// "<source>:<line>: <message>". Numeric learner fields given as arrays expand into one learner
/// per combination.
ExperimentConfig parse_experiment(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_experiment(const std::filesystem::path& path);

BenchmarkConfig benchmark_config(const ExperimentConfig& config);

}  // namespace dbn
