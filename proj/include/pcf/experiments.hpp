#pragma once
#include <string>

#include "json.hpp"
#include "pcf/cone.hpp"

namespace pcf {

using json = nlohmann::json;

struct ExperimentResult {
    json summary;
    int exit_code = 0;  // 0 ok, 3 singularity, 4 a check failed
};

// Validates the whole config first (ValidationError names the field path), then runs it and
// writes CSV series, snapshots and summary.json under out_root / config.output.
ExperimentResult run_experiment(const json& config, const std::string& out_root);
// validation only
void validate_config(const json& config);

ConeProblem cone_problem_from_json(const json& j, const std::string& path = "config.problem");
json cone_report(const ConeProblem& p);
json describe_model(const std::string& name);

std::string output_root();  // $PCFLAB_OUT or ./pcflab_out

}  // namespace pcf
