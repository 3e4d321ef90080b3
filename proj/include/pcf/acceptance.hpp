#pragma once
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace pcf {

struct CriterionResult {
    int id = 0;
    std::string name;
    std::string anchor;  // the statement this check certifies
    bool pass = false;
    std::vector<std::pair<std::string, double>> metrics;
    std::string note;
    double seconds = 0;

    double metric(const std::string& key) const;
};

std::vector<int> criterion_ids();
std::string criterion_name(int id);
// throws ValidationError for an unknown id
CriterionResult run_criterion(int id);
// failures of one criterion do not stop the others
std::vector<CriterionResult> run_suite(const std::vector<int>& ids = {},
                                       const std::function<void(const CriterionResult&)>& on_result = {});

}  // namespace pcf
