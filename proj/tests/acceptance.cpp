// One line per acceptance criterion; exit status 1 if any fails.
#include <cstdio>
#include <cstdlib>
#include <string>

#include "pcf/acceptance.hpp"

int main(int argc, char** argv) {
    std::vector<int> ids;
    for (int i = 1; i < argc; ++i) ids.push_back(std::atoi(argv[i]));
    int failed = 0;
    pcf::run_suite(ids, [&](const pcf::CriterionResult& r) {
        std::printf("criterion %2d  %-26s %s  (%.1fs)", r.id, r.name.c_str(), r.pass ? "PASS" : "FAIL", r.seconds);
        for (auto& [k, v] : r.metrics) std::printf("  %s=%.3g", k.c_str(), v);
        if (!r.note.empty()) std::printf("  note: %s", r.note.c_str());
        std::printf("\n");
        std::fflush(stdout);
        if (!r.pass) ++failed;
    });
    std::printf("%d criteria failed\n", failed);
    return failed ? 1 : 0;
}
