#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "pcf/acceptance.hpp"
#include "pcf/errors.hpp"
#include "pcf/experiments.hpp"
#include "pcf/homogeneous.hpp"
#include "pcf/io.hpp"

namespace fs = std::filesystem;
using pcf::json;

namespace {

enum Exit { kOk = 0, kInternal = 1, kValidation = 2, kSingularity = 3, kCriterion = 4 };

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw pcf::ValidationError(path + ": cannot open");
    try {
        return json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw pcf::ValidationError(path + ": " + e.what());
    }
}

int cmd_run(const std::string& path, bool dry) {
    json cfg = load_config(path);
    if (!cfg.contains("output") && cfg.is_object()) cfg["output"] = fs::path(path).stem().string();
    if (dry) {
        pcf::validate_config(cfg);
        std::cout << "config ok\n";
        return kOk;
    }
    auto r = pcf::run_experiment(cfg, pcf::output_root());
    fs::path dir = fs::path(pcf::output_root()) / cfg["output"].get<std::string>();
    std::cout << r.summary["experiment"].get<std::string>() << ": " << r.summary["status"].get<std::string>() << "  ("
              << dir.string() << ")\n";
    for (auto& c : r.summary["checks"])
        std::cout << "  " << (c["pass"].get<bool>() ? "pass" : "FAIL") << "  " << c["name"].get<std::string>() << " = "
                  << pcf::format_double(c["value"].get<double>()) << "  (tol "
                  << pcf::format_double(c["tolerance"].get<double>()) << ")\n";
    if (r.summary.contains("results") && r.summary["results"].contains("verdict"))
        std::cout << "  verdict: " << r.summary["results"]["verdict"].get<std::string>() << "\n";
    if (r.summary.contains("singularity"))
        std::cerr << "singularity: " << r.summary["singularity"]["message"].get<std::string>() << "\n";
    return r.exit_code;
}

int cmd_verify(const std::vector<int>& only) {
    fs::path dir = fs::path(pcf::output_root()) / "verify";
    fs::create_directories(dir);
    json matrix = json::array();
    int failed = 0;
    pcf::run_suite(only, [&](const pcf::CriterionResult& r) {
        std::printf("%2d  %-26s %s  %7.1fs\n", r.id, r.name.c_str(), r.pass ? "PASS" : "FAIL", r.seconds);
        std::fflush(stdout);
        json m = json::object();
        for (auto& [k, v] : r.metrics) m[k] = v;
        matrix.push_back({{"id", r.id}, {"name", r.name}, {"anchor", r.anchor}, {"pass", r.pass}, {"metrics", m},
                          {"note", r.note}, {"seconds", r.seconds}});
        if (!r.pass) ++failed;
    });
    std::ofstream(dir / "verify.json") << json{{"criteria", matrix}, {"failed", failed}}.dump(2) << '\n';
    return failed ? kCriterion : kOk;
}

int cmd_cone(const std::string& path) {
    json cfg = load_config(path);
    const json& p = cfg.contains("problem") ? cfg["problem"] : cfg;
    auto prob = pcf::cone_problem_from_json(p, cfg.contains("problem") ? "config.problem" : "config");
    std::cout << pcf::cone_report(prob).dump(2) << '\n';
    return kOk;
}

int cmd_describe(const std::string& name) {
    if (name == "list") {
        for (auto& n : pcf::model_names()) std::cout << n << '\n';
        return kOk;
    }
    std::cout << pcf::describe_model(name).dump(2) << '\n';
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pcflab: pluriclosed flow laboratory"};
    app.require_subcommand(1);

    std::string config;
    bool dry = false;
    auto* run = app.add_subcommand("run", "run one experiment config");
    run->add_option("config", config, "JSON config file")->required();
    run->add_flag("--dry-run", dry, "validate the config only");

    std::vector<int> only;
    auto* verify = app.add_subcommand("verify", "run the acceptance criteria");
    verify->add_option("--only", only, "criterion ids")->check(CLI::Range(1, 11));

    std::string cone_cfg;
    auto* cone = app.add_subcommand("cone", "existence time from curve data");
    cone->add_option("config", cone_cfg, "JSON problem file")->required();

    std::string model;
    auto* describe = app.add_subcommand("describe", "print a homogeneous model ('list' for names)");
    describe->add_option("model", model)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }

    try {
        if (*run) return cmd_run(config, dry);
        if (*verify) return cmd_verify(only);
        if (*cone) return cmd_cone(cone_cfg);
        if (*describe) return cmd_describe(model);
    } catch (const pcf::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return kValidation;
    } catch (const pcf::SingularityError& e) {
        std::cerr << "singularity: " << e.what() << '\n';
        return kSingularity;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInternal;
    }
    return kInternal;
}
