// nctorus: experiment runner and acceptance suite.
//
//   nctorus run <config.json> [--out DIR] [--threads N]
//   nctorus verify-all [--filter=MODULE] [--out DIR] [--threads N]
//
// Exit status: 0 when every check passes, 2 when a threshold check fails,
// 1 on any error (with a one-line JSON trailer on stderr).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "nctorus/experiments.hpp"

namespace fs = std::filesystem;
using namespace nctorus;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitError = 1;
constexpr int kExitFail = 2;

const std::vector<std::string> kModules = {"lattice", "nctorus", "covering", "moyal", "periodize", "cli"};

int report_error(const std::string& type, const std::string& message) {
    std::cerr << "error: " << type << ": " << message << "\n";
    std::cerr << json{{"error", {{"type", type}, {"message", message}}}}.dump() << "\n";
    return kExitError;
}

void print_checks(const std::vector<Check>& checks, const std::string& prefix) {
    for (const auto& c : checks)
        std::printf("%s%-34s %-24s %-2s %-24s %s\n", prefix.c_str(), c.name.c_str(), format_double(c.value).c_str(),
                    c.relation.c_str(), format_double(c.threshold).c_str(), c.pass ? "PASS" : "FAIL");
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return json::parse(ss.str());
    } catch (const json::parse_error& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
}

fs::path resolve_output(const std::string& out_dir, const std::string& output_path) {
    const fs::path p(output_path);
    if (p.is_absolute() || out_dir.empty()) return p;
    return fs::path(out_dir) / p;
}

int cmd_run(const std::string& config_path, const std::string& out_dir, unsigned threads) {
    const ExperimentConfig cfg = parse_config(read_json_file(config_path));
    const ExperimentResult r = run_experiment(cfg, threads);
    const fs::path csv = resolve_output(out_dir, cfg.output_path);
    write_atomic(csv, r.table.str());
    fs::path summary_path = csv;
    summary_path.replace_extension(".summary.json");
    json summary = {{"kind", r.kind}, {"seed", cfg.seed}, {"params", cfg.params}, {"checks", checks_to_json(r.checks)},
                    {"summary", r.summary}, {"pass", r.pass()}, {"csv", csv.filename().string()}};
    write_atomic(summary_path, summary.dump(2) + "\n");

    std::printf("%s: %zu rows -> %s\n", r.kind.c_str(), r.table.rows(), csv.string().c_str());
    print_checks(r.checks, "  ");
    std::printf("%s\n", r.pass() ? "PASS" : "FAIL");
    return r.pass() ? kExitPass : kExitFail;
}

/// Runs the criteria and returns their results in id order.
std::vector<std::pair<const Criterion*, CriterionRun>> run_criteria(const std::vector<Criterion>& criteria,
                                                                    const std::string& filter, unsigned threads) {
    std::vector<std::pair<const Criterion*, CriterionRun>> out;
    for (const auto& c : criteria)
        if (filter.empty() || filter == c.module) out.emplace_back(&c, run_criterion(c, threads));
    return out;
}

int cmd_verify_all(const std::string& filter, const std::string& out_dir, unsigned threads) {
    if (!filter.empty() && std::find(kModules.begin(), kModules.end(), filter) == kModules.end())
        throw ConfigError("unknown module '" + filter + "' for --filter");
    const fs::path dir = out_dir.empty() ? fs::path("nctorus_out") : fs::path(out_dir);
    const auto criteria = acceptance_criteria();
    const bool want_determinism = filter.empty() || filter == "cli";
    // determinism alone still needs something to compare, so it reruns everything
    const auto first = run_criteria(criteria, filter == "cli" ? std::string() : filter, threads);

    CsvTable summary({"criterion", "module", "title", "check", "value", "relation", "threshold", "status"});
    bool all_pass = true;
    std::printf("%-4s %-10s %-34s %-24s %-2s %-24s %s\n", "id", "module", "check", "value", "", "threshold", "status");
    auto emit = [&](int id, const std::string& module, const std::string& title, const std::vector<Check>& checks,
                    double seconds) {
        for (const auto& c : checks) {
            summary.add_row({static_cast<std::int64_t>(id), module, title, c.name, c.value, c.relation, c.threshold,
                             std::string(c.pass ? "PASS" : "FAIL")});
            all_pass = all_pass && c.pass;
        }
        print_checks(checks, [&] {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%-4d %-10s ", id, module.c_str());
            return std::string(buf);
        }());
        std::printf("     %-10s %s (%.2f s)\n", "", title.c_str(), seconds);
    };

    for (const auto& [c, run] : first) {
        if (filter == "cli") break;
        for (const auto& [name, text] : run.artifacts) write_atomic(dir / name, text);
        emit(c->id, c->module, c->title, run.checks, run.seconds);
    }

    if (want_determinism) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto second = run_criteria(criteria, std::string(), threads);
        std::int64_t files = 0, differing = 0;
        for (std::size_t i = 0; i < first.size(); ++i)
            for (std::size_t a = 0; a < first[i].second.artifacts.size(); ++a) {
                ++files;
                if (first[i].second.artifacts[a] != second[i].second.artifacts[a]) ++differing;
            }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        emit(11, "cli", "determinism of artifacts",
             {at_most("differing_artifacts", static_cast<double>(differing), 0.0),
              at_least("compared_artifacts", static_cast<double>(files), 1.0)},
             seconds);
    }

    write_atomic(dir / "summary.csv", summary.str());
    std::printf("%s (artifacts in %s)\n", all_pass ? "ALL PASS" : "SOME CHECKS FAILED", dir.string().c_str());
    return all_pass ? kExitPass : kExitFail;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"nctorus: noncommutative torus experiments"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string out_dir;
    int threads = 0;
    app.add_option("--out", out_dir, "directory for CSV and JSON artifacts");
    app.add_option("--threads", threads, "worker threads (default: NCTORUS_THREADS or 1)")->check(CLI::NonNegativeNumber);

    std::string config_path;
    auto* run = app.add_subcommand("run", "run one experiment from a JSON config");
    run->add_option("config", config_path, "experiment config (JSON)")->required();

    std::string filter;
    auto* verify = app.add_subcommand("verify-all", "run the acceptance criteria");
    verify->add_option("--filter", filter, "only criteria of this module");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        return report_error("UsageError", e.what());
    }

    try {
        const unsigned n = resolve_threads(threads);
        if (*run) return cmd_run(config_path, out_dir, n);
        return cmd_verify_all(filter, out_dir, n);
    } catch (const Error& e) {
        return report_error(e.kind(), e.what());
    } catch (const json::exception& e) {
        return report_error("ConfigError", e.what());
    } catch (const std::exception& e) {
        return report_error("InternalError", e.what());
    }
}
