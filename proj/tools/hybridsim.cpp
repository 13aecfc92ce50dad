// hybridsim command line.
//
// Exit codes:
//   0  success
//   2  usage error
//   3  scenario or policy failed validation
//   4  runtime failure inside the simulator
//   5  replay-check or report --check found a difference
//   6  file I/O failure

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hybridsim/artifacts.hpp"
#include "hybridsim/error.hpp"
#include "hybridsim/live.hpp"
#include "hybridsim/scenario.hpp"
#include "hybridsim/simulation.hpp"

namespace fs = std::filesystem;
using namespace hybridsim;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kUsage = 2, kConfig = 3, kRuntime = 4, kMismatch = 5, kIo = 6 };

fs::path default_out(const std::string& scenario_name) {
    const char* env = std::getenv("HYBRIDSIM_OUT");
    return fs::path(env && *env ? env : "out") / scenario_name;
}

int cmd_run(const std::string& scenario_path, std::optional<std::string> out_dir, std::optional<std::uint64_t> seed,
            bool quiet) {
    Scenario s = load_scenario(scenario_path);
    if (seed) s.seed = *seed;
    const fs::path out = out_dir ? fs::path(*out_dir) : default_out(s.name);
    Simulation sim(std::move(s));
    const RunData data = sim.run();
    write_artifacts(out, data);
    if (!quiet) std::cout << render_tables(summarize(data));
    std::cout << "artifacts: " << out.string() << "\n";
    return kOk;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int cmd_report(const std::string& dir, bool check, bool as_json) {
    const RunData run = load_artifacts(dir);
    const std::string regenerated = summary_text(run);
    if (check) {
        const std::string saved = read_file(fs::path(dir) / "summary.json");
        if (saved != regenerated) {
            std::cerr << "summary.json differs from the summary regenerated from the artifacts\n";
            return kMismatch;
        }
        std::cout << "summary.json matches the artifacts\n";
        return kOk;
    }
    if (as_json)
        std::cout << regenerated;
    else
        std::cout << render_tables(summarize(run));
    return kOk;
}

fs::path trace_path(const fs::path& p) { return fs::is_directory(p) ? p / "trace.tsv" : p; }

int report_diff(const TraceDiff& d, const std::string& a, const std::string& b) {
    if (d.identical) {
        std::cout << "identical\n";
        return kOk;
    }
    std::cout << "traces differ";
    if (d.line > 0) std::cout << " at line " << d.line;
    std::cout << "\n  " << a << ": " << d.a << "\n  " << b << ": " << d.b << "\n";
    return kMismatch;
}

int cmd_replay_check(const std::string& a, const std::optional<std::string>& b) {
    if (b) return report_diff(compare_traces(trace_path(a), trace_path(*b)), a, *b);

    // Single scenario: run it twice and compare the traces byte for byte.
    std::string traces[2];
    for (auto& t : traces) {
        Simulation sim(load_scenario(a));
        sim.run();
        std::ostringstream out;
        write_trace(out, sim.engine().trace());
        t = out.str();
    }
    if (traces[0] == traces[1]) {
        std::cout << "identical (" << std::count(traces[0].begin(), traces[0].end(), '\n') << " events)\n";
        return kOk;
    }
    std::istringstream ia(traces[0]), ib(traces[1]);
    std::string la, lb;
    TraceDiff d;
    d.identical = false;
    for (std::size_t n = 1;; ++n) {
        const bool ga = static_cast<bool>(std::getline(ia, la)), gb = static_cast<bool>(std::getline(ib, lb));
        if (!ga && !gb) break;
        if (ga != gb || la != lb) {
            d = {false, n, ga ? la : "<end>", gb ? lb : "<end>"};
            break;
        }
    }
    return report_diff(d, "run 1", "run 2");
}

RetentionPolicy parse_policy_arg(const std::string& arg) {
    json j;
    if (fs::exists(arg)) {
        j = json::parse(read_file(arg), nullptr, false);
    } else {
        j = json::parse(arg, nullptr, false);
    }
    if (j.is_discarded() || !j.is_object()) throw ConfigError({"policy: expected a JSON object or a file holding one"});
    std::vector<std::string> problems;
    for (const auto& [k, _] : j.items())
        if (k != "keep_last_k" && k != "min_age_ms") problems.push_back("policy." + k + ": unknown field");
    RetentionPolicy p;
    if (j.contains("keep_last_k")) {
        if (!j["keep_last_k"].is_number_integer() || j["keep_last_k"].get<int>() < 0)
            problems.push_back("policy.keep_last_k: expected a non-negative integer");
        else
            p.keep_last_k_per_lineage = j["keep_last_k"].get<int>();
    }
    if (j.contains("min_age_ms")) {
        if (!j["min_age_ms"].is_number_integer())
            problems.push_back("policy.min_age_ms: expected integer");
        else
            p.min_age_ms = j["min_age_ms"].get<SimTime>();
    }
    if (!problems.empty()) throw ConfigError(problems);
    return p;
}

int cmd_gc_plan(const std::string& ledger, const std::string& policy_arg, std::optional<SimTime> now) {
    const auto policy = parse_policy_arg(policy_arg);
    const auto checkpoints = load_checkpoints(ledger);
    SimTime at = 0;
    for (const auto& c : checkpoints) at = std::max(at, c.created);
    if (now) at = *now;
    const auto plan = gc_plan(checkpoints, policy, at);
    json out{{"now_ms", at},
             {"checkpoints", checkpoints.size()},
             {"delete", plan.delete_ids},
             {"reclaimed_gb", plan.reclaimed_gb}};
    std::cout << out.dump(2) << "\n";
    return kOk;
}

int cmd_serve(const std::string& scenario_path, const std::string& host, int port) {
    const Scenario s = load_scenario(scenario_path);
    const auto start = std::chrono::steady_clock::now();
    LiveService service(s, [start] {
        return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    });
    std::cerr << "serving " << s.name << " on " << host << ":" << port << "\n";
    if (!serve(service, host, port)) {
        std::cerr << "cannot listen on " << host << ":" << port << "\n";
        return kIo;
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hybrid HPC batch + cloud-native service plane simulator"};
    app.require_subcommand(1);

    std::string scenario, out_dir_s, dir, trace_a, trace_b, ledger, policy, host = "127.0.0.1";
    std::uint64_t seed = 0;
    SimTime now = 0;
    int port = 8080;
    bool quiet = false, check = false, as_json = false;

    auto* run = app.add_subcommand("run", "Run a scenario to its horizon and write artifacts");
    run->add_option("scenario", scenario, "Scenario file")->required()->check(CLI::ExistingFile);
    auto* out_opt = run->add_option("--out", out_dir_s, "Artifact directory (default $HYBRIDSIM_OUT/<name> or out/<name>)");
    auto* seed_opt = run->add_option("--seed", seed, "Override the scenario seed");
    run->add_flag("-q,--quiet", quiet, "Do not print the tables");

    auto* report = app.add_subcommand("report", "Regenerate the summary from an artifact directory");
    report->add_option("dir", dir, "Artifact directory")->required()->check(CLI::ExistingDirectory);
    report->add_flag("--check", check, "Exit 5 unless summary.json matches the regenerated summary");
    report->add_flag("--json", as_json, "Print summary JSON instead of tables");

    auto* replay = app.add_subcommand("replay-check", "Compare two traces, or run one scenario twice and compare");
    replay->add_option("a", trace_a, "Trace file, artifact directory or scenario file")->required();
    auto* b_opt = replay->add_option("b", trace_b, "Second trace file or artifact directory");

    auto* gc = app.add_subcommand("gc-plan", "Plan checkpoint garbage collection");
    gc->add_option("ledger", ledger, "checkpoints.jsonl")->required()->check(CLI::ExistingFile);
    gc->add_option("policy", policy, "Retention policy as JSON text or a JSON file")->required();
    auto* now_opt = gc->add_option("--now", now, "Evaluation time in ms (default: newest checkpoint)");

    auto* srv = app.add_subcommand("serve", "Serve the gateway and bridge over HTTP");
    srv->add_option("scenario", scenario, "Scenario file")->required()->check(CLI::ExistingFile);
    srv->add_option("--host", host, "Bind address");
    srv->add_option("--port", port, "Port")->check(CLI::Range(1, 65535));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*run)
            return cmd_run(scenario, *out_opt ? std::optional(out_dir_s) : std::nullopt,
                           *seed_opt ? std::optional(seed) : std::nullopt, quiet);
        if (*report) return cmd_report(dir, check, as_json);
        if (*replay) return cmd_replay_check(trace_a, *b_opt ? std::optional(trace_b) : std::nullopt);
        if (*gc) return cmd_gc_plan(ledger, policy, *now_opt ? std::optional(now) : std::nullopt);
        if (*srv) return cmd_serve(scenario, host, port);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error:\n";
        for (const auto& p : e.problems()) std::cerr << "  " << p << "\n";
        return kConfig;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return kRuntime;
    }
    return kUsage;
}
