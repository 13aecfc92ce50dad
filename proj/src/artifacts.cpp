#include "hybridsim/artifacts.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "hybridsim/error.hpp"

namespace hybridsim {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

template <class E, std::size_t N>
E parse_enum(std::string_view s, const E (&all)[N], const char* what) {
    for (E e : all)
        if (to_string(e) == s) return e;
    throw IoError(std::string("unknown ") + what + " '" + std::string(s) + "'");
}

constexpr JobState kJobStates[] = {JobState::Queued, JobState::Running, JobState::Completed, JobState::Cancelled};
constexpr ActionKind kActions[] = {ActionKind::Acquire, ActionKind::Release, ActionKind::None};
constexpr SandboxAction::Kind kSandboxKinds[] = {SandboxAction::Kind::Create, SandboxAction::Kind::Update,
                                                 SandboxAction::Kind::Delete, SandboxAction::Kind::Flag};
constexpr EventKind kEvents[] = {EventKind::RequestArrival,   EventKind::RequestComplete, EventKind::JobSubmit,
                                 EventKind::JobStart,         EventKind::JobEnd,          EventKind::NodeTransitionStep,
                                 EventKind::ScalePollTick,    EventKind::ReconcileTick,   EventKind::MaintenanceStart,
                                 EventKind::MaintenanceEnd,   EventKind::ReplicaReady};

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write " + p.string());
    return out;
}

std::ifstream open_in(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read " + p.string());
    return in;
}

template <class T>
void write_jsonl(const fs::path& p, const std::vector<T>& rows) {
    auto out = open_out(p);
    for (const auto& r : rows) out << to_json(r).dump() << '\n';
    if (!out) throw IoError("write failed: " + p.string());
}

template <class F>
void read_jsonl(const fs::path& p, F&& each) {
    auto in = open_in(p);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            each(json::parse(line));
        } catch (const json::exception& e) {
            throw IoError(p.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
}

json sandbox_json(const SandboxRecord& r) {
    return {{"project", r.project_id},
            {"repo", r.repo},
            {"reconciler_app", r.reconciler_app},
            {"namespace", r.namespace_ready},
            {"access_bindings", r.access_bindings}};
}

SandboxRecord sandbox_from_json(const json& j) {
    SandboxRecord r;
    r.project_id = j.at("project").get<std::string>();
    r.repo = j.at("repo").get<bool>();
    r.reconciler_app = j.at("reconciler_app").get<bool>();
    r.namespace_ready = j.at("namespace").get<bool>();
    r.access_bindings = j.at("access_bindings").get<std::set<std::string>>();
    return r;
}

ReconcileRecord reconcile_from_json(const json& j) {
    ReconcileRecord r;
    r.time = j.at("time").get<SimTime>();
    for (const auto& a : j.at("actions")) {
        SandboxAction s;
        s.kind = parse_enum(a.at("kind").get<std::string>(), kSandboxKinds, "sandbox action");
        s.project_id = a.at("project").get<std::string>();
        s.fields = a.at("fields").get<std::vector<std::string>>();
        s.target = sandbox_from_json(a.at("target"));
        r.actions.push_back(std::move(s));
    }
    return r;
}

TransitionLogEntry transition_from_json(const json& j) {
    return {j.at("time").get<SimTime>(), j.at("node_id").get<std::string>(), j.at("from").get<std::string>(),
            j.at("to").get<std::string>(), j.at("step").get<int>()};
}

DecisionLogEntry decision_from_json(const json& j) {
    DecisionLogEntry d;
    d.time = j.at("time").get<SimTime>();
    const auto& s = j.at("stats");
    d.stats.mean_queue_wait_ms = s.at("mean_queue_wait_ms").get<double>();
    d.stats.utilization = s.at("utilization").get<double>();
    d.stats.pending_replicas = s.at("pending_replicas").get<int>();
    d.action.time = d.time;
    d.action.kind = parse_enum(j.at("action").get<std::string>(), kActions, "action");
    d.action.node_id = j.at("node").get<std::string>();
    d.action.reason = j.at("reason").get<std::string>();
    return d;
}

json meta_json(const RunMeta& m) {
    return {{"scenario", m.scenario},
            {"seed", m.seed},
            {"horizon_ms", m.horizon_ms},
            {"units_per_gpu", m.units_per_gpu},
            {"unplanned_downtime", m.unplanned_downtime},
            {"failure_injection", m.failure_injection},
            {"deployment_deletions", m.deployment_deletions},
            {"slo_ttft_p99_ms", m.slo_ttft_p99_ms},
            {"retention", {{"keep_last_k", m.retention.keep_last_k_per_lineage}, {"min_age_ms", m.retention.min_age_ms}}}};
}

RunMeta meta_from_json(const json& j) {
    RunMeta m;
    m.scenario = j.at("scenario").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.horizon_ms = j.at("horizon_ms").get<SimTime>();
    m.units_per_gpu = j.at("units_per_gpu").get<std::int64_t>();
    m.unplanned_downtime = j.at("unplanned_downtime").get<int>();
    m.failure_injection = j.at("failure_injection").get<bool>();
    m.deployment_deletions = j.at("deployment_deletions").get<int>();
    m.slo_ttft_p99_ms = j.at("slo_ttft_p99_ms").get<SimTime>();
    m.retention.keep_last_k_per_lineage = j.at("retention").at("keep_last_k").get<int>();
    m.retention.min_age_ms = j.at("retention").at("min_age_ms").get<SimTime>();
    return m;
}

std::vector<std::vector<std::int64_t>> read_csv(const fs::path& p) {
    auto in = open_in(p);
    std::vector<std::vector<std::int64_t>> rows;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::int64_t> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stoll(cell));
            } catch (const std::exception&) {
                row.push_back(0);  // derived columns are recomputed, not read
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

json to_json(const ReconcileRecord& r) {
    json actions = json::array();
    for (const auto& a : r.actions)
        actions.push_back({{"kind", to_string(a.kind)},
                           {"project", a.project_id},
                           {"fields", a.fields},
                           {"target", sandbox_json(a.target)}});
    return {{"time", r.time}, {"actions", actions}};
}

json to_json(const RequestRecord& r) {
    return {{"id", r.id},
            {"key", r.key},
            {"project", r.project},
            {"model", r.model},
            {"arrival_ms", r.arrival},
            {"prompt_tokens", r.prompt_tokens},
            {"max_tokens", r.max_tokens},
            {"output_tokens", r.output_tokens},
            {"outcome", to_string(r.outcome)},
            {"dispatched_ms", r.dispatched},
            {"completed_ms", r.completed},
            {"queue_wait_ms", r.queue_wait_ms},
            {"ttft_ms", r.ttft_ms},
            {"itl_ms", r.itl_ms},
            {"e2el_ms", r.e2el_ms},
            {"replica", r.replica}};
}

RequestRecord request_from_json(const json& j) {
    RequestRecord r;
    r.id = j.at("id").get<std::string>();
    r.key = j.at("key").get<std::string>();
    r.model = j.at("model").get<std::string>();
    r.arrival = j.at("arrival_ms").get<SimTime>();
    r.prompt_tokens = j.at("prompt_tokens").get<Tokens>();
    r.max_tokens = j.at("max_tokens").get<Tokens>();
    r.output_tokens = j.at("output_tokens").get<Tokens>();
    // The remaining fields are results; a replayed trace may omit them.
    r.project = j.value("project", "");
    r.outcome = parse_outcome(j.value("outcome", "Admitted"));
    r.dispatched = j.value("dispatched_ms", SimTime{-1});
    r.completed = j.value("completed_ms", SimTime{-1});
    r.queue_wait_ms = j.value("queue_wait_ms", SimTime{0});
    r.ttft_ms = j.value("ttft_ms", SimTime{0});
    r.itl_ms = j.value("itl_ms", SimTime{0});
    r.e2el_ms = j.value("e2el_ms", SimTime{0});
    r.replica = j.value("replica", "");
    return r;
}

json to_json(const LedgerEntry& e) {
    return {{"time", e.time},         {"request_id", e.request_id},       {"project", e.project},
            {"key", e.key},           {"model", e.model},                 {"prompt_tokens", e.prompt_tokens},
            {"output_tokens", e.output_tokens}, {"credits", e.credits}};
}

LedgerEntry ledger_from_json(const json& j) {
    return {j.at("time").get<SimTime>(),        j.at("request_id").get<std::string>(),
            j.at("project").get<std::string>(), j.at("key").get<std::string>(),
            j.at("model").get<std::string>(),   j.at("prompt_tokens").get<Tokens>(),
            j.at("output_tokens").get<Tokens>(), j.at("credits").get<Credits>()};
}

json to_json(const TransitionLogEntry& e) {
    return {{"time", e.time}, {"node_id", e.node_id}, {"from", e.from}, {"to", e.to}, {"step", e.step}};
}

json to_json(const DecisionLogEntry& e) {
    return {{"time", e.time},
            {"stats",
             {{"mean_queue_wait_ms", e.stats.mean_queue_wait_ms},
              {"utilization", e.stats.utilization},
              {"pending_replicas", e.stats.pending_replicas}}},
            {"action", to_string(e.action.kind)},
            {"node", e.action.node_id},
            {"reason", e.action.reason}};
}

json to_json(const BatchJob& j) {
    json o = {{"id", j.id},
              {"project", j.project_id},
              {"nodes", j.nodes_requested},
              {"gpus_per_node", j.gpus_per_node},
              {"walltime_ms", j.walltime_estimate_ms},
              {"base_runtime_ms", j.base_runtime_ms},
              {"comm_class", to_string(j.comm_class)},
              {"path", j.path ? json(to_string(*j.path)) : json(nullptr)},
              {"origin", j.origin},
              {"state", to_string(j.state)},
              {"submit_ms", j.submit_time},
              {"start_ms", j.start_time},
              {"end_ms", j.end_time},
              {"allocation", j.allocation},
              {"allocation_path", to_string(j.allocation_path)},
              {"timed_out", j.timed_out}};
    return o;
}

BatchJob job_from_json(const json& o) {
    BatchJob j;
    j.id = o.at("id").get<JobId>();
    j.project_id = o.at("project").get<std::string>();
    j.nodes_requested = o.at("nodes").get<int>();
    j.gpus_per_node = o.at("gpus_per_node").get<int>();
    j.walltime_estimate_ms = o.at("walltime_ms").get<SimTime>();
    j.base_runtime_ms = o.at("base_runtime_ms").get<SimTime>();
    j.comm_class = parse_comm_class(o.at("comm_class").get<std::string>());
    if (!o.at("path").is_null()) j.path = parse_path_kind(o.at("path").get<std::string>());
    j.origin = o.at("origin").get<std::string>();
    j.state = parse_enum(o.at("state").get<std::string>(), kJobStates, "job state");
    j.submit_time = o.at("submit_ms").get<SimTime>();
    j.start_time = o.at("start_ms").get<SimTime>();
    j.end_time = o.at("end_ms").get<SimTime>();
    j.allocation = o.at("allocation").get<std::vector<std::string>>();
    j.allocation_path = parse_path_kind(o.at("allocation_path").get<std::string>());
    j.timed_out = o.at("timed_out").get<bool>();
    return j;
}

json to_json(const Checkpoint& c) {
    return {{"id", c.id},
            {"lineage_parent", c.lineage_parent ? json(*c.lineage_parent) : json(nullptr)},
            {"recipe_id", c.recipe_id},
            {"job_id", c.job_id},
            {"epoch", c.epoch},
            {"size_gb", c.size_gb},
            {"created_ms", c.created},
            {"referenced", c.referenced}};
}

Checkpoint checkpoint_from_json(const json& j) {
    Checkpoint c;
    c.id = j.at("id").get<std::string>();
    if (j.contains("lineage_parent") && !j.at("lineage_parent").is_null())
        c.lineage_parent = j.at("lineage_parent").get<std::string>();
    c.recipe_id = j.value("recipe_id", "");
    c.job_id = j.value("job_id", JobId{0});
    c.epoch = j.value("epoch", 0);
    c.size_gb = j.at("size_gb").get<double>();
    c.created = j.at("created_ms").get<SimTime>();
    c.referenced = j.value("referenced", false);
    return c;
}

std::string summary_text(const RunData& run) { return to_json(summarize(run)).dump(2) + "\n"; }

void write_artifacts(const fs::path& dir, const RunData& run) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

    {
        auto out = open_out(dir / "trace.tsv");
        write_trace(out, run.trace);
    }
    write_jsonl(dir / "requests.jsonl", run.requests);
    write_jsonl(dir / "ledger.jsonl", run.ledger);
    write_jsonl(dir / "transitions.jsonl", run.transitions);
    write_jsonl(dir / "decisions.jsonl", run.decisions);
    write_jsonl(dir / "jobs.jsonl", run.jobs);
    write_jsonl(dir / "checkpoints.jsonl", run.checkpoints);
    write_jsonl(dir / "reconcile.jsonl", run.reconcile);
    {
        auto out = open_out(dir / "utilization.csv");
        out << "time_ms,busy_units_ms,capacity_units_ms,utilization\n";
        char buf[128];
        for (const auto& u : run.utilization) {
            const double f = u.capacity > 0 ? static_cast<double>(u.busy) / static_cast<double>(u.capacity) : 0.0;
            std::snprintf(buf, sizeof buf, "%lld,%lld,%lld,%.6f\n", static_cast<long long>(u.time),
                          static_cast<long long>(u.busy), static_cast<long long>(u.capacity), f);
            out << buf;
        }
    }
    {
        auto out = open_out(dir / "nodes.csv");
        out << "time_ms,batch_allocated,service_schedulable,in_transition,detached,maintenance,elastic_nodes\n";
        for (const auto& n : run.nodes) {
            out << n.time;
            for (int c : n.counts) out << ',' << c;
            out << ',' << n.elastic_nodes << '\n';
        }
    }
    {
        auto out = open_out(dir / "run.json");
        out << meta_json(run.meta).dump(2) << '\n';
    }
    const auto summary = summarize(run);
    {
        auto out = open_out(dir / "summary.json");
        out << to_json(summary).dump(2) << '\n';
    }
    {
        auto out = open_out(dir / "table.txt");
        out << render_tables(summary);
    }
}

RunData load_artifacts(const fs::path& dir) {
    RunData run;
    try {
        auto in = open_in(dir / "run.json");
        run.meta = meta_from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw IoError((dir / "run.json").string() + ": " + e.what());
    }
    run.trace = read_trace(dir / "trace.tsv");
    read_jsonl(dir / "requests.jsonl", [&](const json& j) { run.requests.push_back(request_from_json(j)); });
    read_jsonl(dir / "ledger.jsonl", [&](const json& j) { run.ledger.push_back(ledger_from_json(j)); });
    read_jsonl(dir / "transitions.jsonl", [&](const json& j) { run.transitions.push_back(transition_from_json(j)); });
    read_jsonl(dir / "decisions.jsonl", [&](const json& j) { run.decisions.push_back(decision_from_json(j)); });
    read_jsonl(dir / "jobs.jsonl", [&](const json& j) { run.jobs.push_back(job_from_json(j)); });
    read_jsonl(dir / "checkpoints.jsonl", [&](const json& j) { run.checkpoints.push_back(checkpoint_from_json(j)); });
    read_jsonl(dir / "reconcile.jsonl", [&](const json& j) { run.reconcile.push_back(reconcile_from_json(j)); });
    for (const auto& row : read_csv(dir / "utilization.csv")) {
        if (row.size() < 3) throw IoError("utilization.csv: short row");
        run.utilization.push_back({row[0], row[1], row[2]});
    }
    for (const auto& row : read_csv(dir / "nodes.csv")) {
        if (row.size() < 7) throw IoError("nodes.csv: short row");
        NodeSample n;
        n.time = row[0];
        for (std::size_t c = 0; c < 5; ++c) n.counts[c] = static_cast<int>(row[c + 1]);
        n.elastic_nodes = static_cast<int>(row[6]);
        run.nodes.push_back(n);
    }
    return run;
}

std::vector<TraceRecord> read_trace(const fs::path& path) {
    auto in = open_in(path);
    std::vector<TraceRecord> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string time, seq, kind, digest;
        if (!std::getline(ss, time, '\t') || !std::getline(ss, seq, '\t') || !std::getline(ss, kind, '\t') ||
            !std::getline(ss, digest))
            throw IoError(path.string() + ":" + std::to_string(n) + ": malformed trace line");
        try {
            out.push_back({std::stoll(time), std::stoull(seq), parse_enum(kind, kEvents, "event kind"),
                           std::stoull(digest, nullptr, 16)});
        } catch (const std::logic_error&) {
            throw IoError(path.string() + ":" + std::to_string(n) + ": malformed trace line");
        }
    }
    return out;
}

std::vector<RequestRecord> load_request_trace(const fs::path& path) {
    std::vector<RequestRecord> out;
    read_jsonl(path, [&](const json& j) {
        auto r = request_from_json(j);
        // Replay resets results; only the workload carries over.
        RequestRecord fresh;
        fresh.id = r.id;
        fresh.key = r.key;
        fresh.model = r.model;
        fresh.arrival = r.arrival;
        fresh.prompt_tokens = r.prompt_tokens;
        fresh.max_tokens = r.max_tokens;
        fresh.output_tokens = r.output_tokens;
        out.push_back(std::move(fresh));
    });
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.arrival < b.arrival; });
    return out;
}

std::vector<Checkpoint> load_checkpoints(const fs::path& path) {
    std::vector<Checkpoint> out;
    read_jsonl(path, [&](const json& j) { out.push_back(checkpoint_from_json(j)); });
    return out;
}

TraceDiff compare_traces(const fs::path& a, const fs::path& b) {
    auto ia = open_in(a);
    auto ib = open_in(b);
    TraceDiff d;
    std::string la, lb;
    for (std::size_t n = 1;; ++n) {
        const bool ga = static_cast<bool>(std::getline(ia, la));
        const bool gb = static_cast<bool>(std::getline(ib, lb));
        if (!ga && !gb) break;
        if (ga != gb || la != lb) {
            d.identical = false;
            d.line = n;
            d.a = ga ? la : "<end of file>";
            d.b = gb ? lb : "<end of file>";
            return d;
        }
    }
    // Line-equal files can still differ in a trailing newline.
    ia.clear();
    ib.clear();
    ia.seekg(0, std::ios::end);
    ib.seekg(0, std::ios::end);
    if (ia.tellg() != ib.tellg()) {
        d.identical = false;
        d.a = "size " + std::to_string(static_cast<long long>(ia.tellg()));
        d.b = "size " + std::to_string(static_cast<long long>(ib.tellg()));
    }
    return d;
}

}  // namespace hybridsim
