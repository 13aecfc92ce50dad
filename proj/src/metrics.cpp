#include "hybridsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "hybridsim/error.hpp"
#include "hybridsim/parallel.hpp"

namespace hybridsim {

using nlohmann::json;

SimTime nearest_rank(std::span<const SimTime> sorted, int p) {
    if (sorted.empty() || p <= 0 || p > 100) throw std::invalid_argument("nearest_rank: empty sample or p out of range");
    const auto n = static_cast<std::int64_t>(sorted.size());
    const std::int64_t rank = std::max<std::int64_t>(1, (p * n + 99) / 100);
    return sorted[static_cast<std::size_t>(rank - 1)];
}

SloReport slo_report(std::span<const RequestRecord> requests, SimTime ttft_p99_slo_ms) {
    std::vector<SimTime> ttft;
    SloReport r;
    for (const auto& q : requests) {
        if (q.outcome != Outcome::Completed) continue;
        ttft.push_back(q.ttft_ms);
        if (q.ttft_ms > ttft_p99_slo_ms) ++r.violations;
    }
    if (ttft.empty()) throw EmptyTrace("no completed requests");
    std::sort(ttft.begin(), ttft.end());
    r.p99_ttft_ms = nearest_rank(ttft, 99);
    return r;
}

std::vector<SpeedupRow> speedup_table(const std::vector<std::pair<std::string, double>>& runtimes,
                                      const std::string& baseline_label) {
    auto base = std::find_if(runtimes.begin(), runtimes.end(), [&](const auto& r) { return r.first == baseline_label; });
    if (base == runtimes.end()) throw MissingBaseline("baseline '" + baseline_label + "' not in table");
    std::vector<SpeedupRow> rows;
    for (const auto& [label, rt] : runtimes) {
        if (rt <= 0) throw std::invalid_argument("runtime for '" + label + "' must be positive");
        rows.push_back({label, rt, std::round(base->second / rt * 10.0) / 10.0});
    }
    return rows;
}

std::string path_label(PathKind k) {
    switch (k) {
        case PathKind::MgmtEth: return "eth0 (TCP)";
        case PathKind::HsnTcpSingle: return "hsn0 (TCP)";
        case PathKind::HsnTcpMulti: return "hsn0-3 (TCP)";
        case PathKind::HsnRdma: return "CXI RDMA";
    }
    return "?";
}

namespace {

struct ModelSamples {
    std::string model;
    std::vector<const RequestRecord*> done;
};

std::vector<ModelSamples> group_by_model(std::span<const RequestRecord> requests) {
    std::map<std::string, std::vector<const RequestRecord*>> by;
    for (const auto& r : requests) {
        auto& v = by[r.model];
        if (r.outcome == Outcome::Completed) v.push_back(&r);
    }
    std::vector<ModelSamples> out;
    for (auto& [m, v] : by) out.push_back({m, std::move(v)});
    return out;
}

ModelStats stats_for(const ModelSamples& s) {
    ModelStats m;
    m.model = s.model;
    m.requests = static_cast<std::int64_t>(s.done.size());
    if (s.done.empty()) return m;
    std::vector<SimTime> ttft;
    ttft.reserve(s.done.size());
    std::int64_t ttft_sum = 0, itl_sum = 0, e2el_sum = 0;
    for (const auto* r : s.done) {
        ttft.push_back(r->ttft_ms);
        ttft_sum += r->ttft_ms;
        itl_sum += r->itl_ms;
        e2el_sum += r->e2el_ms;
        m.tokens_in += r->prompt_tokens;
        m.tokens_out += r->output_tokens;
    }
    std::sort(ttft.begin(), ttft.end());
    const auto n = static_cast<double>(m.requests);
    m.ttft_mean_ms = static_cast<double>(ttft_sum) / n;
    m.itl_mean_ms = static_cast<double>(itl_sum) / n;
    m.e2el_mean_ms = static_cast<double>(e2el_sum) / n;
    m.ttft_p95_ms = nearest_rank(ttft, 95);
    m.ttft_p99_ms = nearest_rank(ttft, 99);
    return m;
}

}  // namespace

std::vector<ModelStats> aggregate_models(std::span<const RequestRecord> requests) {
    const auto groups = group_by_model(requests);
    return sweep(groups.size(), [&](std::size_t i) { return stats_for(groups[i]); });
}

std::vector<ModelStats> aggregate_models_serial(std::span<const RequestRecord> requests) {
    const auto groups = group_by_model(requests);
    return sweep_serial(groups.size(), [&](std::size_t i) { return stats_for(groups[i]); });
}

MetricsSummary summarize(const RunData& run) {
    MetricsSummary s;
    s.scenario = run.meta.scenario;
    s.seed = run.meta.seed;
    s.horizon_ms = run.meta.horizon_ms;
    s.unplanned_downtime = run.meta.unplanned_downtime;
    s.deployment_deletions = run.meta.deployment_deletions;
    s.models = aggregate_models(run.requests);

    std::map<std::string, ProjectStats> projects;
    for (const auto& e : run.ledger) {
        auto& p = projects[e.project];
        p.project = e.project;
        ++p.requests;
        p.prompt_tokens += e.prompt_tokens;
        p.output_tokens += e.output_tokens;
        p.tokens += e.prompt_tokens + e.output_tokens;
        p.credits += e.credits;
    }
    for (const auto& r : run.requests) {
        if (!is_rejection(r.outcome)) continue;
        const std::string key = r.project.empty() ? "(unauthenticated)" : r.project;
        auto& p = projects[key];
        p.project = key;
        ++p.rejections[std::string(to_string(r.outcome))];
    }
    for (auto& [_, p] : projects) s.projects.push_back(std::move(p));

    std::int64_t busy = 0, cap = 0;
    for (const auto& u : run.utilization) {
        busy += u.busy;
        cap += u.capacity;
    }
    s.mean_utilization = cap > 0 ? static_cast<double>(busy) / static_cast<double>(cap) : 0.0;

    for (const auto& d : run.decisions)
        if (d.action.kind != ActionKind::None) s.scaling_actions.push_back(d.action);

    try {
        s.slo = slo_report(run.requests, run.meta.slo_ttft_p99_ms);
    } catch (const EmptyTrace&) {
    }

    std::int64_t wait_sum = 0, started = 0;
    std::map<PathKind, const BatchJob*> first_per_path;
    for (const auto& j : run.jobs) {
        if (j.state == JobState::Completed) {
            ++s.jobs_completed;
            if (j.timed_out) ++s.jobs_timed_out;
            if (!first_per_path.contains(j.allocation_path)) first_per_path[j.allocation_path] = &j;
        }
        if (j.state == JobState::Completed || j.state == JobState::Running ||
            (j.state == JobState::Cancelled && !j.allocation.empty())) {
            wait_sum += j.start_time - j.submit_time;
            ++started;
        }
    }
    s.mean_job_wait_ms = started > 0 ? static_cast<double>(wait_sum) / static_cast<double>(started) : 0.0;
    if (first_per_path.contains(PathKind::MgmtEth) && first_per_path.size() > 1) {
        std::vector<std::pair<std::string, double>> rt;
        for (const auto& [path, j] : first_per_path)
            rt.emplace_back(path_label(path), static_cast<double>(j->end_time - j->start_time) / 1000.0);
        s.path_table = speedup_table(rt, path_label(PathKind::MgmtEth));
    }

    s.checkpoints = static_cast<std::int64_t>(run.checkpoints.size());
    for (const auto& c : run.checkpoints) s.checkpoint_gb += c.size_gb;
    s.gc_at_horizon = gc_plan(run.checkpoints, run.meta.retention, run.meta.horizon_ms);

    for (const auto& r : run.reconcile) s.sandbox_actions += static_cast<std::int64_t>(r.actions.size());
    s.transitions = static_cast<std::int64_t>(run.transitions.size());
    return s;
}

json to_json(const MetricsSummary& s) {
    json j;
    j["scenario"] = s.scenario;
    j["seed"] = s.seed;
    j["horizon_ms"] = s.horizon_ms;
    j["models"] = json::array();
    for (const auto& m : s.models)
        j["models"].push_back({{"model", m.model},
                               {"requests", m.requests},
                               {"ttft_mean_ms", m.ttft_mean_ms},
                               {"ttft_p95_ms", m.ttft_p95_ms},
                               {"ttft_p99_ms", m.ttft_p99_ms},
                               {"itl_mean_ms", m.itl_mean_ms},
                               {"e2el_mean_ms", m.e2el_mean_ms},
                               {"tokens_in", m.tokens_in},
                               {"tokens_out", m.tokens_out}});
    j["projects"] = json::array();
    for (const auto& p : s.projects)
        j["projects"].push_back({{"project", p.project},
                                 {"requests", p.requests},
                                 {"prompt_tokens", p.prompt_tokens},
                                 {"output_tokens", p.output_tokens},
                                 {"tokens", p.tokens},
                                 {"credits", p.credits},
                                 {"rejections", p.rejections}});
    auto& c = j["cluster"];
    c["mean_utilization"] = s.mean_utilization;
    c["unplanned_downtime"] = s.unplanned_downtime;
    c["deployment_deletions"] = s.deployment_deletions;
    c["transitions"] = s.transitions;
    c["sandbox_actions"] = s.sandbox_actions;
    c["scaling_actions"] = json::array();
    for (const auto& a : s.scaling_actions)
        c["scaling_actions"].push_back(
            {{"time", a.time}, {"action", to_string(a.kind)}, {"node", a.node_id}, {"reason", a.reason}});
    if (s.slo) j["slo"] = {{"p99_ttft_ms", s.slo->p99_ttft_ms}, {"violations", s.slo->violations}};
    j["batch"] = {{"jobs_completed", s.jobs_completed},
                  {"jobs_timed_out", s.jobs_timed_out},
                  {"mean_wait_ms", s.mean_job_wait_ms}};
    if (!s.path_table.empty()) {
        j["batch"]["path_table"] = json::array();
        for (const auto& r : s.path_table)
            j["batch"]["path_table"].push_back({{"path", r.label}, {"runtime_s", r.runtime_s}, {"speedup", r.speedup}});
    }
    j["checkpoints"] = {{"count", s.checkpoints},
                        {"total_gb", s.checkpoint_gb},
                        {"gc_delete", s.gc_at_horizon.delete_ids.size()},
                        {"gc_reclaimed_gb", s.gc_at_horizon.reclaimed_gb}};
    return j;
}

std::string render_tables(const MetricsSummary& s) {
    std::ostringstream out;
    char line[256];
    out << "Scenario " << s.scenario << " (seed " << s.seed << ", horizon " << s.horizon_ms / 1000 << " s)\n\n";
    if (!s.models.empty()) {
        std::snprintf(line, sizeof line, "%-16s %9s %10s %9s %9s %8s %10s %12s\n", "Model", "Requests", "TTFT mean",
                      "TTFT p95", "TTFT p99", "ITL", "E2EL mean", "Output tok");
        out << line;
        for (const auto& m : s.models) {
            std::snprintf(line, sizeof line, "%-16s %9lld %10.1f %9lld %9lld %8.1f %10.1f %12lld\n", m.model.c_str(),
                          static_cast<long long>(m.requests), m.ttft_mean_ms, static_cast<long long>(m.ttft_p95_ms),
                          static_cast<long long>(m.ttft_p99_ms), m.itl_mean_ms, m.e2el_mean_ms,
                          static_cast<long long>(m.tokens_out));
            out << line;
        }
        out << "\n";
    }
    if (!s.path_table.empty()) {
        out << "DDP training: 2 nodes x 4 GPUs\n";
        std::snprintf(line, sizeof line, "%-14s %12s %8s\n", "Network", "Runtime (s)", "Speedup");
        out << line;
        for (const auto& r : s.path_table) {
            std::snprintf(line, sizeof line, "%-14s %12.0f %7.1fx\n", r.label.c_str(), r.runtime_s, r.speedup);
            out << line;
        }
        out << "\n";
    }
    if (s.jobs_completed > 0) {
        std::snprintf(line, sizeof line, "Batch jobs completed %lld (timed out %lld), mean wait %.1f s\n",
                      static_cast<long long>(s.jobs_completed), static_cast<long long>(s.jobs_timed_out),
                      s.mean_job_wait_ms / 1000.0);
        out << line;
    }
    if (s.checkpoints > 0) {
        std::snprintf(line, sizeof line, "Checkpoints %lld (%.1f GB), GC at horizon would delete %zu (%.1f GB)\n",
                      static_cast<long long>(s.checkpoints), s.checkpoint_gb, s.gc_at_horizon.delete_ids.size(),
                      s.gc_at_horizon.reclaimed_gb);
        out << line;
    }
    std::snprintf(line, sizeof line, "Mean utilization %.3f, scaling actions %zu, unplanned downtime %d\n",
                  s.mean_utilization, s.scaling_actions.size(), s.unplanned_downtime);
    out << line;
    return out.str();
}

}  // namespace hybridsim
