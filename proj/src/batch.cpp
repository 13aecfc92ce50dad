#include "hybridsim/batch.hpp"

#include <algorithm>
#include <stdexcept>

#include "hybridsim/error.hpp"

namespace hybridsim {

std::string_view to_string(CommClass c) { return c == CommClass::Small ? "Small" : "Large"; }

CommClass parse_comm_class(std::string_view s) {
    if (s == "Small") return CommClass::Small;
    if (s == "Large") return CommClass::Large;
    throw std::invalid_argument("unknown comm class '" + std::string(s) + "'");
}

std::string_view to_string(JobState s) {
    switch (s) {
        case JobState::Queued: return "Queued";
        case JobState::Running: return "Running";
        case JobState::Completed: return "Completed";
        case JobState::Cancelled: return "Cancelled";
    }
    return "?";
}

NetworkFactorTable NetworkFactorTable::defaults() {
    NetworkFactorTable t;
    for (auto c : {CommClass::Small, CommClass::Large}) {
        t.set(PathKind::MgmtEth, c, {3779, 1165});
        t.set(PathKind::HsnTcpSingle, c, {1, 1});
        t.set(PathKind::HsnTcpMulti, c, {1550, 1165});
        // Provisional: taken from the native Slurm run.
        t.set(PathKind::HsnRdma, c, {81, 1165});
    }
    return t;
}

void NetworkFactorTable::set(PathKind p, CommClass c, Ratio r) { factors_[{p, c}] = r; }

std::optional<Ratio> NetworkFactorTable::get(PathKind p, CommClass c) const {
    auto it = factors_.find({p, c});
    if (it == factors_.end()) return std::nullopt;
    return it->second;
}

bool NetworkFactorTable::valid() const {
    for (const auto& [key, r] : factors_) {
        if (r.num <= 0 || r.den <= 0) return false;
        if (key.first == PathKind::HsnTcpSingle && r.num != r.den) return false;
    }
    return true;
}

SimTime job_runtime(const BatchJob& job, PathKind path, const NetworkFactorTable& table) {
    auto r = table.get(path, job.comm_class);
    if (!r)
        throw UnknownPath("no factor for path " + std::string(to_string(path)) + "/" +
                          std::string(to_string(job.comm_class)));
    // Round half-up of base * num / den in exact integer arithmetic.
    const __int128 scaled = static_cast<__int128>(job.base_runtime_ms) * r->num * 2 + r->den;
    return static_cast<SimTime>(scaled / (static_cast<__int128>(r->den) * 2));
}

BatchPlane::BatchPlane(NetworkFactorTable table, PathKind default_path)
    : table_(std::move(table)), default_path_(default_path) {}

void BatchPlane::add_node(const Node& node) {
    BatchNode bn;
    bn.gpus = node.gpus;
    for (const auto& p : node.network_paths) bn.paths.insert(p.kind);
    nodes_[node.id] = std::move(bn);
}

void BatchPlane::remove_node(const std::string& id) {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) return;
    if (it->second.running) throw std::logic_error("remove_node: node " + id + " still runs a job");
    nodes_.erase(it);
}

JobId BatchPlane::submit(BatchJob job, SimTime now) {
    if (job.nodes_requested < 1) throw InvalidJob("nodes_requested must be >= 1");
    if (job.gpus_per_node < 0) throw InvalidJob("gpus_per_node must be >= 0");
    if (job.base_runtime_ms < 0 || job.walltime_estimate_ms <= 0)
        throw InvalidJob("runtime and walltime must be positive");
    if (job.base_runtime_ms > job.walltime_estimate_ms)
        throw InvalidJob("base runtime exceeds walltime estimate");
    if (!projects_.empty() && !projects_.contains(job.project_id))
        throw InvalidJob("unknown project '" + job.project_id + "'");

    job.id = next_id_++;
    job.state = JobState::Queued;
    job.submit_time = now;
    job.allocation.clear();
    const JobId id = job.id;
    jobs_.emplace(id, std::move(job));
    queue_.push_back(id);
    return id;
}

bool BatchPlane::eligible(const BatchNode& n, const BatchJob& job) const {
    return !n.draining && n.gpus >= job.gpus_per_node && n.paths.contains(path_for(job));
}

std::vector<std::string> BatchPlane::pick_idle(const BatchJob& job, const std::set<std::string>& taken) const {
    std::vector<std::string> picked;
    for (const auto& [id, n] : nodes_) {
        if (n.running || taken.contains(id) || !eligible(n, job)) continue;
        picked.push_back(id);
        if (static_cast<int>(picked.size()) == job.nodes_requested) return picked;
    }
    return {};
}

SimTime BatchPlane::reserve_start(const BatchJob& head, SimTime now) const {
    int available = 0;
    std::vector<std::pair<SimTime, int>> frees;  // (estimated end, eligible nodes freed)
    std::map<JobId, int> freed_by;
    for (const auto& [id, n] : nodes_) {
        if (!eligible(n, head)) continue;
        if (!n.running) {
            ++available;
        } else {
            ++freed_by[*n.running];
        }
    }
    if (available >= head.nodes_requested) return now;
    for (const auto& [jid, count] : freed_by) {
        const auto& j = jobs_.at(jid);
        frees.emplace_back(j.start_time + j.walltime_estimate_ms, count);
    }
    std::sort(frees.begin(), frees.end());
    for (const auto& [t, count] : frees) {
        available += count;
        if (available >= head.nodes_requested) return std::max(t, now);
    }
    return kNever;
}

Placement BatchPlane::start(BatchJob& job, std::vector<std::string> nodes, SimTime now, bool backfilled) {
    const PathKind path = path_for(job);
    SimTime runtime = job_runtime(job, path, table_);
    if (runtime > job.walltime_estimate_ms) {
        runtime = job.walltime_estimate_ms;
        job.timed_out = true;
    }
    job.state = JobState::Running;
    job.start_time = now;
    job.end_time = now + runtime;
    job.allocation = nodes;
    job.allocation_path = path;
    for (const auto& id : nodes) nodes_.at(id).running = job.id;
    return Placement{job.id, std::move(nodes), now, job.end_time, path, backfilled};
}

std::vector<Placement> BatchPlane::schedule_pass(SimTime now) {
    std::vector<Placement> placed;

    while (!queue_.empty()) {
        BatchJob& head = jobs_.at(queue_.front());
        auto nodes = pick_idle(head, {});
        if (nodes.empty()) break;
        placed.push_back(start(head, std::move(nodes), now, false));
        queue_.pop_front();
    }
    if (queue_.empty()) return placed;

    const BatchJob& head = jobs_.at(queue_.front());
    const SimTime reserved = reserve_start(head, now);
    reservations_.push_back({now, head.id, reserved});

    for (auto it = std::next(queue_.begin()); it != queue_.end();) {
        BatchJob& j = jobs_.at(*it);
        const bool ends_in_time = reserved == kNever || now + j.walltime_estimate_ms <= reserved;
        if (ends_in_time) {
            auto nodes = pick_idle(j, {});
            if (!nodes.empty()) {
                placed.push_back(start(j, std::move(nodes), now, true));
                it = queue_.erase(it);
                continue;
            }
        }
        ++it;
    }
    return placed;
}

std::vector<std::string> BatchPlane::release(BatchJob& job) {
    std::vector<std::string> drained;
    for (const auto& id : job.allocation) {
        auto it = nodes_.find(id);
        if (it == nodes_.end()) continue;
        it->second.running.reset();
        if (it->second.draining) drained.push_back(id);
    }
    return drained;
}

std::vector<std::string> BatchPlane::complete(JobId id, SimTime now) {
    BatchJob& j = jobs_.at(id);
    if (j.state != JobState::Running) throw std::logic_error("complete: job is not running");
    j.state = JobState::Completed;
    j.end_time = now;
    return release(j);
}

std::vector<std::string> BatchPlane::cancel(JobId id, SimTime now) {
    auto it = jobs_.find(id);
    if (it == jobs_.end()) throw UnknownJob("job " + std::to_string(id));
    BatchJob& j = it->second;
    if (j.state == JobState::Queued) {
        std::erase(queue_, id);
        j.state = JobState::Cancelled;
        j.end_time = now;
        return {};
    }
    if (j.state != JobState::Running) return {};
    j.state = JobState::Cancelled;
    j.end_time = now;
    return release(j);
}

SimTime BatchPlane::drain_node(const std::string& id, SimTime now) {
    BatchNode& n = nodes_.at(id);
    n.draining = true;
    if (!n.running) return now;
    return jobs_.at(*n.running).end_time;
}

bool BatchPlane::draining(const std::string& id) const {
    auto it = nodes_.find(id);
    return it != nodes_.end() && it->second.draining;
}

std::optional<JobId> BatchPlane::running_on(const std::string& id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) return std::nullopt;
    return it->second.running;
}

const BatchJob& BatchPlane::job(JobId id) const {
    auto it = jobs_.find(id);
    if (it == jobs_.end()) throw UnknownJob("job " + std::to_string(id));
    return it->second;
}

std::size_t BatchPlane::busy_nodes() const {
    std::size_t n = 0;
    for (const auto& [_, bn] : nodes_)
        if (bn.running) ++n;
    return n;
}

std::size_t BatchPlane::allocated_by_jobs() const {
    std::size_t n = 0;
    for (const auto& [_, j] : jobs_)
        if (j.state == JobState::Running) n += static_cast<std::size_t>(j.nodes_requested);
    return n;
}

}  // namespace hybridsim
