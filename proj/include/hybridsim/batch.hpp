#pragma once

// Slurm-like batch plane: FIFO queue with conservative backfill, a
// network-path runtime model and drain cooperation with node transitions.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hybridsim/core.hpp"

namespace hybridsim {

using JobId = std::int64_t;

enum class CommClass { Small, Large };
std::string_view to_string(CommClass c);
CommClass parse_comm_class(std::string_view s);

enum class JobState { Queued, Running, Completed, Cancelled };
std::string_view to_string(JobState s);

struct BatchJob {
    JobId id = 0;
    std::string project_id;
    int nodes_requested = 1;
    int gpus_per_node = 0;
    SimTime walltime_estimate_ms = 0;
    SimTime base_runtime_ms = 0;  // true runtime on HsnTcpSingle; hidden from the scheduler
    CommClass comm_class = CommClass::Small;
    std::optional<PathKind> path;  // defaults to the plane's path
    std::string origin;            // recipe id when rendered by the bridge

    JobState state = JobState::Queued;
    SimTime submit_time = 0;
    SimTime start_time = 0;
    SimTime end_time = 0;  // planned while Running, actual once Completed/Cancelled
    std::vector<std::string> allocation;
    PathKind allocation_path = PathKind::HsnTcpSingle;
    bool timed_out = false;
};

/// Exact multiplier num/den relative to HsnTcpSingle.
struct Ratio {
    std::int64_t num = 1;
    std::int64_t den = 1;
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

class NetworkFactorTable {
public:
    /// Calibrated from the DDP runs: 3779 s on eth0, 1165 s on hsn0,
    /// 1550 s on hsn0-3 and 81 s over CXI RDMA.
    static NetworkFactorTable defaults();

    void set(PathKind p, CommClass c, Ratio r);
    std::optional<Ratio> get(PathKind p, CommClass c) const;
    bool valid() const;

private:
    std::map<std::pair<PathKind, CommClass>, Ratio> factors_;
};

/// round(base_runtime_ms x factor). Throws UnknownPath when the table has no
/// entry for (path, comm_class).
SimTime job_runtime(const BatchJob& job, PathKind path, const NetworkFactorTable& table);

struct Placement {
    JobId job_id = 0;
    std::vector<std::string> nodes;
    SimTime start = 0;
    SimTime end = 0;
    PathKind path = PathKind::HsnTcpSingle;
    bool backfilled = false;
};

struct Reservation {
    SimTime computed_at = 0;
    JobId head = 0;
    SimTime start = 0;  // kNever when the head can never run
};

class BatchPlane {
public:
    static constexpr SimTime kNever = INT64_MAX;

    explicit BatchPlane(NetworkFactorTable table = NetworkFactorTable::defaults(),
                        PathKind default_path = PathKind::HsnRdma);

    void set_known_projects(std::set<std::string> projects) { projects_ = std::move(projects); }

    void add_node(const Node& node);
    /// Removes an idle node (after its drain completed).
    void remove_node(const std::string& id);
    bool has_node(const std::string& id) const { return nodes_.contains(id); }

    /// Queues a job; throws InvalidJob for malformed jobs or unknown projects.
    JobId submit(BatchJob job, SimTime now);

    /// FIFO placement of the head, then conservative backfill of later jobs
    /// that end no later than the head's reserved start.
    std::vector<Placement> schedule_pass(SimTime now);

    /// Marks a job finished and frees its nodes. Returns nodes whose drain
    /// completed as a result.
    std::vector<std::string> complete(JobId id, SimTime now);

    /// Cancels a queued or running job. Returns nodes whose drain completed.
    std::vector<std::string> cancel(JobId id, SimTime now);

    /// Excludes the node from placement and returns the drain-complete time.
    SimTime drain_node(const std::string& id, SimTime now);
    bool draining(const std::string& id) const;
    std::optional<JobId> running_on(const std::string& id) const;

    const BatchJob& job(JobId id) const;
    bool has_job(JobId id) const { return jobs_.contains(id); }
    const std::map<JobId, BatchJob>& jobs() const { return jobs_; }
    const std::deque<JobId>& queue() const { return queue_; }
    const std::vector<Reservation>& reservations() const { return reservations_; }

    std::size_t node_count() const { return nodes_.size(); }
    std::size_t busy_nodes() const;
    std::size_t allocated_by_jobs() const;

    const NetworkFactorTable& table() const { return table_; }

private:
    struct BatchNode {
        int gpus = 0;
        std::set<PathKind> paths;
        bool draining = false;
        std::optional<JobId> running;
    };

    PathKind path_for(const BatchJob& job) const { return job.path.value_or(default_path_); }
    bool eligible(const BatchNode& n, const BatchJob& job) const;
    std::vector<std::string> pick_idle(const BatchJob& job, const std::set<std::string>& taken) const;
    SimTime reserve_start(const BatchJob& head, SimTime now) const;
    Placement start(BatchJob& job, std::vector<std::string> nodes, SimTime now, bool backfilled);
    std::vector<std::string> release(BatchJob& job);

    NetworkFactorTable table_;
    PathKind default_path_;
    std::set<std::string> projects_;
    std::map<std::string, BatchNode> nodes_;
    std::map<JobId, BatchJob> jobs_;
    std::deque<JobId> queue_;
    std::vector<Reservation> reservations_;
    JobId next_id_ = 1;
};

}  // namespace hybridsim
