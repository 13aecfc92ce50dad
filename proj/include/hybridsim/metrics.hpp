#pragma once

// Run records and the pure summary computed from them. Everything here is a
// function of the saved artifacts, so `report` can regenerate a summary that
// is byte-identical to the one written at run time.

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hybridsim/batch.hpp"
#include "hybridsim/bridge.hpp"
#include "hybridsim/elastic.hpp"
#include "hybridsim/engine.hpp"
#include "hybridsim/gateway.hpp"
#include "hybridsim/lifecycle.hpp"
#include "hybridsim/service.hpp"

namespace hybridsim {

struct RequestRecord {
    std::string id;
    std::string key;
    std::string project;  // empty when the key did not authenticate
    std::string model;
    SimTime arrival = 0;
    Tokens prompt_tokens = 0;
    Tokens max_tokens = 0;
    Tokens output_tokens = 0;
    Outcome outcome = Outcome::Admitted;  // Admitted means still queued or in flight at the horizon
    SimTime dispatched = -1;
    SimTime completed = -1;
    SimTime queue_wait_ms = 0;
    SimTime ttft_ms = 0;
    SimTime itl_ms = 0;
    SimTime e2el_ms = 0;
    std::string replica;
};

/// Busy and capacity integrals over one poll window, in GPU-units x ms where
/// one GPU is `units_per_gpu` units.
struct UtilSample {
    SimTime time = 0;
    std::int64_t busy = 0;
    std::int64_t capacity = 0;
};

/// Node counts per plane class at a sampling instant.
struct NodeSample {
    SimTime time = 0;
    std::array<int, 5> counts{};  // PlaneClass order
    int elastic_nodes = 0;
};

struct ReconcileRecord {
    SimTime time = 0;
    std::vector<SandboxAction> actions;
};

struct RunMeta {
    std::string scenario;
    std::uint64_t seed = 0;
    SimTime horizon_ms = 0;
    std::int64_t units_per_gpu = 1;
    int unplanned_downtime = 0;
    bool failure_injection = false;
    int deployment_deletions = 0;
    SimTime slo_ttft_p99_ms = 2'500;
    RetentionPolicy retention;
};

struct RunData {
    RunMeta meta;
    std::vector<TraceRecord> trace;
    std::vector<RequestRecord> requests;
    std::vector<LedgerEntry> ledger;
    std::vector<TransitionLogEntry> transitions;
    std::vector<DecisionLogEntry> decisions;
    std::vector<BatchJob> jobs;
    std::vector<Checkpoint> checkpoints;
    std::vector<ReconcileRecord> reconcile;
    std::vector<UtilSample> utilization;
    std::vector<NodeSample> nodes;
};

/// Nearest-rank percentile: the value at 1-based rank ceil(p x n / 100) of
/// the ascending sample. `sorted` must be ascending and nonempty; 0 < p <= 100.
SimTime nearest_rank(std::span<const SimTime> sorted, int p);

struct SloReport {
    SimTime p99_ttft_ms = 0;
    std::int64_t violations = 0;
};

/// p99 TTFT over completed requests and the count above the SLO. Throws
/// EmptyTrace when nothing completed.
SloReport slo_report(std::span<const RequestRecord> requests, SimTime ttft_p99_slo_ms);

struct SpeedupRow {
    std::string label;
    double runtime_s = 0.0;
    double speedup = 0.0;  // rounded to one decimal
};

/// speedup = baseline runtime / runtime. Rows keep the input order. Throws
/// MissingBaseline when the baseline label is absent.
std::vector<SpeedupRow> speedup_table(const std::vector<std::pair<std::string, double>>& runtimes,
                                      const std::string& baseline_label);

/// Row label for a network path in the runtime table ("eth0 (TCP)", "CXI RDMA", ...).
std::string path_label(PathKind k);

struct ModelStats {
    std::string model;
    std::int64_t requests = 0;  // completed
    double ttft_mean_ms = 0.0;
    SimTime ttft_p95_ms = 0;
    SimTime ttft_p99_ms = 0;
    double itl_mean_ms = 0.0;
    double e2el_mean_ms = 0.0;
    Tokens tokens_in = 0;
    Tokens tokens_out = 0;
};

/// Per-model aggregation over completed requests, one model per task.
std::vector<ModelStats> aggregate_models(std::span<const RequestRecord> requests);
/// Single-threaded reference for aggregate_models.
std::vector<ModelStats> aggregate_models_serial(std::span<const RequestRecord> requests);

struct ProjectStats {
    std::string project;
    std::int64_t requests = 0;  // settled
    Tokens prompt_tokens = 0;
    Tokens output_tokens = 0;
    Tokens tokens = 0;
    Credits credits = 0;
    std::map<std::string, std::int64_t> rejections;
};

struct MetricsSummary {
    std::string scenario;
    std::uint64_t seed = 0;
    SimTime horizon_ms = 0;
    std::vector<ModelStats> models;
    std::vector<ProjectStats> projects;
    double mean_utilization = 0.0;
    std::vector<ScalingAction> scaling_actions;
    int unplanned_downtime = 0;
    int deployment_deletions = 0;
    std::optional<SloReport> slo;
    std::int64_t jobs_completed = 0;
    std::int64_t jobs_timed_out = 0;
    double mean_job_wait_ms = 0.0;
    std::vector<SpeedupRow> path_table;
    std::int64_t checkpoints = 0;
    double checkpoint_gb = 0.0;
    GcPlan gc_at_horizon;
    std::int64_t sandbox_actions = 0;
    std::int64_t transitions = 0;
};

MetricsSummary summarize(const RunData& run);
nlohmann::json to_json(const MetricsSummary& s);
/// Plain-text tables: latency per model and, when present, the path table.
std::string render_tables(const MetricsSummary& s);

}  // namespace hybridsim
