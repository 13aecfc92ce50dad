#pragma once

// Artifact directory layout and (de)serialization of run records.
//
//   trace.tsv            event trace, one record per line
//   requests.jsonl       every generated request with its outcome
//   ledger.jsonl         one entry per settlement
//   transitions.jsonl    node lifecycle log
//   decisions.jsonl      elastic manager log, one entry per poll
//   jobs.jsonl           batch jobs as of the horizon
//   checkpoints.jsonl    registered fine-tuning checkpoints
//   reconcile.jsonl      sandbox reconcile actions
//   utilization.csv      busy/capacity integrals per poll window
//   nodes.csv            plane-class node counts per poll
//   run.json             run metadata
//   summary.json         MetricsSummary
//   table.txt            plain-text tables

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "hybridsim/metrics.hpp"

namespace hybridsim {

nlohmann::json to_json(const RequestRecord& r);
RequestRecord request_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LedgerEntry& e);
LedgerEntry ledger_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TransitionLogEntry& e);
nlohmann::json to_json(const DecisionLogEntry& e);
nlohmann::json to_json(const BatchJob& j);
BatchJob job_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ReconcileRecord& r);

/// Writes every artifact plus summary.json and table.txt. Throws IoError.
void write_artifacts(const std::filesystem::path& dir, const RunData& run);
/// Reads a directory written by write_artifacts. Throws IoError.
RunData load_artifacts(const std::filesystem::path& dir);

/// summary.json text for a run, as written by write_artifacts.
std::string summary_text(const RunData& run);

std::vector<TraceRecord> read_trace(const std::filesystem::path& path);
std::vector<RequestRecord> load_request_trace(const std::filesystem::path& path);
std::vector<Checkpoint> load_checkpoints(const std::filesystem::path& path);

struct TraceDiff {
    bool identical = true;
    std::size_t line = 0;  // first differing line, 1-based
    std::string a;
    std::string b;
};

/// Byte comparison of two trace files, reporting the first differing line.
TraceDiff compare_traces(const std::filesystem::path& a, const std::filesystem::path& b);

}  // namespace hybridsim
