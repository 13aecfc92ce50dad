#pragma once

// Scenario configuration: one JSON document per scenario, optionally layered
// over a defaults fragment via "extends" (RFC 7386 merge patch).

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hybridsim/batch.hpp"
#include "hybridsim/bridge.hpp"
#include "hybridsim/core.hpp"
#include "hybridsim/elastic.hpp"
#include "hybridsim/lifecycle.hpp"
#include "hybridsim/service.hpp"
#include "hybridsim/workload.hpp"

namespace hybridsim {

struct DeploymentSpec {
    std::string id;
    std::string project_id;
    std::string cluster = "inference";
    std::optional<std::string> model;
    int replicas = 1;
    int gpus = 0;  // only for deployments without a model
    std::set<std::string> labels;
    std::set<std::string> tolerations;
};

struct DeploymentUpdate {
    SimTime at = 0;
    std::string deployment_id;
    int replicas = 0;
};

struct BatchJobSpec {
    SimTime submit = 0;
    BatchJob job;
};

struct RecipeSubmission {
    SimTime at = 0;
    std::string recipe_id;
};

struct MaintenanceSpec {
    std::vector<std::string> nodes;
    SimTime start = 0;
    SimTime end = 0;
};

/// Injected unplanned outage: the node drops out and comes back after
/// `duration_ms`. Only applied when failure injection is enabled.
struct FailureSpec {
    std::string node;
    SimTime at = 0;
    SimTime duration_ms = 0;
};

struct Scenario {
    std::string name;
    std::uint64_t seed = 0;
    SimTime horizon_ms = 0;

    std::vector<Node> nodes;
    std::map<std::string, ModelProfile> models;
    std::vector<Project> projects;
    std::vector<ApiKey> keys;
    std::vector<TrafficProfile> traffic;
    /// Previously exported requests.jsonl replayed instead of generating traffic.
    std::optional<std::filesystem::path> request_trace;

    std::vector<DeploymentSpec> deployments;
    std::vector<DeploymentUpdate> deployment_updates;
    std::vector<SandboxRecord> observed_sandboxes;
    bool prune_sandboxes = true;
    SimTime reconcile_interval_ms = 300'000;
    double fetch_bw_gb_per_s = 1.0;

    NetworkFactorTable factors = NetworkFactorTable::defaults();
    PathKind default_path = PathKind::HsnRdma;
    std::vector<BatchJobSpec> batch_jobs;

    std::vector<FineTuneRecipe> recipes;
    std::vector<RecipeSubmission> recipe_submissions;
    double finetune_rate_per_day = 0.0;
    std::vector<std::pair<std::string, double>> finetune_mix;
    CheckpointSizing checkpoint_sizing;
    RetentionPolicy retention;

    ElasticConfig elastic;
    TransitionSpec transition;
    std::map<NodeFlavour, TransitionSpec> transition_per_flavour;
    std::optional<std::set<std::pair<std::string, std::string>>> service_allowlist;

    std::vector<MaintenanceSpec> maintenance;
    bool failure_injection = false;
    std::vector<FailureSpec> failures;

    std::int64_t itl_alpha_permille = 0;
    SimTime slo_ttft_p99_ms = 2'500;

    std::vector<ModelProfile> hot_models() const;
};

/// Reads a scenario file, resolving "extends" relative to the file.
/// Throws ConfigError listing every problem found.
Scenario load_scenario(const std::filesystem::path& path);

/// Parses and validates an already merged document.
Scenario parse_scenario(const nlohmann::json& doc);

/// Merged document for a scenario file (defaults applied, "extends" removed).
nlohmann::json load_scenario_document(const std::filesystem::path& path);

}  // namespace hybridsim
