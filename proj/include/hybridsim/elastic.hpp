#pragma once

// Baseline + delta elasticity: a fixed service-plane floor sized by hot-model
// capacity, plus HPC nodes borrowed from the batch plane under demand.

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hybridsim/core.hpp"

namespace hybridsim {

enum class ScalingPolicy { Demand, Schedule, Static };
std::string_view to_string(ScalingPolicy p);
ScalingPolicy parse_policy(std::string_view s);

struct ElasticConfig {
    ScalingPolicy policy = ScalingPolicy::Demand;
    int baseline_nodes = 0;
    int delta_max = 0;
    SimTime poll_interval_ms = 60'000;
    double scale_up_threshold_ms = 1'000.0;  // mean queue wait
    double scale_down_threshold = 0.3;       // utilization fraction
    int consecutive_windows = 3;
    SimTime cooldown_ms = 600'000;
    /// Schedule policy: (hour-of-day, target node count), sorted by hour.
    std::vector<std::pair<int, int>> schedule;
    std::string cluster = "inference";
    /// Deployment that gains one replica per acquired node.
    std::optional<std::string> elastic_deployment;
};

struct WindowStats {
    double mean_queue_wait_ms = 0.0;
    double utilization = 0.0;
    int pending_replicas = 0;
};

struct ElasticState {
    int current_nodes = 0;
    std::optional<SimTime> last_action;
    int up_streak = 0;
    int down_streak = 0;
};

enum class ActionKind { Acquire, Release, None };
std::string_view to_string(ActionKind k);

struct ScalingAction {
    SimTime time = 0;
    ActionKind kind = ActionKind::None;
    std::string node_id;
    std::string reason;
};

struct Decision {
    ActionKind kind = ActionKind::None;
    std::string reason;
    ElasticState next;
    int up_streak = 0;  // streaks as observed, before any reset by an action
    int down_streak = 0;
};

/// Minimal node count hosting one replica of every hot model at once
/// (first-fit decreasing, tightened by an exact search). Throws InfeasibleProfile when a
/// model needs more GPUs than one node has.
int baseline_floor(std::span<const ModelProfile> hot_models, const Node& node_template);

/// Pure policy step, evaluated once per poll window.
Decision decide(const WindowStats& stats, const ElasticConfig& config, const ElasticState& state, SimTime now);

/// Target node count of the schedule policy at `now`, clamped to
/// [baseline, baseline + delta_max].
int scheduled_target(const ElasticConfig& config, SimTime now);

struct AcquireCandidate {
    std::string node_id;
    bool idle = true;
    SimTime busy_until = 0;
};

/// Idle batch nodes first (by id), otherwise the one freed soonest.
std::optional<std::string> choose_acquire(std::span<const AcquireCandidate> candidates);

struct DecisionLogEntry {
    SimTime time = 0;
    WindowStats stats;
    ScalingAction action;
};

class ElasticManager {
public:
    explicit ElasticManager(ElasticConfig config);

    const ElasticConfig& config() const { return config_; }
    const ElasticState& state() const { return state_; }

    /// Runs decide() and records the decision; the caller applies it.
    Decision poll(const WindowStats& stats, SimTime now);

    /// Optimistic bookkeeping: acquisitions count toward current_nodes as
    /// soon as they are requested.
    void note_acquired(const std::string& node_id, SimTime now);
    void note_released(const std::string& node_id, SimTime now);
    /// Marks a decision as not applied (no eligible node); the streaks are
    /// kept so the next window retries.
    void note_unapplied(const std::string& reason, SimTime now);

    /// Most recently acquired node still held.
    std::optional<std::string> release_candidate() const;
    const std::vector<std::string>& acquired() const { return acquired_; }
    const std::vector<DecisionLogEntry>& log() const { return log_; }
    const std::vector<ScalingAction>& actions() const { return actions_; }

private:
    ElasticConfig config_;
    ElasticState state_;
    ElasticState before_poll_;
    Decision last_;
    std::vector<std::string> acquired_;
    std::vector<DecisionLogEntry> log_;
    std::vector<ScalingAction> actions_;
};

}  // namespace hybridsim
