#pragma once

// Node lifecycle state machine: joining, leaving, draining and rebooting
// across the batch plane and service-plane clusters. Diskless nodes come back
// from every reboot with no local state.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "hybridsim/core.hpp"

namespace hybridsim {

using Inventory = std::map<std::string, Node>;

struct TransitionSpec {
    SimTime drain_ms = 0;  // overhead after running work has ended
    SimTime reboot_ms = 600'000;
    SimTime join_ms = 120'000;
    SimTime detach_ms = 60'000;
};

/// One state entered during a transition, with the time spent in it before
/// the next step. The final step is the target and has duration 0.
struct TransitionStep {
    NodeState state;
    SimTime duration_ms = 0;
};

struct TransitionLogEntry {
    SimTime time = 0;
    std::string node_id;
    std::string from;
    std::string to;
    int step = 0;
};

/// Pure step planner. Returns an empty list when the node already sits in
/// the target state.
std::vector<TransitionStep> plan_steps(const Node& node, const Target& target, const TransitionSpec& spec);

/// Clears ephemeral state. Hardware and durable identity are untouched.
/// Throws std::invalid_argument unless the node is Rebooting.
Node on_reboot(Node node);

/// The plane a node returns to after maintenance (or is heading to).
Target resting_target(const NodeState& s);

class NodeLifecycle {
public:
    explicit NodeLifecycle(Inventory& nodes, TransitionSpec defaults = {});

    void set_spec(NodeFlavour f, TransitionSpec spec) { per_flavour_[f] = spec; }
    const TransitionSpec& spec_for(NodeFlavour f) const;

    /// Restricts Service(cluster) targets to the listed (node, cluster)
    /// pairs. Without an allowlist every service attachment is authorized.
    void set_service_allowlist(std::set<std::pair<std::string, std::string>> allow) {
        allowlist_ = std::move(allow);
    }
    bool authorized(const Node& node, const Target& target) const;

    /// Validates and starts a transition, entering its first step.
    /// Throws TransitionConflict if the node is already transitioning and
    /// Unauthorized if the authorization predicate fails.
    std::vector<TransitionStep> request_transition(const std::string& id, const Target& target, SimTime now);

    /// Moves a transitioning node to its next step and returns the new state.
    /// Leaving a Rebooting step applies on_reboot.
    const NodeState& advance(const std::string& id, SimTime now);

    bool in_transition(const std::string& id) const { return inflight_.contains(id); }
    std::optional<Target> transition_target(const std::string& id) const;
    /// Duration of the step the node currently sits in.
    SimTime current_step_duration(const std::string& id) const;
    /// Steps remaining after the current one.
    std::size_t remaining_steps(const std::string& id) const;

    /// Registers a window; throws OverlappingMaintenance when any listed node
    /// already has a window covering `start`, std::invalid_argument unless
    /// start < end.
    void maintenance_window(const std::vector<std::string>& nodes, SimTime start, SimTime end);
    const std::map<std::string, std::vector<std::pair<SimTime, SimTime>>>& windows() const { return windows_; }

    /// Preempts any in-flight transition and heads the node into Maintenance.
    /// Returns the planned steps (Draining first when the node was joined).
    std::vector<TransitionStep> begin_maintenance(const std::string& id, SimTime now);

    /// Starts the return to the pre-maintenance plane. When the node is still
    /// draining into Maintenance, the exit is deferred until it arrives and
    /// an empty list is returned.
    std::vector<TransitionStep> end_maintenance(const std::string& id, SimTime now);
    bool exit_pending(const std::string& id) const { return exit_pending_.contains(id); }

    Node& node(const std::string& id) { return nodes_.at(id); }
    const Node& node(const std::string& id) const { return nodes_.at(id); }
    const Inventory& nodes() const { return nodes_; }

    const std::vector<TransitionLogEntry>& log() const { return log_; }

private:
    struct InFlight {
        Target target;
        std::vector<TransitionStep> steps;
        std::size_t index = 0;
    };

    void enter(Node& n, const NodeState& s, SimTime now, int step);

    Inventory& nodes_;
    TransitionSpec defaults_;
    std::map<NodeFlavour, TransitionSpec> per_flavour_;
    std::optional<std::set<std::pair<std::string, std::string>>> allowlist_;
    std::map<std::string, InFlight> inflight_;
    std::map<std::string, std::vector<std::pair<SimTime, SimTime>>> windows_;
    std::map<std::string, Target> return_target_;
    std::set<std::string> exit_pending_;
    std::vector<TransitionLogEntry> log_;
};

}  // namespace hybridsim
