#pragma once

// Kubernetes-like service plane: declarative deployments placed by labels and
// taints, pending semantics across outages, and the sandbox reconciler.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hybridsim/core.hpp"
#include "hybridsim/lifecycle.hpp"

namespace hybridsim {

using InstanceId = std::uint64_t;

enum class ReplicaPhase { Pending, Warming, Running };
std::string_view to_string(ReplicaPhase p);

struct Deployment {
    std::string id;
    std::string project_id;
    std::string cluster = "inference";
    std::optional<std::string> model;
    int replicas_desired = 1;
    Requirement placement;  // gpus are taken from the model profile when set
    std::vector<std::optional<InstanceId>> replicas;  // slot -> serving instance
};

/// A replica bound to a node. Retiring instances no longer back a replica
/// slot; they only finish their in-flight requests.
struct Instance {
    InstanceId id = 0;
    std::string deployment_id;
    std::string replica_id;  // "<deployment>/<slot>"
    std::optional<std::string> model;
    std::string node_id;
    int gpus = 0;
    int max_concurrent = 1;
    SimTime placed_at = 0;
    SimTime ready_at = 0;
    bool ready = false;
    bool retiring = false;
    int in_flight = 0;
};

struct ReplicaPlacement {
    InstanceId instance = 0;
    std::string deployment_id;
    int slot = 0;
    std::string node_id;
    SimTime warmup_ms = 0;
};

class ServicePlane {
public:
    ServicePlane(Inventory& nodes, std::map<std::string, ModelProfile> catalog, double fetch_bw_gb_per_s = 1.0);

    /// Creates or resizes a deployment. Shrinking retires the highest slots.
    void upsert_deployment(Deployment d);
    void delete_deployment(const std::string& id);
    /// Drops up to `count` unbound (Pending) slots, highest first, and lowers
    /// the desired count to match. Bound replicas are untouched.
    int shrink_pending(const std::string& id, int count);
    const std::map<std::string, Deployment>& deployments() const { return deployments_; }
    const Deployment* deployment(const std::string& id) const;

    /// Greedy first-fit of Pending replicas (deployments by id, nodes by id).
    std::vector<ReplicaPlacement> place_replicas(SimTime now);

    /// Marks a warmed instance as serving and records the weights as cached
    /// on its node. Returns false for instances that no longer exist.
    bool mark_ready(InstanceId id, SimTime now);

    /// Reverts the node's replicas to Pending; their instances retire and
    /// finish in-flight work. Returns the number of replicas reverted.
    int node_lost(const std::string& node_id);

    /// True while retiring instances on the node still serve requests.
    bool busy_retiring(const std::string& node_id) const;

    void begin_request(InstanceId id);
    /// Returns true when the instance retired and was removed.
    bool end_request(InstanceId id);

    std::vector<const Instance*> routable(const std::string& model) const;
    const std::map<InstanceId, Instance>& instances() const { return instances_; }
    const Instance* instance(InstanceId id) const;

    ReplicaPhase replica_phase(const std::string& deployment_id, int slot) const;
    int pending_replicas() const;
    int pending_replicas(const std::string& deployment_id) const;
    int gpus_in_use(const std::string& node_id) const;
    bool has_deployment_for(const std::string& model) const;

    const ModelProfile* profile(const std::string& model) const;
    SimTime warmup_ms(const std::string& model, const Node& node) const;

private:
    int gpus_for(const Deployment& d) const;
    void retire(InstanceId id);

    Inventory& nodes_;
    std::map<std::string, ModelProfile> catalog_;
    double fetch_bw_;
    std::map<std::string, Deployment> deployments_;
    std::map<InstanceId, Instance> instances_;
    InstanceId next_instance_ = 1;
};

// Sandbox reconciliation -------------------------------------------------

struct SandboxRecord {
    std::string project_id;
    bool repo = false;
    bool reconciler_app = false;
    bool namespace_ready = false;
    std::set<std::string> access_bindings;

    bool operator==(const SandboxRecord&) const = default;
};

/// Desired record for a project: every component present, bindings equal to
/// the member set.
SandboxRecord desired_sandbox(const std::string& project_id, const std::set<std::string>& members);

struct SandboxAction {
    enum class Kind { Create, Update, Delete, Flag };
    Kind kind = Kind::Create;
    std::string project_id;
    SandboxRecord target;             // desired record for Create/Update
    std::vector<std::string> fields;  // changed fields for Update

    bool operator==(const SandboxAction&) const = default;
};

std::string_view to_string(SandboxAction::Kind k);

/// Pure diff of desired vs observed, sorted by project id. Orphaned observed
/// sandboxes are deleted when `prune` is set and flagged otherwise.
std::vector<SandboxAction> reconcile(const std::vector<SandboxRecord>& desired,
                                     const std::vector<SandboxRecord>& observed, bool prune = true);

std::vector<SandboxRecord> apply_actions(const std::vector<SandboxAction>& actions,
                                         std::vector<SandboxRecord> observed);

}  // namespace hybridsim
