#pragma once

// Shared domain vocabulary: nodes, planes, projects, model profiles and the
// fit/cost arithmetic used by every other module.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hybridsim {

/// Milliseconds since scenario start.
using SimTime = std::int64_t;
using Tokens = std::int64_t;
using Credits = std::int64_t;

enum class NodeFlavour { VmCommodity, VmEnterprise, BareMetal, HpcDiskless };

std::string_view to_string(NodeFlavour f);
NodeFlavour parse_flavour(std::string_view s);

/// Only diskless HPC nodes lose local state on reboot.
constexpr bool has_ephemeral_state(NodeFlavour f) { return f == NodeFlavour::HpcDiskless; }
constexpr bool may_host_control_plane(NodeFlavour f) {
    return f == NodeFlavour::VmCommodity || f == NodeFlavour::VmEnterprise;
}

enum class PathKind { MgmtEth, HsnTcpSingle, HsnTcpMulti, HsnRdma };

std::string_view to_string(PathKind k);
PathKind parse_path_kind(std::string_view s);

struct NetworkPath {
    PathKind kind = PathKind::MgmtEth;
    int lanes = 1;

    bool valid() const { return lanes >= 1 && (kind != PathKind::HsnTcpMulti || lanes > 1); }
    bool operator==(const NetworkPath&) const = default;
};

enum class NodePhase { Detached, Provisioning, JoinedBatch, JoinedService, Draining, Rebooting, Maintenance };

std::string_view to_string(NodePhase p);

/// Where a node is headed. `cluster` is meaningful only for Service.
struct Target {
    enum class Kind { Batch, Service, Detached, Maintenance };
    Kind kind = Kind::Detached;
    std::string cluster;

    static Target batch() { return {Kind::Batch, {}}; }
    static Target service(std::string c) { return {Kind::Service, std::move(c)}; }
    static Target detached() { return {Kind::Detached, {}}; }
    static Target maintenance() { return {Kind::Maintenance, {}}; }

    bool operator==(const Target&) const = default;
};

std::string to_string(const Target& t);

/// Lifecycle state of a node. `cluster` is set for JoinedService; `from`/`to`
/// describe Draining(from, to); `to` is also set for Rebooting and Provisioning.
struct NodeState {
    NodePhase phase = NodePhase::Detached;
    std::string cluster;
    Target from;
    Target to;

    static NodeState detached() { return {}; }
    static NodeState batch() { return {NodePhase::JoinedBatch, {}, {}, {}}; }
    static NodeState service(std::string c) { return {NodePhase::JoinedService, std::move(c), {}, {}}; }
    static NodeState maintenance() { return {NodePhase::Maintenance, {}, {}, {}}; }

    bool operator==(const NodeState&) const = default;
};

std::string to_string(const NodeState& s);

/// The mutually exclusive usability classes every node falls into.
enum class PlaneClass { BatchAllocated, ServiceSchedulable, InTransition, Detached, Maintenance };

PlaneClass classify(const NodeState& s);

struct Node {
    std::string id;
    NodeFlavour flavour = NodeFlavour::HpcDiskless;
    int gpus = 0;
    double gpu_mem_gb = 0.0;
    int cpu_cores = 0;
    std::vector<NetworkPath> network_paths;
    std::set<std::string> labels;            // durable, "key=value"
    std::set<std::string> transient_labels;  // cleared on reboot
    std::set<std::string> taints;
    std::map<std::string, double> cached_models;  // model name -> resident GB
    NodeState state;

    double local_cache_gb() const;
    bool has_path(PathKind k) const;
    bool has_label(const std::string& kv) const {
        return labels.contains(kv) || transient_labels.contains(kv);
    }
    bool service_joined() const { return state.phase == NodePhase::JoinedService; }
};

/// True when `kv` looks like key=value with a nonempty, whitespace-free key.
bool valid_label(std::string_view kv);

struct Requirement {
    int gpus = 0;
    double gpu_mem_gb = 0.0;
    std::set<std::string> required_labels;
    std::set<std::string> tolerated_taints;
};

/// Token bucket parameters. The refill rate is an exact rational in
/// requests per second.
struct RateLimitSpec {
    std::int64_t capacity = 1;
    std::int64_t refill_num = 1;
    std::int64_t refill_den = 1;

    static RateLimitSpec from_rate(std::int64_t capacity, double refill_per_s);
    double refill_per_s() const { return static_cast<double>(refill_num) / static_cast<double>(refill_den); }
};

struct Project {
    std::string id;
    std::set<std::string> members;
    Tokens token_budget = 0;
    Credits credit_budget = 0;
    RateLimitSpec rate_limit;
    std::set<std::string> allowed_models;
};

struct ApiKey {
    std::string key;
    std::string project_id;
    std::optional<Tokens> per_key_budget;
    std::optional<SimTime> expiry;
};

struct ModelProfile {
    std::string name;
    double params_b = 0.0;
    double weights_gb = 1.0;
    int gpus_required = 1;
    int max_concurrent = 1;
    SimTime ttft_base_ms = 0;
    std::int64_t prefill_per_token_us = 0;  // microseconds per prompt token
    SimTime itl_ms = 1;
    std::int64_t cost_per_1k_millicredits = 0;
    bool hot = false;
    Tokens max_context = 4096;

    bool valid() const { return gpus_required >= 1 && itl_ms > 0 && max_concurrent >= 1 && weights_gb > 0; }
};

bool node_fits(const Requirement& req, const Node& node);

/// tokens x cost_per_1k / 1000, rounded half-up to whole credits.
Credits token_cost(Tokens tokens, const ModelProfile& profile);

/// Replicas that fit on service-joined nodes; a replica never spans nodes.
int pool_capacity(std::span<const Node> nodes, const ModelProfile& profile);

/// Converts a decimal cost in credits per 1k tokens into integer millicredits.
std::int64_t credits_to_millicredits(double credits);

}  // namespace hybridsim
