#include "hybridsim/core.hpp"

#include <cctype>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hybridsim {

std::string_view to_string(NodeFlavour f) {
    switch (f) {
        case NodeFlavour::VmCommodity: return "VmCommodity";
        case NodeFlavour::VmEnterprise: return "VmEnterprise";
        case NodeFlavour::BareMetal: return "BareMetal";
        case NodeFlavour::HpcDiskless: return "HpcDiskless";
    }
    return "?";
}

NodeFlavour parse_flavour(std::string_view s) {
    if (s == "VmCommodity") return NodeFlavour::VmCommodity;
    if (s == "VmEnterprise") return NodeFlavour::VmEnterprise;
    if (s == "BareMetal") return NodeFlavour::BareMetal;
    if (s == "HpcDiskless") return NodeFlavour::HpcDiskless;
    throw std::invalid_argument("unknown node flavour '" + std::string(s) + "'");
}

std::string_view to_string(PathKind k) {
    switch (k) {
        case PathKind::MgmtEth: return "MgmtEth";
        case PathKind::HsnTcpSingle: return "HsnTcpSingle";
        case PathKind::HsnTcpMulti: return "HsnTcpMulti";
        case PathKind::HsnRdma: return "HsnRdma";
    }
    return "?";
}

PathKind parse_path_kind(std::string_view s) {
    if (s == "MgmtEth") return PathKind::MgmtEth;
    if (s == "HsnTcpSingle") return PathKind::HsnTcpSingle;
    if (s == "HsnTcpMulti") return PathKind::HsnTcpMulti;
    if (s == "HsnRdma") return PathKind::HsnRdma;
    throw std::invalid_argument("unknown network path '" + std::string(s) + "'");
}

std::string_view to_string(NodePhase p) {
    switch (p) {
        case NodePhase::Detached: return "Detached";
        case NodePhase::Provisioning: return "Provisioning";
        case NodePhase::JoinedBatch: return "JoinedBatch";
        case NodePhase::JoinedService: return "JoinedService";
        case NodePhase::Draining: return "Draining";
        case NodePhase::Rebooting: return "Rebooting";
        case NodePhase::Maintenance: return "Maintenance";
    }
    return "?";
}

std::string to_string(const Target& t) {
    switch (t.kind) {
        case Target::Kind::Batch: return "Batch";
        case Target::Kind::Service: return "Service(" + t.cluster + ")";
        case Target::Kind::Detached: return "Detached";
        case Target::Kind::Maintenance: return "Maintenance";
    }
    return "?";
}

std::string to_string(const NodeState& s) {
    switch (s.phase) {
        case NodePhase::JoinedService: return "JoinedService(" + s.cluster + ")";
        case NodePhase::Draining: return "Draining(" + to_string(s.from) + "," + to_string(s.to) + ")";
        case NodePhase::Rebooting: return "Rebooting(" + to_string(s.to) + ")";
        case NodePhase::Provisioning: return "Provisioning(" + to_string(s.to) + ")";
        default: return std::string(to_string(s.phase));
    }
}

PlaneClass classify(const NodeState& s) {
    switch (s.phase) {
        case NodePhase::JoinedBatch: return PlaneClass::BatchAllocated;
        case NodePhase::JoinedService: return PlaneClass::ServiceSchedulable;
        case NodePhase::Detached: return PlaneClass::Detached;
        case NodePhase::Maintenance: return PlaneClass::Maintenance;
        case NodePhase::Provisioning:
        case NodePhase::Draining:
        case NodePhase::Rebooting: return PlaneClass::InTransition;
    }
    return PlaneClass::Detached;
}

double Node::local_cache_gb() const {
    double total = 0.0;
    for (const auto& [_, gb] : cached_models) total += gb;
    return total;
}

bool Node::has_path(PathKind k) const {
    for (const auto& p : network_paths)
        if (p.kind == k) return true;
    return false;
}

bool valid_label(std::string_view kv) {
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos || eq == 0) return false;
    for (char c : kv)
        if (std::isspace(static_cast<unsigned char>(c))) return false;
    return true;
}

RateLimitSpec RateLimitSpec::from_rate(std::int64_t capacity, double refill_per_s) {
    constexpr std::int64_t kDen = 1'000'000;
    const auto num = static_cast<std::int64_t>(std::llround(refill_per_s * kDen));
    const auto g = std::gcd(num, kDen);
    return {capacity, num / g, kDen / g};
}

bool node_fits(const Requirement& req, const Node& node) {
    if (node.gpus < req.gpus) return false;
    if (node.gpu_mem_gb < req.gpu_mem_gb) return false;
    for (const auto& l : req.required_labels)
        if (!node.has_label(l)) return false;
    for (const auto& t : node.taints)
        if (!req.tolerated_taints.contains(t)) return false;
    return true;
}

Credits token_cost(Tokens tokens, const ModelProfile& profile) {
    // millicredits per 1k tokens -> credits: divide by 10^6, half-up.
    const __int128 scaled = static_cast<__int128>(tokens) * profile.cost_per_1k_millicredits;
    return static_cast<Credits>((scaled + 500'000) / 1'000'000);
}

int pool_capacity(std::span<const Node> nodes, const ModelProfile& profile) {
    int replicas = 0;
    for (const auto& n : nodes) {
        if (!n.service_joined()) continue;
        replicas += n.gpus / profile.gpus_required;
    }
    return replicas;
}

std::int64_t credits_to_millicredits(double credits) {
    return static_cast<std::int64_t>(std::llround(credits * 1000.0));
}

}  // namespace hybridsim
