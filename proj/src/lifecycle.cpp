#include "hybridsim/lifecycle.hpp"

#include <stdexcept>

#include "hybridsim/error.hpp"

namespace hybridsim {

namespace {

NodeState draining(const NodeState& from, const Target& to) {
    NodeState s;
    s.phase = NodePhase::Draining;
    s.from = resting_target(from);
    s.to = to;
    return s;
}

NodeState rebooting(const Target& to) {
    NodeState s;
    s.phase = NodePhase::Rebooting;
    s.to = to;
    return s;
}

NodeState provisioning(const Target& to) {
    NodeState s;
    s.phase = NodePhase::Provisioning;
    s.to = to;
    return s;
}

NodeState arrived(const Target& t) {
    switch (t.kind) {
        case Target::Kind::Batch: return NodeState::batch();
        case Target::Kind::Service: return NodeState::service(t.cluster);
        case Target::Kind::Detached: return NodeState::detached();
        case Target::Kind::Maintenance: return NodeState::maintenance();
    }
    return NodeState::detached();
}

bool at_target(const NodeState& s, const Target& t) {
    switch (t.kind) {
        case Target::Kind::Batch: return s.phase == NodePhase::JoinedBatch;
        case Target::Kind::Service: return s.phase == NodePhase::JoinedService && s.cluster == t.cluster;
        case Target::Kind::Detached: return s.phase == NodePhase::Detached;
        case Target::Kind::Maintenance: return s.phase == NodePhase::Maintenance;
    }
    return false;
}

}  // namespace

Target resting_target(const NodeState& s) {
    switch (s.phase) {
        case NodePhase::JoinedBatch: return Target::batch();
        case NodePhase::JoinedService: return Target::service(s.cluster);
        case NodePhase::Maintenance: return Target::maintenance();
        case NodePhase::Detached: return Target::detached();
        case NodePhase::Draining:
        case NodePhase::Rebooting:
        case NodePhase::Provisioning: return s.to;
    }
    return Target::detached();
}

std::vector<TransitionStep> plan_steps(const Node& node, const Target& target, const TransitionSpec& spec) {
    const NodeState& cur = node.state;
    if (at_target(cur, target)) return {};

    std::vector<TransitionStep> steps;
    const bool from_batch = cur.phase == NodePhase::JoinedBatch;
    const bool to_batch = target.kind == Target::Kind::Batch;
    const bool joined = cur.phase == NodePhase::JoinedBatch || cur.phase == NodePhase::JoinedService;
    const SimTime detach_extra = target.kind == Target::Kind::Detached ? spec.detach_ms : 0;

    if (joined) steps.push_back({draining(cur, target), spec.drain_ms + detach_extra});

    // Batch entries and exits always go through a reboot; maintenance has
    // already recreated the node, so its exits only rejoin.
    const bool needs_reboot = (from_batch || to_batch) && cur.phase != NodePhase::Maintenance &&
                              target.kind != Target::Kind::Maintenance;
    if (needs_reboot) {
        SimTime d = spec.reboot_ms;
        if (!joined) d += detach_extra;
        steps.push_back({rebooting(target), d});
    }

    if (target.kind == Target::Kind::Batch || target.kind == Target::Kind::Service)
        steps.push_back({provisioning(target), spec.join_ms});

    steps.push_back({arrived(target), 0});
    return steps;
}

Node on_reboot(Node node) {
    if (node.state.phase != NodePhase::Rebooting)
        throw std::invalid_argument("on_reboot: node " + node.id + " is not rebooting");
    if (has_ephemeral_state(node.flavour)) node.cached_models.clear();
    node.transient_labels.clear();
    return node;
}

NodeLifecycle::NodeLifecycle(Inventory& nodes, TransitionSpec defaults) : nodes_(nodes), defaults_(defaults) {}

const TransitionSpec& NodeLifecycle::spec_for(NodeFlavour f) const {
    auto it = per_flavour_.find(f);
    return it == per_flavour_.end() ? defaults_ : it->second;
}

bool NodeLifecycle::authorized(const Node& node, const Target& target) const {
    switch (target.kind) {
        case Target::Kind::Batch:
            return node.flavour == NodeFlavour::HpcDiskless || node.flavour == NodeFlavour::BareMetal;
        case Target::Kind::Service:
            return !allowlist_ || allowlist_->contains({node.id, target.cluster});
        case Target::Kind::Detached:
        case Target::Kind::Maintenance: return true;
    }
    return false;
}

void NodeLifecycle::enter(Node& n, const NodeState& s, SimTime now, int step) {
    log_.push_back({now, n.id, to_string(n.state), to_string(s), step});
    n.state = s;
    if (s.phase == NodePhase::Maintenance && has_ephemeral_state(n.flavour)) {
        n.cached_models.clear();
        n.transient_labels.clear();
    }
}

std::vector<TransitionStep> NodeLifecycle::request_transition(const std::string& id, const Target& target,
                                                              SimTime now) {
    Node& n = nodes_.at(id);
    if (inflight_.contains(id))
        throw TransitionConflict("node " + id + " is already transitioning to " +
                                 to_string(inflight_.at(id).target));
    if (n.state.phase == NodePhase::Maintenance && target.kind != Target::Kind::Maintenance &&
        return_target_.contains(id))
        throw TransitionConflict("node " + id + " is in a maintenance window");
    if (!authorized(n, target)) throw Unauthorized("node " + id + " may not join " + to_string(target));

    auto steps = plan_steps(n, target, spec_for(n.flavour));
    if (steps.empty()) return steps;
    enter(n, steps.front().state, now, 0);
    if (steps.size() > 1) inflight_[id] = InFlight{target, steps, 0};
    return steps;
}

const NodeState& NodeLifecycle::advance(const std::string& id, SimTime now) {
    auto it = inflight_.find(id);
    if (it == inflight_.end()) throw std::logic_error("advance: node " + id + " is not transitioning");
    Node& n = nodes_.at(id);
    InFlight& f = it->second;
    if (n.state.phase == NodePhase::Rebooting) n = on_reboot(std::move(n));
    ++f.index;
    enter(n, f.steps[f.index].state, now, static_cast<int>(f.index));
    if (f.index + 1 == f.steps.size()) inflight_.erase(it);
    return n.state;
}

std::optional<Target> NodeLifecycle::transition_target(const std::string& id) const {
    auto it = inflight_.find(id);
    if (it == inflight_.end()) return std::nullopt;
    return it->second.target;
}

SimTime NodeLifecycle::current_step_duration(const std::string& id) const {
    auto it = inflight_.find(id);
    return it == inflight_.end() ? 0 : it->second.steps[it->second.index].duration_ms;
}

std::size_t NodeLifecycle::remaining_steps(const std::string& id) const {
    auto it = inflight_.find(id);
    return it == inflight_.end() ? 0 : it->second.steps.size() - it->second.index - 1;
}

void NodeLifecycle::maintenance_window(const std::vector<std::string>& nodes, SimTime start, SimTime end) {
    if (!(start < end)) throw std::invalid_argument("maintenance window requires start < end");
    for (const auto& id : nodes) {
        if (!nodes_.contains(id)) throw std::invalid_argument("maintenance window: unknown node " + id);
        for (const auto& [s, e] : windows_[id])
            if (s <= start && start < e)
                throw OverlappingMaintenance("node " + id + " already has a window covering t=" +
                                             std::to_string(start));
    }
    for (const auto& id : nodes) windows_[id].emplace_back(start, end);
}

std::vector<TransitionStep> NodeLifecycle::begin_maintenance(const std::string& id, SimTime now) {
    Node& n = nodes_.at(id);
    return_target_[id] = resting_target(n.state);
    if (return_target_[id].kind == Target::Kind::Maintenance) return_target_[id] = Target::detached();
    inflight_.erase(id);
    exit_pending_.erase(id);

    std::vector<TransitionStep> steps;
    const bool joined = n.state.phase == NodePhase::JoinedBatch || n.state.phase == NodePhase::JoinedService;
    if (joined) steps.push_back({draining(n.state, Target::maintenance()), spec_for(n.flavour).drain_ms});
    steps.push_back({NodeState::maintenance(), 0});
    enter(n, steps.front().state, now, 0);
    if (steps.size() > 1) inflight_[id] = InFlight{Target::maintenance(), steps, 0};
    return steps;
}

std::vector<TransitionStep> NodeLifecycle::end_maintenance(const std::string& id, SimTime now) {
    Node& n = nodes_.at(id);
    if (n.state.phase != NodePhase::Maintenance) {
        exit_pending_.insert(id);
        return {};
    }
    exit_pending_.erase(id);
    Target back = return_target_.count(id) ? return_target_.at(id) : Target::detached();
    return_target_.erase(id);
    if (!authorized(n, back)) back = Target::detached();
    return request_transition(id, back, now);
}

}  // namespace hybridsim
