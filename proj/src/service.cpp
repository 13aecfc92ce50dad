#include "hybridsim/service.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hybridsim {

std::string_view to_string(ReplicaPhase p) {
    switch (p) {
        case ReplicaPhase::Pending: return "Pending";
        case ReplicaPhase::Warming: return "Warming";
        case ReplicaPhase::Running: return "Running";
    }
    return "?";
}

ServicePlane::ServicePlane(Inventory& nodes, std::map<std::string, ModelProfile> catalog, double fetch_bw_gb_per_s)
    : nodes_(nodes), catalog_(std::move(catalog)), fetch_bw_(fetch_bw_gb_per_s) {}

const ModelProfile* ServicePlane::profile(const std::string& model) const {
    auto it = catalog_.find(model);
    return it == catalog_.end() ? nullptr : &it->second;
}

int ServicePlane::gpus_for(const Deployment& d) const {
    if (d.model)
        if (const auto* p = profile(*d.model)) return p->gpus_required;
    return d.placement.gpus;
}

SimTime ServicePlane::warmup_ms(const std::string& model, const Node& node) const {
    const auto* p = profile(model);
    if (!p || node.cached_models.contains(model)) return 0;
    return static_cast<SimTime>(std::llround(p->weights_gb / fetch_bw_ * 1000.0));
}

const Deployment* ServicePlane::deployment(const std::string& id) const {
    auto it = deployments_.find(id);
    return it == deployments_.end() ? nullptr : &it->second;
}

void ServicePlane::upsert_deployment(Deployment d) {
    if (d.replicas_desired < 0) throw std::invalid_argument("replicas_desired must be >= 0");
    auto it = deployments_.find(d.id);
    if (it == deployments_.end()) {
        d.replicas.assign(static_cast<std::size_t>(d.replicas_desired), std::nullopt);
        const auto id = d.id;
        deployments_.emplace(id, std::move(d));
        return;
    }
    Deployment& cur = it->second;
    if (cur.model != d.model || cur.cluster != d.cluster) {
        for (auto& slot : cur.replicas)
            if (slot) retire(*slot);
    }
    auto slots = std::move(cur.replicas);
    while (static_cast<int>(slots.size()) > d.replicas_desired) {
        if (slots.back()) retire(*slots.back());
        slots.pop_back();
    }
    slots.resize(static_cast<std::size_t>(d.replicas_desired));
    d.replicas = std::move(slots);
    cur = std::move(d);
}

void ServicePlane::delete_deployment(const std::string& id) {
    auto it = deployments_.find(id);
    if (it == deployments_.end()) return;
    for (auto& slot : it->second.replicas)
        if (slot) retire(*slot);
    deployments_.erase(it);
}

int ServicePlane::shrink_pending(const std::string& id, int count) {
    auto it = deployments_.find(id);
    if (it == deployments_.end()) return 0;
    auto& slots = it->second.replicas;
    int removed = 0;
    for (auto i = slots.size(); i-- > 0 && removed < count;) {
        if (slots[i]) continue;
        slots.erase(slots.begin() + static_cast<std::ptrdiff_t>(i));
        ++removed;
    }
    it->second.replicas_desired -= removed;
    return removed;
}

void ServicePlane::retire(InstanceId id) {
    auto it = instances_.find(id);
    if (it == instances_.end()) return;
    Instance& inst = it->second;
    if (auto d = deployments_.find(inst.deployment_id); d != deployments_.end())
        for (auto& slot : d->second.replicas)
            if (slot == id) slot.reset();
    inst.retiring = true;
    if (inst.in_flight == 0) instances_.erase(it);
}

int ServicePlane::gpus_in_use(const std::string& node_id) const {
    int used = 0;
    for (const auto& [_, inst] : instances_)
        if (inst.node_id == node_id) used += inst.gpus;
    return used;
}

std::vector<ReplicaPlacement> ServicePlane::place_replicas(SimTime now) {
    std::vector<ReplicaPlacement> out;
    for (auto& [dep_id, d] : deployments_) {
        const int gpus = gpus_for(d);
        Requirement req = d.placement;
        req.gpus = gpus;
        const ModelProfile* prof = d.model ? profile(*d.model) : nullptr;
        for (std::size_t slot = 0; slot < d.replicas.size(); ++slot) {
            if (d.replicas[slot]) continue;
            for (auto& [node_id, node] : nodes_) {
                if (!node.service_joined() || node.state.cluster != d.cluster) continue;
                if (!node_fits(req, node)) continue;
                if (node.gpus - gpus_in_use(node_id) < gpus) continue;

                Instance inst;
                inst.id = next_instance_++;
                inst.deployment_id = dep_id;
                inst.replica_id = dep_id + "/" + std::to_string(slot);
                inst.model = d.model;
                inst.node_id = node_id;
                inst.gpus = gpus;
                inst.max_concurrent = prof ? prof->max_concurrent : 1;
                inst.placed_at = now;
                const SimTime warm = d.model ? warmup_ms(*d.model, node) : 0;
                inst.ready_at = now + warm;
                d.replicas[slot] = inst.id;
                out.push_back({inst.id, dep_id, static_cast<int>(slot), node_id, warm});
                instances_.emplace(inst.id, std::move(inst));
                break;
            }
        }
    }
    return out;
}

bool ServicePlane::mark_ready(InstanceId id, SimTime now) {
    auto it = instances_.find(id);
    if (it == instances_.end() || it->second.retiring) return false;
    Instance& inst = it->second;
    if (inst.ready_at > now) return false;
    inst.ready = true;
    if (inst.model)
        if (const auto* p = profile(*inst.model)) nodes_.at(inst.node_id).cached_models[*inst.model] = p->weights_gb;
    return true;
}

int ServicePlane::node_lost(const std::string& node_id) {
    std::vector<InstanceId> victims;
    for (const auto& [id, inst] : instances_)
        if (inst.node_id == node_id && !inst.retiring) victims.push_back(id);
    for (auto id : victims) retire(id);
    return static_cast<int>(victims.size());
}

bool ServicePlane::busy_retiring(const std::string& node_id) const {
    for (const auto& [_, inst] : instances_)
        if (inst.node_id == node_id && inst.retiring && inst.in_flight > 0) return true;
    return false;
}

void ServicePlane::begin_request(InstanceId id) { ++instances_.at(id).in_flight; }

bool ServicePlane::end_request(InstanceId id) {
    auto it = instances_.find(id);
    if (it == instances_.end()) return false;
    --it->second.in_flight;
    if (it->second.retiring && it->second.in_flight == 0) {
        instances_.erase(it);
        return true;
    }
    return false;
}

std::vector<const Instance*> ServicePlane::routable(const std::string& model) const {
    std::vector<const Instance*> out;
    for (const auto& [_, inst] : instances_)
        if (inst.model == model && inst.ready && !inst.retiring) out.push_back(&inst);
    return out;
}

const Instance* ServicePlane::instance(InstanceId id) const {
    auto it = instances_.find(id);
    return it == instances_.end() ? nullptr : &it->second;
}

ReplicaPhase ServicePlane::replica_phase(const std::string& deployment_id, int slot) const {
    const auto& d = deployments_.at(deployment_id);
    const auto& s = d.replicas.at(static_cast<std::size_t>(slot));
    if (!s) return ReplicaPhase::Pending;
    return instances_.at(*s).ready ? ReplicaPhase::Running : ReplicaPhase::Warming;
}

int ServicePlane::pending_replicas() const {
    int n = 0;
    for (const auto& [_, d] : deployments_)
        n += static_cast<int>(std::count(d.replicas.begin(), d.replicas.end(), std::nullopt));
    return n;
}

int ServicePlane::pending_replicas(const std::string& deployment_id) const {
    const auto* d = deployment(deployment_id);
    return d ? static_cast<int>(std::count(d->replicas.begin(), d->replicas.end(), std::nullopt)) : 0;
}

bool ServicePlane::has_deployment_for(const std::string& model) const {
    for (const auto& [_, d] : deployments_)
        if (d.model == model && d.replicas_desired > 0) return true;
    return false;
}

// Sandbox reconciliation -------------------------------------------------

SandboxRecord desired_sandbox(const std::string& project_id, const std::set<std::string>& members) {
    return SandboxRecord{project_id, true, true, true, members};
}

std::string_view to_string(SandboxAction::Kind k) {
    switch (k) {
        case SandboxAction::Kind::Create: return "create";
        case SandboxAction::Kind::Update: return "update";
        case SandboxAction::Kind::Delete: return "delete";
        case SandboxAction::Kind::Flag: return "flag";
    }
    return "?";
}

std::vector<SandboxAction> reconcile(const std::vector<SandboxRecord>& desired,
                                     const std::vector<SandboxRecord>& observed, bool prune) {
    std::map<std::string, const SandboxRecord*> want, have;
    for (const auto& r : desired) want[r.project_id] = &r;
    for (const auto& r : observed) have[r.project_id] = &r;

    std::set<std::string> ids;
    for (const auto& [id, _] : want) ids.insert(id);
    for (const auto& [id, _] : have) ids.insert(id);

    std::vector<SandboxAction> actions;
    for (const auto& id : ids) {
        auto w = want.find(id);
        auto h = have.find(id);
        if (w != want.end() && h == have.end()) {
            actions.push_back({SandboxAction::Kind::Create, id, *w->second, {}});
        } else if (w == want.end()) {
            actions.push_back({prune ? SandboxAction::Kind::Delete : SandboxAction::Kind::Flag, id, {}, {}});
        } else {
            const SandboxRecord& a = *w->second;
            const SandboxRecord& b = *h->second;
            std::vector<std::string> fields;
            if (a.repo != b.repo) fields.emplace_back("repo");
            if (a.reconciler_app != b.reconciler_app) fields.emplace_back("reconciler_app");
            if (a.namespace_ready != b.namespace_ready) fields.emplace_back("namespace");
            if (a.access_bindings != b.access_bindings) fields.emplace_back("access_bindings");
            if (!fields.empty()) actions.push_back({SandboxAction::Kind::Update, id, a, std::move(fields)});
        }
    }
    return actions;
}

std::vector<SandboxRecord> apply_actions(const std::vector<SandboxAction>& actions,
                                         std::vector<SandboxRecord> observed) {
    for (const auto& a : actions) {
        auto it = std::find_if(observed.begin(), observed.end(),
                               [&](const SandboxRecord& r) { return r.project_id == a.project_id; });
        switch (a.kind) {
            case SandboxAction::Kind::Create:
            case SandboxAction::Kind::Update:
                if (it == observed.end())
                    observed.push_back(a.target);
                else
                    *it = a.target;
                break;
            case SandboxAction::Kind::Delete:
                if (it != observed.end()) observed.erase(it);
                break;
            case SandboxAction::Kind::Flag: break;
        }
    }
    std::sort(observed.begin(), observed.end(),
              [](const SandboxRecord& x, const SandboxRecord& y) { return x.project_id < y.project_id; });
    return observed;
}

}  // namespace hybridsim
