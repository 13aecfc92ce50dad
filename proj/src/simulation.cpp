#include "hybridsim/simulation.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <tuple>

#include "hybridsim/artifacts.hpp"
#include "hybridsim/error.hpp"
#include "hybridsim/workload.hpp"

namespace hybridsim {

namespace {

Inventory build_inventory(const Scenario& s) {
    Inventory inv;
    for (const auto& n : s.nodes) inv.emplace(n.id, n);
    return inv;
}

Deployment to_deployment(const DeploymentSpec& d, int replicas) {
    Deployment out;
    out.id = d.id;
    out.project_id = d.project_id;
    out.cluster = d.cluster;
    out.model = d.model;
    out.replicas_desired = replicas;
    out.placement.gpus = d.gpus;
    out.placement.required_labels = d.labels;
    out.placement.tolerated_taints = d.tolerations;
    return out;
}

std::vector<RequestRecord> generate_requests(const Scenario& s, const Engine& engine) {
    struct Draft {
        SimTime arrival;
        std::size_t profile;
        std::size_t n;
        Tokens prompt;
        Tokens output;
    };
    std::vector<Draft> drafts;
    for (std::size_t i = 0; i < s.traffic.size(); ++i) {
        const auto& p = s.traffic[i];
        const auto tag = std::to_string(i) + ":" + p.model;
        auto arrivals = engine.rng_stream("arrivals:" + tag);
        auto lengths = engine.rng_stream("lengths:" + tag);
        const auto times = gen_arrivals(p, s.horizon_ms, arrivals);
        for (std::size_t n = 0; n < times.size(); ++n) {
            auto [prompt, out] = sample_lengths(p, lengths);
            drafts.push_back({times[n], i, n, prompt, out});
        }
    }
    std::sort(drafts.begin(), drafts.end(),
              [](const Draft& a, const Draft& b) { return std::tie(a.arrival, a.profile, a.n) < std::tie(b.arrival, b.profile, b.n); });
    std::vector<RequestRecord> out;
    out.reserve(drafts.size());
    char id[32];
    for (std::size_t k = 0; k < drafts.size(); ++k) {
        const auto& d = drafts[k];
        const auto& p = s.traffic[d.profile];
        std::snprintf(id, sizeof id, "r%07zu", k + 1);
        RequestRecord r;
        r.id = id;
        r.key = p.api_key;
        r.model = p.model;
        r.arrival = d.arrival;
        r.prompt_tokens = d.prompt;
        r.output_tokens = d.output;
        r.max_tokens = p.max_output();
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace

Simulation::Simulation(Scenario scenario)
    : scenario_(std::move(scenario)),
      inventory_(build_inventory(scenario_)),
      engine_(scenario_.seed),
      lifecycle_(inventory_, scenario_.transition),
      batch_(scenario_.factors, scenario_.default_path),
      service_(inventory_, scenario_.models, scenario_.fetch_bw_gb_per_s),
      gateway_(scenario_.models, scenario_.projects, scenario_.keys),
      elastic_(scenario_.elastic),
      bridge_(batch_, scenario_.models, scenario_.recipes) {
    engine_.set_handler([this](const Event& e) { handle(e); });

    for (const auto& [f, spec] : scenario_.transition_per_flavour) lifecycle_.set_spec(f, spec);
    if (scenario_.service_allowlist) lifecycle_.set_service_allowlist(*scenario_.service_allowlist);

    std::set<std::string> project_ids;
    for (const auto& p : scenario_.projects) project_ids.insert(p.id);
    batch_.set_known_projects(project_ids);

    // Busy GPU fractions are in_flight / max_concurrent; scale so they stay integral.
    for (const auto& [_, m] : scenario_.models) units_per_gpu_ = std::lcm(units_per_gpu_, std::int64_t{m.max_concurrent});

    for (const auto& [id, n] : inventory_)
        if (n.state.phase == NodePhase::JoinedBatch) batch_.add_node(n);

    for (const auto& d : scenario_.deployments) {
        deployment_cluster_[d.id] = d.cluster;
        base_replicas_[d.id] = d.replicas;
        service_.upsert_deployment(to_deployment(d, d.replicas));
    }
    observed_ = scenario_.observed_sandboxes;

    records_ = scenario_.request_trace ? load_request_trace(*scenario_.request_trace)
                                       : generate_requests(scenario_, engine_);
    for (std::size_t i = 0; i < records_.size(); ++i)
        engine_.schedule(records_[i].arrival, EventKind::RequestArrival, {records_[i].id, static_cast<std::int64_t>(i), 0});

    for (std::size_t i = 0; i < scenario_.batch_jobs.size(); ++i)
        engine_.schedule(scenario_.batch_jobs[i].submit, EventKind::JobSubmit, {"job", static_cast<std::int64_t>(i), 0});
    for (const auto& sub : scenario_.recipe_submissions)
        engine_.schedule(sub.at, EventKind::JobSubmit, {sub.recipe_id, 0, 1});
    if (scenario_.finetune_rate_per_day > 0) {
        auto stream = engine_.rng_stream("finetune");
        for (const auto& sub :
             gen_finetune_arrivals(scenario_.finetune_rate_per_day, scenario_.finetune_mix, scenario_.horizon_ms, stream))
            engine_.schedule(sub.time, EventKind::JobSubmit, {sub.recipe_id, 0, 1});
    }

    for (std::size_t w = 0; w < scenario_.maintenance.size(); ++w) {
        const auto& m = scenario_.maintenance[w];
        lifecycle_.maintenance_window(m.nodes, m.start, m.end);
        for (const auto& id : m.nodes) {
            engine_.schedule(m.start, EventKind::MaintenanceStart, {id, static_cast<std::int64_t>(w), 0});
            engine_.schedule(m.end, EventKind::MaintenanceEnd, {id, static_cast<std::int64_t>(w), 0});
        }
    }
    if (scenario_.failure_injection)
        for (std::size_t f = 0; f < scenario_.failures.size(); ++f) {
            const auto& fail = scenario_.failures[f];
            engine_.schedule(fail.at, EventKind::MaintenanceStart, {fail.node, static_cast<std::int64_t>(f), 1});
            engine_.schedule(fail.at + fail.duration_ms, EventKind::MaintenanceEnd, {fail.node, static_cast<std::int64_t>(f), 1});
        }

    engine_.schedule(0, EventKind::ReconcileTick, {"sandboxes", 0, 0});
    for (std::size_t u = 0; u < scenario_.deployment_updates.size(); ++u)
        engine_.schedule(scenario_.deployment_updates[u].at, EventKind::ReconcileTick,
                         {scenario_.deployment_updates[u].deployment_id, 1, static_cast<std::int64_t>(u)});
    if (scenario_.elastic.poll_interval_ms <= scenario_.horizon_ms)
        engine_.schedule(scenario_.elastic.poll_interval_ms, EventKind::ScalePollTick, {"poll", 0, 0});

    recompute_capacity();
}

void Simulation::run_until(SimTime t) {
    t = std::min(t, scenario_.horizon_ms);
    if (t < engine_.now()) return;
    engine_.run_until(t);
    integrate(t);
}

RunData Simulation::run() {
    run_until(scenario_.horizon_ms);
    return data();
}

RunData Simulation::data() const {
    RunData d;
    d.meta.scenario = scenario_.name;
    d.meta.seed = scenario_.seed;
    d.meta.horizon_ms = scenario_.horizon_ms;
    d.meta.units_per_gpu = units_per_gpu_;
    d.meta.unplanned_downtime = unplanned_downtime_;
    d.meta.failure_injection = scenario_.failure_injection;
    d.meta.slo_ttft_p99_ms = scenario_.slo_ttft_p99_ms;
    d.meta.retention = scenario_.retention;
    d.trace = engine_.trace();
    d.requests = records_;
    d.ledger = gateway_.ledger();
    d.transitions = lifecycle_.log();
    d.decisions = elastic_.log();
    for (const auto& [_, j] : batch_.jobs()) d.jobs.push_back(j);
    d.checkpoints = checkpoints_;
    d.reconcile = reconcile_log_;
    d.utilization = util_;
    if (integrated_to_ > window_start_) d.utilization.push_back(window_sample(integrated_to_));
    d.nodes = node_samples_;
    return d;
}

// Dispatch ---------------------------------------------------------------

void Simulation::handle(const Event& e) {
    integrate(e.time);
    const auto& p = e.payload;
    switch (e.kind) {
        case EventKind::RequestArrival: on_arrival(static_cast<std::size_t>(p.a)); break;
        case EventKind::RequestComplete: on_complete(static_cast<std::size_t>(p.a), static_cast<InstanceId>(p.b)); break;
        case EventKind::JobSubmit:
            if (p.b == 1)
                bridge_.submit_recipe(p.subject, e.time);
            else
                batch_.submit(scenario_.batch_jobs[static_cast<std::size_t>(p.a)].job, e.time);
            batch_pass();
            break;
        case EventKind::JobStart: break;
        case EventKind::JobEnd: on_job_end(p.a); break;
        case EventKind::NodeTransitionStep: on_step(p.subject); break;
        case EventKind::ScalePollTick:
            poll();
            if (e.time + scenario_.elastic.poll_interval_ms <= scenario_.horizon_ms)
                engine_.schedule(e.time + scenario_.elastic.poll_interval_ms, EventKind::ScalePollTick, p);
            break;
        case EventKind::ReconcileTick:
            if (p.a == 0) {
                reconcile_sandboxes();
                if (e.time + scenario_.reconcile_interval_ms <= scenario_.horizon_ms)
                    engine_.schedule(e.time + scenario_.reconcile_interval_ms, EventKind::ReconcileTick, p);
            } else {
                const auto& u = scenario_.deployment_updates[static_cast<std::size_t>(p.b)];
                base_replicas_[u.deployment_id] = u.replicas;
                resize_elastic_deployment();
                if (u.deployment_id != scenario_.elastic.elastic_deployment.value_or("")) {
                    Deployment d = *service_.deployment(u.deployment_id);
                    d.replicas_desired = u.replicas;
                    service_.upsert_deployment(std::move(d));
                }
            }
            place();
            break;
        case EventKind::MaintenanceStart:
            if (p.b == 1) ++unplanned_downtime_;
            start_maintenance(p.subject);
            break;
        case EventKind::MaintenanceEnd: end_maintenance(p.subject); break;
        case EventKind::ReplicaReady: {
            const auto* inst = service_.instance(static_cast<InstanceId>(p.a));
            if (inst && service_.mark_ready(inst->id, e.time) && inst->model) dispatch(*inst->model);
            break;
        }
    }
}

// Requests ---------------------------------------------------------------

void Simulation::on_arrival(std::size_t idx) {
    auto& r = records_[idx];
    if (const auto* proj = gateway_.project_for_key(r.key)) r.project = proj->id;
    InferenceRequest req{r.id, r.key, r.model, r.prompt_tokens, r.max_tokens, r.output_tokens, r.arrival};
    const Outcome o = gateway_.admit(req, engine_.now());
    if (o != Outcome::Admitted) {
        r.outcome = o;
        return;
    }
    const auto* profile = gateway_.profile(r.model);
    if (!service_.has_deployment_for(r.model) && !(profile && profile->hot)) {
        gateway_.release(r.id);
        r.outcome = Outcome::RejectedUnavailable;
        return;
    }
    queues_[r.model].push_back(idx);
    dispatch(r.model);
}

void Simulation::dispatch(const std::string& model) {
    auto q = queues_.find(model);
    if (q == queues_.end() || q->second.empty()) return;
    const auto* profile = gateway_.profile(model);
    while (!q->second.empty()) {
        const auto ready = service_.routable(model);
        std::vector<ReplicaLoad> loads;
        loads.reserve(ready.size());
        for (const auto* inst : ready) loads.push_back({inst->replica_id, inst->id, inst->in_flight, inst->max_concurrent});
        const auto pick = route(loads);
        if (!pick) return;

        const std::size_t idx = q->second.front();
        q->second.pop_front();
        auto& r = records_[idx];
        const Instance& inst = *ready[*pick];
        service_.begin_request(inst.id);
        if (in_elastic_cluster(inst.id)) busy_ += busy_units(inst);

        const SimTime now = engine_.now();
        const SimTime wait = now - r.arrival;
        const auto lat = compute_latency(*profile, r.prompt_tokens, r.output_tokens, wait,
                                         effective_itl(*profile, inst.in_flight, scenario_.itl_alpha_permille));
        r.dispatched = now;
        r.queue_wait_ms = wait;
        r.ttft_ms = lat.ttft_ms;
        r.itl_ms = lat.itl_ms;
        r.e2el_ms = lat.e2el_ms;
        r.replica = inst.replica_id;
        window_wait_sum_ += wait;
        ++window_dispatched_;
        engine_.schedule(r.arrival + lat.e2el_ms, EventKind::RequestComplete,
                         {r.id, static_cast<std::int64_t>(idx), static_cast<std::int64_t>(inst.id)});
    }
}

void Simulation::on_complete(std::size_t idx, InstanceId inst_id) {
    auto& r = records_[idx];
    gateway_.settle(r.id, r.output_tokens, engine_.now());
    r.outcome = Outcome::Completed;
    r.completed = engine_.now();

    const Instance* inst = service_.instance(inst_id);
    std::string node;
    if (inst) {
        node = inst->node_id;
        if (in_elastic_cluster(inst_id)) busy_ -= busy_units(*inst);
    }
    if (service_.end_request(inst_id) && !service_.busy_retiring(node)) resume_drain(node);
    dispatch(r.model);
}

// Node transitions ------------------------------------------------------

void Simulation::on_enter(const std::string& id) {
    recompute_capacity();
    const Node& n = inventory_.at(id);
    switch (n.state.phase) {
        case NodePhase::Draining:
            if (batch_.has_node(id)) {
                batch_.drain_node(id, engine_.now());
                if (batch_.running_on(id)) {
                    drain_wait_.insert(id);
                    return;
                }
            } else if (n.state.from.kind == Target::Kind::Service) {
                service_.node_lost(id);
                place();
                if (service_.busy_retiring(id)) {
                    drain_wait_.insert(id);
                    return;
                }
            }
            schedule_step(id);
            return;
        case NodePhase::Rebooting:
        case NodePhase::Provisioning: schedule_step(id); return;
        case NodePhase::JoinedBatch:
            batch_.add_node(n);
            batch_pass();
            break;
        case NodePhase::JoinedService: on_service_join(id); break;
        case NodePhase::Maintenance:
            if (lifecycle_.exit_pending(id)) {
                if (!lifecycle_.end_maintenance(id, engine_.now()).empty()) on_enter(id);
                return;
            }
            break;
        case NodePhase::Detached: break;
    }
    if (maintenance_deferred_.erase(id) > 0) start_maintenance(id);
}

void Simulation::schedule_step(const std::string& id) {
    if (!lifecycle_.in_transition(id)) return;
    step_seq_[id] = engine_.schedule(engine_.now() + lifecycle_.current_step_duration(id), EventKind::NodeTransitionStep,
                                     {id, static_cast<std::int64_t>(lifecycle_.remaining_steps(id)), 0});
}

void Simulation::on_step(const std::string& id) {
    step_seq_.erase(id);
    if (inventory_.at(id).state.phase == NodePhase::Draining && batch_.has_node(id)) batch_.remove_node(id);
    lifecycle_.advance(id, engine_.now());
    on_enter(id);
}

void Simulation::resume_drain(const std::string& id) {
    if (drain_wait_.erase(id) > 0) schedule_step(id);
}

void Simulation::start_maintenance(const std::string& id) {
    const Node& n = inventory_.at(id);
    // A drain in progress finishes first; the window starts on arrival.
    if (n.state.phase == NodePhase::Draining) {
        maintenance_deferred_.insert(id);
        return;
    }
    if (auto it = step_seq_.find(id); it != step_seq_.end()) {
        engine_.cancel(it->second);
        step_seq_.erase(it);
    }
    lifecycle_.begin_maintenance(id, engine_.now());
    on_enter(id);
}

void Simulation::end_maintenance(const std::string& id) {
    if (maintenance_deferred_.erase(id) > 0) return;
    if (!lifecycle_.end_maintenance(id, engine_.now()).empty()) on_enter(id);
}

void Simulation::on_service_join(const std::string& id) {
    const auto& cfg = scenario_.elastic;
    const Node& n = inventory_.at(id);
    const auto& held = elastic_.acquired();
    if (cfg.elastic_deployment && n.state.cluster == cfg.cluster && !elastic_extra_.contains(id) &&
        std::find(held.begin(), held.end(), id) != held.end()) {
        const auto* d = service_.deployment(*cfg.elastic_deployment);
        const auto* m = d && d->model ? service_.profile(*d->model) : nullptr;
        elastic_extra_[id] = m ? n.gpus / m->gpus_required : 0;
        resize_elastic_deployment();
    }
    place();
}

void Simulation::resize_elastic_deployment() {
    const auto& dep = scenario_.elastic.elastic_deployment;
    if (!dep) return;
    int want = base_replicas_[*dep];
    for (const auto& [_, extra] : elastic_extra_) want += extra;
    Deployment d = *service_.deployment(*dep);
    if (d.replicas_desired == want) return;
    d.replicas_desired = want;
    service_.upsert_deployment(std::move(d));
}

// Batch ------------------------------------------------------------------

void Simulation::batch_pass() {
    for (const auto& p : batch_.schedule_pass(engine_.now())) {
        const auto subject = "job-" + std::to_string(p.job_id);
        engine_.schedule(engine_.now(), EventKind::JobStart, {subject, p.job_id, static_cast<std::int64_t>(p.path)});
        job_end_seq_[p.job_id] = engine_.schedule(p.end, EventKind::JobEnd, {subject, p.job_id, 0});
    }
}

void Simulation::on_job_end(JobId id) {
    job_end_seq_.erase(id);
    if (batch_.job(id).state != JobState::Running) return;
    for (const auto& node : batch_.complete(id, engine_.now())) resume_drain(node);
    if (const auto* recipe = bridge_.recipe_for_job(id)) {
        auto cps = register_checkpoints(batch_.job(id), *recipe, scenario_.models, scenario_.checkpoint_sizing);
        for (auto& c : cps) {
            for (const auto& r : scenario_.recipes)
                if (r.parent_checkpoint == c.id) c.referenced = true;
            checkpoints_.push_back(std::move(c));
        }
    }
    batch_pass();
}

// Service ----------------------------------------------------------------

void Simulation::place() {
    for (const auto& p : service_.place_replicas(engine_.now()))
        engine_.schedule(engine_.now() + p.warmup_ms, EventKind::ReplicaReady,
                         {p.deployment_id + "/" + std::to_string(p.slot), static_cast<std::int64_t>(p.instance), 0});
}

void Simulation::reconcile_sandboxes() {
    std::vector<SandboxRecord> desired;
    for (const auto& p : scenario_.projects) desired.push_back(desired_sandbox(p.id, p.members));
    auto actions = reconcile(desired, observed_, scenario_.prune_sandboxes);
    if (actions.empty()) return;
    observed_ = apply_actions(actions, std::move(observed_));
    reconcile_log_.push_back({engine_.now(), std::move(actions)});
}

// Elasticity -------------------------------------------------------------

void Simulation::poll() {
    const SimTime now = engine_.now();
    const auto& cfg = scenario_.elastic;

    const UtilSample sample = window_sample(now);
    util_.push_back(sample);
    window_start_ = now;
    busy_mark_ = busy_int_;
    capacity_mark_ = capacity_int_;

    WindowStats stats;
    std::int64_t waits = window_wait_sum_, count = window_dispatched_;
    for (const auto& [_, q] : queues_)
        for (auto idx : q) {
            waits += now - records_[idx].arrival;
            ++count;
        }
    stats.mean_queue_wait_ms = count > 0 ? static_cast<double>(waits) / static_cast<double>(count) : 0.0;
    stats.utilization = sample.capacity > 0 ? static_cast<double>(sample.busy) / static_cast<double>(sample.capacity) : 0.0;
    for (const auto& [dep, cluster] : deployment_cluster_)
        if (cluster == cfg.cluster) stats.pending_replicas += service_.pending_replicas(dep);
    window_wait_sum_ = 0;
    window_dispatched_ = 0;

    const Decision d = elastic_.poll(stats, now);
    if (d.kind == ActionKind::Acquire) {
        std::vector<AcquireCandidate> candidates;
        const Target to = Target::service(cfg.cluster);
        for (const auto& [id, n] : inventory_) {
            if (n.state.phase != NodePhase::JoinedBatch || lifecycle_.in_transition(id)) continue;
            if (!lifecycle_.authorized(n, to) || batch_.draining(id)) continue;
            const auto job = batch_.running_on(id);
            candidates.push_back({id, !job, job ? batch_.job(*job).end_time : 0});
        }
        if (auto pick = choose_acquire(candidates)) {
            lifecycle_.request_transition(*pick, to, now);
            elastic_.note_acquired(*pick, now);
            on_enter(*pick);
        } else {
            elastic_.note_unapplied("no eligible batch node", now);
        }
    } else if (d.kind == ActionKind::Release) {
        const auto cand = elastic_.release_candidate();
        if (!cand || lifecycle_.in_transition(*cand) || inventory_.at(*cand).state.phase != NodePhase::JoinedService) {
            elastic_.note_unapplied("release candidate not joined", now);
        } else {
            service_.node_lost(*cand);
            if (auto it = elastic_extra_.find(*cand); it != elastic_extra_.end()) {
                if (cfg.elastic_deployment) service_.shrink_pending(*cfg.elastic_deployment, it->second);
                elastic_extra_.erase(it);
            }
            place();
            lifecycle_.request_transition(*cand, Target::batch(), now);
            elastic_.note_released(*cand, now);
            on_enter(*cand);
        }
    }

    NodeSample ns;
    ns.time = now;
    for (const auto& [_, n] : inventory_) ++ns.counts[static_cast<std::size_t>(classify(n.state))];
    ns.elastic_nodes = elastic_.state().current_nodes;
    node_samples_.push_back(ns);
}

// Utilization ------------------------------------------------------------

void Simulation::integrate(SimTime t) {
    if (t <= integrated_to_) return;
    busy_int_ += busy_ * (t - integrated_to_);
    capacity_int_ += capacity_ * (t - integrated_to_);
    integrated_to_ = t;
}

UtilSample Simulation::window_sample(SimTime t) const {
    return {t, busy_int_ - busy_mark_, capacity_int_ - capacity_mark_};
}

void Simulation::recompute_capacity() {
    const auto& cluster = scenario_.elastic.cluster;
    auto is_cluster = [&](const Target& t) { return t.kind == Target::Kind::Service && t.cluster == cluster; };
    std::int64_t gpus = 0;
    for (const auto& [_, n] : inventory_) {
        const auto& s = n.state;
        bool counts = false;
        switch (s.phase) {
            case NodePhase::JoinedService: counts = s.cluster == cluster; break;
            case NodePhase::Draining: counts = is_cluster(s.from); break;
            case NodePhase::Rebooting:
            case NodePhase::Provisioning: counts = is_cluster(s.to); break;
            default: break;
        }
        if (counts) gpus += n.gpus;
    }
    capacity_ = gpus * units_per_gpu_;
}

bool Simulation::in_elastic_cluster(InstanceId id) const {
    const auto* inst = service_.instance(id);
    if (!inst) return false;
    auto it = deployment_cluster_.find(inst->deployment_id);
    return it != deployment_cluster_.end() && it->second == scenario_.elastic.cluster;
}

std::int64_t Simulation::busy_units(const Instance& inst) const {
    return inst.gpus * (units_per_gpu_ / inst.max_concurrent);
}

}  // namespace hybridsim
