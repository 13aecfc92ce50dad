#pragma once

// Scenario runner: builds every plane from a Scenario and drives them through
// the event kernel. All state changes happen inside event dispatch.

#include <deque>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "hybridsim/batch.hpp"
#include "hybridsim/bridge.hpp"
#include "hybridsim/elastic.hpp"
#include "hybridsim/engine.hpp"
#include "hybridsim/gateway.hpp"
#include "hybridsim/lifecycle.hpp"
#include "hybridsim/metrics.hpp"
#include "hybridsim/scenario.hpp"
#include "hybridsim/service.hpp"

namespace hybridsim {

class Simulation {
public:
    explicit Simulation(Scenario scenario);
    Simulation(const Simulation&) = delete;
    Simulation& operator=(const Simulation&) = delete;

    /// Dispatches every event up to and including `t` (capped at the horizon).
    void run_until(SimTime t);
    /// Runs to the horizon and returns the records.
    RunData run();
    /// Snapshot of the records so far.
    RunData data() const;

    SimTime now() const { return engine_.now(); }
    const Scenario& scenario() const { return scenario_; }
    const Engine& engine() const { return engine_; }
    const Inventory& nodes() const { return inventory_; }
    const NodeLifecycle& lifecycle() const { return lifecycle_; }
    const BatchPlane& batch() const { return batch_; }
    const ServicePlane& service() const { return service_; }
    const Gateway& gateway() const { return gateway_; }
    const ElasticManager& elastic() const { return elastic_; }
    const std::vector<RequestRecord>& requests() const { return records_; }
    const std::vector<Checkpoint>& checkpoints() const { return checkpoints_; }
    int unplanned_downtime() const { return unplanned_downtime_; }

private:
    void handle(const Event& e);

    void on_arrival(std::size_t idx);
    void on_complete(std::size_t idx, InstanceId inst);
    void dispatch(const std::string& model);

    void on_enter(const std::string& node_id);
    void schedule_step(const std::string& node_id);
    void on_step(const std::string& node_id);
    void resume_drain(const std::string& node_id);
    void start_maintenance(const std::string& node_id);
    void end_maintenance(const std::string& node_id);
    void on_service_join(const std::string& node_id);

    void batch_pass();
    void on_job_end(JobId id);
    void place();
    void resize_elastic_deployment();
    void reconcile_sandboxes();
    void poll();

    void integrate(SimTime t);
    void recompute_capacity();
    bool in_elastic_cluster(InstanceId inst) const;
    std::int64_t busy_units(const Instance& inst) const;
    UtilSample window_sample(SimTime t) const;

    Scenario scenario_;
    Inventory inventory_;
    Engine engine_;
    NodeLifecycle lifecycle_;
    BatchPlane batch_;
    ServicePlane service_;
    Gateway gateway_;
    ElasticManager elastic_;
    Bridge bridge_;

    std::vector<RequestRecord> records_;
    std::map<std::string, std::deque<std::size_t>> queues_;
    std::map<std::string, std::string> deployment_cluster_;
    std::map<std::string, int> base_replicas_;
    std::map<std::string, int> elastic_extra_;  // node -> replicas added for it

    std::map<std::string, std::uint64_t> step_seq_;
    std::set<std::string> drain_wait_;
    std::set<std::string> maintenance_deferred_;
    std::map<JobId, std::uint64_t> job_end_seq_;

    std::vector<Checkpoint> checkpoints_;
    std::vector<ReconcileRecord> reconcile_log_;
    std::vector<SandboxRecord> observed_;
    std::vector<UtilSample> util_;
    std::vector<NodeSample> node_samples_;
    int unplanned_downtime_ = 0;

    std::int64_t units_per_gpu_ = 1;
    std::int64_t busy_ = 0;
    std::int64_t capacity_ = 0;
    std::int64_t busy_int_ = 0;
    std::int64_t capacity_int_ = 0;
    std::int64_t busy_mark_ = 0;
    std::int64_t capacity_mark_ = 0;
    SimTime integrated_to_ = 0;
    SimTime window_start_ = 0;
    std::int64_t window_wait_sum_ = 0;
    std::int64_t window_dispatched_ = 0;
};

}  // namespace hybridsim
