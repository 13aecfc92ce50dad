#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "hybridsim/error.hpp"
#include "hybridsim/lifecycle.hpp"

using namespace hybridsim;

namespace {

Node hpc(const std::string& id, NodeState s) {
    Node n;
    n.id = id;
    n.flavour = NodeFlavour::HpcDiskless;
    n.gpus = 4;
    n.gpu_mem_gb = 96;
    n.state = std::move(s);
    return n;
}

std::vector<NodePhase> phases(const std::vector<TransitionStep>& steps) {
    std::vector<NodePhase> out;
    for (const auto& s : steps) out.push_back(s.state.phase);
    return out;
}

SimTime total(const std::vector<TransitionStep>& steps) {
    SimTime t = 0;
    for (const auto& s : steps) t += s.duration_ms;
    return t;
}

// Drives every step of an in-flight transition and returns the finish time.
SimTime drive(NodeLifecycle& lc, const std::string& id, SimTime now) {
    while (lc.in_transition(id)) {
        now += lc.current_step_duration(id);
        lc.advance(id, now);
    }
    return now;
}

}  // namespace

TEST_CASE("batch to service goes through a reboot") {
    Inventory inv{{"n1", hpc("n1", NodeState::batch())}};
    NodeLifecycle lc(inv);
    auto steps = lc.request_transition("n1", Target::service("c1"), 0);
    CHECK(phases(steps) == std::vector{NodePhase::Draining, NodePhase::Rebooting, NodePhase::Provisioning,
                                       NodePhase::JoinedService});
    CHECK(steps.back().state.cluster == "c1");
    CHECK(steps.back().duration_ms == 0);
}

TEST_CASE("service to service skips the reboot and keeps the cache") {
    Node n = hpc("n1", NodeState::service("c1"));
    n.cached_models["llama-70b"] = 140;
    Inventory inv{{"n1", n}};
    NodeLifecycle lc(inv);
    auto steps = lc.request_transition("n1", Target::service("c2"), 0);
    CHECK(phases(steps) == std::vector{NodePhase::Draining, NodePhase::Provisioning, NodePhase::JoinedService});
    drive(lc, "n1", 0);
    CHECK(inv.at("n1").state == NodeState::service("c2"));
    CHECK(inv.at("n1").local_cache_gb() == doctest::Approx(140));
}

TEST_CASE("transition to the current state is a no-op") {
    Inventory inv{{"n1", hpc("n1", NodeState::service("c1"))}};
    NodeLifecycle lc(inv);
    CHECK(lc.request_transition("n1", Target::service("c1"), 0).empty());
    CHECK_FALSE(lc.in_transition("n1"));
    CHECK(lc.log().empty());
}

TEST_CASE("on_reboot clears ephemeral state and keeps identity") {
    Node n = hpc("n1", NodeState{NodePhase::Rebooting, {}, {}, Target::batch()});
    n.cached_models["m"] = 140;
    n.transient_labels.insert("warm=yes");
    n.labels.insert("hpc=true");
    Node after = on_reboot(n);
    CHECK(after.local_cache_gb() == 0);
    CHECK(after.transient_labels.empty());
    CHECK(after.gpus == 4);
    CHECK(after.id == "n1");
    CHECK(after.labels == n.labels);

    Node empty = hpc("n2", NodeState{NodePhase::Rebooting, {}, {}, Target::batch()});
    CHECK(on_reboot(empty).local_cache_gb() == 0);

    CHECK_THROWS_AS(on_reboot(hpc("n3", NodeState::batch())), std::invalid_argument);
}

TEST_CASE("default durations sum to drain + reboot + join") {
    Inventory inv{{"n1", hpc("n1", NodeState::batch())}};
    NodeLifecycle lc(inv);
    auto steps = lc.request_transition("n1", Target::service("c1"), 1000);
    CHECK(total(steps) == 600'000 + 120'000);
    CHECK(drive(lc, "n1", 1000) == 1000 + 720'000);
}

TEST_CASE("conflicting and unauthorized requests") {
    Inventory inv{{"n1", hpc("n1", NodeState::batch())}, {"v1", hpc("v1", NodeState::detached())}};
    inv.at("v1").flavour = NodeFlavour::VmCommodity;
    NodeLifecycle lc(inv);
    lc.request_transition("n1", Target::service("c1"), 0);
    CHECK_THROWS_AS(lc.request_transition("n1", Target::service("c1"), 0), TransitionConflict);
    CHECK_THROWS_AS(lc.request_transition("n1", Target::batch(), 0), TransitionConflict);
    CHECK_THROWS_AS(lc.request_transition("v1", Target::batch(), 0), Unauthorized);

    lc.set_service_allowlist({{"v1", "c1"}});
    CHECK_THROWS_AS(lc.request_transition("v1", Target::service("c2"), 0), Unauthorized);
    CHECK_NOTHROW(lc.request_transition("v1", Target::service("c1"), 0));
}

TEST_CASE("transition log records each entered state") {
    Inventory inv{{"n1", hpc("n1", NodeState::batch())}};
    NodeLifecycle lc(inv);
    lc.request_transition("n1", Target::service("c1"), 0);
    drive(lc, "n1", 0);
    REQUIRE(lc.log().size() == 4);
    CHECK(lc.log()[0].from == "JoinedBatch");
    CHECK(lc.log()[3].to == "JoinedService(c1)");
    for (int i = 0; i < 4; ++i) CHECK(lc.log()[i].step == i);
}

TEST_CASE("maintenance windows") {
    Inventory inv{{"n1", hpc("n1", NodeState::service("c1"))}, {"n2", hpc("n2", NodeState::batch())}};
    inv.at("n1").cached_models["m"] = 16;
    NodeLifecycle lc(inv);

    CHECK_THROWS_AS(lc.maintenance_window({"n1"}, 10, 10), std::invalid_argument);
    lc.maintenance_window({"n1", "n2"}, 100, 200);
    CHECK_THROWS_AS(lc.maintenance_window({"n2"}, 150, 300), OverlappingMaintenance);
    CHECK_NOTHROW(lc.maintenance_window({"n2"}, 200, 300));
    CHECK_NOTHROW(lc.maintenance_window({}, 0, 1));

    lc.begin_maintenance("n1", 100);
    drive(lc, "n1", 100);
    CHECK(inv.at("n1").state.phase == NodePhase::Maintenance);
    CHECK(inv.at("n1").local_cache_gb() == 0);
    CHECK_THROWS_AS(lc.request_transition("n1", Target::batch(), 150), TransitionConflict);

    auto back = lc.end_maintenance("n1", 200);
    CHECK(phases(back) == std::vector{NodePhase::Provisioning, NodePhase::JoinedService});
    CHECK(drive(lc, "n1", 200) == 200 + 120'000);
    CHECK(inv.at("n1").state == NodeState::service("c1"));
}

TEST_CASE("maintenance exit is deferred while still draining") {
    Inventory inv{{"n1", hpc("n1", NodeState::batch())}};
    NodeLifecycle lc(inv);
    lc.set_spec(NodeFlavour::HpcDiskless, TransitionSpec{50, 600'000, 120'000, 60'000});
    lc.begin_maintenance("n1", 0);
    CHECK(lc.end_maintenance("n1", 10).empty());
    CHECK(lc.exit_pending("n1"));
    drive(lc, "n1", 0);
    auto back = lc.end_maintenance("n1", 50);
    CHECK(phases(back) == std::vector{NodePhase::Provisioning, NodePhase::JoinedBatch});
}

TEST_CASE("every transition finishes in exactly the sum of its step durations") {
    const std::vector<Target> targets{Target::batch(), Target::service("a"), Target::service("b"),
                                      Target::detached()};
    TransitionSpec spec{7, 600'000, 120'000, 60'000};
    for (const auto& start : {NodeState::batch(), NodeState::service("a"), NodeState::detached()}) {
        for (const auto& t : targets) {
            Inventory inv{{"n", hpc("n", start)}};
            NodeLifecycle lc(inv, spec);
            auto steps = lc.request_transition("n", t, 0);
            CHECK(drive(lc, "n", 0) == total(steps));
            if (!steps.empty()) CHECK(resting_target(inv.at("n").state) == t);
        }
    }
}

TEST_CASE("randomized requests never reach an undefined state") {
    std::mt19937_64 rng(2024);
    const std::vector<Target> targets{Target::batch(), Target::service("a"), Target::service("b"),
                                      Target::detached()};
    Inventory inv;
    for (int i = 0; i < 4; ++i) inv.emplace("n" + std::to_string(i), hpc("n" + std::to_string(i), NodeState::batch()));
    inv.at("n3").flavour = NodeFlavour::VmEnterprise;
    inv.at("n3").state = NodeState::service("a");
    NodeLifecycle lc(inv);

    SimTime now = 0;
    int reboots_checked = 0;
    for (int step = 0; step < 20'000; ++step) {
        const std::string id = "n" + std::to_string(rng() % 4);
        now += static_cast<SimTime>(rng() % 1000);
        switch (rng() % 4) {
            case 0:
            case 1:
                try {
                    lc.request_transition(id, targets[rng() % targets.size()], now);
                } catch (const TransitionConflict&) {
                    CHECK(lc.in_transition(id));
                } catch (const Unauthorized&) {
                    CHECK(inv.at(id).flavour == NodeFlavour::VmEnterprise);
                }
                break;
            case 2:
                if (lc.in_transition(id)) {
                    const bool rebooting = inv.at(id).state.phase == NodePhase::Rebooting;
                    if (rebooting) inv.at(id).cached_models["m"] = 10;
                    lc.advance(id, now);
                    if (rebooting && inv.at(id).flavour == NodeFlavour::HpcDiskless) {
                        CHECK(inv.at(id).local_cache_gb() == 0);
                        ++reboots_checked;
                    }
                }
                break;
            default:
                if (inv.at(id).state.phase == NodePhase::JoinedService) inv.at(id).cached_models["m"] = 10;
        }
        for (const auto& [nid, n] : inv) {
            const auto cls = classify(n.state);
            if (lc.in_transition(nid)) CHECK(cls == PlaneClass::InTransition);
            else CHECK(cls != PlaneClass::InTransition);
        }
    }
    CHECK(reboots_checked > 100);
}
